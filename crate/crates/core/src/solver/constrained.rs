//! Capped investment `a in [0, A]`: the operator `T`.

use crate::claims::ClaimDistribution;
use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::numerics::{Grid, TailKernel};
use crate::strategy::{Extrapolation, StrategyCurve};

use super::{assemble, picard_march, PointOperator, SolveControls, SolveMode, ValueGrid};

/// `T_w(a, x) = 2 {M(W)(x) - [c + r x + (mu - r) a] w(x)} / Q(a)`.
pub fn t_integrand(params: &ModelParams, a: f64, x: f64, w: f64, mw: f64) -> f64 {
    let p = params.c + params.r * x + params.excess() * a;
    2.0 * (mw - p * w) / params.diffusion(a)
}

/// Infimum of [`t_integrand`] over `a in [0, cap]` and the smallest minimiser.
pub fn t_inf(params: &ModelParams, cap: f64, x: f64, w: f64, mw: f64) -> (f64, f64) {
    t_point(params, cap, x, w, mw)
}

pub(crate) fn t_point(p: &ModelParams, cap: f64, x: f64, w: f64, mw: f64) -> (f64, f64) {
    let (s, s1) = (p.sigma, p.sigma1);
    let dw = p.excess() * w;
    let k = mw - (p.c + p.r * x) * w;
    // stationarity: dw s^2 a^2 - 2 k s^2 a - (dw s1^2 + 2 k rho s s1) = 0
    let qa = dw * s * s;
    let qb = -2.0 * k * s * s;
    let qc = -(dw * s1 * s1 + 2.0 * k * p.rho * s * s1);
    let mut candidates = [0.0, cap, f64::NAN, f64::NAN];
    let roots = quadratic_roots(qa, qb, qc);
    for (slot, root) in candidates[2..].iter_mut().zip(roots) {
        if let Some(a) = root {
            if a > 0.0 && a < cap {
                *slot = a;
            }
        }
    }
    let mut ordered: Vec<f64> = candidates.iter().copied().filter(|a| a.is_finite()).collect();
    ordered.sort_by(|a, b| a.total_cmp(b));
    let mut best = (t_integrand(p, 0.0, x, w, mw), 0.0);
    for a in ordered.into_iter().skip(1) {
        let val = t_integrand(p, a, x, w, mw);
        if val < best.0 - 1e-14 * best.0.abs() {
            best = (val, a);
        }
    }
    best
}

/// Real roots of `a x^2 + b x + c`, computed without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> [Option<f64>; 2] {
    if a == 0.0 {
        return if b == 0.0 { [None, None] } else { [Some(-c / b), None] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return [None, None];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return [Some(0.0), None];
    }
    [Some(q / a), Some(c / q)]
}

struct TOperator {
    params: ModelParams,
    cap: f64,
    q_min: f64,
}

impl PointOperator for TOperator {
    fn eval(&self, x: f64, w: f64, conv: f64) -> (f64, f64) {
        t_point(&self.params, self.cap, x, w, self.params.lambda * conv)
    }

    fn lipschitz(&self, k: f64) -> f64 {
        let p = &self.params;
        2.0 * (2.0 * p.lambda * k + p.c + p.r * k + p.excess().abs() * self.cap) / self.q_min
    }
}

fn cap_of(params: &ModelParams) -> Result<f64> {
    params
        .cap
        .ok_or_else(|| Error::Unsupported("the capped solver needs a cap A".into()))
}

/// Largest step for which one-step Picard windows contract with factor
/// `safety` up to `x_max`. The local rate of `T` in `w` is
/// `2 (c + r x + |mu - r| A) / min Q`.
pub fn stable_step(params: &ModelParams, x_max: f64, safety: f64) -> Result<f64> {
    let cap = cap_of(params)?;
    let q_min = params.min_diffusion(0.0, cap);
    let rate = 2.0 * (params.c + params.r * x_max + params.excess().abs() * cap) / q_min;
    Ok(2.0 * safety / rate)
}

/// Solves `v' = Tv`, `v(0) = 1` on `grid`. If the requested step exceeds
/// [`stable_step`] the march runs on a grid refined by an integer factor,
/// reported in `ValueGrid::substeps`.
pub fn solve_v_constrained(
    params: &ModelParams,
    dist: &ClaimDistribution,
    grid: Grid,
    controls: &SolveControls,
) -> Result<ValueGrid> {
    params.validate()?;
    controls.validate()?;
    let cap = cap_of(params)?;
    let h_max = stable_step(params, grid.x_max(), controls.window_safety)?;
    let substeps = (grid.h / h_max).ceil().max(1.0) as usize;
    let fine = Grid::new(grid.h / substeps as f64, (grid.n - 1) * substeps + 1)?;
    let op = TOperator {
        params: *params,
        cap,
        q_min: params.min_diffusion(0.0, cap),
    };
    let kernel = TailKernel::new(dist, &fine);
    let march = picard_march(&op, &kernel, fine, controls)?;
    Ok(assemble(SolveMode::Constrained { cap }, params, dist, fine, march, substeps))
}

/// Strategy read from the minimiser inside `T`.
pub fn extract_strategy_constrained(vg: &ValueGrid) -> Result<StrategyCurve> {
    let cap = match vg.mode {
        SolveMode::Constrained { cap } => cap,
        SolveMode::Unconstrained => return Err(invalid("mode", "expected a capped solution")),
    };
    let values = vg.argmin.iter().map(|a| a.clamp(0.0, cap)).collect();
    StrategyCurve::new(vg.grid, values, Some((0.0, cap)), Extrapolation::HoldLast)
}

/// Residual of the HJB equation along the capped solution, with `V''` from
/// centred differences of `v`. Returns the sup over interior nodes and its
/// location.
pub fn hjb_residual_constrained(vg: &ValueGrid, strategy: &StrategyCurve) -> (f64, f64) {
    let r = hjb_residual_profile_constrained(vg, strategy);
    let mut worst = (0.0, 0.0);
    for j in 1..r.len().saturating_sub(1) {
        if r[j].abs() > worst.0 {
            worst = (r[j].abs(), vg.grid.x(j));
        }
    }
    worst
}

/// Signed residual at every node; the two end nodes use one-sided
/// second-order differences.
pub fn hjb_residual_profile_constrained(vg: &ValueGrid, strategy: &StrategyCurve) -> Vec<f64> {
    let p = &vg.params;
    let h = vg.grid.h;
    let n = vg.grid.n;
    let v = &vg.v;
    (0..n)
        .map(|j| {
            let x = vg.grid.x(j);
            let a = strategy.eval(x);
            let vpp = if n < 3 {
                (v[n - 1] - v[0]) / (h * (n - 1).max(1) as f64)
            } else if j == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if j == n - 1 {
                (3.0 * v[j] - 4.0 * v[j - 1] + v[j - 2]) / (2.0 * h)
            } else {
                (v[j + 1] - v[j - 1]) / (2.0 * h)
            };
            0.5 * p.diffusion(a) * vpp + (p.c + p.excess() * a + p.r * x) * v[j] - p.lambda * vg.conv[j]
        })
        .collect()
}

/// Largest gap between the stored minimiser and the maximiser
/// `-(mu - r) v / (sigma^2 v') - rho sigma1 / sigma`, over nodes where the
/// minimiser is interior and `|v'| > min_slope`.
pub fn aw_cross_check(vg: &ValueGrid, min_slope: f64) -> Option<f64> {
    let cap = match vg.mode {
        SolveMode::Constrained { cap } => cap,
        SolveMode::Unconstrained => return None,
    };
    let p = &vg.params;
    let tol = 1e-9 * cap;
    (0..vg.grid.n)
        .filter(|&j| vg.argmin[j] > tol && vg.argmin[j] < cap - tol && vg.vprime[j].abs() > min_slope)
        .map(|j| {
            let aw = -p.excess() * vg.v[j] / (p.sigma * p.sigma * vg.vprime[j]) - p.hedge();
            (aw - vg.argmin[j]).abs()
        })
        .reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{classify_zero_regime, derive_constants, Investment};

    const B_EX1: f64 = 22.016_175_755_895_879;

    fn ex1(cap: f64) -> ModelParams {
        ModelParams::example1().with_cap(cap)
    }

    #[test]
    fn integrand_at_zero_amount() {
        let p = ex1(1.0);
        let (x, w, mw) = (0.7, 0.4, 0.05);
        let expect = 2.0 * (mw - (p.c + p.r * x) * w) / (p.sigma1 * p.sigma1);
        assert!((t_integrand(&p, 0.0, x, w, mw) - expect).abs() < 1e-15);
    }

    #[test]
    fn infimum_at_origin_matches_grid_search() {
        let p = ex1(1.0);
        let (val, arg) = t_inf(&p, 1.0, 0.0, 1.0, 0.0);
        let mut brute = (f64::INFINITY, 0.0);
        for i in 0..=100_000 {
            let a = i as f64 * 1e-5;
            let t = t_integrand(&p, a, 0.0, 1.0, 0.0);
            if t < brute.0 {
                brute = (t, a);
            }
        }
        assert!((val - brute.0).abs() < 1e-8);
        assert!((arg - brute.1).abs() < 1e-4);
        assert!((val + B_EX1).abs() < 1e-12);
        assert!((arg - 0.8542115).abs() < 1e-7);
    }

    #[test]
    fn regime_end_points() {
        let p = ex1(1.0).with_rho(-0.5);
        let (val, arg) = t_inf(&p, 1.0, 0.0, 1.0, 0.0);
        assert_eq!(arg, 1.0);
        assert!((val + 2.0 * (p.c + p.excess()) / p.diffusion(1.0)).abs() < 1e-12);
        let p = ex1(1.0).with_rho(0.5);
        let (val, arg) = t_inf(&p, 1.0, 0.0, 1.0, 0.0);
        assert_eq!(arg, 0.0);
        assert!((val + 2.0 * p.c / (p.sigma1 * p.sigma1)).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_smaller_amount() {
        // with w = 0 and M(W) = 0 the integrand vanishes for every a
        let p = ex1(2.0);
        assert_eq!(t_inf(&p, 2.0, 1.0, 0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn stable_step_value() {
        let h = stable_step(&ex1(1.0), 40.0, 0.4).unwrap();
        let q_min = ex1(1.0).min_diffusion(0.0, 1.0);
        let expect = 0.8 / (2.0 * (0.36 + 0.32 * 40.0 + 0.1) / q_min);
        assert!((h - expect).abs() < 1e-15);
        assert!(stable_step(&ModelParams::example1(), 40.0, 0.4).is_err());
    }

    fn solve(cap: f64, rho: f64, x_max: f64) -> ValueGrid {
        let p = ex1(cap).with_rho(rho);
        let d = ClaimDistribution::exponential(1.0).unwrap();
        let g = Grid::covering(5e-3, x_max).unwrap();
        solve_v_constrained(&p, &d, g, &SolveControls::default()).unwrap()
    }

    #[test]
    fn short_solve_properties() {
        let vg = solve(1.0, -0.2, 4.0);
        assert_eq!(vg.v[0], 1.0);
        assert!((vg.vprime[0] + B_EX1).abs() < 1e-9);
        assert!(vg.v.iter().all(|&x| x > 0.0));
        assert!(vg.big_v.windows(2).all(|w| w[1] >= w[0]));
        assert!(vg.fixed_point_residual() <= 1e-8);
        assert!(vg.concavity_extent() > 0.0);
        assert!(vg.max_contraction_ratio().unwrap() <= 0.5);
        let s = extract_strategy_constrained(&vg).unwrap();
        assert!(s.values.iter().all(|&a| (0.0..=1.0).contains(&a)));
        assert!((s.values[0] - 0.8542115).abs() < 1e-4);
        let (res, _) = hjb_residual_constrained(&vg, &s);
        assert!(res <= 5e-3 * vg.params.lambda, "residual {res}");
        assert!(aw_cross_check(&vg, 1e-3).unwrap() < 1e-8);
    }

    #[test]
    fn regime_sweep_matches_classification() {
        for cap in [0.5, 1.0, 3.0] {
            for rho in [-0.5, -0.2, 0.5] {
                let vg = solve(cap, rho, 0.5);
                let p = vg.params;
                let k = derive_constants(&p, None).unwrap();
                let want = classify_zero_regime(&k, &p).unwrap().investment().unwrap();
                let eps = 0.05;
                for j in 0..=(eps / vg.grid.h).ceil() as usize {
                    let a = vg.argmin[j];
                    let ok = match want {
                        Investment::FullCap => a == cap,
                        Investment::Zero => a == 0.0,
                        Investment::Interior => a > 0.0 && a < cap,
                    };
                    assert!(ok, "cap {cap} rho {rho} j {j}: a = {a}, want {want:?}");
                }
            }
        }
    }

    #[test]
    fn requires_cap() {
        let d = ClaimDistribution::exponential(1.0).unwrap();
        let g = Grid::covering(0.01, 1.0).unwrap();
        let r = solve_v_constrained(&ModelParams::example1(), &d, g, &SolveControls::default());
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
