//! Unrestricted investment: the operator `L`.

use serde::{Deserialize, Serialize};

use crate::claims::ClaimDistribution;
use crate::error::{invalid, Result};
use crate::model::ModelParams;
use crate::numerics::{convolve_tail, Grid, SampledFn, TailKernel};
use crate::strategy::{Extrapolation, StrategyCurve};

use super::{assemble, picard_march, PointOperator, SolveControls, SolveMode, ValueGrid};

/// `L1 w(x) = (c_rho + r x) w(x) - lambda int_0^x H(y) w(x - y) dy`.
pub fn op_l1(params: &ModelParams, dist: &ClaimDistribution, w: &SampledFn, j: usize) -> Result<f64> {
    let conv = convolve_tail(w, |y| dist.tail(y), j)?;
    Ok(l1_point(params, w.grid.x(j), w.at(j), conv))
}

/// `L w = -[L1 w + sqrt((L1 w)^2 + sigma_rho^2 (L2 w)^2)] / sigma_rho^2`
/// with `L2 w = (mu - r) w / sigma`.
pub fn op_l(params: &ModelParams, dist: &ClaimDistribution, w: &SampledFn, j: usize) -> Result<f64> {
    let conv = convolve_tail(w, |y| dist.tail(y), j)?;
    Ok(l_point(params, w.grid.x(j), w.at(j), conv).0)
}

fn l1_point(p: &ModelParams, x: f64, w: f64, conv: f64) -> f64 {
    (p.c_rho() + p.r * x) * w - p.lambda * conv
}

/// Value of `L` and the amount `a_V` at one node.
pub(crate) fn l_point(p: &ModelParams, x: f64, w: f64, conv: f64) -> (f64, f64) {
    let l1 = l1_point(p, x, w, conv);
    let l2 = p.excess() * w / p.sigma;
    let sr2 = p.sigma_rho2();
    let root = (l1 * l1 + sr2 * l2 * l2).sqrt();
    let value = if l1 >= 0.0 {
        -(l1 + root) / sr2
    } else {
        -l2 * l2 / (root - l1)
    };
    (value, amount(p, w, value))
}

fn amount(p: &ModelParams, w: f64, lv: f64) -> f64 {
    if lv == 0.0 {
        -p.hedge()
    } else {
        -p.excess() * w / (p.sigma * p.sigma * lv) - p.hedge()
    }
}

struct LOperator {
    params: ModelParams,
}

impl PointOperator for LOperator {
    fn eval(&self, x: f64, w: f64, conv: f64) -> (f64, f64) {
        l_point(&self.params, x, w, conv)
    }

    fn lipschitz(&self, k: f64) -> f64 {
        let p = &self.params;
        (2.0 * p.c + 2.0 * p.r * k + 3.0 * p.excess().abs() * p.sigma1 / p.sigma + 2.0 * p.lambda * k)
            / p.sigma_rho2()
    }
}

/// Solves `v' = Lv`, `v(0) = 1` on `grid`. Any cap in `params` is ignored.
pub fn solve_v_unconstrained(
    params: &ModelParams,
    dist: &ClaimDistribution,
    grid: Grid,
    controls: &SolveControls,
) -> Result<ValueGrid> {
    params.validate()?;
    let p = ModelParams { cap: None, ..*params };
    let op = LOperator { params: p };
    let kernel = TailKernel::new(dist, &grid);
    let march = picard_march(&op, &kernel, grid, controls)?;
    Ok(assemble(SolveMode::Unconstrained, &p, dist, grid, march, 1))
}

/// `a*(x_j) = -(mu - r) v_j / (sigma^2 (Lv)_j) - rho sigma1 / sigma`, from the
/// operator channel.
pub fn extract_strategy_unconstrained(vg: &ValueGrid, extrapolation: Extrapolation) -> Result<StrategyCurve> {
    if vg.mode != SolveMode::Unconstrained {
        return Err(invalid("mode", "expected an unrestricted solution"));
    }
    let values = vg
        .v
        .iter()
        .zip(&vg.vprime)
        .map(|(&w, &lv)| amount(&vg.params, w, lv))
        .collect();
    StrategyCurve::new(vg.grid, values, None, extrapolation)
}

/// Shifted amount `a* + rho sigma1 / sigma = -(mu - r) v / (sigma^2 Lv)`.
pub fn a_tilde_from_grid(vg: &ValueGrid) -> Vec<f64> {
    let p = &vg.params;
    vg.v
        .iter()
        .zip(&vg.vprime)
        .map(|(&w, &lv)| -p.excess() * w / (p.sigma * p.sigma * lv))
        .collect()
}

/// Sup of `|.|` over interior nodes and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub sup: f64,
    pub at_x: f64,
}

/// HJB residual `1/2 Q(a*) V'' + (c + (mu - r) a* + r x) V' - lambda int H V'`
/// with `V'' = Lv`.
///
/// `discrete` uses the solver's own trapezoid convolution and measures the
/// fixed-point defect. `continuous` re-evaluates the convolution with Simpson's
/// rule per cell (cubic interpolation of `v` at cell midpoints, exact `H`), so
/// it measures the discretisation error of the solution itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbResidual {
    pub discrete: Residual,
    pub continuous: Residual,
}

pub fn hjb_residual(vg: &ValueGrid, strategy: &StrategyCurve) -> HjbResidual {
    let (discrete, continuous) = residual_profiles(vg, strategy);
    let sup = |r: &[f64]| {
        let mut out = Residual { sup: 0.0, at_x: 0.0 };
        for j in 1..r.len().saturating_sub(1) {
            if r[j].abs() > out.sup {
                out = Residual { sup: r[j].abs(), at_x: vg.grid.x(j) };
            }
        }
        out
    };
    HjbResidual { discrete: sup(&discrete), continuous: sup(&continuous) }
}

/// Signed continuous residual at every node (see [`HjbResidual`]).
pub fn hjb_residual_profile(vg: &ValueGrid, strategy: &StrategyCurve) -> Vec<f64> {
    residual_profiles(vg, strategy).1
}

fn residual_profiles(vg: &ValueGrid, strategy: &StrategyCurve) -> (Vec<f64>, Vec<f64>) {
    let p = &vg.params;
    let grid = vg.grid;
    let h = grid.h;
    let n = grid.n;
    let mid_v: Vec<f64> = (0..n - 1).map(|i| cubic_midpoint(&vg.v, i)).collect();
    let tail_nodes: Vec<f64> = grid.points().map(|y| vg.claims.tail(y)).collect();
    let tail_mid: Vec<f64> = (0..n - 1).map(|i| vg.claims.tail((i as f64 + 0.5) * h)).collect();

    let mut discrete = Vec::with_capacity(n);
    let mut continuous = Vec::with_capacity(n);
    for j in 0..n {
        let x = grid.x(j);
        let a = strategy.eval(x);
        let local = 0.5 * p.diffusion(a) * vg.vprime[j] + (p.c + p.excess() * a + p.r * x) * vg.v[j];
        discrete.push(local - p.lambda * vg.conv[j]);

        // cell [y_i, y_{i+1}] pairs with v on [x_j - y_{i+1}, x_j - y_i]
        let mut simpson = 0.0;
        for i in 0..j {
            let left = tail_nodes[i] * vg.v[j - i];
            let right = tail_nodes[i + 1] * vg.v[j - i - 1];
            let mid = tail_mid[i] * mid_v[j - i - 1];
            simpson += left + 4.0 * mid + right;
        }
        continuous.push(local - p.lambda * simpson * h / 6.0);
    }
    (discrete, continuous)
}

/// `v((i + 1/2) h)` from the four nearest nodes (one-sided at the ends).
fn cubic_midpoint(v: &[f64], i: usize) -> f64 {
    let n = v.len();
    if n < 4 {
        return 0.5 * (v[i] + v[i + 1]);
    }
    let k = i.saturating_sub(1).min(n - 4);
    let t = i as f64 + 0.5 - k as f64;
    let mut out = 0.0;
    for a in 0..4 {
        let mut basis = 1.0;
        for b in 0..4 {
            if a != b {
                basis *= (t - b as f64) / (a as f64 - b as f64);
            }
        }
        out += basis * v[k + a];
    }
    out
}

/// Largest relative defect of `1/2 sigma_rho^2 (Lv)^2 + L1 v Lv - 1/2 (L2 v)^2 = 0`.
pub fn quadratic_form_defect(vg: &ValueGrid) -> f64 {
    let p = &vg.params;
    let sr2 = p.sigma_rho2();
    (0..vg.grid.n)
        .map(|j| {
            let lv = vg.vprime[j];
            let l1 = l1_point(p, vg.grid.x(j), vg.v[j], vg.conv[j]);
            let l2 = p.excess() * vg.v[j] / p.sigma;
            let terms = [0.5 * sr2 * lv * lv, l1 * lv, 0.5 * l2 * l2];
            let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                0.0
            } else {
                (terms[0] + terms[1] - terms[2]).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_constants;
    use proptest::prelude::*;

    const B_EX1: f64 = 22.016_175_755_895_879;

    fn exp1() -> ClaimDistribution {
        ClaimDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn l1_examples() {
        let p = ModelParams::example1();
        let g = Grid::new(1e-3, 1001).unwrap();
        let ones = g.sample(|_| 1.0);
        assert!((op_l1(&p, &exp1(), &ones, 0).unwrap() - 0.40).abs() < 1e-14);
        let zeros = g.sample(|_| 0.0);
        assert_eq!(op_l1(&p, &exp1(), &zeros, 500).unwrap(), 0.0);
        assert!((op_l1(&p, &exp1(), &ones, 1000).unwrap() - 0.5303638).abs() < 1e-5);
    }

    #[test]
    fn l_examples() {
        let p = ModelParams::example1();
        let g = Grid::new(1e-3, 11).unwrap();
        let ones = g.sample(|_| 1.0);
        assert!((op_l(&p, &exp1(), &ones, 0).unwrap() + B_EX1).abs() < 1e-12);
        let mut q = p;
        q.mu = q.r;
        let expect = -2.0 * q.c_rho() / q.sigma_rho2();
        assert!((op_l(&q, &exp1(), &ones, 0).unwrap() - expect).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn l_is_non_positive(vals in proptest::collection::vec(0.0f64..3.0, 2..60), frac in 0.0f64..1.0) {
            let p = ModelParams::example1();
            let g = Grid::new(0.05, vals.len()).unwrap();
            let w = SampledFn::new(g, vals).unwrap();
            let j = ((g.n - 1) as f64 * frac) as usize;
            prop_assert!(op_l(&p, &exp1(), &w, j).unwrap() <= 0.0);
        }
    }

    fn solve(p: &ModelParams, x_max: f64) -> ValueGrid {
        let g = Grid::covering(5e-3, x_max).unwrap();
        solve_v_unconstrained(p, &exp1(), g, &SolveControls::default()).unwrap()
    }

    #[test]
    fn short_solve_properties() {
        let p = ModelParams::example1();
        let vg = solve(&p, 5.0);
        assert_eq!(vg.v[0], 1.0);
        assert!((vg.vprime[0] + B_EX1).abs() < 1e-12);
        assert!(vg.v.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        assert!(vg.vprime.iter().all(|&d| d < 0.0));
        assert!(quadratic_form_defect(&vg) <= 1e-10);
        assert!(vg.fixed_point_residual() <= 1e-8);
        // V(x) = x - (B/2) x^2 (1 + o(1))
        let x = 0.01;
        let big = vg.big_v_fn().eval(x);
        assert!((big - (x - 11.008 * x * x)).abs() / x <= 1e-2);
        let s = extract_strategy_unconstrained(&vg, Extrapolation::HoldLast).unwrap();
        assert!((s.values[0] - 0.8542115).abs() < 1e-4);
        let r = hjb_residual(&vg, &s);
        assert!(r.discrete.sup <= 1e-6, "{r:?}");
    }

    #[test]
    fn example2_short_sells_at_low_surplus() {
        let p = ModelParams::example2();
        let vg = solve(&p, 2.0);
        let s = extract_strategy_unconstrained(&vg, Extrapolation::HoldLast).unwrap();
        let k = derive_constants(&p, None).unwrap();
        assert!(p.rho > k.rho1);
        assert!(s.values[0] < 0.0);
        assert!((s.values[0] - k.a_star_zero).abs() < 1e-10);
    }

    #[test]
    fn equal_returns_give_constant_strategy() {
        let mut p = ModelParams::example1();
        p.mu = p.r;
        let vg = solve(&p, 2.0);
        let s = extract_strategy_unconstrained(&vg, Extrapolation::HoldLast).unwrap();
        assert!(s.values.iter().all(|&a| (a + p.hedge()).abs() < 1e-12));
    }

    #[test]
    fn cubic_midpoint_exact_for_cubics() {
        let v: Vec<f64> = (0..10).map(|i| {
            let x = i as f64;
            x * x * x - 2.0 * x + 1.0
        }).collect();
        for i in 0..9 {
            let x = i as f64 + 0.5;
            assert!((cubic_midpoint(&v, i) - (x * x * x - 2.0 * x + 1.0)).abs() < 1e-9);
        }
    }
}
