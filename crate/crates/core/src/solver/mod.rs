//! Windowed Picard solvers for `v' = Tv` (capped investment) and `v' = Lv`
//! (unrestricted investment), both with `v(0) = 1`.
//!
//! The jump term is handled in tail form: for `W(0) = 0`,
//! `M(W)(x) = lambda int_0^x H(s) w(x - s) ds`, which is what both operators
//! consume. The density form in [`crate::numerics::jump_operator_m`] is kept
//! as a cross-check.

use serde::{Deserialize, Serialize};

use crate::claims::ClaimDistribution;
use crate::error::{invalid, Error, Result};
use crate::numerics::{cumulative_trapezoid, Grid, SampledFn, TailKernel};

pub mod constrained;
pub mod unconstrained;

pub use constrained::{
    aw_cross_check, extract_strategy_constrained, hjb_residual_constrained, hjb_residual_profile_constrained,
    solve_v_constrained, stable_step, t_inf, t_integrand,
};
pub use unconstrained::{
    a_tilde_from_grid, extract_strategy_unconstrained, hjb_residual, hjb_residual_profile, op_l, op_l1,
    quadratic_form_defect, solve_v_unconstrained, HjbResidual, Residual,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveControls {
    /// Target bound on `Delta * C(K)` for each window.
    pub window_safety: f64,
    /// Relative sup-norm tolerance of the Picard iteration.
    pub fp_tol: f64,
    pub max_iters: usize,
    /// Largest window, in grid steps.
    pub max_window: usize,
}

impl Default for SolveControls {
    fn default() -> Self {
        SolveControls {
            window_safety: 0.4,
            fp_tol: 1e-12,
            max_iters: 200,
            max_window: 4096,
        }
    }
}

impl SolveControls {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_safety > 0.0 && self.window_safety < 1.0) {
            return Err(invalid("window_safety", format!("must lie in (0, 1), got {}", self.window_safety)));
        }
        if !(self.fp_tol > 0.0) {
            return Err(invalid("fp_tol", format!("must be positive, got {}", self.fp_tol)));
        }
        if self.max_iters == 0 || self.max_window == 0 {
            return Err(invalid("max_iters", "iteration and window limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SolveMode {
    Constrained { cap: f64 },
    Unconstrained,
}

/// Diagnostics of one Picard window `[start, end]` (inclusive grid indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub start: usize,
    pub end: usize,
    pub iterations: usize,
    /// Ratios of successive sup-norm changes, from the second iterate on.
    pub ratios: Vec<f64>,
    pub last_change: f64,
    /// `Delta * C(K)` at the window end; above the safety target only when the
    /// window is a single step.
    pub lipschitz_bound: f64,
}

impl WindowStat {
    pub fn max_ratio(&self) -> Option<f64> {
        self.ratios.iter().copied().reduce(f64::max)
    }
}

/// Solution of `v' = Tv` or `v' = Lv` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueGrid {
    pub mode: SolveMode,
    pub params: crate::model::ModelParams,
    pub claims: ClaimDistribution,
    pub grid: Grid,
    /// `v = V'` with `v(0) = 1`.
    pub v: Vec<f64>,
    /// `V = int_0^x v`.
    pub big_v: Vec<f64>,
    /// Operator value `Tv` or `Lv` at each node, i.e. `V''`.
    pub vprime: Vec<f64>,
    /// `int_0^x H(y) v(x - y) dy` at each node.
    pub conv: Vec<f64>,
    /// Minimising amount (capped) or `a_V` (unrestricted) at each node.
    pub argmin: Vec<f64>,
    pub windows: Vec<WindowStat>,
    /// Refinement factor applied to the requested step for stability; `grid`
    /// is the refined grid, so every `substeps`-th node is a requested node.
    pub substeps: usize,
}

impl ValueGrid {
    pub fn v_fn(&self) -> SampledFn {
        SampledFn {
            grid: self.grid,
            values: self.v.clone(),
        }
    }

    pub fn big_v_fn(&self) -> SampledFn {
        SampledFn {
            grid: self.grid,
            values: self.big_v.clone(),
        }
    }

    pub fn total_iterations(&self) -> usize {
        self.windows.iter().map(|w| w.iterations).sum()
    }

    pub fn max_contraction_ratio(&self) -> Option<f64> {
        self.windows.iter().filter_map(WindowStat::max_ratio).reduce(f64::max)
    }

    /// Largest `x` such that `v' < 0` on `[0, x]`.
    pub fn concavity_extent(&self) -> f64 {
        let k = self.vprime.iter().take_while(|&&d| d < 0.0).count();
        self.grid.x(k.saturating_sub(1))
    }

    /// `sup_j |v'_j - op(v)_j|` after re-evaluating the operator on the stored `v`.
    pub fn fixed_point_residual(&self) -> f64 {
        let kernel = TailKernel::new(&self.claims, &self.grid);
        let op = operator_for(self);
        (0..self.grid.n)
            .map(|j| {
                let conv = kernel.convolve(&self.v, j);
                (op(self.grid.x(j), self.v[j], conv) - self.vprime[j]).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn operator_for(vg: &ValueGrid) -> Box<dyn Fn(f64, f64, f64) -> f64 + '_> {
    match vg.mode {
        SolveMode::Constrained { cap } => {
            let p = vg.params;
            Box::new(move |x, w, conv| constrained::t_point(&p, cap, x, w, p.lambda * conv).0)
        }
        SolveMode::Unconstrained => {
            let p = vg.params;
            Box::new(move |x, w, conv| unconstrained::l_point(&p, x, w, conv).0)
        }
    }
}

/// Point form of an operator: given `x`, `w(x)` and `int_0^x H(y) w(x-y) dy`,
/// returns the derivative value and the associated investment amount.
pub(crate) trait PointOperator {
    fn eval(&self, x: f64, w: f64, conv: f64) -> (f64, f64);
    /// Lipschitz constant `C(K)` of the operator on `[0, K]`.
    fn lipschitz(&self, k: f64) -> f64;
}

pub(crate) struct March {
    pub v: Vec<f64>,
    pub vprime: Vec<f64>,
    pub conv: Vec<f64>,
    pub argmin: Vec<f64>,
    pub windows: Vec<WindowStat>,
}

const DIVERGENT_STREAK: usize = 3;

/// Marches the fixed point of `w = 1 + int_0^x op(w)` window by window,
/// freezing everything left of the current window.
pub(crate) fn picard_march<O: PointOperator>(
    op: &O,
    kernel: &TailKernel,
    grid: Grid,
    controls: &SolveControls,
) -> Result<March> {
    controls.validate()?;
    let n = grid.n;
    let h = grid.h;
    let hk = &kernel.values;
    let mut v = vec![0.0; n];
    let mut vp = vec![0.0; n];
    let mut conv = vec![0.0; n];
    let mut argmin = vec![0.0; n];
    let mut windows = Vec::new();

    v[0] = 1.0;
    let (g0, a0) = op.eval(0.0, 1.0, 0.0);
    vp[0] = g0;
    argmin[0] = a0;

    let mut s = 1;
    while s < n {
        let (m, bound) = window_steps(op, grid, s, controls);
        let e = (s - 1 + m).min(n - 1);
        let len = e - s + 1;

        // Convolution terms that only involve frozen values.
        let hist: Vec<f64> = (s..=e)
            .map(|j| {
                let inner: f64 = (j - s + 1..j).map(|i| hk[i] * v[j - i]).sum();
                h * (inner + 0.5 * hk[j] * v[0])
            })
            .collect();

        let base = v[s - 1];
        let base_slope = vp[s - 1];
        let mut w: Vec<f64> = (0..len)
            .map(|k| {
                let dx = (k + 1) as f64 * h;
                if base > 0.0 {
                    base * (base_slope / base * dx).exp()
                } else {
                    base + base_slope * dx
                }
            })
            .collect();

        let window_conv = |w: &[f64], k: usize| -> f64 {
            let inner: f64 = (1..=k).map(|i| hk[i] * w[k - i]).sum();
            hist[k] + h * (0.5 * hk[0] * w[k] + inner)
        };

        let mut ratios = Vec::new();
        let mut prev_change = f64::NAN;
        let mut streak = 0;
        let mut iterations = 0;
        let mut converged = false;
        let mut change = f64::INFINITY;
        let mut next = vec![0.0; len];
        while iterations < controls.max_iters {
            iterations += 1;
            let mut acc = base;
            let mut prev_g = base_slope;
            for k in 0..len {
                let g = op.eval(grid.x(s + k), w[k], window_conv(&w, k)).0;
                acc += 0.5 * h * (prev_g + g);
                next[k] = acc;
                prev_g = g;
            }
            change = 0.0;
            let mut scale: f64 = 0.0;
            for k in 0..len {
                change = change.max((next[k] - w[k]).abs());
                scale = scale.max(next[k].abs());
            }
            std::mem::swap(&mut w, &mut next);
            if !change.is_finite() || !scale.is_finite() {
                break;
            }
            if iterations >= 2 {
                let ratio = change / prev_change;
                ratios.push(ratio);
                streak = if ratio > 1.0 { streak + 1 } else { 0 };
                if streak >= DIVERGENT_STREAK {
                    break;
                }
            }
            if change <= controls.fp_tol * scale || change == 0.0 {
                converged = true;
                break;
            }
            prev_change = change;
        }
        if !converged {
            return Err(Error::NonConvergence {
                start: s,
                x: grid.x(s),
                iterations,
                last_change: change,
            });
        }

        for k in 0..len {
            let j = s + k;
            v[j] = w[k];
            conv[j] = window_conv(&w, k);
            let (g, a) = op.eval(grid.x(j), w[k], conv[j]);
            vp[j] = g;
            argmin[j] = a;
        }
        windows.push(WindowStat {
            start: s,
            end: e,
            iterations,
            ratios,
            last_change: change,
            lipschitz_bound: bound,
        });
        s = e + 1;
    }

    Ok(March {
        v,
        vprime: vp,
        conv,
        argmin,
        windows,
    })
}

/// Number of steps `m` of the window starting at index `s`, chosen so that
/// `m h C(x_{s-1+m}) <= safety`, but at least one step.
fn window_steps<O: PointOperator>(op: &O, grid: Grid, s: usize, controls: &SolveControls) -> (usize, f64) {
    let h = grid.h;
    let last = grid.n - 1;
    let fit = |end: usize| controls.window_safety / (h * op.lipschitz(grid.x(end)));
    let mut m = (fit((s).min(last)).floor() as usize).clamp(1, controls.max_window);
    loop {
        let end = (s - 1 + m).min(last);
        let allowed = fit(end).floor() as usize;
        if m <= allowed || m == 1 {
            let steps = end + 1 - s;
            return (m, steps as f64 * h * op.lipschitz(grid.x(end)));
        }
        m = allowed.max(1);
    }
}

/// How the integral of `v` beyond the grid is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TailModel {
    /// `int_x^inf v = m v(x)`, the leading term for exponential claims with mean `m`.
    Exponential { mean: f64 },
    /// Exponential decay with the log-slope fitted over the last tenth of the grid.
    LogSlope,
}

impl TailModel {
    pub fn for_claims(dist: &ClaimDistribution) -> Self {
        match dist.exponential_mean() {
            Some(mean) => TailModel::Exponential { mean },
            None => TailModel::LogSlope,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedDelta {
    pub delta: SampledFn,
    /// Estimate of `V(inf)`.
    pub v_infinity: f64,
    /// Tail remainder added to `V(x_max)`.
    pub remainder: f64,
    /// Set when the remainder exceeds 1% of `V(x_max)`.
    pub truncation_flag: bool,
}

/// Survival probability `delta = V / V(inf)` from a solved grid.
pub fn normalize_delta(vg: &ValueGrid, tail: TailModel) -> NormalizedDelta {
    let n = vg.grid.n;
    let v_end = vg.v[n - 1];
    let big_end = vg.big_v[n - 1];
    let remainder = match tail {
        TailModel::Exponential { mean } => mean * v_end,
        TailModel::LogSlope => {
            let j0 = ((n - 1) as f64 * 0.9).floor() as usize;
            let j0 = j0.min(n - 2);
            let (a, b) = (vg.v[j0], v_end);
            let slope = if a > 0.0 && b > 0.0 {
                -(b.ln() - a.ln()) / (vg.grid.x(n - 1) - vg.grid.x(j0))
            } else {
                f64::NAN
            };
            if slope > 0.0 && slope.is_finite() {
                v_end / slope
            } else {
                f64::INFINITY
            }
        }
    };
    let v_inf = big_end + remainder;
    let values = vg.big_v.iter().map(|&x| x / v_inf).collect();
    NormalizedDelta {
        delta: SampledFn { grid: vg.grid, values },
        v_infinity: v_inf,
        remainder,
        truncation_flag: !(remainder <= 0.01 * big_end),
    }
}

pub(crate) fn assemble(
    mode: SolveMode,
    params: &crate::model::ModelParams,
    claims: &ClaimDistribution,
    grid: Grid,
    march: March,
    substeps: usize,
) -> ValueGrid {
    ValueGrid {
        mode,
        params: *params,
        claims: *claims,
        grid,
        big_v: cumulative_trapezoid(&march.v, grid.h, 0.0),
        v: march.v,
        vprime: march.vprime,
        conv: march.conv,
        argmin: march.argmin,
        windows: march.windows,
        substeps,
    }
}
