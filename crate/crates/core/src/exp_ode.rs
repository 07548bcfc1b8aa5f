//! Independent ODE routes for exponential claims: the nonlinear equation for
//! the shifted optimal amount `a~ = a* + rho sigma1 / sigma`, reconstruction
//! of `V'` from it, and the linear second-order equation for `V'` under a
//! constant strategy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_positive, Error, Result};
use crate::model::{derive_constants, ModelParams};
use crate::numerics::{cumulative_trapezoid, interpolate, Grid};

/// Right side of
/// `[sigma^2 a^2 + sigma_rho^2] a' = -sigma^2/m a^3
///   - 2 [r - lambda + c_rho/m - gamma + r x/m] sigma^2/(mu - r) a^2
///   + 2 (c_rho + r x + sigma_rho^2/(2m)) a - sigma_rho^2 (mu - r)/sigma^2`.
pub fn a_tilde_rhs(x: f64, a: f64, params: &ModelParams, m: f64) -> f64 {
    let p = params;
    let s2 = p.sigma * p.sigma;
    let d = p.excess();
    let sr2 = p.sigma_rho2();
    let c_rho = p.c_rho();
    let num = -s2 / m * a * a * a - 2.0 * (p.r - p.lambda + c_rho / m - p.gamma() + p.r * x / m) * s2 / d * a * a
        + 2.0 * (c_rho + p.r * x + sr2 / (2.0 * m)) * a
        - sr2 * d / s2;
    num / (s2 * a * a + sr2)
}

/// Equally spaced samples on `[x0, x0 + (n - 1) h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformCurve {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
}

impl UniformCurve {
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.h
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.values.len() - 1)
    }

    /// Linear interpolation, holding the end values outside the range.
    pub fn eval(&self, x: f64) -> f64 {
        interpolate(&self.values, self.h, x - self.x0)
    }
}

/// Starting value for the `a~` equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Seed {
    /// Two-term large-`x` series `a~0 + a~1 / x` at `x`.
    Series { x: f64 },
    /// `a~(0+) = (mu - r) / (sigma^2 B)`, the value forced by the equation at zero surplus.
    Origin,
    Value { x: f64, a: f64 },
}

/// Largest admissible relative size of the first neglected series term.
pub const SERIES_SEED_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TildeACurve {
    pub curve: UniformCurve,
    pub seed: Seed,
    /// Set when the curve was integrated in the unstable (decreasing `x`) direction.
    pub warning: Option<String>,
}

fn seed_value(params: &ModelParams, m: f64, seed: Seed) -> Result<(f64, f64)> {
    let k = derive_constants(params, Some(m))?;
    match seed {
        Seed::Series { x } => {
            require_positive("x_seed", x)?;
            let (a0, a1) = (k.a_tilde0.unwrap_or(0.0), k.a_tilde1.unwrap_or(0.0));
            let rel = a1.abs() / (x * x * a0.abs());
            if rel >= SERIES_SEED_TOL {
                return Err(invalid(
                    "x_seed",
                    format!("series correction |a1|/(x^2 |a0|) = {rel:.3e} is not below {SERIES_SEED_TOL}"),
                ));
            }
            Ok((x, a0 + a1 / x))
        }
        Seed::Origin => Ok((0.0, k.a_star_zero + params.hedge())),
        Seed::Value { x, a } => Ok((x, a)),
    }
}

fn check_exp_inputs(params: &ModelParams, m: f64, step: f64) -> Result<()> {
    params.validate()?;
    require_positive("claim_mean", m)?;
    require_positive("step", step)?;
    if params.excess() == 0.0 {
        return Err(invalid("mu", "the a~ equation needs mu != r"));
    }
    Ok(())
}

/// One classical RK4 step of size `h` (negative for backward stepping),
/// split into substeps so that `|h_sub J| <= 1` for the local Jacobian `J`.
fn rk4_adaptive(f: &impl Fn(f64, f64) -> f64, x: f64, a: f64, h: f64) -> f64 {
    let eps = 1e-7 * a.abs().max(1e-3);
    let jac = ((f(x, a + eps) - f(x, a - eps)) / (2.0 * eps)).abs();
    let subs = (h.abs() * jac).ceil().max(1.0) as usize;
    let hs = h / subs as f64;
    let mut y = a;
    let mut t = x;
    for _ in 0..subs {
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * hs, y + 0.5 * hs * k1);
        let k3 = f(t + 0.5 * hs, y + 0.5 * hs * k2);
        let k4 = f(t + hs, y + hs * k3);
        y += hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += hs;
    }
    y
}

/// Integrates the `a~` equation forward from the seed to `x_end`, reporting
/// samples every `step`.
pub fn solve_a_tilde(params: &ModelParams, m: f64, seed: Seed, x_end: f64, step: f64) -> Result<TildeACurve> {
    check_exp_inputs(params, m, step)?;
    let (x0, a0) = seed_value(params, m, seed)?;
    if !(x_end > x0) {
        return Err(invalid("x_end", format!("must exceed the seed point {x0}, got {x_end}")));
    }
    let f = |x: f64, a: f64| a_tilde_rhs(x, a, params, m);
    let n = ((x_end - x0) / step).round().max(1.0) as usize;
    let h = (x_end - x0) / n as f64;
    let mut values = Vec::with_capacity(n + 1);
    values.push(a0);
    let mut a = a0;
    for j in 0..n {
        a = rk4_adaptive(&f, x0 + j as f64 * h, a, h);
        if !a.is_finite() {
            return Err(Error::Unsupported(format!("a~ integration blew up near x = {}", x0 + j as f64 * h)));
        }
        values.push(a);
    }
    Ok(TildeACurve {
        curve: UniformCurve { x0, h, values },
        seed,
        warning: None,
    })
}

/// Integrates from the seed towards smaller `x` down to `x_lo`. Errors grow
/// like `exp(-d0 x^2 / 2)` in this direction, so the result is for comparison
/// only and carries a warning. The returned curve runs from `x_lo` upwards.
pub fn solve_a_tilde_backward(params: &ModelParams, m: f64, seed: Seed, x_lo: f64, step: f64) -> Result<TildeACurve> {
    check_exp_inputs(params, m, step)?;
    let (x0, a0) = seed_value(params, m, seed)?;
    if !(x_lo < x0 && x_lo >= 0.0) {
        return Err(invalid("x_lo", format!("must lie in [0, {x0}), got {x_lo}")));
    }
    let f = |x: f64, a: f64| a_tilde_rhs(x, a, params, m);
    let n = ((x0 - x_lo) / step).round().max(1.0) as usize;
    let h = (x0 - x_lo) / n as f64;
    let mut values = vec![a0];
    let mut a = a0;
    for j in 0..n {
        a = rk4_adaptive(&f, x0 - j as f64 * h, a, -h);
        values.push(a);
    }
    values.reverse();
    let d0 = derive_constants(params, Some(m))?.d0.unwrap_or(f64::NAN);
    Ok(TildeACurve {
        curve: UniformCurve { x0: x_lo, h, values },
        seed,
        warning: Some(format!(
            "backward integration is unstable: perturbations grow like exp({:.3} (x0^2 - x^2) / 2)",
            -d0
        )),
    })
}

/// `V'(x) = value exp(-(mu - r)/sigma^2 int_{x0}^x dy / a~(y))` on the curve's
/// grid, by the trapezoid rule.
pub fn reconstruct_vprime(curve: &TildeACurve, params: &ModelParams, anchor: (f64, f64)) -> Result<UniformCurve> {
    let c = &curve.curve;
    if c.values.iter().any(|&a| !(a > 0.0)) {
        return Err(invalid("curve", "a~ must stay positive to reconstruct V'"));
    }
    let k = params.excess() / (params.sigma * params.sigma);
    let recip: Vec<f64> = c.values.iter().map(|a| 1.0 / a).collect();
    let integral = cumulative_trapezoid(&recip, c.h, 0.0);
    let at_anchor = interpolate(&integral, c.h, anchor.0 - c.x0);
    let values = integral.iter().map(|i| anchor.1 * (-k * (i - at_anchor)).exp()).collect();
    Ok(UniformCurve { x0: c.x0, h: c.h, values })
}

/// Coefficients of `phi'' + (a2 x + a1) phi' + (a4 x + a3) phi = 0` for `phi = V'`
/// under the constant amount `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearOdeCoeffs {
    pub a_rho2: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl LinearOdeCoeffs {
    pub fn new(params: &ModelParams, amount: f64, m: f64) -> Result<Self> {
        params.validate()?;
        require_positive("claim_mean", m)?;
        if !(amount >= 0.0 && amount.is_finite()) {
            return Err(invalid("A", format!("constant amount must be non-negative, got {amount}")));
        }
        let p = params;
        let k = 1.0 / m;
        let a_rho2 = p.diffusion(amount);
        let d = p.excess();
        Ok(LinearOdeCoeffs {
            a_rho2,
            a1: 2.0 * p.c / a_rho2 + 2.0 * d * amount / a_rho2 + k,
            a2: 2.0 * p.r / a_rho2,
            a3: 2.0 * ((p.r - p.lambda) + k * p.c + k * amount * d) / a_rho2,
            a4: 2.0 * p.r * k / a_rho2,
        })
    }
}

/// `V'`, `V''` and `V` under a constant strategy, with `V'(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstStrategySolution {
    pub amount: f64,
    pub coeffs: LinearOdeCoeffs,
    pub grid: Grid,
    pub v: Vec<f64>,
    pub vprime: Vec<f64>,
    pub big_v: Vec<f64>,
    pub claim_mean: f64,
}

impl ConstStrategySolution {
    /// `V(inf)` with the tail `int_{x_max}^inf V' = m V'(x_max)`.
    pub fn v_infinity(&self) -> f64 {
        let n = self.grid.n;
        self.big_v[n - 1] + self.claim_mean * self.v[n - 1]
    }

    /// Survival probability `V(x) / V(inf)` under the constant strategy.
    pub fn survival(&self, x: f64) -> f64 {
        interpolate(&self.big_v, self.grid.h, x) / self.v_infinity()
    }
}

/// Integrates the linear equation for `V'` under the constant amount `A`
/// (any non-negative value), starting from `V'(0) = 1` and
/// `V''(0) = -2 (c + (mu - r) A) / A_rho^2`.
pub fn solve_linear_const_strategy(params: &ModelParams, amount: f64, m: f64, grid: Grid) -> Result<ConstStrategySolution> {
    let k = LinearOdeCoeffs::new(params, amount, m)?;
    let h = grid.h;
    let deriv = |x: f64, y: [f64; 2]| -> [f64; 2] { [y[1], -(k.a2 * x + k.a1) * y[1] - (k.a4 * x + k.a3) * y[0]] };
    let mut v = Vec::with_capacity(grid.n);
    let mut vp = Vec::with_capacity(grid.n);
    let mut y = [1.0, -2.0 * (params.c + params.excess() * amount) / k.a_rho2];
    v.push(y[0]);
    vp.push(y[1]);
    for j in 0..grid.n - 1 {
        let x = grid.x(j);
        let stiff = k.a2 * (x + h) + k.a1.abs() + (k.a4 * (x + h) + k.a3.abs()).sqrt();
        let subs = (h * stiff / 1.5).ceil().max(1.0) as usize;
        let hs = h / subs as f64;
        let mut t = x;
        for _ in 0..subs {
            let k1 = deriv(t, y);
            let y2 = [y[0] + 0.5 * hs * k1[0], y[1] + 0.5 * hs * k1[1]];
            let k2 = deriv(t + 0.5 * hs, y2);
            let y3 = [y[0] + 0.5 * hs * k2[0], y[1] + 0.5 * hs * k2[1]];
            let k3 = deriv(t + 0.5 * hs, y3);
            let y4 = [y[0] + hs * k3[0], y[1] + hs * k3[1]];
            let k4 = deriv(t + hs, y4);
            for i in 0..2 {
                y[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += hs;
        }
        v.push(y[0]);
        vp.push(y[1]);
    }
    // Simpson-consistent prefix: trapezoid with the end-slope correction
    let mut big_v = Vec::with_capacity(grid.n);
    big_v.push(0.0);
    for j in 1..grid.n {
        let cell = 0.5 * h * (v[j - 1] + v[j]) + h * h / 12.0 * (vp[j - 1] - vp[j]);
        big_v.push(big_v[j - 1] + cell);
    }
    Ok(ConstStrategySolution {
        amount,
        coeffs: k,
        grid,
        v,
        vprime: vp,
        big_v,
        claim_mean: m,
    })
}
