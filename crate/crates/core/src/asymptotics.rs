//! Closed-form limits at zero and infinite surplus, fitted tail constants and
//! the classical no-investment ruin probability.

use serde::{Deserialize, Serialize};

use crate::claims::ClaimDistribution;
use crate::error::{invalid, require_positive, Error, Result};
use crate::model::{derive_constants, DerivedConstants, ModelParams};
use crate::numerics::adaptive_simpson;
use crate::solver::{normalize_delta, TailModel, ValueGrid};

/// Both algebraic forms of the coefficient `s` in `a*(x) = a*(0+) - s x + o(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeForms {
    /// `(mu - r) / sigma^2 (1 + 2 eta / B)`.
    pub eta_form: f64,
    /// Explicit expression in the model parameters.
    pub explicit: f64,
}

impl SlopeForms {
    pub fn relative_gap(&self) -> f64 {
        let scale = self.eta_form.abs().max(self.explicit.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.eta_form - self.explicit).abs() / scale
        }
    }
}

pub fn strategy_slope_forms(constants: &DerivedConstants, params: &ModelParams) -> SlopeForms {
    let d = params.excess();
    if d == 0.0 {
        return SlopeForms {
            eta_form: 0.0,
            explicit: 0.0,
        };
    }
    let s2 = params.sigma * params.sigma;
    let k = constants;
    let eta_form = d / s2 * (1.0 + 2.0 * k.eta / k.b);
    let shifted = k.a_star_zero + params.hedge();
    let num = (params.lambda - params.r + d * d / s2) * shifted + k.c_rho * d / s2;
    let den = (k.c_rho * k.c_rho + d * d * k.sigma_rho2 / s2).sqrt();
    SlopeForms {
        eta_form,
        explicit: d / s2 - num / den,
    }
}

/// Coefficient `s` with `a*(x) = a*(0+) - s x (1 + o(1))` near zero surplus.
pub fn strategy_slope_zero(constants: &DerivedConstants, params: &ModelParams) -> f64 {
    strategy_slope_forms(constants, params).explicit
}

/// Unnormalised shape `x - (B/2) x^2` of the value function at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueExpansionZero {
    pub b: f64,
}

impl ValueExpansionZero {
    pub fn eval(&self, x: f64) -> f64 {
        x - 0.5 * self.b * x * x
    }
}

pub fn value_expansion_zero(constants: &DerivedConstants) -> ValueExpansionZero {
    ValueExpansionZero { b: constants.b }
}

/// `(limit, coeff)` with `a*(x) = limit + coeff / x (1 + o(1))` for
/// exponential claims with mean `m`.
pub fn strategy_expansion_infinity_exp(params: &ModelParams, m: f64) -> Result<(f64, f64)> {
    require_positive("claim_mean", m)?;
    let d = params.excess();
    let s2 = params.sigma * params.sigma;
    let limit = d * m / s2 - params.hedge();
    let coeff = -(1.0 - params.lambda / params.r) * d * m * m / s2;
    Ok((limit, coeff))
}

/// `K1 e^{-x/m} x^{lambda/r - 1}`.
pub fn ruin_tail_exp(params: &ModelParams, m: f64, k1: f64, x: f64) -> Result<f64> {
    require_positive("K1", k1)?;
    require_positive("claim_mean", m)?;
    require_positive("x", x)?;
    Ok(k1 * (-x / m).exp() * x.powf(params.lambda / params.r - 1.0))
}

/// Plateau of `v(x) e^{x/m} x^{1 - lambda/r}` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub window: (f64, f64),
    /// Median of the plateau function.
    pub plateau: f64,
    /// `max / min` of the plateau function over the window.
    pub ratio: f64,
    /// Constant of the ruin probability tail, `m plateau / V(inf)`.
    pub k1: f64,
    pub passed: bool,
}

pub const TAIL_PLATEAU_LIMIT: f64 = 1.05;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Plateau statistics of samples `v` (at `x = j h`) against the exponential-claim tail shape.
pub fn tail_plateau(v: &[f64], h: f64, params: &ModelParams, m: f64, window: (f64, f64)) -> Result<(f64, f64)> {
    let (lo, hi) = window;
    let x_end = h * (v.len() - 1) as f64;
    if !(lo > 0.0 && lo < hi && hi <= x_end + 1e-9) {
        return Err(Error::WindowOutOfRange { lo, hi, x_max: x_end });
    }
    let p = 1.0 - params.lambda / params.r;
    let vals: Vec<f64> = (0..v.len())
        .map(|j| (j as f64 * h, v[j]))
        .filter(|(x, _)| *x >= lo - 1e-9 && *x <= hi + 1e-9)
        .map(|(x, y)| y * (x / m).exp() * x.powf(p))
        .collect();
    let max = vals.iter().copied().fold(f64::MIN, f64::max);
    let min = vals.iter().copied().fold(f64::MAX, f64::min);
    Ok((median(vals), max / min))
}

/// Fits the ruin tail constant from a solved grid with exponential claims.
pub fn fit_tail_constant(vg: &ValueGrid, m: f64, window: (f64, f64)) -> Result<TailFit> {
    let (plateau, ratio) = tail_plateau(&vg.v, vg.grid.h, &vg.params, m, window)?;
    let v_inf = normalize_delta(vg, TailModel::Exponential { mean: m }).v_infinity;
    Ok(TailFit {
        window,
        plateau,
        ratio,
        k1: m * plateau / v_inf,
        passed: ratio <= TAIL_PLATEAU_LIMIT,
    })
}

/// Fitted `C` in `delta(x) = C [x - (B/2) x^2] (1 + o(1))`, the median of the
/// ratio over grid points in `(0, x_hi]`.
pub fn fit_value_constant(vg: &ValueGrid, b: f64, x_hi: f64) -> Result<f64> {
    let nd = normalize_delta(vg, TailModel::for_claims(&vg.claims));
    let shape = ValueExpansionZero { b };
    let ratios: Vec<f64> = (1..vg.grid.n)
        .map(|j| vg.grid.x(j))
        .take_while(|&x| x <= x_hi + 1e-12)
        .map(|x| nd.delta.eval(x) / shape.eval(x))
        .collect();
    if ratios.is_empty() {
        return Err(invalid("x_hi", format!("no grid points in (0, {x_hi}]")));
    }
    Ok(median(ratios))
}

/// Large-surplus optimal amount of the capped problem with exponential claims.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InfinityStrategy {
    FullCap { cap: f64 },
    Zero,
    Interior { limit: f64, coeff: f64 },
}

impl InfinityStrategy {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InfinityStrategy::FullCap { cap } => cap,
            InfinityStrategy::Zero => 0.0,
            InfinityStrategy::Interior { limit, coeff } => limit + coeff / x,
        }
    }
}

pub fn constrained_infinity_strategy(params: &ModelParams, m: f64) -> Result<InfinityStrategy> {
    let cap = params
        .cap
        .ok_or_else(|| Error::Unsupported("large-surplus capped strategy needs a cap A".into()))?;
    let (limit, coeff) = strategy_expansion_infinity_exp(params, m)?;
    Ok(if limit > cap {
        InfinityStrategy::FullCap { cap }
    } else if limit < 0.0 {
        InfinityStrategy::Zero
    } else {
        InfinityStrategy::Interior { limit, coeff }
    })
}

/// Classical ruin probability without investment and without diffusion,
/// exponential claims with mean `m`:
/// `Psi(x) = int_x^inf e^{-u/m} (1 + r u / c)^{lambda/r - 1} du / [c / lambda + int_0^inf ...]`.
pub fn no_investment_ruin_reference(c: f64, r: f64, lambda: f64, m: f64, x: f64) -> Result<f64> {
    require_positive("c", c)?;
    require_positive("r", r)?;
    require_positive("lambda", lambda)?;
    require_positive("claim_mean", m)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(invalid("x", format!("must be a non-negative surplus, got {x}")));
    }
    let p = lambda / r - 1.0;
    let f = |u: f64| (-u / m).exp() * (1.0 + r * u / c).powf(p);
    let tail_integral = |from: f64| {
        let mut total = 0.0;
        let mut lo = from;
        let width = 10.0 * m;
        loop {
            let piece = adaptive_simpson(&f, lo, lo + width, 1e-14, 50);
            total += piece;
            lo += width;
            if piece <= 1e-17 * total.max(1e-300) || f(lo) == 0.0 {
                break;
            }
        }
        total
    };
    let full = tail_integral(0.0);
    Ok(tail_integral(x) / (c / lambda + full))
}

/// Every closed-form constant plus the fitted ones when a solved grid is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteReport {
    pub a_star_zero: f64,
    pub v_prime_zero: f64,
    pub strategy_slope_zero: f64,
    pub strategy_slope_forms: SlopeForms,
    pub b: f64,
    pub eta: f64,
    pub infinity_limit: Option<f64>,
    pub infinity_coeff: Option<f64>,
    pub tail_exponent: f64,
    pub tail_fit: Option<TailFit>,
    pub value_constant: Option<f64>,
    pub value_constant_window: f64,
}

pub fn asymptote_report(
    params: &ModelParams,
    claims: &ClaimDistribution,
    solved: Option<&ValueGrid>,
    tail_window: (f64, f64),
) -> Result<AsymptoteReport> {
    let m = claims.exponential_mean();
    let k = derive_constants(params, m)?;
    let forms = strategy_slope_forms(&k, params);
    let (limit, coeff) = match m {
        Some(m) => {
            let (l, c) = strategy_expansion_infinity_exp(params, m)?;
            (Some(l), Some(c))
        }
        None => (None, None),
    };
    let value_window = 0.01;
    let (tail_fit, value_constant) = match solved {
        Some(vg) => {
            let fit = match m {
                Some(m) if tail_window.1 <= vg.grid.x_max() + 1e-9 => Some(fit_tail_constant(vg, m, tail_window)?),
                _ => None,
            };
            (fit, Some(fit_value_constant(vg, k.b, value_window)?))
        }
        None => (None, None),
    };
    Ok(AsymptoteReport {
        a_star_zero: k.a_star_zero,
        v_prime_zero: k.v_prime_zero,
        strategy_slope_zero: forms.explicit,
        strategy_slope_forms: forms,
        b: k.b,
        eta: k.eta,
        infinity_limit: limit,
        infinity_coeff: coeff,
        tail_exponent: k.tail_exponent,
        tail_fit,
        value_constant,
        value_constant_window: value_window,
    })
}
