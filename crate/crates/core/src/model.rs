//! Model parameters, derived constants and the regime thresholds for the
//! optimal investment amount near zero and infinite surplus.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::claims::ClaimDistribution;
use crate::error::{invalid, require_positive, Error, Result};

/// Relative tolerance used when comparing a correlation against a regime threshold.
pub const THRESHOLD_RTOL: f64 = 1e-12;

/// Market and insurance parameters of the controlled surplus process.
///
/// `cap` is the maximal amount `A` held in the risky asset. When it is present
/// the control set is `[0, A]`, otherwise investment is unrestricted and
/// short-selling is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: f64,
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub sigma1: f64,
    pub rho: f64,
    pub lambda: f64,
    pub cap: Option<f64>,
}

impl ModelParams {
    /// First numerical scenario (mean-one claims, negative correlation).
    pub fn example1() -> Self {
        ModelParams {
            c: 0.36,
            r: 0.32,
            mu: 0.42,
            sigma: 0.1,
            sigma1: 0.2,
            rho: -0.2,
            lambda: 0.3,
            cap: None,
        }
    }

    /// Second numerical scenario (mean-two claims, positive correlation).
    pub fn example2() -> Self {
        ModelParams {
            c: 0.5,
            r: 0.12,
            mu: 0.2,
            sigma: 0.9,
            sigma1: 0.5,
            rho: 0.15,
            lambda: 0.3,
            cap: None,
        }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("c", self.c)?;
        require_positive("r", self.r)?;
        require_positive("mu", self.mu)?;
        require_positive("sigma", self.sigma)?;
        require_positive("sigma1", self.sigma1)?;
        require_positive("lambda", self.lambda)?;
        if !(self.rho.is_finite() && self.rho.abs() < 1.0) {
            return Err(invalid(
                "rho",
                format!("correlation must satisfy |rho| < 1, got {}", self.rho),
            ));
        }
        if let Some(a) = self.cap {
            require_positive("cap_A", a)?;
        }
        Ok(())
    }

    pub fn is_constrained(&self) -> bool {
        self.cap.is_some()
    }

    /// Excess return `mu - r` of the risky asset.
    pub fn excess(&self) -> f64 {
        self.mu - self.r
    }

    /// Diffusion coefficient `sigma^2 a^2 + 2 rho sigma sigma1 a + sigma1^2` of the
    /// surplus when the amount `a` is held in the stock.
    pub fn diffusion(&self, a: f64) -> f64 {
        let (s, s1) = (self.sigma, self.sigma1);
        s * s * a * a + 2.0 * self.rho * s * s1 * a + s1 * s1
    }

    /// Smallest value of [`Self::diffusion`] over `[lo, hi]`.
    pub fn min_diffusion(&self, lo: f64, hi: f64) -> f64 {
        let vertex = -self.rho * self.sigma1 / self.sigma;
        let a = vertex.clamp(lo, hi);
        self.diffusion(a).min(self.diffusion(lo)).min(self.diffusion(hi))
    }

    /// `c_rho = c - rho (mu - r) sigma1 / sigma`.
    pub fn c_rho(&self) -> f64 {
        self.c - self.rho * self.excess() * self.sigma1 / self.sigma
    }

    /// `sigma_rho^2 = sigma1^2 (1 - rho^2)`.
    pub fn sigma_rho2(&self) -> f64 {
        self.sigma1 * self.sigma1 * (1.0 - self.rho * self.rho)
    }

    /// `gamma = (mu - r)^2 / (2 sigma^2)`.
    pub fn gamma(&self) -> f64 {
        let d = self.excess();
        d * d / (2.0 * self.sigma * self.sigma)
    }

    /// Hedge offset `rho sigma1 / sigma` separating `a*` from the shifted amount.
    pub fn hedge(&self) -> f64 {
        self.rho * self.sigma1 / self.sigma
    }

    fn cap_or_err(&self) -> Result<f64> {
        self.cap
            .ok_or_else(|| Error::Unsupported("operation requires a cap A (constrained mode)".into()))
    }
}

/// Closed-form constants of the problem. Fields that need a cap or a claim
/// mean are `None` when that input is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub gamma: f64,
    pub c_rho: f64,
    pub sigma_rho2: f64,
    pub rho1: f64,
    pub rho2: Option<f64>,
    pub rho3: Option<f64>,
    pub rho4: Option<f64>,
    /// `-v'(0+)` of the unconstrained solution.
    pub b: f64,
    pub eta: f64,
    /// Unconstrained optimal amount at `0+`.
    pub a_star_zero: f64,
    /// `v'(0+)` for the active regime (capped problem when a cap is present).
    pub v_prime_zero: f64,
    /// Optimal amount at `0+` of the capped problem.
    pub a_star_zero_capped: Option<f64>,
    pub a_tilde0: Option<f64>,
    pub a_tilde1: Option<f64>,
    /// Exponent `lambda / r - 1` of the power factor in the ruin tail.
    pub tail_exponent: f64,
    pub d0: Option<f64>,
}

/// Evaluates every closed-form constant for `params`; `claim_mean` enables the
/// exponential-claim quantities at infinity.
pub fn derive_constants(params: &ModelParams, claim_mean: Option<f64>) -> Result<DerivedConstants> {
    params.validate()?;
    if let Some(m) = claim_mean {
        require_positive("claim_mean", m)?;
    }
    let p = params;
    let d = p.excess();
    let (s, s1) = (p.sigma, p.sigma1);
    let gamma = p.gamma();
    let c_rho = p.c_rho();
    let sigma_rho2 = p.sigma_rho2();

    let disc = (c_rho * c_rho + 2.0 * gamma * sigma_rho2).sqrt();
    // Rationalised branch avoids cancellation when c_rho < 0.
    let b = if c_rho >= 0.0 {
        (c_rho + disc) / sigma_rho2
    } else {
        2.0 * gamma / (disc - c_rho)
    };
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid("c", format!("parameters give a non-positive curvature B = {b}")));
    }
    // c_rho - B sigma_rho^2 = -disc
    let eta = -(p.lambda - p.r + 2.0 * gamma + b * c_rho) / (2.0 * disc);
    let a_star_zero = d / (s * s * b) - p.hedge();

    let rho1 = d * s1 / (2.0 * p.c * s);
    let rho2 = p
        .cap
        .map(|a| rho1 - (d * a * a + 2.0 * p.c * a) / (2.0 * p.c * s1 / s));

    let (rho3, rho4, a_tilde0, a_tilde1, d0) = match claim_mean {
        Some(m) => {
            let rho3 = m * d / (s * s1);
            let rho4 = p.cap.map(|a| rho3 - a * s / s1);
            let a0 = d * m / (s * s);
            let a1 = -(1.0 - p.lambda / p.r) * d * m * m / (s * s);
            let d0 = -2.0 * p.r / (sigma_rho2 + d * d * m * m / (s * s));
            (Some(rho3), rho4, Some(a0), Some(a1), Some(d0))
        }
        None => (None, None, None, None, None),
    };

    let (v_prime_zero, a_star_zero_capped) = match p.cap {
        None => (-b, None),
        Some(cap) => {
            let (value, arg) = zero_surplus_minimum(p, cap, a_star_zero);
            (value, Some(arg))
        }
    };

    Ok(DerivedConstants {
        gamma,
        c_rho,
        sigma_rho2,
        rho1,
        rho2,
        rho3,
        rho4,
        b,
        eta,
        a_star_zero,
        v_prime_zero,
        a_star_zero_capped,
        a_tilde0,
        a_tilde1,
        tail_exponent: p.lambda / p.r - 1.0,
        d0,
    })
}

/// Minimum over `a` in `[0, cap]` of `-2 (c + (mu - r) a) / Q(a)`, the slope of
/// `v` at zero surplus. Candidates are the end points and the stationary point.
fn zero_surplus_minimum(p: &ModelParams, cap: f64, stationary: f64) -> (f64, f64) {
    let f = |a: f64| -2.0 * (p.c + p.excess() * a) / p.diffusion(a);
    let mut best = (f(0.0), 0.0);
    let mut consider = |a: f64| {
        let val = f(a);
        if val < best.0 {
            best = (val, a);
        }
    };
    if stationary > 0.0 && stationary < cap {
        consider(stationary);
    }
    consider(cap);
    best
}

/// Which end of the control set (or its interior) is optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Investment {
    FullCap,
    Interior,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Rho1,
    Rho2,
    Rho3,
    Rho4,
}

/// Regime classification. Exact threshold hits are reported separately, with the
/// sign of `lambda - r` and the regime it resolves to when that is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Regime {
    Strict {
        investment: Investment,
    },
    Boundary {
        threshold: Threshold,
        lambda_vs_r: SignTag,
        resolves_to: Option<Investment>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignTag {
    Negative,
    Zero,
    Positive,
}

impl From<Ordering> for SignTag {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Less => SignTag::Negative,
            Ordering::Equal => SignTag::Zero,
            Ordering::Greater => SignTag::Positive,
        }
    }
}

impl Regime {
    pub fn strict(investment: Investment) -> Self {
        Regime::Strict { investment }
    }

    /// The investment rule in force, if the classification determines one.
    pub fn investment(&self) -> Option<Investment> {
        match *self {
            Regime::Strict { investment } => Some(investment),
            Regime::Boundary { resolves_to, .. } => resolves_to,
        }
    }

    pub fn is_boundary(&self) -> bool {
        matches!(self, Regime::Boundary { .. })
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= THRESHOLD_RTOL * a.abs().max(b.abs()).max(1.0)
}

fn lambda_vs_r(p: &ModelParams) -> SignTag {
    if near(p.lambda, p.r) {
        SignTag::Zero
    } else {
        p.lambda.partial_cmp(&p.r).unwrap_or(Ordering::Equal).into()
    }
}

/// Investment regime at low surplus for the capped problem.
pub fn classify_zero_regime(constants: &DerivedConstants, params: &ModelParams) -> Result<Regime> {
    params.cap_or_err()?;
    if params.mu <= params.r {
        return Err(Error::Unsupported(
            "zero-surplus regimes are only characterised for mu > r".into(),
        ));
    }
    let rho1 = constants.rho1;
    let rho2 = constants
        .rho2
        .ok_or_else(|| Error::Unsupported("derived constants were computed without a cap".into()))?;
    let rho = params.rho;
    let sign = lambda_vs_r(params);
    let regime = if near(rho, rho2) {
        Regime::Boundary {
            threshold: Threshold::Rho2,
            lambda_vs_r: sign,
            resolves_to: None,
        }
    } else if near(rho, rho1) {
        Regime::Boundary {
            threshold: Threshold::Rho1,
            lambda_vs_r: sign,
            resolves_to: None,
        }
    } else if rho < rho2 {
        Regime::strict(Investment::FullCap)
    } else if rho < rho1 {
        Regime::strict(Investment::Interior)
    } else {
        Regime::strict(Investment::Zero)
    };
    Ok(regime)
}

/// Investment regime at large surplus for the capped problem with exponential claims.
pub fn classify_infinity_regime(
    constants: &DerivedConstants,
    params: &ModelParams,
    claims: &ClaimDistribution,
) -> Result<Regime> {
    let cap = params.cap_or_err()?;
    let m = claims.exponential_mean().ok_or_else(|| {
        Error::Unsupported(format!(
            "large-surplus regimes need exponential claims, got {}",
            claims.family_name()
        ))
    })?;
    let (rho3, rho4) = match (constants.rho3, constants.rho4) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Unsupported(
                "derived constants were computed without a cap and claim mean".into(),
            ))
        }
    };
    let s = params.sigma;
    let limit = params.excess() * m / (s * s) - params.hedge();
    let sign = lambda_vs_r(params);
    let rho = params.rho;
    let regime = if near(rho, rho4) {
        Regime::Boundary {
            threshold: Threshold::Rho4,
            lambda_vs_r: sign,
            resolves_to: match sign {
                SignTag::Positive => Some(Investment::FullCap),
                SignTag::Negative => Some(Investment::Interior),
                SignTag::Zero => None,
            },
        }
    } else if near(rho, rho3) {
        Regime::Boundary {
            threshold: Threshold::Rho3,
            lambda_vs_r: sign,
            resolves_to: match sign {
                SignTag::Positive => Some(Investment::Interior),
                SignTag::Negative => Some(Investment::Zero),
                SignTag::Zero => None,
            },
        }
    } else if limit > cap {
        Regime::strict(Investment::FullCap)
    } else if limit < 0.0 {
        Regime::strict(Investment::Zero)
    } else {
        Regime::strict(Investment::Interior)
    };
    Ok(regime)
}
