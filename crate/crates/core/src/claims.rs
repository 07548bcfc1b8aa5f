//! Claim-size distributions. The tail `H = 1 - F` is the primary
//! representation; density and CDF are provided alongside.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::gamma;

use crate::error::{invalid, require_positive, Result};

/// Names accepted by [`ClaimDistribution::from_family`].
pub const FAMILIES: [&str; 5] = ["exponential", "half_normal", "log_normal", "weibull", "pareto"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum ClaimDistribution {
    Exponential { rate: f64 },
    HalfNormal { scale: f64 },
    LogNormal { location: f64, log_scale: f64 },
    Weibull { scale: f64, shape: f64 },
    Pareto { scale: f64, shape: f64 },
}

/// Standard normal upper tail `1 - Phi(z)`.
fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        require_positive("rate", rate)?;
        Ok(ClaimDistribution::Exponential { rate })
    }

    pub fn exponential_with_mean(mean: f64) -> Result<Self> {
        require_positive("mean", mean)?;
        Ok(ClaimDistribution::Exponential { rate: 1.0 / mean })
    }

    pub fn half_normal(scale: f64) -> Result<Self> {
        require_positive("scale", scale)?;
        Ok(ClaimDistribution::HalfNormal { scale })
    }

    pub fn log_normal(location: f64, log_scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(invalid("location", format!("must be finite, got {location}")));
        }
        require_positive("log_scale", log_scale)?;
        Ok(ClaimDistribution::LogNormal { location, log_scale })
    }

    pub fn weibull(scale: f64, shape: f64) -> Result<Self> {
        require_positive("scale", scale)?;
        require_positive("shape", shape)?;
        Ok(ClaimDistribution::Weibull { scale, shape })
    }

    /// Pareto (Lomax) claims; `shape <= 1` has no finite mean and is rejected.
    pub fn pareto(scale: f64, shape: f64) -> Result<Self> {
        require_positive("scale", scale)?;
        require_positive("shape", shape)?;
        if shape <= 1.0 {
            return Err(invalid("shape", format!("Pareto shape must exceed 1 for a finite mean, got {shape}")));
        }
        Ok(ClaimDistribution::Pareto { scale, shape })
    }

    /// Builds a distribution from a family name and its ordered parameters.
    pub fn from_family(name: &str, params: &[f64]) -> Result<Self> {
        let arity = match name {
            "exponential" | "half_normal" => 1,
            "log_normal" | "weibull" | "pareto" => 2,
            _ => {
                return Err(invalid(
                    "claim.family",
                    format!("unknown family `{name}`, expected one of {}", FAMILIES.join(", ")),
                ))
            }
        };
        if params.len() != arity {
            return Err(invalid(
                "claim.params",
                format!("family `{name}` takes {arity} parameter(s), got {}", params.len()),
            ));
        }
        match name {
            "exponential" => Self::exponential(params[0]),
            "half_normal" => Self::half_normal(params[0]),
            "log_normal" => Self::log_normal(params[0], params[1]),
            "weibull" => Self::weibull(params[0], params[1]),
            _ => Self::pareto(params[0], params[1]),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            ClaimDistribution::Exponential { .. } => "exponential",
            ClaimDistribution::HalfNormal { .. } => "half_normal",
            ClaimDistribution::LogNormal { .. } => "log_normal",
            ClaimDistribution::Weibull { .. } => "weibull",
            ClaimDistribution::Pareto { .. } => "pareto",
        }
    }

    /// Ordered parameters, as accepted by [`Self::from_family`].
    pub fn parameters(&self) -> Vec<f64> {
        match *self {
            ClaimDistribution::Exponential { rate } => vec![rate],
            ClaimDistribution::HalfNormal { scale } => vec![scale],
            ClaimDistribution::LogNormal { location, log_scale } => vec![location, log_scale],
            ClaimDistribution::Weibull { scale, shape } | ClaimDistribution::Pareto { scale, shape } => {
                vec![scale, shape]
            }
        }
    }

    /// Mean of exponential claims, `None` for the other families.
    pub fn exponential_mean(&self) -> Option<f64> {
        match *self {
            ClaimDistribution::Exponential { rate } => Some(1.0 / rate),
            _ => None,
        }
    }

    pub fn tail(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        match *self {
            ClaimDistribution::Exponential { rate } => (-rate * y).exp(),
            ClaimDistribution::HalfNormal { scale } => erfc(y / (scale * SQRT_2)),
            ClaimDistribution::LogNormal { location, log_scale } => normal_sf((y.ln() - location) / log_scale),
            ClaimDistribution::Weibull { scale, shape } => (-(y / scale).powf(shape)).exp(),
            ClaimDistribution::Pareto { scale, shape } => (scale / (scale + y)).powf(shape),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match *self {
            ClaimDistribution::Exponential { rate } => -(-rate * y).exp_m1(),
            ClaimDistribution::Weibull { scale, shape } => -(-(y / scale).powf(shape)).exp_m1(),
            _ => 1.0 - self.tail(y),
        }
    }

    /// Density on `(0, inf)`; zero for `y < 0`. At `y = 0` the right limit is
    /// returned, which is infinite for Weibull with shape below one.
    pub fn density(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        match *self {
            ClaimDistribution::Exponential { rate } => rate * (-rate * y).exp(),
            ClaimDistribution::HalfNormal { scale } => {
                (-y * y / (2.0 * scale * scale)).exp() / (scale * (PI / 2.0).sqrt())
            }
            ClaimDistribution::LogNormal { location, log_scale } => {
                if y == 0.0 {
                    return 0.0;
                }
                let z = (y.ln() - location) / log_scale;
                (-0.5 * z * z).exp() / (y * log_scale * (2.0 * PI).sqrt())
            }
            ClaimDistribution::Weibull { scale, shape } => {
                let t = y / scale;
                if y == 0.0 {
                    return match shape.partial_cmp(&1.0) {
                        Some(std::cmp::Ordering::Less) => f64::INFINITY,
                        Some(std::cmp::Ordering::Equal) => 1.0 / scale,
                        _ => 0.0,
                    };
                }
                shape / scale * t.powf(shape - 1.0) * (-t.powf(shape)).exp()
            }
            ClaimDistribution::Pareto { scale, shape } => shape / scale * (scale / (scale + y)).powf(shape + 1.0),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ClaimDistribution::Exponential { rate } => 1.0 / rate,
            ClaimDistribution::HalfNormal { scale } => scale * FRAC_2_PI.sqrt(),
            ClaimDistribution::LogNormal { location, log_scale } => (location + 0.5 * log_scale * log_scale).exp(),
            ClaimDistribution::Weibull { scale, shape } => scale * gamma(1.0 + 1.0 / shape),
            ClaimDistribution::Pareto { scale, shape } => scale / (shape - 1.0),
        }
    }

    /// Claim size `y` with `H(y) = u` for `u` in `(0, 1]`. Feeding a uniform
    /// variate gives an exact draw from the distribution.
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        let u = u.clamp(f64::MIN_POSITIVE, 1.0);
        match *self {
            ClaimDistribution::Exponential { rate } => -u.ln() / rate,
            ClaimDistribution::HalfNormal { scale } => scale * SQRT_2 * erfc_inv(u),
            ClaimDistribution::LogNormal { location, log_scale } => {
                if u >= 1.0 {
                    return 0.0;
                }
                (location + log_scale * SQRT_2 * erfc_inv(2.0 * u)).exp()
            }
            ClaimDistribution::Weibull { scale, shape } => scale * (-u.ln()).powf(1.0 / shape),
            ClaimDistribution::Pareto { scale, shape } => scale * (u.powf(-1.0 / shape) - 1.0),
        }
    }

    /// Claim size at which `F(y) = p`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.sample_from_uniform(1.0 - p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn corpus() -> Vec<ClaimDistribution> {
        vec![
            ClaimDistribution::exponential(1.0).unwrap(),
            ClaimDistribution::exponential(0.5).unwrap(),
            ClaimDistribution::half_normal((PI / 2.0).sqrt()).unwrap(),
            ClaimDistribution::log_normal(-0.5, 1.0).unwrap(),
            ClaimDistribution::weibull(1.0, 0.5).unwrap(),
            ClaimDistribution::weibull(2.0, 1.7).unwrap(),
            ClaimDistribution::pareto(2.0, 2.0).unwrap(),
            ClaimDistribution::pareto(1.0, 3.5).unwrap(),
        ]
    }

    #[test]
    fn closed_form_examples() {
        let e1 = ClaimDistribution::exponential(1.0).unwrap();
        assert!((e1.tail(1.0) - 0.3678794).abs() < 1e-7);
        assert_eq!(e1.tail(0.0), 1.0);
        assert_eq!(ClaimDistribution::exponential(0.5).unwrap().mean(), 2.0);

        let hn = ClaimDistribution::half_normal((PI / 2.0).sqrt()).unwrap();
        assert_relative_eq!(hn.mean(), 1.0, max_relative = 1e-15);
        assert_eq!(hn.tail(0.0), 1.0);
        assert!((ClaimDistribution::half_normal(1.0).unwrap().tail(1.0) - 0.3173105).abs() < 1e-7);

        let ln = ClaimDistribution::log_normal(-0.5, 1.0).unwrap();
        assert_relative_eq!(ln.mean(), 1.0, max_relative = 1e-15);
        assert_eq!(ln.tail(0.0), 1.0);
        assert!((ln.tail(1e-300) - 1.0).abs() < 1e-12);
        assert!((ClaimDistribution::log_normal(0.0, 1.0).unwrap().tail(1.0) - 0.5).abs() < 1e-15);

        let wb = ClaimDistribution::weibull(1.0, 0.5).unwrap();
        assert_relative_eq!(wb.mean(), 2.0, max_relative = 1e-12);
        assert!((wb.tail(4.0) - 0.1353353).abs() < 1e-7);

        let pa = ClaimDistribution::pareto(2.0, 2.0).unwrap();
        assert_eq!(pa.mean(), 2.0);
        assert_eq!(pa.tail(0.0), 1.0);
        assert!((pa.tail(2.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn weibull_shape_one_is_exponential() {
        let w = ClaimDistribution::weibull(2.0, 1.0).unwrap();
        let e = ClaimDistribution::exponential(0.5).unwrap();
        for i in 0..100 {
            let y = 0.13 * i as f64;
            assert_relative_eq!(w.tail(y), e.tail(y), max_relative = 1e-14);
            assert_relative_eq!(w.density(y), e.density(y), max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ClaimDistribution::exponential(0.0).is_err());
        assert!(ClaimDistribution::exponential(-1.0).is_err());
        assert!(ClaimDistribution::half_normal(0.0).is_err());
        assert!(ClaimDistribution::log_normal(0.0, 0.0).is_err());
        assert!(ClaimDistribution::weibull(1.0, 0.0).is_err());
        assert!(ClaimDistribution::weibull(-1.0, 1.0).is_err());
        assert!(ClaimDistribution::pareto(2.0, 1.0).is_err());
        assert!(ClaimDistribution::pareto(2.0, 0.5).is_err());
        assert!(ClaimDistribution::from_family("gamma", &[1.0]).is_err());
        assert!(ClaimDistribution::from_family("weibull", &[1.0]).is_err());
    }

    #[test]
    fn family_round_trip() {
        for d in corpus() {
            let back = ClaimDistribution::from_family(d.family_name(), &d.parameters()).unwrap();
            assert_eq!(back, d);
        }
    }

    #[test]
    fn tail_is_monotone_and_complements_cdf() {
        for d in corpus() {
            let y_big = d.quantile(1.0 - 1e-8);
            let n = 10_000;
            let mut prev = 1.0;
            for i in 0..=n {
                let y = y_big * i as f64 / n as f64;
                let h = d.tail(y);
                assert!(h <= prev + 1e-15, "{d:?} not monotone at {y}");
                assert!((1.0 - h - d.cdf(y)).abs() <= 1e-12);
                prev = h;
            }
            assert!(d.tail(1e12) < 1e-6);
        }
    }

    // Substituting y = s^2 removes the integrable Weibull singularity at zero.
    fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let g = |s: f64| 2.0 * s * f(s * s);
        crate::numerics::adaptive_simpson(&g, lo.sqrt(), hi.sqrt(), 1e-12, 40)
    }

    #[test]
    fn density_integrates_to_cdf() {
        for d in corpus() {
            let y_big = d.quantile(1.0 - 1e-8);
            let total = integrate(|y| d.density(y), 0.0, y_big);
            assert!((total - 1.0).abs() < 1e-6, "{d:?}: {total}");
            for k in 1..=20 {
                let y = y_big * k as f64 / 20.0;
                let part = integrate(|s| d.density(s), 0.0, y);
                assert!((part - d.cdf(y)).abs() < 1e-6, "{d:?} at {y}");
            }
        }
    }

    #[test]
    fn mean_matches_integrated_tail() {
        for d in corpus() {
            // split at the quantile to keep Simpson on bounded pieces
            let q = d.quantile(1.0 - 1e-6);
            let mut total = integrate(|y| d.tail(y), 0.0, q);
            let mut lo = q;
            loop {
                let hi = lo * 4.0;
                let piece = integrate(|y| d.tail(y), lo, hi);
                total += piece;
                lo = hi;
                if piece < 1e-13 * total || lo > 1e12 {
                    break;
                }
            }
            if let ClaimDistribution::Pareto { scale, shape } = d {
                // closed-form remainder of the polynomial tail
                total += scale.powf(shape) * (scale + lo).powf(1.0 - shape) / (shape - 1.0);
            }
            assert_relative_eq!(total, d.mean(), max_relative = 1e-6);
        }
    }

    #[test]
    fn sampling_inverts_tail() {
        for d in corpus() {
            for k in 1..50 {
                let u = k as f64 / 50.0;
                let y = d.sample_from_uniform(u);
                assert!((d.tail(y) - u).abs() < 1e-10, "{d:?} u={u}");
            }
        }
    }

    proptest! {
        #[test]
        fn exponential_memoryless(k in 0.05f64..5.0, s in 0.0f64..10.0, t in 0.0f64..10.0) {
            let e = ClaimDistribution::exponential(k).unwrap();
            let lhs = e.tail(s + t);
            let rhs = e.tail(s) * e.tail(t);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300) + 1e-300);
        }

        #[test]
        fn sweep_tail_properties(fam in 0usize..5, p1 in 0.2f64..3.0, p2 in 1.1f64..4.0, y in 0.0f64..50.0, dy in 0.0f64..5.0) {
            let d = match fam {
                0 => ClaimDistribution::exponential(p1).unwrap(),
                1 => ClaimDistribution::half_normal(p1).unwrap(),
                2 => ClaimDistribution::log_normal(p1 - 1.0, p1).unwrap(),
                3 => ClaimDistribution::weibull(p1, p2 - 0.9).unwrap(),
                _ => ClaimDistribution::pareto(p1, p2).unwrap(),
            };
            prop_assert!(d.tail(y + dy) <= d.tail(y) + 1e-15);
            prop_assert!((1.0 - d.tail(y) - d.cdf(y)).abs() <= 1e-12);
            prop_assert!(d.density(y + 1e-9) >= 0.0);
        }
    }
}
