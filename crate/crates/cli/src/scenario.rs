//! Flat `key = value` scenario files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ruinvest::mc::SimConfig;
use ruinvest::{ClaimDistribution, Grid, ModelParams};

use crate::error::{CliError, Result};

pub const KEYS: [&str; 18] = [
    "mu",
    "r",
    "c",
    "lambda",
    "rho",
    "sigma",
    "sigma1",
    "cap_A",
    "claim.family",
    "claim.p1",
    "claim.p2",
    "grid.h",
    "grid.xmax",
    "mc.dt",
    "mc.paths",
    "mc.horizon",
    "mc.seed",
    "mc.safe_level",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ModelParams,
    pub claims: ClaimDistribution,
    pub grid_h: f64,
    pub grid_xmax: f64,
    pub mc: SimConfig,
}

impl Scenario {
    pub fn from_params(params: ModelParams, claims: ClaimDistribution) -> Self {
        Scenario {
            params,
            claims,
            grid_h: 5e-3,
            grid_xmax: 40.0,
            mc: SimConfig {
                dt: 1e-3,
                horizon: 200.0,
                n_paths: 10_000,
                safe_level: 60.0,
                master_seed: 1,
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::MissingFile { path: path.into(), source })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// `origin` labels error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let syntax = |message: String| CliError::Syntax { path: origin.into(), line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(known) = KEYS.iter().find(|k| **k == key) else {
                return Err(CliError::UnknownKey { path: origin.into(), line, key: key.into() });
            };
            if value.is_empty() {
                return Err(syntax(format!("key `{key}` has no value")));
            }
            if entries.insert(known, (line, value)).is_some() {
                return Err(syntax(format!("duplicate key `{key}`")));
            }
        }

        let get = |key: &str| entries.get(key).copied();
        let number = |key: &str| -> Result<Option<f64>> {
            match get(key) {
                None => Ok(None),
                Some((line, v)) => v.parse::<f64>().map(Some).map_err(|_| CliError::Syntax {
                    path: origin.into(),
                    line,
                    message: format!("value of `{key}` is not a number: `{v}`"),
                }),
            }
        };
        let integer = |key: &str| -> Result<Option<u64>> {
            match get(key) {
                None => Ok(None),
                Some((line, v)) => v.parse::<u64>().map(Some).map_err(|_| CliError::Syntax {
                    path: origin.into(),
                    line,
                    message: format!("value of `{key}` is not a non-negative integer: `{v}`"),
                }),
            }
        };
        let required = |key: &str| -> Result<f64> {
            number(key)?.ok_or_else(|| CliError::MissingKey { path: origin.into(), key: key.into() })
        };

        let params = ModelParams {
            c: required("c")?,
            r: required("r")?,
            mu: required("mu")?,
            sigma: required("sigma")?,
            sigma1: required("sigma1")?,
            rho: required("rho")?,
            lambda: required("lambda")?,
            cap: number("cap_A")?,
        };
        let family = get("claim.family")
            .map(|(_, v)| v)
            .ok_or_else(|| CliError::MissingKey { path: origin.into(), key: "claim.family".into() })?;
        let mut claim_params = vec![required("claim.p1")?];
        if let Some(p2) = number("claim.p2")? {
            claim_params.push(p2);
        }
        let claims = ClaimDistribution::from_family(family, &claim_params).map_err(|e| claim_error(family, e))?;

        let mut s = Scenario::from_params(params, claims);
        if let Some(h) = number("grid.h")? {
            s.grid_h = h;
        }
        if let Some(x) = number("grid.xmax")? {
            s.grid_xmax = x;
        }
        if let Some(dt) = number("mc.dt")? {
            s.mc.dt = dt;
        }
        if let Some(n) = integer("mc.paths")? {
            s.mc.n_paths = n as usize;
        }
        if let Some(t) = number("mc.horizon")? {
            s.mc.horizon = t;
        }
        if let Some(seed) = integer("mc.seed")? {
            s.mc.master_seed = seed;
        }
        if let Some(level) = number("mc.safe_level")? {
            s.mc.safe_level = level;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid()?;
        if self.mc.n_paths == 0 {
            return Err(CliError::invalid("mc.paths", "must be positive"));
        }
        for (key, v) in [("mc.dt", self.mc.dt), ("mc.horizon", self.mc.horizon), ("mc.safe_level", self.mc.safe_level)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::invalid(key, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        if !(self.grid_h > 0.0 && self.grid_h.is_finite()) {
            return Err(CliError::invalid("grid.h", format!("must be positive, got {}", self.grid_h)));
        }
        if !(self.grid_xmax >= 2.0 * self.grid_h && self.grid_xmax.is_finite()) {
            return Err(CliError::invalid("grid.xmax", format!("must be at least 2 grid.h, got {}", self.grid_xmax)));
        }
        Ok(Grid::covering(self.grid_h, self.grid_xmax)?)
    }

    /// Scenario text with every number at full precision; parsing it gives
    /// back an identical scenario.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("mu", p.mu.to_string());
        put("r", p.r.to_string());
        put("c", p.c.to_string());
        put("lambda", p.lambda.to_string());
        put("rho", p.rho.to_string());
        put("sigma", p.sigma.to_string());
        put("sigma1", p.sigma1.to_string());
        if let Some(a) = p.cap {
            put("cap_A", a.to_string());
        }
        put("claim.family", self.claims.family_name().into());
        for (i, v) in self.claims.parameters().iter().enumerate() {
            put(&format!("claim.p{}", i + 1), v.to_string());
        }
        put("grid.h", self.grid_h.to_string());
        put("grid.xmax", self.grid_xmax.to_string());
        put("mc.dt", self.mc.dt.to_string());
        put("mc.paths", self.mc.n_paths.to_string());
        put("mc.horizon", self.mc.horizon.to_string());
        put("mc.seed", self.mc.master_seed.to_string());
        put("mc.safe_level", self.mc.safe_level.to_string());
        out
    }
}

/// Renames the distribution's own parameter names to scenario keys.
fn claim_error(family: &str, e: ruinvest::Error) -> CliError {
    let ruinvest::Error::InvalidParameter { name, reason } = e else {
        return e.into();
    };
    let key = match (family, name) {
        (_, "claim.family") => "claim.family",
        (_, "claim.params") => "claim.p2",
        ("log_normal", "log_scale") | ("weibull" | "pareto", "shape") => "claim.p2",
        _ => "claim.p1",
    };
    CliError::invalid(key, reason)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = "# example 1\nmu = 0.42\nr = 0.32\nc = 0.36\nlambda = 0.3\nrho = -0.2\nsigma = 0.1\nsigma1 = 0.2\n\
                       claim.family = exponential\nclaim.p1 = 1\n";

    #[test]
    fn parses_example() {
        let s = Scenario::parse(EX1, "t").unwrap();
        assert_eq!(s.params, ModelParams::example1());
        assert_eq!(s.claims, ClaimDistribution::exponential(1.0).unwrap());
        assert_eq!(s.grid_h, 5e-3);
    }

    #[test]
    fn text_round_trip() {
        let mut s = Scenario::parse(EX1, "t").unwrap();
        s.params.c = 0.1 + 0.2;
        s.params.cap = Some(1.0 / 3.0);
        let back = Scenario::parse(&s.to_text(), "echo").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn errors_name_the_key() {
        let e = Scenario::parse(&format!("{EX1}colour = 3\n"), "t").unwrap_err();
        assert!(matches!(e, CliError::UnknownKey { ref key, line: 11, .. } if key == "colour"));
        assert_eq!(e.exit_code(), 3);

        let e = Scenario::parse(&EX1.replace("rho = -0.2", "rho = 1.5"), "t").unwrap_err();
        assert!(matches!(e, CliError::InvalidParameter { ref key, .. } if key == "rho"));
        assert_eq!(e.exit_code(), 4);

        let e = Scenario::parse(&EX1.replace("mu = 0.42\n", ""), "t").unwrap_err();
        assert!(e.to_string().contains("`mu`"));

        let e = Scenario::parse(&EX1.replace("claim.p1 = 1", "claim.p1 = -1"), "t").unwrap_err();
        assert!(matches!(e, CliError::InvalidParameter { ref key, .. } if key == "claim.p1"));

        let text = EX1.replace("exponential", "pareto").replace("claim.p1 = 1", "claim.p1 = 2\nclaim.p2 = 0.5");
        let e = Scenario::parse(&text, "t").unwrap_err();
        assert!(matches!(e, CliError::InvalidParameter { ref key, .. } if key == "claim.p2"));

        let e = Scenario::parse(&EX1.replace("c = 0.36", "c = abc"), "t").unwrap_err();
        assert!(e.to_string().contains("`c`"));
        let e = Scenario::parse(&format!("{EX1}c = 1\n"), "t").unwrap_err();
        assert!(e.to_string().contains("duplicate key `c`"));
    }
}
