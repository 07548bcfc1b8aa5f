//! Sampled investment strategies.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{interpolate, Grid};

/// Rule for evaluating a strategy beyond the last grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Extrapolation {
    HoldLast,
    /// `limit + coeff / x`.
    Asymptote { limit: f64, coeff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyCurve {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Closed interval the amount is clamped to, if any.
    pub bounds: Option<(f64, f64)>,
    pub extrapolation: Extrapolation,
}

impl StrategyCurve {
    pub fn new(grid: Grid, values: Vec<f64>, bounds: Option<(f64, f64)>, extrapolation: Extrapolation) -> Result<Self> {
        if values.len() != grid.n {
            return Err(invalid("values", format!("expected {} samples, got {}", grid.n, values.len())));
        }
        if let Some((lo, hi)) = bounds {
            if !(lo <= hi) {
                return Err(invalid("bounds", format!("empty interval [{lo}, {hi}]")));
            }
        }
        Ok(StrategyCurve {
            grid,
            values,
            bounds,
            extrapolation,
        })
    }

    /// The strategy that always holds `amount`.
    pub fn constant(amount: f64) -> Self {
        StrategyCurve {
            grid: Grid { h: 1.0, n: 2 },
            values: vec![amount, amount],
            bounds: None,
            extrapolation: Extrapolation::HoldLast,
        }
    }

    /// Amount at surplus `x`: linear interpolation on the grid, the
    /// extrapolation rule beyond it, clamped to the bounds.
    pub fn eval(&self, x: f64) -> f64 {
        let raw = match self.extrapolation {
            Extrapolation::Asymptote { limit, coeff } if x > self.grid.x_max() => limit + coeff / x,
            _ => interpolate(&self.values, self.grid.h, x),
        };
        match self.bounds {
            Some((lo, hi)) => raw.clamp(lo, hi),
            None => raw,
        }
    }

    /// Least-squares line `intercept + slope x` through the samples on `[lo, hi]`.
    pub fn linear_fit(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .grid
            .points()
            .zip(&self.values)
            .filter(|(x, _)| *x >= lo - 1e-12 && *x <= hi + 1e-12)
            .map(|(x, &y)| (x, y))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        Some((my - slope * mx, slope))
    }
}
