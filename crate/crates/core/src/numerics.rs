//! Uniform grids, trapezoid convolutions and prefix integrals.

use serde::{Deserialize, Serialize};

use crate::claims::ClaimDistribution;
use crate::error::{invalid, Error, Result};

/// Uniform grid `x_j = j h`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub h: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(h: f64, n: usize) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("grid.h", format!("step must be positive, got {h}")));
        }
        if n < 2 {
            return Err(invalid("grid.n", format!("need at least two points, got {n}")));
        }
        Ok(Grid { h, n })
    }

    /// Grid with step `h` whose last point is the first one at or beyond `x_max`.
    pub fn covering(h: f64, x_max: f64) -> Result<Self> {
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(invalid("grid.xmax", format!("must be positive, got {x_max}")));
        }
        let steps = (x_max / h - 1e-9).ceil().max(1.0) as usize;
        Grid::new(h, steps + 1)
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.x(j))
    }

    pub fn check(&self, j: usize) -> Result<()> {
        if j < self.n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: j, len: self.n })
        }
    }

    /// Index of the last grid point not beyond `x` (clamped to the grid).
    pub fn floor_index(&self, x: f64) -> usize {
        if x <= 0.0 {
            return 0;
        }
        ((x / self.h + 1e-9).floor() as usize).min(self.n - 1)
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> SampledFn {
        SampledFn {
            grid: *self,
            values: self.points().map(f).collect(),
        }
    }
}

/// Grid samples with piecewise-linear interpolation. Outside the grid the end
/// values are held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledFn {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl SampledFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(invalid(
                "values",
                format!("expected {} samples, got {}", grid.n, values.len()),
            ));
        }
        Ok(SampledFn { grid, values })
    }

    pub fn at(&self, j: usize) -> f64 {
        self.values[j]
    }

    pub fn eval(&self, x: f64) -> f64 {
        interpolate(&self.values, self.grid.h, x)
    }
}

/// Linear interpolation of equally spaced samples starting at zero.
pub fn interpolate(values: &[f64], h: f64, x: f64) -> f64 {
    let n = values.len();
    if x <= 0.0 {
        return values[0];
    }
    let t = x / h;
    let i = t.floor() as usize;
    if i + 1 >= n {
        return values[n - 1];
    }
    let frac = t - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Claim tail sampled on a grid, `H_i = H(i h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailKernel {
    pub h: f64,
    pub values: Vec<f64>,
}

impl TailKernel {
    pub fn new(dist: &ClaimDistribution, grid: &Grid) -> Self {
        TailKernel {
            h: grid.h,
            values: grid.points().map(|x| dist.tail(x)).collect(),
        }
    }

    /// Trapezoid value of `int_0^{x_j} H(y) w(x_j - y) dy` using samples `w[0..=j]`.
    pub fn convolve(&self, w: &[f64], j: usize) -> f64 {
        if j == 0 {
            return 0.0;
        }
        let hk = &self.values;
        let inner: f64 = (1..j).map(|i| hk[i] * w[j - i]).sum();
        self.h * (0.5 * hk[0] * w[j] + inner + 0.5 * hk[j] * w[0])
    }
}

/// Trapezoid approximation of `int_0^{x_j} H(y) w(x_j - y) dy`.
pub fn convolve_tail(w: &SampledFn, tail: impl Fn(f64) -> f64, j: usize) -> Result<f64> {
    w.grid.check(j)?;
    if j == 0 {
        return Ok(0.0);
    }
    let h = w.grid.h;
    let y = &w.values;
    let inner: f64 = (1..j).map(|i| tail(i as f64 * h) * y[j - i]).sum();
    Ok(h * (0.5 * tail(0.0) * y[j] + inner + 0.5 * tail(j as f64 * h) * y[0]))
}

/// Jump operator `lambda [W(x_j) - int_0^{x_j} W(x_j - s) f(s) ds]`.
///
/// Evaluated as `lambda [W(x_j) H(x_j) + int_0^{x_j} (W(x_j) - W(x_j - s)) f(s) ds]`
/// with the trapezoid rule on the second term, so that a non-decreasing `W`
/// always gives a non-negative value. When the density is unbounded at zero the
/// first cell uses `F(h)` times the mean of its end values.
pub fn jump_operator_m(big_w: &SampledFn, dist: &ClaimDistribution, lambda: f64, j: usize) -> Result<f64> {
    big_w.grid.check(j)?;
    let w = &big_w.values;
    if j == 0 {
        return Ok(lambda * w[0]);
    }
    let h = big_w.grid.h;
    let wj = w[j];
    let mut integral: f64 = (1..j).map(|i| dist.density(i as f64 * h) * (wj - w[j - i])).sum::<f64>() * h;
    integral += 0.5 * h * dist.density(j as f64 * h) * (wj - w[0]);
    if !dist.density(0.0).is_finite() {
        // the s = 0 node carries a zero difference; redo the first cell
        integral -= 0.5 * h * dist.density(h) * (wj - w[j - 1]);
        integral += 0.5 * (wj - w[j - 1]) * dist.cdf(h);
    }
    Ok(lambda * (wj * dist.tail(j as f64 * h) + integral))
}

/// Cumulative trapezoid integral with value zero at the origin.
pub fn integrate_prefix(w: &SampledFn) -> SampledFn {
    SampledFn {
        grid: w.grid,
        values: cumulative_trapezoid(&w.values, w.grid.h, 0.0),
    }
}

pub fn cumulative_trapezoid(y: &[f64], h: f64, start: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = start;
    out.push(acc);
    for pair in y.windows(2) {
        acc += 0.5 * h * (pair[0] + pair[1]);
        out.push(acc);
    }
    out
}

/// Adaptive Simpson quadrature on `[a, b]`. The integrand is never evaluated at
/// the end points themselves when they are singular, since only interior nodes
/// `a + k (b - a) / 4` are used after the first split; end-point values that
/// are not finite are replaced by zero.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    let g = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let fa = g(a);
    let fb = g(b);
    let m = 0.5 * (a + b);
    let fm = g(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&g, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp1() -> ClaimDistribution {
        ClaimDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn grid_layout() {
        let g = Grid::covering(5e-3, 40.0).unwrap();
        assert_eq!(g.n, 8001);
        assert_eq!(g.x(0), 0.0);
        assert!((g.x_max() - 40.0).abs() < 1e-12);
        assert!(Grid::new(0.0, 10).is_err());
        assert!(Grid::new(0.1, 1).is_err());
    }

    #[test]
    fn convolution_examples() {
        let g = Grid::new(1e-3, 2001).unwrap();
        let ones = g.sample(|_| 1.0);
        assert_eq!(convolve_tail(&ones, |_| 1.0, 0).unwrap(), 0.0);
        assert!((convolve_tail(&ones, |_| 1.0, 2000).unwrap() - 2.0).abs() < 1e-12);
        let v = convolve_tail(&ones, |y| (-y).exp(), 1000).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
        assert!(matches!(
            convolve_tail(&ones, |_| 1.0, 2001),
            Err(Error::IndexOutOfRange { .. })
        ));
        let k = TailKernel::new(&exp1(), &g);
        assert!((k.convolve(&ones.values, 1000) - v).abs() < 1e-14);
    }

    #[test]
    fn jump_operator_examples() {
        let g = Grid::new(1e-3, 1001).unwrap();
        let w = g.sample(|x| x);
        assert_eq!(jump_operator_m(&w, &exp1(), 0.3, 0).unwrap(), 0.0);
        let m = jump_operator_m(&w, &exp1(), 0.3, 1000).unwrap();
        assert!((m - 0.3 * (1.0 - (-1.0f64).exp())).abs() < 1e-6, "{m}");
    }

    #[test]
    fn jump_operator_singular_density() {
        // W(x) = x: M = lambda int_0^x H
        let d = ClaimDistribution::weibull(1.0, 0.5).unwrap();
        let g = Grid::new(1e-3, 2001).unwrap();
        let w = g.sample(|x| x);
        let m = jump_operator_m(&w, &d, 1.0, 2000).unwrap();
        let exact = adaptive_simpson(&|y| d.tail(y), 0.0, 2.0, 1e-12, 40);
        assert!((m - exact).abs() < 2e-3, "{m} vs {exact}");
    }

    #[test]
    fn prefix_examples() {
        let g = Grid::new(0.01, 101).unwrap();
        let w = integrate_prefix(&g.sample(|_| 1.0));
        for j in 0..g.n {
            assert!((w.at(j) - g.x(j)).abs() < 1e-13);
        }
        let w = integrate_prefix(&g.sample(|x| x));
        assert!((w.at(100) - 0.5).abs() <= g.h * g.h);
    }

    #[test]
    fn second_order_convergence() {
        // int_0^1 e^{-y} cos(1 - y) dy
        let exact = {
            let f = |y: f64| (-y).exp() * (1.0 - y).cos();
            adaptive_simpson(&f, 0.0, 1.0, 1e-14, 50)
        };
        let err = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let g = Grid::new(h, n + 1).unwrap();
            let w = g.sample(|x| x.cos());
            (convolve_tail(&w, |y| (-y).exp(), n).unwrap() - exact).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((3.5..=4.5).contains(&ratio), "convolution ratio {ratio}");

        let perr = |h: f64| {
            let n = (1.0 / h).round() as usize;
            let g = Grid::new(h, n + 1).unwrap();
            let w = integrate_prefix(&g.sample(|x| x.exp()));
            (w.at(n) - (1f64.exp() - 1.0)).abs()
        };
        let ratio = perr(0.02) / perr(0.01);
        assert!((3.5..=4.5).contains(&ratio), "prefix ratio {ratio}");
    }

    #[test]
    fn interpolation_holds_ends() {
        let v = [1.0, 3.0, 2.0];
        assert_eq!(interpolate(&v, 0.5, -1.0), 1.0);
        assert_eq!(interpolate(&v, 0.5, 0.25), 2.0);
        assert_eq!(interpolate(&v, 0.5, 0.75), 2.5);
        assert_eq!(interpolate(&v, 0.5, 7.0), 2.0);
    }

    proptest! {
        #[test]
        fn jump_operator_non_negative(
            fam in 0usize..5,
            incs in proptest::collection::vec(0.0f64..1.0, 50..200),
            h in 0.005f64..0.1,
            j_frac in 0.0f64..1.0,
        ) {
            let d = match fam {
                0 => ClaimDistribution::exponential(1.0).unwrap(),
                1 => ClaimDistribution::half_normal(1.2533141373155).unwrap(),
                2 => ClaimDistribution::log_normal(-0.5, 1.0).unwrap(),
                3 => ClaimDistribution::weibull(1.0, 0.5).unwrap(),
                _ => ClaimDistribution::pareto(2.0, 2.0).unwrap(),
            };
            let g = Grid::new(h, incs.len() + 1).unwrap();
            let mut vals = vec![0.0];
            for x in &incs {
                vals.push(vals.last().unwrap() + x);
            }
            let w = SampledFn::new(g, vals).unwrap();
            let j = ((g.n - 1) as f64 * j_frac) as usize;
            prop_assert!(jump_operator_m(&w, &d, 0.3, j).unwrap() >= -1e-9);
        }

        #[test]
        fn prefix_of_non_negative_is_monotone(vals in proptest::collection::vec(0.0f64..5.0, 2..100)) {
            let g = Grid::new(0.1, vals.len()).unwrap();
            let w = integrate_prefix(&SampledFn::new(g, vals).unwrap());
            prop_assert!(w.values.windows(2).all(|p| p[1] >= p[0]));
        }
    }
}
