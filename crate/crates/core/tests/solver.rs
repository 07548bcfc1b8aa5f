use ruinvest::solver::{
    extract_strategy_constrained, extract_strategy_unconstrained, hjb_residual, hjb_residual_constrained, normalize_delta,
    solve_v_constrained, solve_v_unconstrained, TailModel,
};
use ruinvest::*;

fn exp1() -> ClaimDistribution {
    ClaimDistribution::exponential(1.0).unwrap()
}

fn unconstrained(h: f64, x_max: f64) -> ValueGrid {
    solve_v_unconstrained(&ModelParams::example1(), &exp1(), Grid::covering(h, x_max).unwrap(), &SolveControls::default()).unwrap()
}

fn constrained(cap: f64, h: f64, x_max: f64) -> ValueGrid {
    let p = ModelParams::example1().with_cap(cap);
    solve_v_constrained(&p, &exp1(), Grid::covering(h, x_max).unwrap(), &SolveControls::default()).unwrap()
}

/// Largest gap between two solutions at the nodes of the coarser grid.
fn gap(coarse: &ValueGrid, fine: &ValueGrid) -> f64 {
    let ratio = (coarse.grid.h / fine.grid.h).round() as usize;
    (0..coarse.grid.n).map(|j| (coarse.v[j] - fine.v[ratio * j]).abs()).fold(0.0, f64::max)
}

#[test]
fn unconstrained_refinement() {
    let grids: Vec<ValueGrid> = [1e-2, 5e-3, 2.5e-3].iter().map(|&h| unconstrained(h, 5.0)).collect();
    let res: Vec<f64> = grids
        .iter()
        .map(|vg| hjb_residual(vg, &extract_strategy_unconstrained(vg, Extrapolation::HoldLast).unwrap()).continuous.sup)
        .collect();
    assert!(res[1] <= 0.6 * res[0] && res[2] <= 0.6 * res[1], "{res:?}");
    let (d1, d2) = (gap(&grids[0], &grids[1]), gap(&grids[1], &grids[2]));
    // second order: the h/2 vs h/4 gap is about a quarter of the h vs h/2 gap
    assert!(d1 / d2 > 3.0 && d1 / d2 < 5.0, "{d1} {d2}");
    // h/2 against its Richardson estimate d2 / 3
    assert!(d1 <= 4.0 * 4.0 * d2, "{d1} {d2}");
}

#[test]
fn constrained_refinement() {
    let grids: Vec<ValueGrid> = [1e-2, 5e-3, 2.5e-3].iter().map(|&h| constrained(1.0, h, 3.0)).collect();
    let res: Vec<f64> = grids
        .iter()
        .map(|vg| hjb_residual_constrained(vg, &extract_strategy_constrained(vg).unwrap()).0)
        .collect();
    // the bound holds from h = 5e-3 down; each halving at least halves it
    assert!(res[1] <= 5e-3 * 0.3 && res[2] <= 5e-3 * 0.3, "{res:?}");
    assert!(res[1] <= 0.5 * res[0] && res[2] <= 0.5 * res[1], "{res:?}");
    let (d1, d2) = (gap(&grids[0], &grids[1]), gap(&grids[1], &grids[2]));
    assert!(d2 <= 0.6 * d1, "{d1} {d2}");
}

#[test]
fn wide_cap_matches_unconstrained() {
    // the unconstrained amount stays below 10.4, so a cap of 20 never binds;
    // on the same (refined) grid both operators pick the same amount
    let capped = constrained(20.0, 5e-3, 10.0);
    let free = unconstrained(capped.grid.h, 10.0);
    assert_eq!(free.grid, capped.grid);
    let worst = (0..free.grid.n)
        .map(|j| ((free.v[j] - capped.v[j]) / free.v[j]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
    let a_free = extract_strategy_unconstrained(&free, Extrapolation::HoldLast).unwrap();
    let a_cap = extract_strategy_constrained(&capped).unwrap();
    for x in [0.0, 0.5, 2.0, 5.0] {
        assert!((a_free.eval(x) - a_cap.eval(x)).abs() < 1e-2, "x {x}");
    }
}

#[test]
fn example1_truncation_is_negligible() {
    let vg = unconstrained(5e-3, 40.0);
    let nd = normalize_delta(&vg, TailModel::Exponential { mean: 1.0 });
    assert!(!nd.truncation_flag);
    assert!(nd.remainder / vg.big_v[vg.grid.n - 1] < 1e-10);
    // survival rises from 0 towards 1
    assert_eq!(nd.delta.values[0], 0.0);
    assert!(nd.delta.values.windows(2).all(|w| w[1] >= w[0]));
    assert!((nd.delta.values[vg.grid.n - 1] - 1.0).abs() < 1e-10);
}
