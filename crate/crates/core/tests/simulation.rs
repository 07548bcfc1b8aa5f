use ruinvest::asymptotics::strategy_expansion_infinity_exp;
use ruinvest::mc::{compare_strategies, pooled_stderr, SimConfig};
use ruinvest::solver::{extract_strategy_unconstrained, solve_v_unconstrained};
use ruinvest::*;

#[test]
fn optimal_ranks_first_for_two_seeds() {
    let p = ModelParams::example1();
    let d = ClaimDistribution::exponential(1.0).unwrap();
    let vg = solve_v_unconstrained(&p, &d, Grid::covering(5e-3, 40.0).unwrap(), &SolveControls::default()).unwrap();
    let (limit, coeff) = strategy_expansion_infinity_exp(&p, 1.0).unwrap();
    let optimal = extract_strategy_unconstrained(&vg, Extrapolation::Asymptote { limit, coeff }).unwrap();
    let strategies = vec![
        ("optimal".to_string(), optimal),
        ("zero".to_string(), StrategyCurve::constant(0.0)),
        ("a0".to_string(), StrategyCurve::constant(0.854_211_5)),
    ];
    for seed in [11, 12] {
        let cfg = SimConfig { dt: 1e-3, horizon: 200.0, n_paths: 4000, safe_level: 60.0, master_seed: seed };
        let rows = compare_strategies(&p, &d, &strategies, 1.0, &cfg).unwrap();
        let opt = &rows.iter().find(|r| r.name == "optimal").unwrap().report;
        let best = &rows[0].report;
        assert!(rows[0].name == "optimal" || best.survival - opt.survival <= pooled_stderr(best, opt), "seed {seed}: {rows:?}");
    }
}
