use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Value};

use ruinvest::asymptotics::{
    asymptote_report, constrained_infinity_strategy, fit_tail_constant, fit_value_constant, strategy_expansion_infinity_exp,
};
use ruinvest::exp_ode::{reconstruct_vprime, solve_a_tilde, Seed};
use ruinvest::mc::estimate_survival;
use ruinvest::model::{classify_infinity_regime, classify_zero_regime};
use ruinvest::solver::{
    a_tilde_from_grid, aw_cross_check, extract_strategy_constrained, extract_strategy_unconstrained, hjb_residual,
    hjb_residual_constrained, hjb_residual_profile, hjb_residual_profile_constrained, normalize_delta, quadratic_form_defect,
    solve_v_constrained, solve_v_unconstrained, TailModel,
};
use ruinvest::{derive_constants, ClaimDistribution, Extrapolation, Grid, ModelParams, SolveControls, StrategyCurve, ValueGrid};

use crate::error::{CliError, Result};
use crate::format::{csv_text, object, pretty, to_json, write_file};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Constrained,
    Unconstrained,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Constrained => "constrained",
            Mode::Unconstrained => "unconstrained",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    Optimal,
    Zero,
    Const(f64),
    File(PathBuf),
}

impl FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "optimal" => Ok(StrategySpec::Optimal),
            "zero" => Ok(StrategySpec::Zero),
            _ => {
                if let Some(a) = s.strip_prefix("const:") {
                    let a: f64 = a.parse().map_err(|_| format!("`{a}` is not a number"))?;
                    if !a.is_finite() {
                        return Err(format!("amount must be finite, got {a}"));
                    }
                    Ok(StrategySpec::Const(a))
                } else if let Some(p) = s.strip_prefix("file:") {
                    Ok(StrategySpec::File(PathBuf::from(p)))
                } else {
                    Err(format!("expected optimal, zero, const:<a> or file:<path>, got `{s}`"))
                }
            }
        }
    }
}

pub fn emit(json: &Value, out: Option<&Path>) -> Result<()> {
    let text = pretty(json);
    match out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.into(), source })
}

fn tail_window(x_max: f64) -> (f64, f64) {
    (0.75 * x_max, x_max)
}

pub fn solve(s: &Scenario, mode: Mode) -> Result<ValueGrid> {
    let grid = s.grid()?;
    let controls = SolveControls::default();
    match mode {
        Mode::Unconstrained => Ok(solve_v_unconstrained(&s.params, &s.claims, grid, &controls)?),
        Mode::Constrained => {
            if s.params.cap.is_none() {
                return Err(CliError::invalid("cap_A", "constrained mode needs `cap_A` in the scenario"));
            }
            Ok(solve_v_constrained(&s.params, &s.claims, grid, &controls)?)
        }
    }
}

/// Optimal strategy of a solved grid; unconstrained curves continue with the
/// large-surplus expansion when the claims are exponential.
pub fn optimal_strategy(vg: &ValueGrid) -> Result<StrategyCurve> {
    if let ruinvest::solver::SolveMode::Constrained { .. } = vg.mode {
        return Ok(extract_strategy_constrained(vg)?);
    }
    let extrapolation = match vg.claims.exponential_mean() {
        Some(m) => {
            let (limit, coeff) = strategy_expansion_infinity_exp(&vg.params, m)?;
            Extrapolation::Asymptote { limit, coeff }
        }
        None => Extrapolation::HoldLast,
    };
    Ok(extract_strategy_unconstrained(vg, extrapolation)?)
}

pub fn constants(s: &Scenario) -> Result<Value> {
    let k = derive_constants(&s.params, s.claims.exponential_mean())?;
    let mut out = to_json(&k);
    let zero = s.params.cap.and_then(|_| classify_zero_regime(&k, &s.params).ok());
    let infinity = s.params.cap.and_then(|_| classify_infinity_regime(&k, &s.params, &s.claims).ok());
    let map = out.as_object_mut().expect("constants serialize to an object");
    map.insert("zero_regime".into(), to_json(&zero));
    map.insert("infinity_regime".into(), to_json(&infinity));
    map.insert("scenario".into(), Value::String(s.to_text()));
    Ok(out)
}

pub struct SolveOutput {
    pub csv: String,
    pub summary: Value,
}

pub fn solve_report(s: &Scenario, mode: Mode) -> Result<SolveOutput> {
    let vg = solve(s, mode)?;
    let strategy = optimal_strategy(&vg)?;
    let nd = normalize_delta(&vg, TailModel::for_claims(&s.claims));
    let (residual, residual_summary) = match mode {
        Mode::Unconstrained => {
            let r = hjb_residual(&vg, &strategy);
            (hjb_residual_profile(&vg, &strategy), to_json(&r))
        }
        Mode::Constrained => {
            let (sup, at_x) = hjb_residual_constrained(&vg, &strategy);
            (hjb_residual_profile_constrained(&vg, &strategy), json!({"sup": sup, "at_x": at_x}))
        }
    };
    let stride = vg.substeps.max(1);
    let rows = (0..vg.grid.n).step_by(stride).map(|j| {
        vec![vg.grid.x(j), vg.v[j], vg.big_v[j], nd.delta.values[j], strategy.values[j], residual[j]]
    });
    let csv = csv_text(&["x", "v", "V", "delta", "a_star", "hjb_residual"], rows);

    let tail_fit = match s.claims.exponential_mean() {
        Some(m) => Some(fit_tail_constant(&vg, m, tail_window(vg.grid.x_max()))?),
        None => None,
    };
    let value_constant = fit_value_constant(&vg, -vg.vprime[0], 0.01)?;
    let summary = object(vec![
        ("mode", json!(mode.name())),
        ("cap_A", json!(s.params.cap)),
        ("claim_family", json!(s.claims.family_name())),
        ("h", json!(s.grid_h)),
        ("solver_h", json!(vg.grid.h)),
        ("substeps", json!(vg.substeps)),
        ("x_max", json!(vg.grid.x_max())),
        ("v_prime_zero", json!(vg.vprime[0])),
        ("a_star_zero", json!(strategy.values[0])),
        ("value_constant", json!(value_constant)),
        ("tail_fit", to_json(&tail_fit)),
        ("v_infinity", json!(nd.v_infinity)),
        ("tail_remainder", json!(nd.remainder)),
        ("truncation_flag", json!(nd.truncation_flag)),
        ("hjb_residual", residual_summary),
        ("fixed_point_residual", json!(vg.fixed_point_residual())),
        (
            "quadratic_form_defect",
            json!(matches!(mode, Mode::Unconstrained).then(|| quadratic_form_defect(&vg))),
        ),
        ("aw_cross_check", json!(aw_cross_check(&vg, 1e-3))),
        ("windows", json!(vg.windows.len())),
        ("total_iterations", json!(vg.total_iterations())),
        ("max_contraction_ratio", json!(vg.max_contraction_ratio())),
        ("concavity_extent", json!(vg.concavity_extent())),
    ]);
    Ok(SolveOutput { csv, summary })
}

pub fn asymptotes(s: &Scenario, fit: bool) -> Result<Value> {
    let solved = if fit { Some(solve(s, Mode::Unconstrained)?) } else { None };
    let report = asymptote_report(&s.params, &s.claims, solved.as_ref(), tail_window(s.grid_xmax))?;
    let mut out = to_json(&report);
    let capped = match (s.params.cap, s.claims.exponential_mean()) {
        (Some(_), Some(m)) => Some(constrained_infinity_strategy(&s.params, m)?),
        _ => None,
    };
    out.as_object_mut()
        .expect("report serializes to an object")
        .insert("constrained_infinity_strategy".into(), to_json(&capped));
    Ok(out)
}

pub struct ExpValidation {
    pub csv: String,
    pub report: Value,
}

/// Solver curves against the exponential-claim ODE on `[1, min(10, x_max)]`.
pub fn exp_validate(s: &Scenario) -> Result<ExpValidation> {
    let Some(m) = s.claims.exponential_mean() else {
        return Err(CliError::invalid("claim.family", "exp-validate needs exponential claims"));
    };
    let vg = solve(s, Mode::Unconstrained)?;
    let h = vg.grid.h;
    let x_max = vg.grid.x_max();
    let ode = solve_a_tilde(&s.params, m, Seed::Origin, x_max, h)?;
    let v_ode = reconstruct_vprime(&ode, &s.params, (0.0, 1.0))?;
    let a_solver = a_tilde_from_grid(&vg);
    let hi = x_max.min(10.0);

    let mut worst_a = (0.0f64, f64::NAN);
    let mut worst_v = (0.0f64, f64::NAN);
    let mut rows = Vec::new();
    for j in 0..vg.grid.n {
        let x = vg.grid.x(j);
        let (ao, vo) = (ode.curve.eval(x), v_ode.eval(x));
        if (1.0 - 1e-12..=hi + 1e-12).contains(&x) {
            let ra = ((a_solver[j] - ao) / ao).abs();
            if ra > worst_a.0 {
                worst_a = (ra, x);
            }
            let rv = ((vg.v[j] - vo) / vo).abs();
            if rv > worst_v.0 {
                worst_v = (rv, x);
            }
        }
        rows.push(vec![x, a_solver[j], ao, vg.v[j], vo]);
    }
    let csv = csv_text(&["x", "a_tilde_solver", "a_tilde_ode", "v_solver", "v_ode"], rows);
    let window = tail_window(x_max);
    let plateau_solver = ruinvest::asymptotics::tail_plateau(&vg.v, h, &s.params, m, window)?.1;
    let plateau_ode = ruinvest::asymptotics::tail_plateau(&v_ode.values, v_ode.h, &s.params, m, window)?.1;
    let report = object(vec![
        ("range", json!([1.0, hi])),
        ("max_rel_deviation_a_tilde", json!(worst_a.0)),
        ("at_x_a_tilde", json!(worst_a.1)),
        ("max_rel_deviation_v", json!(worst_v.0)),
        ("at_x_v", json!(worst_v.1)),
        ("tail_window", json!([window.0, window.1])),
        ("tail_plateau_ratio_solver", json!(plateau_solver)),
        ("tail_plateau_ratio_ode", json!(plateau_ode)),
        ("ode_warning", json!(ode.warning)),
    ]);
    Ok(ExpValidation { csv, report })
}

fn read_strategy_file(path: &Path) -> Result<StrategyCurve> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::MissingFile { path: path.into(), source })?;
    let bad = |reason: String| CliError::invalid("strategy", format!("{}: {reason}", path.display()));
    let mut reader = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut xs = Vec::new();
    let mut amounts = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != 2 {
            return Err(bad(format!("row {} needs two columns `x,a`", i + 1)));
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => {
                xs.push(v[0]);
                amounts.push(v[1]);
            }
            Err(_) if i == 0 => continue,
            Err(_) => return Err(bad(format!("row {} is not numeric", i + 1))),
        }
    }
    if xs.len() < 2 || xs[0] != 0.0 {
        return Err(bad("need at least two rows starting at x = 0".into()));
    }
    let h = xs[1] - xs[0];
    let uniform = xs.iter().enumerate().all(|(j, &x)| (x - j as f64 * h).abs() <= 1e-9 * (1.0 + x.abs()));
    if !(h > 0.0) || !uniform {
        return Err(bad("x must be an evenly spaced grid".into()));
    }
    if amounts.iter().any(|a| !a.is_finite()) {
        return Err(bad("amounts must be finite".into()));
    }
    Ok(StrategyCurve::new(Grid::new(h, xs.len())?, amounts, None, Extrapolation::HoldLast)?)
}

pub fn simulate(s: &Scenario, x0: f64, spec: &StrategySpec) -> Result<Value> {
    let mut solver_delta = None;
    let strategy = match spec {
        StrategySpec::Zero => StrategyCurve::constant(0.0),
        StrategySpec::Const(a) => StrategyCurve::constant(*a),
        StrategySpec::File(path) => read_strategy_file(path)?,
        StrategySpec::Optimal => {
            let mode = if s.params.cap.is_some() { Mode::Constrained } else { Mode::Unconstrained };
            let vg = solve(s, mode)?;
            if x0 <= vg.grid.x_max() {
                solver_delta = Some(normalize_delta(&vg, TailModel::for_claims(&s.claims)).delta.eval(x0));
            }
            optimal_strategy(&vg)?
        }
    };
    let report = estimate_survival(&s.params, &s.claims, &strategy, x0, &s.mc)?;
    let name = match spec {
        StrategySpec::Optimal => "optimal".to_string(),
        StrategySpec::Zero => "zero".to_string(),
        StrategySpec::Const(a) => format!("const:{a}"),
        StrategySpec::File(p) => format!("file:{}", p.display()),
    };
    let mut out = to_json(&report);
    let map = out.as_object_mut().expect("report serializes to an object");
    map.insert("strategy".into(), json!(name));
    map.insert("x0".into(), json!(x0));
    map.insert("config".into(), to_json(&s.mc));
    map.insert("solver_delta".into(), to_json(&solver_delta));
    Ok(out)
}

/// One worked example: parameters and the claim laws to compare.
pub struct Example {
    pub name: &'static str,
    pub params: ModelParams,
    pub claims: Vec<ClaimDistribution>,
}

pub fn example(n: u8) -> Example {
    match n {
        1 => Example {
            name: "example1",
            params: ModelParams::example1(),
            claims: vec![
                ClaimDistribution::exponential(1.0).expect("valid"),
                ClaimDistribution::half_normal((std::f64::consts::PI / 2.0).sqrt()).expect("valid"),
                ClaimDistribution::log_normal(-0.5, 1.0).expect("valid"),
            ],
        },
        _ => Example {
            name: "example2",
            params: ModelParams::example2(),
            claims: vec![
                ClaimDistribution::exponential(0.5).expect("valid"),
                ClaimDistribution::weibull(1.0, 0.5).expect("valid"),
                ClaimDistribution::pareto(2.0, 2.0).expect("valid"),
            ],
        },
    }
}

pub struct ExampleOutput {
    pub near_zero_csv: String,
    pub large_csv: String,
    pub summary: Value,
}

/// Unconstrained strategies for every claim law, sampled near zero
/// (`[0, 1]`, every grid point) and over the whole grid (every `0.1`).
pub fn run_example(ex: &Example, h: f64, x_max: f64) -> Result<ExampleOutput> {
    let k = derive_constants(&ex.params, None)?;
    let slope = ruinvest::asymptotics::strategy_slope_zero(&k, &ex.params);
    let mut curves = Vec::new();
    let mut per_claim = Vec::new();
    for d in &ex.claims {
        let s = Scenario { grid_h: h, grid_xmax: x_max, ..Scenario::from_params(ex.params, *d) };
        let vg = solve(&s, Mode::Unconstrained)?;
        let curve = optimal_strategy(&vg)?;
        let nd = normalize_delta(&vg, TailModel::for_claims(d));
        per_claim.push(object(vec![
            ("claim_family", json!(d.family_name())),
            ("claim_params", json!(d.parameters())),
            ("a_star_zero", json!(curve.values[0])),
            ("delta_at_1", json!(nd.delta.eval(1.0))),
            ("truncation_flag", json!(nd.truncation_flag)),
            ("max_contraction_ratio", json!(vg.max_contraction_ratio())),
        ]));
        curves.push(curve);
    }
    let expansion = strategy_expansion_infinity_exp(&ex.params, 1.0 / ex.claims[0].parameters()[0])?;

    let mut header = vec!["x"];
    header.extend(ex.claims.iter().map(|d| d.family_name()));
    let mut near_header = header.clone();
    near_header.push("asymptote");
    let near_n = (1.0 / h).round() as usize;
    let near_rows = (0..=near_n).map(|j| {
        let x = j as f64 * h;
        let mut row = vec![x];
        row.extend(curves.iter().map(|c| c.eval(x)));
        row.push(k.a_star_zero - slope * x);
        row
    });
    let near_zero_csv = csv_text(&near_header, near_rows);

    let mut large_header = header;
    large_header.push("asymptote_exponential");
    let step = 0.1;
    let large_n = (x_max / step).round() as usize;
    let large_rows = (0..=large_n).map(|i| {
        let x = i as f64 * step;
        let mut row = vec![x];
        row.extend(curves.iter().map(|c| c.eval(x)));
        row.push(if x > 0.0 { expansion.0 + expansion.1 / x } else { f64::NAN });
        row
    });
    let large_csv = csv_text(&large_header, large_rows);

    let summary = object(vec![
        ("example", json!(ex.name)),
        ("h", json!(h)),
        ("x_max", json!(x_max)),
        ("a_star_zero", json!(k.a_star_zero)),
        ("strategy_slope_zero", json!(-slope)),
        ("infinity_limit_exponential", json!(expansion.0)),
        ("infinity_coeff_exponential", json!(expansion.1)),
        ("claims", Value::Array(per_claim)),
    ]);
    Ok(ExampleOutput { near_zero_csv, large_csv, summary })
}

pub fn write_example(ex: &Example, h: f64, x_max: f64, dir: &Path) -> Result<Value> {
    let out = run_example(ex, h, x_max)?;
    ensure_dir(dir)?;
    write_file(&dir.join(format!("{}_near_zero.csv", ex.name)), &out.near_zero_csv)?;
    write_file(&dir.join(format!("{}_large.csv", ex.name)), &out.large_csv)?;
    write_file(&dir.join(format!("{}_summary.json", ex.name)), &pretty(&out.summary))?;
    Ok(out.summary)
}

pub fn write_solve(s: &Scenario, mode: Mode, dir: &Path) -> Result<Value> {
    let out = solve_report(s, mode)?;
    ensure_dir(dir)?;
    write_file(&dir.join(format!("solve_{}.csv", mode.name())), &out.csv)?;
    write_file(&dir.join(format!("solve_{}.json", mode.name())), &pretty(&out.summary))?;
    Ok(out.summary)
}

pub fn write_exp_validate(s: &Scenario, dir: Option<&Path>) -> Result<Value> {
    let out = exp_validate(s)?;
    if let Some(dir) = dir {
        ensure_dir(dir)?;
        write_file(&dir.join("exp_validate.csv"), &out.csv)?;
        write_file(&dir.join("exp_validate.json"), &pretty(&out.report))?;
    }
    Ok(out.report)
}
