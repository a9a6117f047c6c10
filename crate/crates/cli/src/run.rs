//! Scenario dispatch: maps a parsed scenario onto the solver, dynamics,
//! collusion, comparison, verification, or sweep pipelines and emits
//! CSV data plus a digest manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use offnet_core::collusion::{collusion_equilibrium, iscp_scep};
use offnet_core::demand::{classify_region, Region};
use offnet_core::dynamics::{
    build_discrete_map, default_flow_step, iterate, pseudo_gradient_flow, Trajectory,
};
use offnet_core::equilibrium::{
    exante_multi, exante_single, expost_multi_n2, expost_single, h_condition, regime_preference,
    ExPostN2Outcome, PreferenceVerdict,
};
use offnet_core::error::Error as CoreError;
use offnet_core::oracle::{
    best_response_gain, grid_equilibrium_search, Agent, GridSpec, OracleRegime,
};
use offnet_core::{GameParameters, PriceProfile};

use crate::csvout::{emit_csv, fmt_f64};
use crate::manifest::Manifest;
use crate::scenario::{apply_sweep_value, sweep_target, Regime, Scenario};

/// Failure with the process exit code it maps to:
/// 2 unreadable scenario, 3 schema violation, 4 invalid parameters,
/// 1 anything at run time (including failed verification).
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn runtime(err: CoreError) -> Self {
        Self::new(1, err.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Solve,
    Dynamics,
    Collude,
    Compare,
    Verify,
    Sweep,
}

#[derive(Debug, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

pub fn execute(
    verb: Verb,
    scenario_path: &Path,
    out_flag: Option<&Path>,
    overrides: &Overrides,
) -> Result<(), CliError> {
    let text = fs::read_to_string(scenario_path)
        .map_err(|e| CliError::new(2, format!("cannot read {}: {e}", scenario_path.display())))?;
    let mut scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| CliError::new(3, format!("schema violation: {e}")))?;
    scenario
        .check_schema()
        .map_err(|e| CliError::new(3, format!("schema violation: {e}")))?;
    if let Some(resolution) = overrides.grid {
        scenario
            .grid
            .get_or_insert_with(Default::default)
            .resolution = resolution;
    }
    if let Some(tol) = overrides.tol {
        scenario.tol = Some(tol);
    }
    check_verb(verb, &scenario)?;
    let out_dir = out_flag
        .map(Path::to_path_buf)
        .or_else(|| scenario.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let out_dir = out_dir.as_path();

    let params = scenario.game_parameters();
    params
        .ensure_valid()
        .map_err(|e| CliError::new(4, e.to_string()))?;

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::new(1, format!("cannot create {}: {e}", out_dir.display())))?;
    let mut manifest = Manifest::new(serde_json::to_value(&scenario).expect("scenario serializes"));

    let result = match verb {
        Verb::Solve | Verb::Collude => regime_row(&scenario, &params)
            .map_err(CliError::runtime)
            .and_then(|row| {
                let header = regime_header(scenario.regime, params.n);
                write_csv(out_dir, "results.csv", &header, &[row], &mut manifest)
            }),
        Verb::Dynamics => run_dynamics(&scenario, &params, out_dir, &mut manifest),
        Verb::Compare => run_compare(&scenario, &params, out_dir, &mut manifest),
        Verb::Verify => run_verify(&scenario, &params, out_dir, &mut manifest),
        Verb::Sweep => run_sweep(&scenario, out_dir, &mut manifest),
    };
    manifest
        .write(out_dir)
        .map_err(|e| CliError::new(1, format!("cannot write manifest: {e}")))?;
    result
}

fn check_verb(verb: Verb, scenario: &Scenario) -> Result<(), CliError> {
    use Regime::*;
    let ok = match verb {
        Verb::Solve => matches!(
            scenario.regime,
            ExanteSingle | ExpostSingle | ExanteMulti | ExpostMultiN2
        ),
        Verb::Dynamics => matches!(scenario.regime, Dynamics | Flow),
        Verb::Collude => matches!(scenario.regime, Collusion | CollusionMetrics),
        Verb::Compare => scenario.regime == Compare,
        Verb::Verify => matches!(
            scenario.regime,
            ExanteSingle | ExpostSingle | ExanteMulti | ExpostMultiN2 | Collusion
        ),
        Verb::Sweep => {
            if scenario.sweep.is_none() {
                return Err(CliError::new(3, "sweep verb needs a sweep section"));
            }
            matches!(
                scenario.regime,
                ExanteSingle
                    | ExpostSingle
                    | ExanteMulti
                    | ExpostMultiN2
                    | Collusion
                    | CollusionMetrics
            )
        }
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::new(
            3,
            format!(
                "regime '{}' does not belong to this subcommand",
                scenario.regime.name()
            ),
        ))
    }
}

fn write_csv(
    out_dir: &Path,
    name: &str,
    header: &[String],
    rows: &[Vec<String>],
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    let bytes = emit_csv(header, rows, &out_dir.join(name))
        .map_err(|e| CliError::new(1, format!("cannot write {name}: {e}")))?;
    manifest.record(name, &bytes);
    println!("wrote {}", out_dir.join(name).display());
    Ok(())
}

fn s(text: impl Into<String>) -> String {
    text.into()
}

/// Column schema of the one-row regimes; fixed given regime and `n`.
fn regime_header(regime: Regime, n: usize) -> Vec<String> {
    match regime {
        Regime::ExanteSingle => [
            "regime", "pd", "ps", "pc", "p_net", "demand", "u_isp", "u_cp",
        ]
        .map(s)
        .to_vec(),
        Regime::ExpostSingle => [
            "regime", "free_ps", "pd", "ps", "pc", "p_net", "demand", "u_isp", "u_cp",
        ]
        .map(s)
        .to_vec(),
        Regime::ExanteMulti => {
            let mut header = vec![s("regime"), s("exists"), s("u_isp")];
            for i in 1..=n {
                for col in ["v", "ps", "pc", "p_net", "demand", "u_cp"] {
                    header.push(format!("{col}{i}"));
                }
            }
            header
        }
        Regime::ExpostMultiN2 => [
            "regime",
            "outcome",
            "survivor",
            "d0_prime",
            "alpha_prime",
            "p_net",
            "demand",
            "total_revenue",
            "u_isp",
            "u_cp",
            "shutout_net_min",
            "h_lhs",
            "h_rhs",
        ]
        .map(s)
        .to_vec(),
        Regime::Collusion => {
            let mut header = vec![s("regime"), s("p1_net"), s("demand1"), s("u_colluder")];
            for i in 2..=n {
                for col in ["ps", "pc", "p_net", "demand", "u_cp"] {
                    header.push(format!("{col}{i}"));
                }
            }
            header
        }
        Regime::CollusionMetrics => ["regime", "iscp", "scep", "benefit_threshold"]
            .map(s)
            .to_vec(),
        Regime::Dynamics | Regime::Flow | Regime::Compare => {
            unreachable!("multi-row regimes have dedicated emitters")
        }
    }
}

/// Values matching [`regime_header`] for one parameter point.
fn regime_row(scenario: &Scenario, params: &GameParameters) -> Result<Vec<String>, CoreError> {
    let name = s(scenario.regime.name());
    match scenario.regime {
        Regime::ExanteSingle => {
            let pd = scenario.pd_vector()[0];
            let eq = exante_single(params, pd)?;
            Ok(vec![
                name,
                fmt_f64(pd),
                fmt_f64(eq.ps),
                fmt_f64(eq.pc),
                fmt_f64(eq.p_net),
                fmt_f64(eq.demand),
                fmt_f64(eq.u_isp),
                fmt_f64(eq.u_cp),
            ])
        }
        Regime::ExpostSingle => {
            let free_ps = scenario.free_ps.unwrap_or(0.0);
            let eq = expost_single(params, free_ps)?;
            Ok(vec![
                name,
                fmt_f64(free_ps),
                fmt_f64(eq.pd),
                fmt_f64(eq.ps),
                fmt_f64(eq.pc),
                fmt_f64(eq.p_net),
                fmt_f64(eq.demand),
                fmt_f64(eq.u_isp),
                fmt_f64(eq.u_cp),
            ])
        }
        Regime::ExanteMulti => {
            let eq = exante_multi(params, &scenario.pd_vector())?;
            let mut row = vec![name, s(if eq.exists() { "true" } else { "false" })];
            match &eq.solution {
                Some(sol) => {
                    row.push(fmt_f64(sol.u_isp));
                    for i in 0..params.n {
                        row.push(fmt_f64(eq.existence_vector[i]));
                        row.push(fmt_f64(sol.ps[i]));
                        row.push(fmt_f64(sol.pc[i]));
                        row.push(fmt_f64(sol.ps[i] + sol.pc[i]));
                        row.push(fmt_f64(sol.demands[i]));
                        row.push(fmt_f64(sol.u_cp[i]));
                    }
                }
                None => {
                    row.push(String::new());
                    for i in 0..params.n {
                        row.push(fmt_f64(eq.existence_vector[i]));
                        row.extend(std::iter::repeat_n(String::new(), 5));
                    }
                }
            }
            Ok(row)
        }
        Regime::ExpostMultiN2 => {
            let h = h_condition(params)?;
            match expost_multi_n2(params)? {
                ExPostN2Outcome::Survivor { equilibrium, .. } => Ok(vec![
                    name,
                    s("survivor"),
                    (equilibrium.survivor + 1).to_string(),
                    fmt_f64(equilibrium.d0_prime),
                    fmt_f64(equilibrium.alpha_prime),
                    fmt_f64(equilibrium.p_net),
                    fmt_f64(equilibrium.demand),
                    fmt_f64(equilibrium.total_revenue),
                    fmt_f64(equilibrium.u_isp),
                    fmt_f64(equilibrium.u_cp),
                    fmt_f64(equilibrium.shutout_net_min),
                    fmt_f64(h.lhs),
                    fmt_f64(h.rhs),
                ]),
                ExPostN2Outcome::NoPureNe { .. } => {
                    let mut row = vec![name, s("no_pure_ne")];
                    row.extend(std::iter::repeat_n(String::new(), 9));
                    row.push(fmt_f64(h.lhs));
                    row.push(fmt_f64(h.rhs));
                    Ok(row)
                }
            }
        }
        Regime::Collusion => {
            let eq = collusion_equilibrium(params, &scenario.pd_vector())?;
            let mut row = vec![
                name,
                fmt_f64(eq.p1_net),
                fmt_f64(eq.demands[0]),
                fmt_f64(eq.u_colluder),
            ];
            for k in 0..params.n - 1 {
                row.push(fmt_f64(eq.ps_rest[k]));
                row.push(fmt_f64(eq.pc_rest[k]));
                row.push(fmt_f64(eq.ps_rest[k] + eq.pc_rest[k]));
                row.push(fmt_f64(eq.demands[k + 1]));
                row.push(fmt_f64(eq.u_cp_rest[k]));
            }
            Ok(row)
        }
        Regime::CollusionMetrics => {
            let m = iscp_scep(params)?;
            Ok(vec![
                name,
                fmt_f64(m.iscp),
                fmt_f64(m.scep),
                fmt_f64(m.benefit_threshold),
            ])
        }
        Regime::Dynamics | Regime::Flow | Regime::Compare => {
            unreachable!("multi-row regimes have dedicated emitters")
        }
    }
}

fn trajectory_rows(trajectory: &Trajectory) -> (Vec<String>, Vec<Vec<String>>) {
    let header = ["t", "ps1", "ps2", "pc1", "pc2", "error_norm", "in_region"]
        .map(s)
        .to_vec();
    let rows = trajectory
        .iterates
        .iter()
        .enumerate()
        .map(|(t, p)| {
            vec![
                t.to_string(),
                fmt_f64(p[0]),
                fmt_f64(p[1]),
                fmt_f64(p[2]),
                fmt_f64(p[3]),
                trajectory
                    .error_norms
                    .get(t)
                    .map(|e| fmt_f64(*e))
                    .unwrap_or_default(),
                trajectory.in_region[t].to_string(),
            ]
        })
        .collect();
    (header, rows)
}

fn run_dynamics(
    scenario: &Scenario,
    params: &GameParameters,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    let p0 = scenario.p0.expect("schema check requires p0");
    let trajectory = match scenario.regime {
        Regime::Dynamics => {
            let map = build_discrete_map(params).map_err(CliError::runtime)?;
            iterate(
                &map,
                p0,
                scenario.max_steps.unwrap_or(1000),
                scenario.tol.unwrap_or(1e-9),
            )
        }
        Regime::Flow => pseudo_gradient_flow(
            params,
            p0,
            scenario
                .step_size
                .unwrap_or_else(|| default_flow_step(params)),
            scenario.max_steps.unwrap_or(100_000),
            scenario.tol.unwrap_or(1e-6),
        )
        .map_err(CliError::runtime)?,
        _ => unreachable!("checked by check_verb"),
    };
    let (header, rows) = trajectory_rows(&trajectory);
    write_csv(out_dir, "trajectory.csv", &header, &rows, manifest)?;
    println!(
        "{} after {} steps",
        if trajectory.converged {
            "converged"
        } else {
            "stopped"
        },
        trajectory.steps_taken
    );
    Ok(())
}

fn verdict(v: PreferenceVerdict) -> &'static str {
    match v {
        PreferenceVerdict::PrefersExPost => "ex_post",
        PreferenceVerdict::PrefersExAnte => "ex_ante",
        PreferenceVerdict::Indifferent => "indifferent",
    }
}

fn run_compare(
    scenario: &Scenario,
    params: &GameParameters,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    let pd = scenario.pd_vector()[0];
    let ante = exante_single(params, pd).map_err(CliError::runtime)?;
    let post = expost_single(params, scenario.free_ps.unwrap_or(0.0)).map_err(CliError::runtime)?;
    let pref = regime_preference(params).map_err(CliError::runtime)?;

    let header = [
        "regime",
        "ps",
        "pc",
        "p_net",
        "demand",
        "u_isp",
        "u_cp",
        "isp_ratio",
        "cp_ratio",
        "isp_prefers",
        "cp_prefers",
    ]
    .map(s)
    .to_vec();
    let shared = [
        fmt_f64(pref.isp_ratio),
        fmt_f64(pref.cp_ratio),
        s(verdict(pref.isp)),
        s(verdict(pref.cp)),
    ];
    let row = |tag: &str, eq: &offnet_core::equilibrium::SingleCpEquilibrium| {
        let mut row = vec![
            s(tag),
            fmt_f64(eq.ps),
            fmt_f64(eq.pc),
            fmt_f64(eq.p_net),
            fmt_f64(eq.demand),
            fmt_f64(eq.u_isp),
            fmt_f64(eq.u_cp),
        ];
        row.extend(shared.iter().cloned());
        row
    };
    let rows = vec![row("ex_ante", &ante), row("ex_post", &post)];
    write_csv(out_dir, "compare.csv", &header, &rows, manifest)?;
    println!(
        "ISP prefers {}, CP prefers {}",
        verdict(pref.isp),
        verdict(pref.cp)
    );
    Ok(())
}

struct VerifyCheck {
    check: &'static str,
    agent: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn gain_check(
    params: &GameParameters,
    regime: OracleRegime,
    profile: &PriceProfile,
    agent: Agent,
    centers: &[f64],
    halfwidth: f64,
    resolution: usize,
    tolerance: Option<f64>,
) -> Result<VerifyCheck, CoreError> {
    let grid = GridSpec::centered(centers, halfwidth, resolution)?;
    let tolerance = tolerance.unwrap_or_else(|| grid.acceptance_tolerance(params.d0));
    let value = best_response_gain(params, regime, profile, agent, &grid)?;
    Ok(VerifyCheck {
        check: "best_response_gain",
        agent: match agent {
            Agent::Isp => s("isp"),
            Agent::Cp(i) => format!("cp{}", i + 1),
            Agent::Colluder => s("colluder"),
        },
        value,
        tolerance,
        pass: value <= tolerance,
    })
}

fn run_verify(
    scenario: &Scenario,
    params: &GameParameters,
    out_dir: &Path,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    let grid_cfg = scenario.grid.clone().unwrap_or_default();
    let resolution = grid_cfg.resolution;
    let halfwidth = grid_cfg
        .halfwidth
        .unwrap_or_else(|| GridSpec::default_halfwidth(params));
    let tol = scenario.tol;

    let mut checks: Vec<VerifyCheck> = Vec::new();
    match scenario.regime {
        Regime::ExanteSingle | Regime::ExpostSingle => {
            let (regime, eq) = if scenario.regime == Regime::ExanteSingle {
                let pd = scenario.pd_vector()[0];
                (
                    OracleRegime::ExAnteSingle,
                    exante_single(params, pd).map_err(CliError::runtime)?,
                )
            } else {
                (
                    OracleRegime::ExPostSingle,
                    expost_single(params, scenario.free_ps.unwrap_or(0.0))
                        .map_err(CliError::runtime)?,
                )
            };
            let profile = PriceProfile::new(vec![eq.ps], vec![eq.pc]);
            for (agent, center) in [(Agent::Isp, eq.ps), (Agent::Cp(0), eq.pc)] {
                checks.push(
                    gain_check(
                        params,
                        regime,
                        &profile,
                        agent,
                        &[center],
                        halfwidth,
                        resolution,
                        tol,
                    )
                    .map_err(CliError::runtime)?,
                );
            }
        }
        Regime::ExanteMulti => {
            let eq = exante_multi(params, &scenario.pd_vector()).map_err(CliError::runtime)?;
            match &eq.solution {
                None => {
                    let min_v = eq
                        .existence_vector
                        .iter()
                        .fold(f64::INFINITY, |acc, &x| acc.min(x));
                    checks.push(VerifyCheck {
                        check: "existence_vector_sign",
                        agent: s("-"),
                        value: min_v,
                        tolerance: 0.0,
                        pass: min_v <= 0.0,
                    });
                }
                Some(sol) => {
                    let profile = sol.profile();
                    checks.push(
                        gain_check(
                            params,
                            OracleRegime::ExAnteMulti,
                            &profile,
                            Agent::Isp,
                            &sol.ps,
                            halfwidth,
                            resolution,
                            tol,
                        )
                        .map_err(CliError::runtime)?,
                    );
                    for i in 0..params.n {
                        checks.push(
                            gain_check(
                                params,
                                OracleRegime::ExAnteMulti,
                                &profile,
                                Agent::Cp(i),
                                &[sol.pc[i]],
                                halfwidth,
                                resolution,
                                tol,
                            )
                            .map_err(CliError::runtime)?,
                        );
                    }
                }
            }
        }
        Regime::Collusion => {
            let eq =
                collusion_equilibrium(params, &scenario.pd_vector()).map_err(CliError::runtime)?;
            let mut ps = vec![eq.p1_net];
            ps.extend(&eq.ps_rest);
            let mut pc = vec![0.0];
            pc.extend(&eq.pc_rest);
            let profile = PriceProfile::new(ps.clone(), pc.clone());
            checks.push(
                gain_check(
                    params,
                    OracleRegime::Collusion,
                    &profile,
                    Agent::Colluder,
                    &ps,
                    halfwidth,
                    resolution,
                    tol,
                )
                .map_err(CliError::runtime)?,
            );
            for i in 1..params.n {
                checks.push(
                    gain_check(
                        params,
                        OracleRegime::Collusion,
                        &profile,
                        Agent::Cp(i),
                        &[pc[i]],
                        halfwidth,
                        resolution,
                        tol,
                    )
                    .map_err(CliError::runtime)?,
                );
            }
        }
        Regime::ExpostMultiN2 => match expost_multi_n2(params).map_err(CliError::runtime)? {
            ExPostN2Outcome::Survivor { equilibrium, .. } => {
                let mut nets = [0.0, 0.0];
                nets[equilibrium.survivor] = equilibrium.p_net;
                nets[1 - equilibrium.survivor] = equilibrium.shutout_net_min + 5.0;
                let profile = PriceProfile::new(nets.to_vec(), vec![0.0, 0.0]);
                checks.push(
                    gain_check(
                        params,
                        OracleRegime::ExPostMultiN2,
                        &profile,
                        Agent::Isp,
                        &nets,
                        halfwidth,
                        resolution,
                        tol,
                    )
                    .map_err(CliError::runtime)?,
                );
                for i in 0..2 {
                    checks.push(
                        gain_check(
                            params,
                            OracleRegime::ExPostMultiN2,
                            &profile,
                            Agent::Cp(i),
                            &[0.0],
                            halfwidth,
                            resolution,
                            tol,
                        )
                        .map_err(CliError::runtime)?,
                    );
                }
            }
            ExPostN2Outcome::NoPureNe { .. } => {
                // No pure equilibrium claimed: the positive-demand region
                // must contain no approximate equilibrium either.
                let corner = params.d0 / (params.alpha - params.beta);
                let grid = GridSpec::new(vec![(-corner, corner), (-corner, corner)], resolution)
                    .map_err(CliError::runtime)?;
                let found = grid_equilibrium_search(params, OracleRegime::ExPostMultiN2, &grid)
                    .map_err(CliError::runtime)?;
                let in_region_1 = found
                    .iter()
                    .filter(|g| {
                        classify_region(params, &[g.ps[0], g.ps[1]])
                            .map(|r| r == Region::Region1)
                            .unwrap_or(false)
                    })
                    .count();
                checks.push(VerifyCheck {
                    check: "region1_grid_search",
                    agent: s("-"),
                    value: in_region_1 as f64,
                    tolerance: 0.0,
                    pass: in_region_1 == 0,
                });
            }
        },
        _ => unreachable!("checked by check_verb"),
    }

    let header = ["check", "agent", "value", "tolerance", "pass"]
        .map(s)
        .to_vec();
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                s(c.check),
                c.agent.clone(),
                fmt_f64(c.value),
                fmt_f64(c.tolerance),
                c.pass.to_string(),
            ]
        })
        .collect();
    write_csv(out_dir, "verify.csv", &header, &rows, manifest)?;
    let failures = checks.iter().filter(|c| !c.pass).count();
    if failures == 0 {
        println!("all {} checks passed", checks.len());
        Ok(())
    } else {
        Err(CliError::new(
            1,
            format!("{failures} verification check(s) failed"),
        ))
    }
}

fn run_sweep(scenario: &Scenario, out_dir: &Path, manifest: &mut Manifest) -> Result<(), CliError> {
    let sweep = scenario.sweep.clone().expect("checked by check_verb");
    let target =
        sweep_target(&sweep.parameter, scenario.params.n).expect("checked by scenario schema");

    let values: Vec<f64> = (0..sweep.samples)
        .map(|k| sweep.from + (sweep.to - sweep.from) * k as f64 / (sweep.samples - 1) as f64)
        .collect();

    let width = regime_header(scenario.regime, scenario.params.n).len();
    // Samples evaluate independently; rows keep their sample order.
    let value_rows: Vec<Vec<String>> = values
        .par_iter()
        .map(|&value| {
            let point = apply_sweep_value(scenario, target, value);
            let params = point.game_parameters();
            if params.validate().is_valid() {
                regime_row(&point, &params).unwrap_or_else(|_| vec![String::new(); width])
            } else {
                vec![String::new(); width]
            }
        })
        .collect();

    let mut header = vec![s("sample"), sweep.parameter.clone()];
    header.extend(regime_header(scenario.regime, scenario.params.n));
    let rows: Vec<Vec<String>> = values
        .iter()
        .zip(value_rows)
        .enumerate()
        .map(|(k, (&value, tail))| {
            let mut row = vec![k.to_string(), fmt_f64(value)];
            row.extend(tail);
            row
        })
        .collect();
    write_csv(out_dir, "sweep.csv", &header, &rows, manifest)
}
