use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{load, ConfigError, FieldError, Instance};
use super::export::{export_curve, write_table};
use super::json::{fmt17, to_string_precise};
use super::{CliError, Command, Common};
use crate::bangbang::bangbang_report;
use crate::domain::{ControlSignal, StateTrajectory};
use crate::oracle::{
    galerkin_bruteforce_alpha, scalar_alpha, scalar_tau, GalerkinSearch, ScalarInstance,
};
use crate::pde::{apriori_bound_check, decay_envelope_check, hitting_time};
use crate::reach::{default_fd_step, gradient_fd_check, project_pointwise};
use crate::solvers::{gamma, EquivalenceReport, ValuePoint, ValueSolver};

/// Relative gap tolerated between solver values and the scalar closed form.
const ORACLE_GAP: f64 = 0.02;

#[derive(Serialize)]
struct ResultRecord<'a> {
    config_hash: &'a str,
    experiment: &'a str,
    version: &'a str,
    outputs: Value,
    diagnostics: Value,
    wall_time_s: f64,
}

struct Run {
    inst: Instance,
    out: PathBuf,
    start: Instant,
}

impl Run {
    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn finish(
        &self,
        experiment: &str,
        outputs: Value,
        diagnostics: Value,
    ) -> Result<PathBuf, CliError> {
        let record = ResultRecord {
            config_hash: &self.inst.hash,
            experiment,
            version: env!("CARGO_PKG_VERSION"),
            outputs,
            diagnostics,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        let path = self.file(&format!("{experiment}.json"));
        let text = to_string_precise(&record).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    fn solver(&self) -> Result<ValueSolver, CliError> {
        Ok(ValueSolver::new(
            self.inst.problem.clone(),
            self.inst.solver.clone(),
        )?)
    }

    fn scalar_oracle(&self) -> Option<ScalarInstance> {
        ScalarInstance::from_problem(&self.inst.problem).ok()
    }
}

/// Runs one subcommand and returns the path of its JSON summary.
pub fn run(command: &Command) -> Result<PathBuf, CliError> {
    let (common, extra) = match command {
        Command::Minnorm { horizon, common } => {
            (common, horizon.map(|t| format!("experiment.horizon={t:e}")))
        }
        Command::Mintime { bound, common } => {
            (common, bound.map(|m| format!("experiment.bound={m:e}")))
        }
        Command::Simulate(c)
        | Command::Gamma(c)
        | Command::Equivalence(c)
        | Command::Sweep(c)
        | Command::OracleCompare(c)
        | Command::Gradcheck(c) => (c, None),
    };
    let start = Instant::now();
    let inst = prepare(common, extra)?;
    std::fs::create_dir_all(&common.out)
        .map_err(|e| CliError::Io(format!("{}: {e}", common.out.display())))?;
    let run = Run {
        inst,
        out: common.out.clone(),
        start,
    };
    match command {
        Command::Simulate(_) => simulate(run),
        Command::Gamma(_) => gamma_cmd(run),
        Command::Minnorm { .. } => minnorm(run),
        Command::Mintime { .. } => mintime(run),
        Command::Equivalence(_) => equivalence(run),
        Command::Sweep(_) => sweep(run),
        Command::OracleCompare(_) => oracle_compare(run),
        Command::Gradcheck(_) => gradcheck(run),
    }
}

fn prepare(common: &Common, extra: Option<String>) -> Result<Instance, CliError> {
    let mut overrides = common.overrides.clone();
    overrides.extend(extra);
    load(&common.config, &overrides).map_err(|e| match e {
        ConfigError::Invalid(errs) => CliError::Config(errs),
        ConfigError::InsideTarget { norm, radius } => CliError::InsideTarget { norm, radius },
    })
}

fn required(value: Option<f64>, field: &str, command: &str) -> Result<f64, CliError> {
    value.ok_or_else(|| {
        CliError::Config(vec![FieldError::new(
            field,
            format!("required by {command}"),
        )])
    })
}

/// Refuses horizons past `gamma`, where `alpha` vanishes identically.
fn check_within_gamma(grid: &[f64], gamma: f64) -> Result<(), CliError> {
    match grid.iter().find(|&&t| t > gamma) {
        Some(t) => Err(CliError::Config(vec![FieldError::new(
            "experiment.t_grid",
            format!("horizon {t} extends beyond gamma = {}", fmt17(gamma)),
        )])),
        None => Ok(()),
    }
}

fn or_fractions(grid: &[f64], gamma: f64, fractions: &[f64]) -> Vec<f64> {
    if grid.is_empty() {
        fractions.iter().map(|f| f * gamma).collect()
    } else {
        grid.to_vec()
    }
}

fn or_default(grid: &[f64], default: &[f64]) -> Vec<f64> {
    if grid.is_empty() {
        default.to_vec()
    } else {
        grid.to_vec()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

fn norm_series(path: &Path, y: &StateTrajectory) -> Result<(), CliError> {
    write_table(
        path,
        &["k", "t", "norm"],
        y.norms()
            .iter()
            .enumerate()
            .map(|(k, &n)| vec![k.to_string(), fmt17(y.time(k)), fmt17(n)]),
    )?;
    Ok(())
}

fn control_series(
    path: &Path,
    u: &ControlSignal,
    y: &StateTrajectory,
    run: &Run,
) -> Result<(), CliError> {
    let norms = u.pointwise_norms(run.inst.problem.grid());
    write_table(
        path,
        &["k", "t", "control_norm", "state_norm"],
        y.norms().iter().enumerate().map(|(k, &n)| {
            vec![
                k.to_string(),
                fmt17(y.time(k)),
                opt(norms.get(k).copied()),
                fmt17(n),
            ]
        }),
    )?;
    Ok(())
}

fn point_json(p: &ValuePoint) -> Value {
    json!({
        "parameter": p.parameter,
        "value": p.value,
        "horizon": p.horizon,
        "bracket_lo": p.diagnostics.bracket_lo,
        "bracket_hi": p.diagnostics.bracket_hi,
    })
}

fn simulate(run: Run) -> Result<PathBuf, CliError> {
    let p = &run.inst.problem;
    let horizon = required(
        run.inst.config.experiment.horizon,
        "experiment.horizon",
        "simulate",
    )?;
    let y = p.uncontrolled(horizon)?;
    let decay = decay_envelope_check(&y, p.grid(), 10.0 * y.dt());
    norm_series(&run.file("trajectory.csv"), &y)?;
    write_table(
        &run.file("state.csv"),
        &["x", "y0", "y_terminal"],
        (0..p.grid().n()).map(|i| {
            vec![
                fmt17(p.grid().node(i)),
                fmt17(y.initial()[i]),
                fmt17(y.terminal()[i]),
            ]
        }),
    )?;
    let outputs = json!({
        "horizon": horizon,
        "steps": y.nt(),
        "dt": y.dt(),
        "y0_norm": p.y0_norm(),
        "terminal_norm": y.terminal_norm(),
        "hitting_time": hitting_time(&y, p.ball()),
        "decay": decay,
    });
    run.finish("simulate", outputs, json!({ "lambda1": p.lambda1() }))
}

fn gamma_cmd(run: Run) -> Result<PathBuf, CliError> {
    let p = &run.inst.problem;
    let gam = gamma(p)?;
    let estimate = (p.y0_norm() / p.radius()).ln() / p.lambda1();
    norm_series(
        &run.file("gamma_trajectory.csv"),
        &p.uncontrolled(1.2 * gam)?,
    )?;
    let outputs = json!({
        "gamma": gam,
        "spectral_estimate": estimate,
        "oracle_gamma": run.scalar_oracle().map(|s| s.gamma()),
        "y0_norm": p.y0_norm(),
        "radius": p.radius(),
    });
    let diagnostics = json!({ "lambda1": p.lambda1(), "steps": p.steps(), "dt": p.dt(gam) });
    run.finish("gamma", outputs, diagnostics)
}

fn minnorm(run: Run) -> Result<PathBuf, CliError> {
    let horizon = required(
        run.inst.config.experiment.horizon,
        "experiment.horizon",
        "minnorm",
    )?;
    let solver = run.solver()?;
    let point = solver.minimal_norm(horizon)?;
    let p = &run.inst.problem;
    let y = p.simulate(&point.control)?;
    let bangbang = if point.value > 0.0 {
        Some(bangbang_report(
            &point.control,
            point.value,
            run.inst.config.experiment.bangbang_delta,
            p.grid(),
        )?)
    } else {
        None
    };
    let oracle = run
        .scalar_oracle()
        .and_then(|s| scalar_alpha(&s, horizon).ok());
    control_series(&run.file("minnorm_control.csv"), &point.control, &y, &run)?;
    let outputs = json!({
        "horizon": horizon,
        "gamma": solver.gamma(),
        "alpha": point.value,
        "point": point_json(&point),
        "terminal_norm": y.terminal_norm(),
        "control_sup_norm": point.control.sup_norm(p.grid()),
        "bangbang_fraction": bangbang,
        "apriori": apriori_bound_check(&y, point.value, horizon),
        "oracle_alpha": oracle,
        "oracle_relative_gap": oracle.map(|a| (point.value - a).abs() / a),
    });
    run.finish(
        "minnorm",
        outputs,
        serde_json::to_value(&point.diagnostics).expect("serializable"),
    )
}

fn mintime(run: Run) -> Result<PathBuf, CliError> {
    let bound = required(
        run.inst.config.experiment.bound,
        "experiment.bound",
        "mintime",
    )?;
    let solver = run.solver()?;
    let point = solver.minimal_time(bound)?;
    let p = &run.inst.problem;
    let y = p.simulate(&point.control)?;
    let oracle = run.scalar_oracle().map(|s| scalar_tau(&s, bound));
    control_series(&run.file("mintime_control.csv"), &point.control, &y, &run)?;
    let outputs = json!({
        "bound": bound,
        "gamma": solver.gamma(),
        "tau": point.value,
        "point": point_json(&point),
        "terminal_norm": y.terminal_norm(),
        "control_sup_norm": point.control.sup_norm(p.grid()),
        "apriori": apriori_bound_check(&y, bound, point.horizon),
        "oracle_tau": oracle,
        "oracle_relative_gap": oracle.map(|t| (point.value - t).abs() / t),
    });
    run.finish(
        "mintime",
        outputs,
        serde_json::to_value(&point.diagnostics).expect("serializable"),
    )
}

fn equivalence_table(path: &Path, reports: &[EquivalenceReport]) -> Result<(), CliError> {
    write_table(
        path,
        &[
            "param",
            "value",
            "round_trip",
            "residual",
            "relative_residual",
            "control_check",
            "control_check_passes",
        ],
        reports.iter().map(|r| {
            vec![
                fmt17(r.parameter),
                fmt17(r.value),
                fmt17(r.round_trip),
                fmt17(r.residual),
                fmt17(r.relative_residual),
                opt(r.control_check),
                r.control_check_passes.to_string(),
            ]
        }),
    )?;
    Ok(())
}

fn equivalence(run: Run) -> Result<PathBuf, CliError> {
    let solver = run.solver()?;
    let gam = solver.gamma();
    let e = &run.inst.config.experiment;
    check_within_gamma(&e.t_grid, gam)?;
    let ts = or_fractions(&e.t_grid, gam, &[0.2, 0.4, 0.6, 0.8]);
    let ms = or_default(&e.m_grid, &[1.0, 3.0, 10.0, 30.0]);
    let exec = run.inst.solver.execution;
    let t_reports = exec
        .map(&ts, |&t| solver.verify_equivalence_t(t))
        .into_iter()
        .collect::<crate::Result<Vec<_>>>()?;
    let m_reports = exec
        .map(&ms, |&m| solver.verify_equivalence_m(m))
        .into_iter()
        .collect::<crate::Result<Vec<_>>>()?;
    equivalence_table(&run.file("equivalence_t.csv"), &t_reports)?;
    equivalence_table(&run.file("equivalence_m.csv"), &m_reports)?;
    let all = t_reports.iter().chain(&m_reports);
    let max_rel = all.clone().map(|r| r.relative_residual).fold(0.0, f64::max);
    let outputs = json!({
        "gamma": gam,
        "t_round_trips": t_reports,
        "m_round_trips": m_reports,
        "max_relative_residual": max_rel,
        "control_checks_pass": all.clone().all(|r| r.control_check_passes),
    });
    run.finish(
        "equivalence",
        outputs,
        json!({ "t_grid": ts, "m_grid": ms }),
    )
}

fn sweep(run: Run) -> Result<PathBuf, CliError> {
    let solver = run.solver()?;
    let gam = solver.gamma();
    let e = &run.inst.config.experiment;
    check_within_gamma(&e.t_grid, gam)?;
    let ts = or_fractions(&e.t_grid, gam, &[0.2, 0.4, 0.6, 0.8, 1.0]);
    let ms = or_default(&e.m_grid, &[0.0, 0.5, 1.0, 5.0, 10.0, 50.0]);
    let tau = solver.tau_curve(&ms)?;
    let alpha = solver.alpha_curve(&ts)?;
    let oracle = run.scalar_oracle();
    export_curve(&tau, oracle.as_ref(), &run.file("tau_curve.csv"))?;
    export_curve(&alpha, oracle.as_ref(), &run.file("alpha_curve.csv"))?;
    let outputs = json!({
        "gamma": gam,
        "tau": {
            "params": ms,
            "values": tau.values(),
            "strictly_decreasing": tau.strictly_decreasing(),
            "small_parameter_gap": tau.small_parameter_gap(),
            "large_parameter_ratio": tau.large_parameter_ratio(),
        },
        "alpha": {
            "params": ts,
            "values": alpha.values(),
            "non_increasing": alpha.non_increasing(),
        },
    });
    let calls: usize = tau
        .points
        .iter()
        .chain(&alpha.points)
        .map(|p| p.diagnostics.oracle_calls)
        .sum();
    run.finish("sweep", outputs, json!({ "oracle_calls": calls }))
}

fn oracle_compare(run: Run) -> Result<PathBuf, CliError> {
    let solver = run.solver()?;
    let gam = solver.gamma();
    let e = &run.inst.config.experiment;
    let scalar = run.scalar_oracle();
    if scalar.is_none() && e.galerkin.is_none() {
        return Err(CliError::Config(vec![FieldError::new(
            "experiment.galerkin",
            "the scalar oracle needs f = 0, omega = the whole domain and y0 on e_1; configure a Galerkin search otherwise",
        )]));
    }
    let mut outputs = json!({ "gamma": gam });
    if let Some(s) = &scalar {
        check_within_gamma(&e.t_grid, gam)?;
        let ms = or_default(&e.m_grid, &[1.0, 10.0, 100.0]);
        let ts = or_fractions(&e.t_grid, gam, &[0.2, 0.5, 0.7]);
        let tau = solver.tau_curve(&ms)?;
        let alpha = solver.alpha_curve(&ts)?;
        let tau_rows = export_curve(&tau, Some(s), &run.file("tau_curve.csv"))?;
        let alpha_rows = export_curve(&alpha, Some(s), &run.file("alpha_curve.csv"))?;
        let table: Vec<(&str, f64, f64, Option<f64>)> = tau_rows
            .iter()
            .map(|r| ("tau", r.param, r.value, r.oracle_value))
            .chain(
                alpha_rows
                    .iter()
                    .map(|r| ("alpha", r.param, r.value, r.oracle_value)),
            )
            .collect();
        let gap = |v: f64, o: Option<f64>| o.filter(|&o| o > 0.0).map(|o| (v - o).abs() / o);
        write_table(
            &run.file("oracle_compare.csv"),
            &[
                "kind",
                "param",
                "solver_value",
                "oracle_value",
                "relative_gap",
            ],
            table.iter().map(|&(k, p, v, o)| {
                vec![k.to_string(), fmt17(p), fmt17(v), opt(o), opt(gap(v, o))]
            }),
        )?;
        let rows: Vec<Value> = table
            .iter()
            .map(|&(k, p, v, o)| {
                json!({ "kind": k, "param": p, "solver_value": v, "oracle_value": o, "relative_gap": gap(v, o) })
            })
            .collect();
        let max_gap = table
            .iter()
            .filter_map(|&(_, _, v, o)| gap(v, o))
            .fold(0.0, f64::max);
        outputs["scalar"] = json!({
            "oracle_gamma": s.gamma(),
            "rows": rows,
            "max_relative_gap": max_gap,
            "tolerance": ORACLE_GAP,
            "passes": max_gap <= ORACLE_GAP,
        });
    }
    if let Some(gc) = &e.galerkin {
        let horizon = required(e.horizon, "experiment.horizon", "the Galerkin comparison")?;
        let search = GalerkinSearch::from(gc);
        let bracket = galerkin_bruteforce_alpha(
            &run.inst.problem,
            horizon,
            &search,
            run.inst.solver.execution,
        )?;
        let alpha = solver.minimal_norm(horizon)?;
        outputs["galerkin"] = json!({
            "horizon": horizon,
            "search": search,
            "bracket": bracket,
            "solver_alpha": alpha.value,
            "contains_solver_value": bracket.contains(alpha.value),
        });
    }
    run.finish("oracle-compare", outputs, json!({}))
}

fn gradcheck(run: Run) -> Result<PathBuf, CliError> {
    let p = &run.inst.problem;
    let e = &run.inst.config.experiment;
    let gc = &e.gradcheck;
    let horizon = match e.horizon {
        Some(t) => t,
        None => 0.5 * gamma(p)?,
    };
    let fd_step = gc.fd_step.unwrap_or_else(|| default_fd_step(p));
    let threshold = if p.nonlinearity().is_zero() {
        1e-9
    } else {
        1e-6
    };
    let (g, dt, nt) = (p.grid(), p.dt(horizon), p.steps());
    let samples: Vec<u64> = (0..gc.samples as u64).collect();
    let errors = run
        .inst
        .solver
        .execution
        .map(&samples, |&i| -> crate::Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(gc.seed.wrapping_add(i));
            let raw = ControlSignal::from_fn(g, dt, nt, |_, _| gc.bound * rng.gen_range(-1.0..1.0));
            let v = project_pointwise(&raw, gc.bound, g)?;
            let direction = ControlSignal::from_fn(g, dt, nt, |_, _| rng.gen_range(-1.0..1.0));
            gradient_fd_check(p, &v, &direction, fd_step)
        })
        .into_iter()
        .collect::<crate::Result<Vec<_>>>()?;
    write_table(
        &run.file("gradcheck.csv"),
        &["sample", "relative_error"],
        errors
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i.to_string(), fmt17(*e)]),
    )?;
    let max = errors.iter().copied().fold(0.0, f64::max);
    let outputs = json!({
        "horizon": horizon,
        "samples": errors.len(),
        "max_relative_error": max,
        "threshold": threshold,
        "passes": max <= threshold,
    });
    run.finish(
        "gradcheck",
        outputs,
        json!({ "fd_step": fd_step, "seed": gc.seed, "steps": nt }),
    )
}
