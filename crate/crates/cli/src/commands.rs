use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use maxreg::duhamel::{duhamel_residual, solve_shifted};
use maxreg::estimates::{self, EstimateReport, DEFAULT_PROBES};
use maxreg::problems::{Problem, ProblemSpec};
use maxreg::{Backend, CalculusEngine, Error, FormPath, Method, SolveConfig};
use serde::Serialize;

use crate::output::{num, OutDir, RunManifest};
use crate::{BackendArg, Command, Common, MethodArg, SolverArgs, Suite};

/// Failures raised by the front-end itself.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("hypothesis failure: {0}")]
    Hypothesis(String),
}

/// 1: parse or validation error, 2: hypothesis failure, 3: solver rejection.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Input(_) => 1,
                Failure::Hypothesis(_) => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Degenerate(_) | Error::NotPositiveDefinite { .. } | Error::PathTooRough { .. } => 2,
                Error::SolverRejected(_) | Error::MaxIterations { .. } | Error::Singular(_) | Error::Quadrature { .. } => 3,
                _ => 1,
            };
        }
    }
    1
}

pub fn run(command: Command) -> Result<u8> {
    let start = Instant::now();
    let (name, common, config) = match &command {
        Command::Analyze { common, alpha, eps } => (
            "analyze",
            common,
            serde_json::json!({ "alpha": alpha, "eps": eps }),
        ),
        Command::Solve { common, solver, u0, f } => (
            "solve",
            common,
            serde_json::json!({ "solver": solver, "u0": u0, "f": f }),
        ),
        Command::Verify { common, solver, suite } => (
            "verify",
            common,
            serde_json::json!({ "solver": solver, "suite": suite }),
        ),
        Command::Compare { common, solver, dt_sweep, u0, f } => (
            "compare",
            common,
            serde_json::json!({ "solver": solver, "dt_sweep": dt_sweep, "u0": u0, "f": f }),
        ),
    };
    let problem = load_problem(&common.problem)?;
    let engine = CalculusEngine::new(match common.backend {
        BackendArg::Eigen => Backend::Eigen,
        BackendArg::Contour => Backend::Contour,
    });
    let mut out = OutDir::create(&common.out)?;
    let code = match &command {
        Command::Analyze { alpha, eps, .. } => analyze(&problem, alpha, *eps, &mut out)?,
        Command::Solve { solver, u0, f, .. } => solve(&engine, &problem, common, solver, u0, f, &mut out)?,
        Command::Verify { solver, suite, .. } => verify(&engine, &problem, common, solver, *suite, &mut out)?,
        Command::Compare {
            solver, dt_sweep, u0, f, ..
        } => compare(&engine, &problem, common, solver, dt_sweep, u0, f, &mut out)?,
    };
    out.finish(RunManifest {
        command: name.to_string(),
        problem: common.problem.clone(),
        config: serde_json::json!({ "common": common, "command": config }),
        seed: common.seed,
        out: common.out.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: rayon::current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files: Vec::new(),
    })?;
    Ok(code)
}

fn load_problem(file: &Path) -> Result<Problem> {
    let spec = ProblemSpec::load(file).with_context(|| format!("reading problem {}", file.display()))?;
    let base = file.parent().unwrap_or(Path::new("."));
    spec.build(base).context("building problem")
}

fn solve_config(problem: &Problem, args: &SolverArgs, seed: u64) -> Result<(SolveConfig, Method)> {
    let mut cfg = SolveConfig {
        seed,
        ..SolveConfig::default()
    };
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if let Some(eps) = args.eps {
        cfg.eps = eps;
    }
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    cfg.validate()?;
    let method = match args.method {
        Some(MethodArg::Neumann) => Method::Neumann,
        Some(MethodArg::Gamma0) => Method::Gamma0,
        Some(MethodArg::Reference | MethodArg::CrankNicolson) => Method::CrankNicolson,
        Some(MethodArg::BackwardEuler) => Method::BackwardEuler,
        None if problem.gamma0_eligible => Method::Gamma0,
        None => Method::Neumann,
    };
    Ok((cfg, method))
}

/// The path with its shift folded into the forms.
fn coercive_path(path: &FormPath) -> Result<FormPath> {
    let nu = path.hyp().nu;
    if nu == 0.0 {
        return Ok(path.clone());
    }
    Ok(path.shifted(nu)?.with_nu(0.0)?)
}

fn analyze(problem: &Problem, alphas: &[f64], eps: f64, out: &mut OutDir) -> Result<u8> {
    let path = &problem.path;
    let check = path.verify_hypotheses()?;
    out.json(
        "hypotheses.json",
        &serde_json::json!({
            "check": check,
            "gamma": problem.gamma,
            "m0": problem.m0,
            "gamma0_eligible": problem.gamma0_eligible,
            "breakpoints": path.breakpoints(),
        }),
    )?;
    let tau = path.tau();
    let mut rows = Vec::new();
    for &a in alphas {
        for g in [0.0, 0.5, 1.0] {
            let s = path.sobolev_seminorm(a, g, 0.0, tau)?;
            rows.push(vec![num(a), num(g), num(s)]);
        }
    }
    out.csv("seminorms.csv", &["alpha", "gamma", "seminorm"], &rows)?;
    let sub = match path.subdivide(eps) {
        Ok(s) => s,
        Err(e @ Error::PathTooRough { .. }) => {
            out.text("breakpoints.csv", "start,end,certificate\n")?;
            return Err(Failure::Hypothesis(e.to_string()).into());
        }
        Err(e) => return Err(e.into()),
    };
    let rows: Vec<Vec<String>> = sub
        .intervals()
        .zip(&sub.certificates)
        .map(|((a, b), c)| vec![num(a), num(b), num(*c)])
        .collect();
    out.csv("breakpoints.csv", &["start", "end", "certificate"], &rows)?;
    Ok(0)
}

#[derive(Serialize)]
struct NormsFile {
    method: Method,
    #[serde(flatten)]
    norms: maxreg::duhamel::TrajectoryNorms,
    final_value: Vec<f64>,
    duhamel_residual: Option<f64>,
}

fn solve(
    engine: &CalculusEngine,
    problem: &Problem,
    common: &Common,
    args: &SolverArgs,
    u0: &str,
    f: &str,
    out: &mut OutDir,
) -> Result<u8> {
    let (cfg, method) = solve_config(problem, args, common.seed)?;
    let u0 = problem.initial_value(u0)?;
    let forcing = problem.forcing(f)?;
    let traj = solve_shifted(engine, &problem.path, &u0, &forcing, &cfg, method)?;
    let residual = match method {
        Method::Neumann | Method::Gamma0 if problem.path.hyp().nu == 0.0 => {
            Some(duhamel_residual(engine, &problem.path, &traj, &forcing)?)
        }
        _ => None,
    };
    let n = traj.values()[0].len();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("u_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = traj
        .grid()
        .iter()
        .zip(traj.values())
        .map(|(t, v)| std::iter::once(num(*t)).chain(v.iter().map(|x| num(*x))).collect())
        .collect();
    out.csv("trajectory.csv", &header, &rows)?;
    out.json(
        "norms.json",
        &NormsFile {
            method,
            norms: traj.norms(),
            final_value: traj.final_value().iter().copied().collect(),
            duhamel_residual: residual,
        },
    )?;
    out.json("diagnostics.json", traj.diagnostics())?;
    Ok(0)
}

fn verify(
    engine: &CalculusEngine,
    problem: &Problem,
    common: &Common,
    args: &SolverArgs,
    suite: Suite,
    out: &mut OutDir,
) -> Result<u8> {
    let (cfg, method) = solve_config(problem, args, common.seed)?;
    let path = coercive_path(&problem.path)?;
    let want = |s: Suite| suite == Suite::All || suite == s;
    let mut reports: Vec<EstimateReport> = Vec::new();
    if want(Suite::Kato) {
        reports.extend(estimates::kato_reports(engine, &path)?);
    }
    if want(Suite::Quadratic) {
        for t in estimates::sample_times(&path) {
            reports.push(estimates::quadratic_estimate(engine, &path, t, f64::INFINITY, DEFAULT_PROBES)?);
        }
    }
    if want(Suite::Resolvent) {
        reports.extend(estimates::resolvent_suite(
            engine,
            &path,
            &[0.0, 0.5, 1.0],
            &estimates::default_mu_grid(),
        )?);
    }
    if want(Suite::Apriori) {
        let trials = estimates::standard_trials(path.triple(), 12, path.tau(), common.seed);
        reports.push(estimates::apriori_constant(engine, &problem.path, &trials, &cfg, method)?);
        reports.push(estimates::linf_v_estimate(engine, &problem.path, &trials, &cfg, method)?);
    }
    if want(Suite::Lbound) {
        reports.push(estimates::l_boundedness(engine, &path, problem.gamma, 8, cfg.dt)?);
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                num(r.measured),
                r.bound.map(num).unwrap_or_default(),
                r.pass.to_string(),
                format!("{:?}", r.relation).to_lowercase(),
                r.refined.map(num).unwrap_or_default(),
                r.probes.to_string(),
                r.grid.clone(),
            ]
        })
        .collect();
    out.csv(
        "reports.csv",
        &["name", "measured", "bound", "pass", "relation", "refined", "probes", "grid"],
        &rows,
    )?;
    let failed: Vec<&str> = reports
        .iter()
        .filter(|r| r.bound.is_some() && !r.pass)
        .map(|r| r.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed: {}", failed.join(", "));
        Ok(2)
    }
}

#[allow(clippy::too_many_arguments)]
fn compare(
    engine: &CalculusEngine,
    problem: &Problem,
    common: &Common,
    args: &SolverArgs,
    sweep: &[f64],
    u0: &str,
    f: &str,
    out: &mut OutDir,
) -> Result<u8> {
    if sweep.is_empty() {
        return Err(Failure::Input("empty dt sweep".into()).into());
    }
    let (cfg, method) = solve_config(problem, args, common.seed)?;
    let u0 = problem.initial_value(u0)?;
    let forcing = problem.forcing(f)?;
    let finest = sweep.iter().copied().fold(f64::INFINITY, f64::min);
    let reference_cfg = SolveConfig {
        dt: finest / 8.0,
        ..cfg
    };
    let reference = solve_shifted(engine, &problem.path, &u0, &forcing, &reference_cfg, Method::CrankNicolson)?;
    let mut rows = Vec::new();
    let mut plot = String::from("# dt discrepancy\n");
    let mut prev: Option<(f64, f64)> = None;
    for &dt in sweep {
        let c = SolveConfig { dt, ..cfg };
        let traj = solve_shifted(engine, &problem.path, &u0, &forcing, &c, method)?;
        let d = traj.relative_l2_h_difference(&reference)?;
        let order = prev.map(|(pdt, pd)| (pd / d).ln() / (pdt / dt).ln());
        rows.push(vec![num(dt), num(d), order.map(num).unwrap_or_default()]);
        plot.push_str(&format!("{dt:e} {d:e}\n"));
        prev = Some((dt, d));
    }
    out.csv("convergence.csv", &["dt", "discrepancy", "order"], &rows)?;
    out.text("plot.dat", &plot)?;
    Ok(0)
}
