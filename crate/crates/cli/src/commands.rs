use crate::config::{Command, Resolved, RunConfig};
use crate::selftest::{run_selftest, SelftestOptions};
use bdie_core::coefficient::{check_conditions, ConditionReport};
use bdie_core::system::{
    assemble_system, diagnostics, evaluate_u_field, solve, write_solution_csv, DirichletProblem, Discretized,
};
use bdie_core::verification::{
    conditioning_study, convergence_study, equivalence_check, green_identity_residuals, pde_check_points,
    probe_points, split_decay_study, study_quadrature, write_conditioning_csv, write_convergence_csv,
};
use bdie_core::{BdieError, ErrorCategory, Vec2};
use serde_json::{json, Value};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] BdieError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.category() {
                ErrorCategory::Input | ErrorCategory::Geometry => 2,
                ErrorCategory::Conditions => 3,
                ErrorCategory::Solver => 4,
            },
            CliError::Io(_) => 1,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => match e.category() {
                ErrorCategory::Input => "input",
                ErrorCategory::Geometry => "geometry",
                ErrorCategory::Conditions => "conditions",
                ErrorCategory::Solver => "solver",
            },
            CliError::Io(_) => "io",
        }
    }
}

/// Result of a successful command.
#[derive(Debug)]
pub struct Outcome {
    pub results: Value,
    /// Named assertions; a false entry makes the process exit with status 1.
    pub verdicts: Vec<(String, bool)>,
    pub files: Vec<PathBuf>,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|(_, ok)| *ok)
    }
}

/// Everything a run needs besides the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub flip_normals: bool,
}

fn problem(cfg: &RunConfig, r: &Resolved) -> DirichletProblem {
    DirichletProblem {
        curve: r.curve.clone(),
        field: r.field.clone(),
        source: r.source.clone(),
        dirichlet: r.dirichlet.clone(),
        disc: cfg.discretization(),
        compatibility_tol: cfg.tolerances.compatibility,
    }
}

fn conditions(cfg: &RunConfig, r: &Resolved, disc: &Discretized) -> Result<ConditionReport, CliError> {
    let rep = check_conditions(&r.field, &disc.mesh, &cfg.tolerances.conditions);
    if cfg.tolerances.enforce_conditions && !rep.passed() {
        return Err(BdieError::Conditions(format!("sampled checks failed: {}", rep.failures().join(", "))).into());
    }
    Ok(rep)
}

fn csv_file(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>, CliError> {
    let p = dir.join(name);
    files.push(p.clone());
    Ok(BufWriter::new(File::create(p)?))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Runs one command, writing CSV files into `out`.
pub fn execute(cfg: &RunConfig, cmd: Command, out: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    std::fs::create_dir_all(out)?;
    match cmd {
        Command::Solve => run_solve(cfg, out),
        Command::Verify => run_verify(cfg, out),
        Command::Convergence => run_convergence(cfg, out),
        Command::Conditioning => run_conditioning(cfg, out),
        Command::Selftest => {
            let report = run_selftest(&SelftestOptions { flip_normals: opts.flip_normals });
            let mut files = Vec::new();
            report.write_csv(csv_file(out, "selftest.csv", &mut files)?)?;
            Ok(Outcome {
                lines: report.lines(),
                verdicts: report.rows.iter().map(|r| (r.check.clone(), r.pass)).collect(),
                results: to_value(&report),
                files,
            })
        }
    }
}

fn run_solve(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let r = cfg.resolve()?;
    let p = problem(cfg, &r);
    let disc = Discretized::new(&p)?;
    let cond = conditions(cfg, &r, &disc)?;
    let sys = assemble_system(&p, &disc)?;
    let sol = solve(&sys, &cfg.solver)?;
    let diag = diagnostics(&sys, &disc, &sol);
    let mut files = Vec::new();
    write_solution_csv(
        &disc,
        &sol,
        csv_file(out, "solution_domain.csv", &mut files)?,
        csv_file(out, "solution_boundary.csv", &mut files)?,
    )?;
    let probes: Vec<Vec2> = probe_points(&r.curve).into_iter().take(3).collect();
    let mut probe_values = Vec::new();
    for y in &probes {
        let u = evaluate_u_field(&sol, &p, &disc, *y)?;
        let exact = r.case.as_ref().map(|c| c.u(*y));
        probe_values.push(json!({ "x": y.x, "y": y.y, "u": u, "u_exact": exact }));
    }
    let mut verdicts = vec![
        ("mean_zero_psi".to_string(), sol.mean_psi <= cfg.tolerances.mean_zero),
        ("solver_residual".to_string(), sol.relative_residual <= 1e-8),
    ];
    let mut lines = vec![
        format!("unknowns: {} domain + {} boundary + 1", diag.n_dom, diag.n_bnd),
        format!("relative residual: {:.3e}", sol.relative_residual),
        format!("mean-zero |<psi,1>|/|psi|: {:.3e}", sol.mean_psi),
        format!("dirichlet defect (lambda): {:.3e}", sol.lambda),
    ];
    let equivalence = match &r.case {
        Some(case) => {
            let rep = equivalence_check(case, &p, &disc, &sol, &[])?;
            lines.push(format!("psi error: {:.3e} (relative {:.3e})", rep.psi_error, rep.psi_relative));
            lines.push(format!("u error: {:.3e} (relative {:.3e})", rep.u_error, rep.u_relative));
            verdicts.push(("psi_error".into(), rep.psi_error <= cfg.verify.psi_tolerance));
            to_value(&rep)
        }
        None => Value::Null,
    };
    Ok(Outcome {
        results: json!({
            "conditions": to_value(&cond),
            "diagnostics": to_value(&diag),
            "lambda": sol.lambda,
            "mean_psi": sol.mean_psi,
            "iterations": sol.iterations,
            "equivalence": equivalence,
            "probes": probe_values,
        }),
        verdicts,
        files,
        lines,
    })
}

fn run_verify(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let r = cfg.resolve()?;
    let p = problem(cfg, &r);
    let disc = Discretized::new(&p)?;
    let cond = conditions(cfg, &r, &disc)?;
    let sys = assemble_system(&p, &disc)?;
    let (rd, rb) = sys.remainder_max();
    let mut lines = vec![
        format!("remainder block max: {rd:.3e}"),
        format!("trace remainder block max: {rb:.3e}"),
    ];
    let mut verdicts = vec![("conditions".to_string(), cond.passed())];
    if r.field.is_constant() {
        verdicts.push(("constant_coefficient_remainder".into(), rd.max(rb) <= 1e-12));
    }
    let sol = solve(&sys, &cfg.solver)?;
    verdicts.push(("mean_zero_psi".into(), sol.mean_psi <= cfg.tolerances.mean_zero));
    let mut results = json!({
        "conditions": to_value(&cond),
        "remainder_block_max": rd,
        "trace_remainder_block_max": rb,
        "mean_psi": sol.mean_psi,
    });
    if let Some(case) = &r.case {
        let chk = case.check(&disc.mesh, &disc.grid, cfg.seed);
        let green = green_identity_residuals(case, &disc, &probe_points(&r.curve));
        let eq = equivalence_check(case, &p, &disc, &sol, &pde_check_points(&r.curve))?;
        lines.push(format!("case check: fd {:.3e}, <f,1> {:.3e}", chk.source_fd_error, chk.mean_source));
        lines.push(format!("third green identity max residual: {:.3e}", green.third_max));
        lines.push(format!("trace identity max residual: {:.3e}", green.trace_max));
        lines.push(format!("psi - T+u: {:.3e}", eq.psi_error));
        lines.push(format!("V(psi - T+u): {:.3e}", eq.single_layer_residual));
        verdicts.push(("case_consistency".into(), chk.passed(cfg.tolerances.compatibility.max(1e-10))));
        verdicts.push(("third_green_identity".into(), green.third_max <= cfg.verify.green_tolerance));
        verdicts.push(("trace_green_identity".into(), green.trace_max <= cfg.verify.green_tolerance));
        verdicts.push(("equivalence_psi".into(), eq.psi_error <= cfg.verify.psi_tolerance));
        results["case_check"] = to_value(&chk);
        results["green"] = to_value(&green);
        results["equivalence"] = to_value(&eq);
    }
    let mut files = Vec::new();
    if !r.field.is_constant() && !cfg.verify.split_radii.is_empty() {
        let quad = study_quadrature(&r.curve, cfg.verify.split_r_trunc, cfg.verify.split_h)?;
        let study = split_decay_study(&r.field, &quad, &cfg.verify.split_radii, cfg.seed)?;
        let mut w = csv::Writer::from_writer(csv_file(out, "split.csv", &mut files)?);
        w.write_record(["r", "norm_rs", "factor", "split_defect"]).map_err(std::io::Error::from)?;
        for row in &study.rows {
            lines.push(format!(
                "split r = {}: |R_s| = {:.3e}, factor = {:.3e}",
                row.radius, row.norm_smooth, row.factor
            ));
            w.write_record([
                row.radius.to_string(),
                format!("{:.6e}", row.norm_smooth),
                format!("{:.6e}", row.factor),
                format!("{:.3e}", row.split_defect),
            ])
            .map_err(std::io::Error::from)?;
        }
        w.flush()?;
        let defect = study.rows.iter().map(|r| r.split_defect).fold(0.0, f64::max);
        verdicts.push(("split_norms_decreasing".into(), study.norms_decreasing));
        verdicts.push(("split_sum".into(), defect <= 1e-14));
        results["split"] = to_value(&study);
    }
    Ok(Outcome { results, verdicts, files, lines })
}

fn run_convergence(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let r = cfg.resolve()?;
    let case = r.case.as_ref().ok_or_else(|| CliError::Config("convergence needs data.case".into()))?;
    {
        let p = problem(cfg, &r);
        conditions(cfg, &r, &Discretized::new(&p)?)?;
    }
    let rows = convergence_study(
        case,
        &r.curve,
        &cfg.discretization(),
        &cfg.convergence.levels,
        &cfg.solver,
        cfg.tolerances.compatibility,
    )?;
    let mut files = Vec::new();
    write_convergence_csv(&rows, csv_file(out, "convergence.csv", &mut files)?)?;
    let lines = rows
        .iter()
        .map(|r| {
            format!(
                "N = {:4} h = {:<6} err_u = {:.3e} err_psi = {:.3e} order = {}",
                r.n,
                r.h,
                r.err_u,
                r.err_psi,
                r.order.map(|o| format!("{o:.2}")).unwrap_or_else(|| "-".into())
            )
        })
        .collect();
    let orders_ok = rows.iter().skip(1).all(|r| r.order.is_some_and(|o| o >= cfg.convergence.min_order));
    let finest = rows.last().map(|r| r.psi_error_abs).unwrap_or(f64::INFINITY);
    // timings are kept out of the deterministic report
    let rows_json: Vec<Value> = rows
        .iter()
        .map(|r| {
            let mut v = to_value(r);
            if let Some(m) = v.as_object_mut() {
                m.remove("seconds");
            }
            v
        })
        .collect();
    Ok(Outcome {
        results: json!({ "rows": rows_json, "finest_psi_error": finest }),
        verdicts: vec![("orders".into(), orders_ok), ("finest_psi_error".into(), finest <= cfg.verify.psi_tolerance)],
        files,
        lines,
    })
}

fn run_conditioning(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let r = cfg.resolve()?;
    let mut p = problem(cfg, &r);
    p.disc.h = cfg.conditioning.h;
    conditions(cfg, &r, &Discretized::new(&p)?)?;
    let study = conditioning_study(&p, &cfg.conditioning.ns)?;
    let mut files = Vec::new();
    write_conditioning_csv(&study.rows, csv_file(out, "conditioning.csv", &mut files)?)?;
    let lines = study
        .rows
        .iter()
        .map(|r| {
            format!(
                "N = {:4} cond_M = {:.4e} sigma_min_V = {:.6} (euclidean cond {:.3e}, sigma {:.3e})",
                r.n, r.cond_m, r.sigma_min_v, r.cond_euclidean, r.sigma_min_v_euclidean
            )
        })
        .collect();
    Ok(Outcome {
        verdicts: vec![
            ("cond_ratio".into(), study.max_cond_ratio <= cfg.conditioning.max_ratio),
            ("sigma_spread".into(), study.sigma_spread <= cfg.conditioning.max_sigma_spread),
        ],
        results: to_value(&study),
        files,
        lines,
    })
}

/// The JSON report for a finished command.
pub fn summary(cfg: &RunConfig, cmd: Command, res: &Result<Outcome, CliError>) -> Value {
    let mut resolved = cfg.clone();
    resolved.command = Some(cmd);
    match res {
        Ok(o) => json!({
            "command": cmd.name(),
            "status": if o.passed() { "ok" } else { "failed" },
            "config": to_value(&resolved),
            "verdicts": o.verdicts.iter().map(|(k, v)| (k.clone(), Value::Bool(*v))).collect::<serde_json::Map<_, _>>(),
            "results": o.results,
            "files": o.files.iter().filter_map(|f| f.file_name()).map(|f| f.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        }),
        Err(e) => json!({
            "command": cmd.name(),
            "status": "error",
            "config": to_value(&resolved),
            "error": { "category": e.category(), "exit_code": e.exit_code(), "message": e.to_string() },
        }),
    }
}

/// Runs a command end to end: executes it, writes `summary.json` and
/// `timings.json`, and returns the process exit status.
pub fn run(cfg: &RunConfig, cmd: Command, out: &Path, opts: &RunOptions) -> (i32, Value) {
    let start = Instant::now();
    let res = execute(cfg, cmd, out, opts);
    let value = summary(cfg, cmd, &res);
    let code = match &res {
        Ok(o) if o.passed() => 0,
        Ok(_) => 1,
        Err(e) => e.exit_code(),
    };
    let write = || -> std::io::Result<()> {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&value)? + "\n")?;
        let t = json!({ "command": cmd.name(), "seconds": start.elapsed().as_secs_f64() });
        std::fs::write(out.join("timings.json"), serde_json::to_string_pretty(&t)? + "\n")
    };
    if let Err(e) = write() {
        eprintln!("error: cannot write reports to {}: {e}", out.display());
        return (1, value);
    }
    match &res {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            for (k, ok) in &o.verdicts {
                println!("{} {k}", if *ok { "PASS" } else { "FAIL" });
            }
        }
        Err(e) => eprintln!("error [{}]: {e}", e.category()),
    }
    (code, value)
}
