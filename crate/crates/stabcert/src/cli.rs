//! Command front end: configuration assembly, command dispatch, CSV artifact
//! emission and exit codes.
//!
//! # Invocation
//!
//! ```text
//! stabcert <command> [builtin-system] [key=value ...] [--config <file>] [--out <dir>]
//! ```
//!
//! Commands: `certify`, `simulate`, `discretize`, `optimize`, `report`.
//! A positional `example41` / `example42` selects a built-in system; every
//! other parameter arrives as `key=value` (overriding the `--config` file).
//! All numeric parameters live in the configuration; the only environment
//! override is `STABCERT_WORKERS` for the worker-thread count.
//!
//! Exit codes: `0` certified/pass, `1` a condition failed with a witness,
//! `2` inconclusive (skipped regions), `3` configuration error.
//!
//! # Configuration grammar
//!
//! One `key = value` per line; `#` starts a comment; unknown and duplicate
//! keys are rejected with their line number. Keys:
//!
//! - `system`: `example41` | `example42` | `custom`
//! - built-in parameters: `p`, `c1`, `c2`, `lambda`, `beta_gain`,
//!   `beta_exponent`
//! - custom systems: `state_dim`, `dist_dim`, `field_1..field_n` (state
//!   expressions), `box` = `[a,b];[c,d]` (one interval per disturbance
//!   coordinate)
//! - certificates (`cert` = `classical` | `general` | `linear`): `v`, `k`,
//!   `w_0..w_k`, `phi` as expressions; gauges (`rho`, `c1_gauge`, `c2_gauge`,
//!   `g_gauge`, `gtilde_gauge`, `lambda_gauge`, `gamma_gauge`, `b_0..b_k`) in
//!   the gauge grammar below; `mu` = `zero` | `[(coeff,exp),...]`;
//!   `r` = `auto` | `const <value>`; linear certificates take plain numbers
//!   (`rho`, `c1`, `c2`, `g`, `gtilde`, `lambda`, `gamma`, `mu`, `b_0..b_k`,
//!   `r`, `k1`, `k2`)
//! - sampling: `shells`, `directions`, `fill`, `level_min`, `level_max`,
//!   `seed`
//! - tolerances: `integrator_tol`, `delta_strict`
//! - simulation: `x0` = `(a,b,...)`, `horizon`, `dwell`,
//!   `strategy` = `vertices` | `uniform` | `mixed`, `mc_runs`, `steps`,
//!   `x0_radius`
//! - optimization: `c1_min`, `c1_max`, `c2_min`, `c2_max`, `lambda_min`,
//!   `lambda_max`, `resolution`
//! - output: `out_dir`
//!
//! ## State expressions
//!
//! Over `x1..xn` and `d1..dl`: numbers, `+ - * /`, unary minus, integer
//! powers `^`, parentheses. Example: `-(1+d1)*x1 - 2*x2`.
//!
//! ## Gauge grammar
//!
//! `kind=linear coeff=3` | `kind=power coeff=1 exp=2` |
//! `kind=sum terms=[(1,1),(0.5,3)]` | `kind=pwl points=[(0,0),(1,2),(2,5)]`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::certificate::contraction_time;
use crate::checker::{self, CheckReport, Conclusion};
use crate::config::{Command, ConfigError, ModelPair, RawConfig, RunConfig};
use crate::discretize::{decay_envelope, run_contraction, ContractionRun};
use crate::gauge::{ClassTag, GaugeFunction};
use crate::simulate::integrate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Result of a dispatched command.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

fn config_failure(message: String) -> RunOutcome {
    RunOutcome { exit_code: EXIT_CONFIG, summary: message, artifacts: Vec::new() }
}

/// Dispatch a validated configuration.
pub fn run(config: &RunConfig) -> RunOutcome {
    if let Err(e) = fs::create_dir_all(&config.out_dir) {
        return config_failure(format!("cannot create output directory: {e}"));
    }
    match config.command {
        Command::Certify => cmd_certify(config),
        Command::Simulate => cmd_simulate(config),
        Command::Discretize => cmd_discretize(config),
        Command::Optimize => cmd_optimize(config),
        Command::Report => cmd_report(config),
    }
}

fn model_of(config: &RunConfig) -> Result<&ModelPair, RunOutcome> {
    config
        .model
        .as_ref()
        .ok_or_else(|| config_failure("this command needs a `system`".to_string()))
}

fn write_file(path: &Path, content: &str) -> Result<(), RunOutcome> {
    fs::write(path, content)
        .map_err(|e| config_failure(format!("cannot write {}: {e}", path.display())))
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(";")
}

fn report_csv(report: &CheckReport) -> String {
    let mut out = String::from("condition,status,margin,samples,witness_x,witness_d,lhs,rhs,note\n");
    for e in &report.entries {
        let (wx, wd, lhs, rhs) = match &e.witness {
            Some(w) => (
                fmt_vec(&w.x),
                w.d.as_ref().map(|d| fmt_vec(d)).unwrap_or_default(),
                format!("{}", w.lhs),
                format!("{}", w.rhs),
            ),
            None => (String::new(), String::new(), String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            e.condition,
            e.status.as_str(),
            e.margin,
            e.samples,
            wx,
            wd,
            lhs,
            rhs,
            e.note.as_deref().unwrap_or("").replace(',', ";")
        ));
    }
    out
}

fn cmd_certify(config: &RunConfig) -> RunOutcome {
    let model = match model_of(config) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let verdict =
        match checker::certify(&model.system, &model.certificate, &config.sampling) {
            Ok(v) => v,
            Err(e) => return config_failure(format!("{e}")),
        };
    let mut report = CheckReport { entries: model.extra_entries.clone() };
    report.merge(verdict.report.clone());

    let exit_code = if report.any_failed() {
        EXIT_FAIL
    } else if report.any_skipped() || verdict.conclusion == Conclusion::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    };
    let conclusion = if report.any_failed() && verdict.conclusion != Conclusion::Inconclusive {
        Conclusion::Inconclusive
    } else {
        verdict.conclusion
    };

    let mut summary = String::new();
    summary.push_str(&format!(
        "system: {}\nroute: {}\nconclusion: {}\n",
        model.system.name,
        verdict.route.as_str(),
        conclusion.as_str()
    ));
    if let Some((m, sigma)) = verdict.exponential {
        summary.push_str(&format!(
            "envelope: |x(t)| <= {m:.6e} * exp(-{sigma:.6e} t) |x0|\n"
        ));
    }
    for e in &report.entries {
        summary.push_str(&format!(
            "  [{}] {} margin={:.6e} samples={}{}{}\n",
            e.condition,
            e.status.as_str(),
            e.margin,
            e.samples,
            if e.advisory { " (advisory)" } else { "" },
            e.note.as_ref().map(|n| format!(" — {n}")).unwrap_or_default()
        ));
    }

    let report_path = config.out_dir.join("report.csv");
    if let Err(out) = write_file(&report_path, &report_csv(&report)) {
        return out;
    }
    let summary_path = config.out_dir.join("summary.txt");
    if let Err(out) = write_file(&summary_path, &summary) {
        return out;
    }
    RunOutcome { exit_code, summary, artifacts: vec![report_path, summary_path] }
}

fn trajectory_csv(
    traj: &crate::simulate::Trajectory,
    v: Option<&crate::expr::ScalarField>,
) -> String {
    let n = traj.dim();
    let l = traj.signal.value_at(0.0).len();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=l).map(|j| format!("d_{j}")));
    if v.is_some() {
        header.push("V".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for (t, x) in traj.times().iter().zip(traj.states().iter()) {
        let mut row: Vec<String> = vec![format!("{t}")];
        row.extend(x.iter().map(|c| format!("{c}")));
        row.extend(traj.signal.value_at(*t).iter().map(|c| format!("{c}")));
        if let Some(vf) = v {
            row.push(format!("{}", vf.value(x)));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn cmd_simulate(config: &RunConfig) -> RunOutcome {
    let model = match model_of(config) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let n = model.system.dim();
    let x0 = config.x0.clone().unwrap_or_else(|| vec![1.0; n]);
    if x0.len() != n {
        return config_failure(format!("x0 has {} components, system has {n}", x0.len()));
    }
    let v = model.certificate.general_view().v;
    let mut artifacts = Vec::new();
    let mut summary = String::new();
    let mut exit_code = EXIT_OK;
    for run_idx in 0..config.mc_runs.max(1) {
        let seed = config.sampling.seed + run_idx as u64;
        let signal = match model.system.sample_signal(
            config.horizon,
            config.dwell,
            config.strategy,
            seed,
        ) {
            Ok(s) => s,
            Err(e) => return config_failure(format!("{e}")),
        };
        match integrate(&model.system, &x0, &signal, config.horizon, config.tol) {
            Ok(traj) => {
                let path = config.out_dir.join(format!("trajectory_{run_idx:03}.csv"));
                if let Err(out) = write_file(&path, &trajectory_csv(&traj, Some(&v))) {
                    return out;
                }
                summary.push_str(&format!(
                    "run {run_idx}: seed {seed}, {} nodes, final V = {:.6e}\n",
                    traj.times().len(),
                    v.value(traj.final_state())
                ));
                artifacts.push(path);
            }
            Err(e) => {
                summary.push_str(&format!("run {run_idx}: seed {seed}, {e}\n"));
                exit_code = EXIT_FAIL;
            }
        }
    }
    let summary_path = config.out_dir.join("summary.txt");
    if let Err(out) = write_file(&summary_path, &summary) {
        return out;
    }
    artifacts.push(summary_path);
    RunOutcome { exit_code, summary, artifacts }
}

fn contraction_csv(run: &ContractionRun) -> String {
    let mut out = String::from("i,tau_i,t_i,T_i,V_i,pass\n");
    for i in 0..run.v_values.len() {
        let (t_i, big_t, pass) = if i < run.step_times.len() {
            (
                format!("{}", run.step_times[i]),
                format!("{}", run.horizons[i]),
                format!("{}", run.pass[i]),
            )
        } else {
            (String::new(), String::new(), String::new())
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i, run.taus[i], t_i, big_t, run.v_values[i], pass
        ));
    }
    out
}

/// Starting states for the Monte Carlo ensemble: deterministic directions at
/// staggered radii inside the configured ball.
fn ensemble_starts(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let r = radius * (i as f64 + 1.0) / (count as f64);
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm < 1e-9 {
            u = vec![1.0; n];
        }
        let norm: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        out.push(u.iter().map(|c| c * r / norm).collect());
    }
    out
}

fn cmd_discretize(config: &RunConfig) -> RunOutcome {
    let model = match model_of(config) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let gv = model.certificate.general_view();
    let lambda = gv.lambda.clone();
    let q = GaugeFunction::custom(
        "s - lambda(s)",
        move |s| s - lambda.value(s),
        ClassTag::PositiveDefinite,
    );
    let gv_t = gv.clone();
    let t_map = move |x: &[f64]| -> Result<f64, String> {
        contraction_time(&gv_t, x).map_err(|e| format!("{e}"))
    };

    let starts = ensemble_starts(
        model.system.dim(),
        config.mc_runs.max(1),
        config.x0_radius,
        config.sampling.seed,
    );
    let mut runs = Vec::new();
    let mut artifacts = Vec::new();
    let mut summary = String::new();
    for (idx, x0) in starts.iter().enumerate() {
        // Size the signal from the first horizon and retry on exhaustion; a
        // longer horizon with the same seed extends the same signal.
        let t0 = match t_map(x0) {
            Ok(t) => t,
            Err(e) => return config_failure(e),
        };
        let mut horizon = (t0 * config.steps as f64) * 1.5 + 1.0;
        let seed = config.sampling.seed + idx as u64;
        let run = loop {
            let signal = match model.system.sample_signal(
                horizon,
                config.dwell,
                config.strategy,
                seed,
            ) {
                Ok(s) => s,
                Err(e) => return config_failure(format!("{e}")),
            };
            match run_contraction(
                &model.system,
                &gv.v,
                &t_map,
                &q,
                x0,
                &signal,
                config.steps,
                config.tol,
                None,
            ) {
                Ok(r) => break r,
                Err(crate::discretize::DiscretizeError::Configuration(_)) if horizon < 1e9 => {
                    horizon *= 2.0;
                }
                Err(e) => return config_failure(format!("{e}")),
            }
        };
        let path = config.out_dir.join(format!("run_{idx:03}.csv"));
        if let Err(out) = write_file(&path, &contraction_csv(&run)) {
            return out;
        }
        artifacts.push(path);
        summary.push_str(&format!(
            "run {idx}: x0 = ({}), steps = {}, passed = {}{}\n",
            fmt_vec(x0),
            run.steps_completed(),
            run.all_passed(),
            if run.diverged { " (diverged)" } else { "" }
        ));
        runs.push(run);
    }

    let all_passed = runs.iter().all(|r| r.all_passed());
    let conforms = match decay_envelope(&runs, &q) {
        Ok((_, conf)) => {
            summary.push_str(&format!(
                "decay envelope: max ratio {:.6e}, violations {}\n",
                conf.max_ratio,
                conf.violations.len()
            ));
            conf.conforms()
        }
        Err(e) => {
            summary.push_str(&format!("decay envelope: {e}\n"));
            false
        }
    };

    let summary_path = config.out_dir.join("summary.txt");
    if let Err(out) = write_file(&summary_path, &summary) {
        return out;
    }
    artifacts.push(summary_path);
    RunOutcome {
        exit_code: if all_passed && conforms { EXIT_OK } else { EXIT_FAIL },
        summary,
        artifacts,
    }
}

fn cmd_optimize(config: &RunConfig) -> RunOutcome {
    let result = match crate::examples::maximize_p(&config.search) {
        Ok(r) => r,
        Err(e) => return config_failure(format!("{e}")),
    };
    let mut csv = String::from("p,c1,c2,lambda,margin,feasible\n");
    for row in &result.frontier {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.p, row.c1, row.c2, row.lambda, row.margin, row.feasible
        ));
    }
    let path = config.out_dir.join("frontier.csv");
    if let Err(out) = write_file(&path, &csv) {
        return out;
    }
    let mut summary = format!("p_best = {}\n", result.p_best);
    if let Some(best) = &result.best {
        summary.push_str(&format!(
            "at c1 = {}, c2 = {}, lambda = {}, margin = {:.6e}\n",
            best.c1, best.c2, best.lambda, best.margin
        ));
    }
    let summary_path = config.out_dir.join("summary.txt");
    if let Err(out) = write_file(&summary_path, &summary) {
        return out;
    }
    RunOutcome { exit_code: EXIT_OK, summary, artifacts: vec![path, summary_path] }
}

fn cmd_report(config: &RunConfig) -> RunOutcome {
    let dir = &config.out_dir;
    if !dir.is_dir() {
        return config_failure(format!("output directory {} does not exist", dir.display()));
    }
    let mut summary = String::new();
    let report_path = dir.join("report.csv");
    if let Ok(text) = fs::read_to_string(&report_path) {
        let mut pass = 0usize;
        let mut fail = 0usize;
        let mut skipped = 0usize;
        for line in text.lines().skip(1) {
            let status = line.split(',').nth(1).unwrap_or("");
            if status.starts_with("PASS") {
                pass += 1;
            } else if status == "FAIL" {
                fail += 1;
            } else if status == "SKIPPED" {
                skipped += 1;
            }
        }
        summary.push_str(&format!(
            "certification report: {pass} passed, {fail} failed, {skipped} skipped\n"
        ));
    }
    let mut run_files: Vec<_> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .map(|n| n.starts_with("run_") && n.ends_with(".csv"))
                        .unwrap_or(false)
                })
                .collect()
        })
        .unwrap_or_default();
    run_files.sort();
    if !run_files.is_empty() {
        let mut total = 0usize;
        let mut passed = 0usize;
        for f in &run_files {
            if let Ok(text) = fs::read_to_string(f) {
                for line in text.lines().skip(1) {
                    match line.rsplit(',').next() {
                        Some("true") => {
                            total += 1;
                            passed += 1;
                        }
                        Some("false") => total += 1,
                        _ => {}
                    }
                }
            }
        }
        summary.push_str(&format!(
            "contraction runs: {} files, {passed}/{total} steps contracted\n",
            run_files.len()
        ));
    }
    if let Ok(text) = fs::read_to_string(dir.join("frontier.csv")) {
        let best = text
            .lines()
            .skip(1)
            .filter(|l| l.ends_with("true"))
            .filter_map(|l| l.split(',').next())
            .filter_map(|p| p.parse::<f64>().ok())
            .fold(f64::NAN, f64::max);
        if best.is_finite() {
            summary.push_str(&format!("amplitude frontier: best feasible p = {best}\n"));
        }
    }
    if summary.is_empty() {
        summary.push_str("no artifacts found to merge\n");
    }
    let merged = dir.join("merged_summary.txt");
    if let Err(out) = write_file(&merged, &summary) {
        return out;
    }
    RunOutcome { exit_code: EXIT_OK, summary, artifacts: vec![merged] }
}

/// Parse command-line arguments, assemble the configuration and run.
/// Prints the summary to stdout and errors to stderr; returns the exit code.
pub fn run_cli(args: &[String]) -> i32 {
    match assemble(args) {
        Ok(config) => {
            let outcome = run(&config);
            print!("{}", outcome.summary);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}

fn assemble(args: &[String]) -> Result<RunConfig, ConfigError> {
    if let Ok(workers) = std::env::var("STABCERT_WORKERS") {
        if let Ok(count) = workers.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(count).build_global();
        }
    }
    let mut it = args.iter().peekable();
    let command: Command = it
        .next()
        .ok_or_else(|| {
            ConfigError::plain("usage: stabcert <certify|simulate|discretize|optimize|report> ...")
        })?
        .parse()
        .map_err(ConfigError::plain)?;

    let mut raw = RawConfig::default();
    let mut overrides: Vec<(String, String)> = Vec::new();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            let path = it
                .next()
                .ok_or_else(|| ConfigError::plain("--config needs a path"))?;
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::plain(format!("cannot read {path}: {e}")))?;
            raw = RawConfig::parse(&text)?;
        } else if arg == "--out" {
            let dir = it.next().ok_or_else(|| ConfigError::plain("--out needs a path"))?;
            overrides.push(("out_dir".into(), dir.clone()));
        } else if let Some(eq) = arg.find('=') {
            overrides.push((arg[..eq].to_string(), arg[eq + 1..].to_string()));
        } else if arg == "example41" || arg == "example42" || arg == "custom" {
            overrides.push(("system".into(), arg.clone()));
        } else {
            return Err(ConfigError::plain(format!("unexpected argument `{arg}`")));
        }
    }
    for (k, v) in overrides {
        raw.set(&k, &v);
    }
    RunConfig::from_raw(command, &raw)
}
