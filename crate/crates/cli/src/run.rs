//! Executes a resolved [`RunConfig`]: runs the experiment, writes its CSV,
//! prints one summary line per partition and, for `check` presets, asserts
//! the expected outcome.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use blockgrad::experiments::{
    convergence_csv, fmt_float, run_diagnostics, run_layerwise_minnorm, run_minnorm_ls,
    run_nonconvex_experiment, run_regret_experiment, run_stability_probe, stability_csv, CsvTable,
    PartitionSpec,
};
use blockgrad::models::Dataset;
use blockgrad::optim::{state_serialize, OptimizerState};

use crate::config::{Experiment, Job, Preset, RunConfig};
use crate::CliError;

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_table(path: &Path, table: &CsvTable) -> Result<(), CliError> {
    let mut buf = Vec::new();
    table
        .write_to(&mut buf)
        .map_err(|e| CliError::io(path, e))?;
    write_file(path, &buf)
}

fn say(out: &mut dyn Write, line: String) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))
}

fn label(p: &PartitionSpec) -> String {
    format!("B={} ({p})", p.label())
}

fn find<'a, T>(items: &'a [T], key: &str, get: impl Fn(&T) -> &PartitionSpec) -> Option<&'a T> {
    items.iter().find(|t| get(t).label() == key)
}

fn check(cond: bool, what: impl Into<String>, failures: &mut Vec<String>) {
    if !cond {
        failures.push(what.into());
    }
}

/// Runs the configured experiment and writes its artifacts.
pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    if cfg.checkpoint.is_some()
        && !matches!(cfg.experiment, Experiment::Minnorm | Experiment::Layerwise)
    {
        return Err(CliError::Usage(format!(
            "--checkpoint is only supported by minnorm and layerwise, not {}",
            cfg.experiment
        )));
    }
    let out_path: PathBuf = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(cfg.experiment.default_output()));
    match cfg.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("threads: {e}")))?;
            let (res, buf) = pool.install(|| {
                let mut buf = Vec::new();
                (execute(cfg, &out_path, &mut buf), buf)
            });
            out.write_all(&buf)
                .map_err(|e| CliError::io("<stdout>", e))?;
            res
        }
        None => execute(cfg, &out_path, out),
    }
}

fn execute(cfg: &RunConfig, out_path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let checking = cfg.preset == Preset::Check;
    let mut failures = Vec::new();
    match &cfg.job {
        Job::Regret(c) => {
            let rep = run_regret_experiment(c).map_err(CliError::Run)?;
            write_table(out_path, &rep.to_csv())?;
            for tr in &rep.traces {
                let held = tr.bounds.iter().filter(|b| b.holds).count();
                say(
                    out,
                    format!(
                        "{}: final mean regret {} (std {}), bound held in {held}/{} runs",
                        label(&tr.partition),
                        fmt_float(tr.final_regret()),
                        fmt_float(*tr.std.last().expect("horizon ≥ 1")),
                        tr.bounds.len()
                    ),
                )?;
            }
            if !rep.unconverged_comparators.is_empty() {
                say(
                    out,
                    format!(
                        "warning: comparator unconverged in repetitions {:?}",
                        rep.unconverged_comparators
                    ),
                )?;
            }
            if checking {
                check(rep.bounds_hold(), "regret bound violated", &mut failures);
                let r = |k: &str| rep.trace(k).map(|t| t.final_regret());
                match (r("1"), r("2"), r("3"), r("4"), r("d")) {
                    (Some(b1), Some(b2), Some(b3), Some(b4), Some(bd)) => check(
                        b2.max(b4) < b3 && b3 < bd && bd < b1,
                        format!("regret ordering: B1 {b1}, B2 {b2}, B3 {b3}, B4 {b4}, Bd {bd}"),
                        &mut failures,
                    ),
                    _ => failures.push("regret ordering needs partitions 1, 2, 3, 4 and d".into()),
                }
            }
        }
        Job::Nonconvex(c) => {
            let traces = run_nonconvex_experiment(c).map_err(CliError::Run)?;
            write_table(out_path, &convergence_csv(&traces))?;
            for tr in &traces {
                say(
                    out,
                    format!(
                        "{}: final gradient-norm estimate {}",
                        label(&tr.partition),
                        fmt_float(tr.final_value())
                    ),
                )?;
            }
            if checking {
                let f = |k: &str| find(&traces, k, |t| &t.partition).map(|t| t.final_value());
                match (f("1"), f("2"), f("3"), f("4"), f("d")) {
                    (Some(b1), Some(b2), Some(b3), Some(b4), Some(bd)) => check(
                        b2.max(b4) < b1.min(b3) && b1.max(b3) < bd,
                        format!(
                            "convergence ordering: B1 {b1}, B2 {b2}, B3 {b3}, B4 {b4}, Bd {bd}"
                        ),
                        &mut failures,
                    ),
                    _ => failures
                        .push("convergence ordering needs partitions 1, 2, 3, 4 and d".into()),
                }
            }
        }
        Job::Minnorm { config, data } => {
            let mut config = config.clone();
            if let Some(path) = data {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                config.data = Some(Dataset::from_csv(&text).map_err(CliError::Config)?);
            }
            let r = run_minnorm_ls(&config).map_err(CliError::Run)?;
            let p = config
                .partition
                .build(r.theta.len())
                .map_err(CliError::Run)?;
            let assign = p.assignment();
            let rows = (0..r.theta.len())
                .map(|i| {
                    vec![
                        i.to_string(),
                        assign[i].to_string(),
                        fmt_float(r.theta[i]),
                        fmt_float(r.oracle[i]),
                    ]
                })
                .collect();
            let table = CsvTable {
                header: ["index", "block", "theta", "min_norm"]
                    .map(String::from)
                    .to_vec(),
                rows,
            };
            write_table(out_path, &table)?;
            say(
                out,
                format!(
                    "{}: {} iterations, relative residual {}, distance to min-norm {}, max rowspace residual {}",
                    label(&config.partition),
                    r.iterations,
                    fmt_float(r.relative_residual),
                    fmt_float(r.relative_distance),
                    fmt_float(r.max_rowspace_residual)
                ),
            )?;
            if let Some(path) = &cfg.checkpoint {
                write_file(
                    path,
                    &state_serialize(&OptimizerState::Bag(r.optimizer.clone())),
                )?;
            }
            if checking {
                check(
                    r.max_rowspace_residual < 1e-8,
                    format!("rowspace residual {}", r.max_rowspace_residual),
                    &mut failures,
                );
                if config.partition == PartitionSpec::Single {
                    check(
                        r.relative_distance < 1e-3,
                        format!("distance to min-norm solution {}", r.relative_distance),
                        &mut failures,
                    );
                }
            }
        }
        Job::Layerwise(c) => {
            let r = run_layerwise_minnorm(c).map_err(CliError::Run)?;
            let d = r.weights.rows();
            let mut rows = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    rows.push(vec![
                        i.to_string(),
                        j.to_string(),
                        fmt_float(r.weights[(i, j)]),
                        fmt_float(r.target[(i, j)]),
                    ]);
                }
            }
            let table = CsvTable {
                header: ["row", "col", "weight", "target"]
                    .map(String::from)
                    .to_vec(),
                rows,
            };
            write_table(out_path, &table)?;
            say(
                out,
                format!(
                    "B=1: {} iterations, loss {}, relative distance to closed form {}",
                    r.iterations,
                    fmt_float(r.final_loss),
                    fmt_float(r.relative_distance)
                ),
            )?;
            if let Some(path) = &cfg.checkpoint {
                write_file(
                    path,
                    &state_serialize(&OptimizerState::Bag(r.optimizer.clone())),
                )?;
            }
            if checking {
                check(
                    r.relative_distance < 1e-2,
                    format!("relative distance {}", r.relative_distance),
                    &mut failures,
                );
            }
        }
        Job::Stability(c) => {
            let traces = run_stability_probe(c).map_err(CliError::Run)?;
            write_table(out_path, &stability_csv(&traces))?;
            for tr in &traces {
                say(
                    out,
                    format!(
                        "{}: final mean delta {}, final mean loss gap {}",
                        label(&tr.partition),
                        fmt_float(tr.final_delta()),
                        fmt_float(*tr.loss_gap.last().expect("non-empty"))
                    ),
                )?;
            }
            if checking {
                let d = find(&traces, "d", |t| &t.partition).map(|t| t.final_delta());
                let mid = traces
                    .iter()
                    .find(|t| matches!(t.partition, PartitionSpec::Sizes(_)))
                    .map(|t| t.final_delta());
                match (mid, d) {
                    (Some(m), Some(d)) => check(
                        m <= d,
                        format!("delta ordering: B~ {m}, Bd {d}"),
                        &mut failures,
                    ),
                    _ => failures
                        .push("stability check needs an intermediate partition and d".into()),
                }
            }
        }
        Job::Diag(c) => {
            let rep = run_diagnostics(c).map_err(CliError::Run)?;
            write_table(out_path, &rep.to_csv())?;
            for (b, bd) in rep.blocks.iter().enumerate() {
                say(
                    out,
                    format!(
                        "block {b} (d_b = {}): sigma_b^2 {}, cv {}",
                        bd.size,
                        fmt_float(bd.sigma_b_sq),
                        bd.cv.map_or_else(|| "undefined".to_string(), fmt_float)
                    ),
                )?;
            }
            say(
                out,
                format!(
                    "r1 {} r2 {} r3 {} r_min {} vbar ratio {}",
                    fmt_float(rep.ratios.r1),
                    fmt_float(rep.ratios.r2),
                    fmt_float(rep.ratios.r3),
                    fmt_float(rep.ratios.r_min),
                    rep.vbar_ratio()
                        .map_or_else(|| "undefined".to_string(), fmt_float)
                ),
            )?;
            if checking {
                let r = rep.ratios;
                check(
                    r.r1 > 0.0 && r.r2 > 0.0 && r.r3 > 0.0,
                    "ratios must be positive",
                    &mut failures,
                );
            }
        }
    }
    say(out, format!("wrote {}", out_path.display()))?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Assertion(failures.join("; ")))
    }
}
