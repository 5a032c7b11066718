//! The `quad` and `pinn` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use starrad::net::Mlp;
use starrad::pde::Pde;
use starrad::quad::{comparison_with_reference, reference_integral, Comparison};
use starrad::train::{squared_errors, test_grid, train, TraceRow, TrainConfig, TrainTrace};
use starrad::Error;

use crate::config::{PinnPlan, QuadraturePlan, QuadratureRuns};
use crate::csvio::{write_file, ComparisonRow, FieldRow, PlanRow, QuadRow};
use crate::plots;

fn quad_row(function: &str, n: usize, k: usize, samples: usize, c: &Comparison<f64>) -> QuadRow {
    QuadRow {
        function: function.to_string(),
        n,
        k,
        samples,
        reference: c.uniform.reference,
        estimate_uniform: c.uniform.estimate,
        estimate_refined: c.refined.estimate,
        rel_err_uniform: c.uniform.relative_error,
        rel_err_refined: c.refined.relative_error,
        bound_uniform: c.uniform.bound_uniform,
        bound_refined: c.uniform.bound_refined,
    }
}

/// Runs one quadrature configuration and returns the files written.
pub fn cmd_quad(plan: &QuadraturePlan, out: &Path, emit_plots: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let f = plan.function;
    let name = f.name();
    let iv = f.domain::<f64>();
    let value = |x: f64| f.value(x);
    let fpp = |x: f64| f.second_derivative(x);
    let reference = reference_integral(value, iv)?;
    let mut written = Vec::new();
    match &plan.runs {
        QuadratureRuns::Single { n, k } => {
            let c = comparison_with_reference(value, fpp, iv, *n, *k, plan.samples, reference)?;
            let rows: Vec<PlanRow> = iv
                .split(*k)
                .iter()
                .zip(c.plan.maxima.iter().zip(&c.plan.counts))
                .enumerate()
                .map(|(j, (sub, (m, count)))| PlanRow {
                    j,
                    lo: sub.lo(),
                    hi: sub.hi(),
                    max_abs_fpp: *m,
                    trapezoids: *count,
                })
                .collect();
            let stem = format!("{name}_n{n}_k{k}");
            let plan_path = out.join(format!("{stem}_plan.csv"));
            write_file(&plan_path, &rows)?;
            let summary_path = out.join(format!("{stem}_summary.csv"));
            write_file(&summary_path, &[quad_row(name, *n, *k, plan.samples, &c)])?;
            info!(
                "{name} N={n} k={k}: uniform {:.4}%, refined {:.4}%",
                c.uniform.relative_error, c.refined.relative_error
            );
            written.extend([plan_path, summary_path]);
        }
        QuadratureRuns::Sweep { pairs } => {
            let rows = pairs
                .iter()
                .map(|(n, k)| {
                    let c = comparison_with_reference(value, fpp, iv, *n, *k, plan.samples, reference)?;
                    Ok(quad_row(name, *n, *k, plan.samples, &c))
                })
                .collect::<Result<Vec<_>>>()?;
            let path = out.join(format!("{name}_sweep.csv"));
            write_file(&path, &rows)?;
            written.push(path.clone());
            if emit_plots {
                let script = out.join(format!("{name}_sweep_plot.py"));
                fs::write(&script, plots::sweep_script(&path, name))?;
                written.push(script);
            }
        }
    }
    Ok(written)
}

/// Outcome of one training run inside a `pinn` invocation.
pub struct RunResult {
    pub config: TrainConfig<f64>,
    pub outcome: Result<TrainTrace<f64>, Error>,
}

fn strip_timing(rows: &[TraceRow], timing: bool) -> Vec<TraceRow> {
    rows.iter()
        .map(|r| TraceRow {
            seconds: if timing { r.seconds } else { 0.0 },
            ..*r
        })
        .collect()
}

/// Epochs listed in the comparison file: each resampling boundary and the
/// final epoch.
fn is_checkpoint(epoch: usize, cfg: &TrainConfig<f64>) -> bool {
    epoch % cfg.resample_period == 0 || epoch == cfg.epochs
}

/// Trains every `(criterion, seed)` pair of the plan and writes traces, the
/// comparison table, error fields for 2D problems and optional plot
/// scripts. Runs execute in parallel; files are written after all joined.
pub fn cmd_pinn(plan: &PinnPlan, out: &Path, emit_plots: bool, timing: bool) -> Result<(Vec<PathBuf>, Vec<RunResult>)> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let runs = plan.runs();
    let problem_name = plan.template.problem.name();
    let results: Vec<RunResult> = runs
        .into_par_iter()
        .map(|config| {
            info!("training {problem_name} {} seed {}", config.criterion, config.seed);
            let outcome = train(&config);
            RunResult { config, outcome }
        })
        .collect();

    let mut written = Vec::new();
    let mut comparison = Vec::new();
    let mut failures = Vec::new();
    let two_d = plan.template.problem.domain().dim() == 2;
    for r in &results {
        let cfg = &r.config;
        let stem = format!("{problem_name}_{}_seed{}", cfg.criterion, cfg.seed);
        match &r.outcome {
            Ok(trace) => {
                let path = out.join(format!("trace_{stem}.csv"));
                write_file(&path, &strip_timing(&trace.rows, timing))?;
                written.push(path);
                comparison.extend(trace.rows.iter().filter(|row| is_checkpoint(row.epoch(), cfg)).map(|row| {
                    ComparisonRow {
                        criterion: cfg.criterion.name().to_string(),
                        seed: cfg.seed,
                        epoch: row.epoch(),
                        l2_test_error: row.l2_test_error,
                    }
                }));
                if two_d {
                    let grid = test_grid(&cfg.problem);
                    let errors = squared_errors(&cfg.problem, &Mlp::new(&cfg.spec, &trace.params), grid.view())?;
                    let field: Vec<FieldRow> = grid
                        .rows()
                        .into_iter()
                        .zip(errors)
                        .map(|(p, e)| FieldRow {
                            x: p[0],
                            y: p[1],
                            squared_error: e,
                        })
                        .collect();
                    let path = out.join(format!("error_field_{stem}.csv"));
                    write_file(&path, &field)?;
                    written.push(path);
                }
            }
            Err(Error::Diverged { epoch, rows }) => {
                warn!("{stem} diverged at epoch {epoch}");
                let path = out.join(format!("trace_{stem}_diverged.csv"));
                write_file(&path, &strip_timing(rows, timing))?;
                written.push(path);
                failures.push(format!("{stem}: diverged at epoch {epoch}"));
            }
            Err(e) => failures.push(format!("{stem}: {e}")),
        }
    }
    let path = out.join(format!("comparison_{problem_name}.csv"));
    write_file(&path, &comparison)?;
    written.push(path.clone());
    if emit_plots {
        let script = out.join(format!("{problem_name}_plot.py"));
        fs::write(&script, plots::pinn_script(problem_name, two_d))?;
        written.push(script);
    }
    if !failures.is_empty() {
        bail!("{} run(s) failed: {}", failures.len(), failures.join("; "));
    }
    Ok((written, results))
}
