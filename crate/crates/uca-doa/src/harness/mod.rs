//! Seeded Monte-Carlo experiments, result tables and plots.

mod config;
pub mod plot;

pub use config::{reference_groups, ArrayConfig, ExperimentConfig, SweepAxis, SweepConfig};

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::array::DoA;
use crate::crb::{crb_closed_form, rmse_crb, CrbScenario};
use crate::error::{io_err, Error, Result};
use crate::estimators::{Estimation, Estimator, EstimatorState, Method};
use crate::metrics::{appendix_b_check, flops_estimate, rmse, sdp, ComplexityParams, ComplexityReport, FlopParams, TrialOutcome};
use crate::par::{map_indexed, with_threads, Execution};
use crate::rng::{stream, trial_seed};
use crate::signal::{make_pre_estimates, synthesize_received, to_narrowband, NarrowbandStack};
use plot::{line_chart, Series};

/// One aggregated row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub n_sources: usize,
    pub sweep_axis: String,
    pub sweep_value: Option<f64>,
    pub rmse_deg: f64,
    pub sdp: f64,
    pub rmse_crb_deg: f64,
    pub mean_wall_time_s: Option<f64>,
    pub mean_flops: f64,
    pub mean_iterations: f64,
    pub input_checksum: String,
}

/// Aggregated results.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Per-trial, per-method record kept alongside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub sweep: usize,
    pub sweep_value: Option<f64>,
    pub group: usize,
    pub trial: usize,
    pub method: Method,
    pub outcome: TrialOutcome,
    /// Operation estimate of each iteration.
    pub iteration_flops: Vec<f64>,
    /// Single-iteration estimate of the conventional coherent estimator with
    /// the same inputs, per iteration.
    pub reference_flops: Vec<f64>,
    pub checksum: [u8; 32],
    pub error: Option<String>,
}

/// Table plus the trial records it was aggregated from.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub table: ResultTable,
    pub records: Vec<TrialRecord>,
}

fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(io_err(&probe))?;
    std::fs::remove_file(&probe).map_err(io_err(&probe))
}

fn stack_checksum(stack: &NarrowbandStack, pre: &[DoA]) -> [u8; 32] {
    let mut h = Sha256::new();
    for b in stack.bins() {
        for x in b.iter() {
            h.update(x.re.to_le_bytes());
            h.update(x.im.to_le_bytes());
        }
    }
    for d in pre {
        h.update(d.elevation().to_le_bytes());
        h.update(d.azimuth().to_le_bytes());
    }
    h.finalize().into()
}

/// Operation estimates of every iteration of a run.
pub fn iteration_flops(
    method: Method,
    trace: &[EstimatorState],
    stack: &NarrowbandStack,
    estimator: &Estimator,
) -> (Vec<f64>, Vec<f64>) {
    let lat = estimator.lattice();
    let base = |s: &EstimatorState, bins: usize| FlopParams {
        bins,
        elements: stack.element_count(),
        snapshots: stack.snapshots_per_bin(),
        previous_count: s.previous_count,
        radii_sum: s.radii.iter().map(|r| r.0 * r.1).sum(),
        step_theta: lat.step_theta(),
        step_phi: lat.step_phi(),
        grid_rows: lat.rows(),
        grid_cols: lat.cols(),
    };
    trace
        .iter()
        .map(|s| {
            (
                flops_estimate(method, &base(s, s.focus_bins.len())),
                flops_estimate(Method::CCsmSingle, &base(s, stack.bin_count())),
            )
        })
        .unzip()
}

struct SweepContext {
    cfg: ExperimentConfig,
    estimator: Estimator,
    crb: BTreeMap<usize, f64>,
}

fn sweep_context(base: &ExperimentConfig, value: Option<f64>) -> Result<SweepContext> {
    let cfg = base.at_sweep_value(value)?;
    let geometry = cfg.geometry()?;
    let estimator = Estimator::new(geometry.clone(), cfg.scenario.center_frequency, cfg.ripf.clone())?
        .with_execution(Execution::Parallel);
    let mut per_size: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    let mut noiseless = false;
    for g in &cfg.doa_groups {
        let mut s = cfg.scenario.clone();
        s.path_doas = g.clone();
        match CrbScenario::from_config(&geometry, &s)? {
            Some(scn) => per_size.entry(g.len()).or_default().push(crb_closed_form(&scn)?),
            None => noiseless = true,
        }
    }
    let mut crb = BTreeMap::new();
    for g in &cfg.doa_groups {
        let v = match per_size.get(&g.len()) {
            Some(r) if !noiseless => rmse_crb(r, g.len())?,
            _ => 0.0,
        };
        crb.insert(g.len(), v);
    }
    Ok(SweepContext { cfg, estimator, crb })
}

fn run_trial(ctx: &SweepContext, sweep: usize, value: Option<f64>, group: usize, trial: usize) -> Result<Vec<TrialRecord>> {
    let cfg = &ctx.cfg;
    let truth = &cfg.doa_groups[group];
    let seed = trial_seed(cfg.master_seed, sweep, group, trial);
    let mut scenario = cfg.scenario.clone();
    scenario.path_doas = truth.clone();
    scenario.seed = seed;
    let geometry = ctx.estimator.geometry();
    let samples = synthesize_received(geometry, &scenario, &mut stream(seed, 0))?;
    let stack = to_narrowband(&samples, scenario.center_frequency, scenario.fft_size)?;
    let pre = make_pre_estimates(truth, cfg.ripf.avg_err_theta, cfg.ripf.avg_err_phi, &mut stream(seed, 1))?;
    let checksum = stack_checksum(&stack, &pre);
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let mut rng = stream(seed, 2);
        let start = Instant::now();
        let result = ctx.estimator.run(method, &stack, &pre, &mut rng);
        let elapsed = start.elapsed().as_secs_f64();
        let (est, error) = match result {
            Ok(e) => (e, None),
            Err(e @ (Error::DegenerateFocusing { .. } | Error::DegenerateCovariance(_) | Error::Unidentifiable(_))) => (
                Estimation {
                    estimates: Vec::new(),
                    trace: Vec::new(),
                },
                Some(e.to_string()),
            ),
            Err(e) => return Err(e),
        };
        let (iteration_flops, reference_flops) = iteration_flops(method, &est.trace, &stack, &ctx.estimator);
        out.push(TrialRecord {
            sweep,
            sweep_value: value,
            group,
            trial,
            method,
            outcome: TrialOutcome {
                truth: truth.clone(),
                estimates: est.estimates.clone(),
                wall_time: cfg.record_wall_time.then_some(elapsed),
                flops: iteration_flops.iter().sum(),
                iterations: est.iterations(),
            },
            iteration_flops,
            reference_flops,
            checksum,
            error,
        });
    }
    Ok(out)
}

/// Runs every trial of every sweep point and aggregates the results.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchResult> {
    cfg.validate()?;
    ensure_writable(&cfg.output_dir)?;
    with_threads(cfg.threads, || run_batch_inner(cfg))
}

fn run_batch_inner(cfg: &ExperimentConfig) -> Result<BatchResult> {
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let axis = cfg.sweep.as_ref().map_or("none".to_string(), |s| s.axis.name().to_string());
    for (si, value) in cfg.sweep_points() {
        let ctx = sweep_context(cfg, value)?;
        let groups = cfg.doa_groups.len();
        let tasks = groups * cfg.trials;
        let per_task = map_indexed(Execution::Parallel, tasks, |t| {
            run_trial(&ctx, si, value, t / cfg.trials, t % cfg.trials)
        });
        let mut point = Vec::with_capacity(tasks * cfg.methods.len());
        for r in per_task {
            point.extend(r?);
        }
        rows.extend(aggregate(&ctx, &point, &axis, value)?);
        records.extend(point);
    }
    Ok(BatchResult {
        table: ResultTable { rows },
        records,
    })
}

fn aggregate(ctx: &SweepContext, records: &[TrialRecord], axis: &str, value: Option<f64>) -> Result<Vec<ResultRow>> {
    let cfg = &ctx.cfg;
    let mut sizes: Vec<usize> = cfg.doa_groups.iter().map(|g| g.len()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut rows = Vec::new();
    for &n in &sizes {
        for &method in &cfg.methods {
            let sel: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.method == method && cfg.doa_groups[r.group].len() == n)
                .collect();
            let outcomes: Vec<TrialOutcome> = sel.iter().map(|r| r.outcome.clone()).collect();
            let count = outcomes.len() as f64;
            let mut h = Sha256::new();
            for r in &sel {
                h.update(r.checksum);
            }
            let digest: [u8; 32] = h.finalize().into();
            let wall = if cfg.record_wall_time {
                Some(outcomes.iter().filter_map(|o| o.wall_time).sum::<f64>() / count)
            } else {
                None
            };
            rows.push(ResultRow {
                method,
                n_sources: n,
                sweep_axis: axis.to_string(),
                sweep_value: value,
                rmse_deg: rmse(&outcomes)?,
                sdp: sdp(&outcomes, cfg.ripf.step_theta, cfg.ripf.step_phi)?,
                rmse_crb_deg: ctx.crb[&n],
                mean_wall_time_s: wall,
                mean_flops: outcomes.iter().map(|o| o.flops).sum::<f64>() / count,
                mean_iterations: outcomes.iter().map(|o| o.iterations as f64).sum::<f64>() / count,
                input_checksum: hex::encode(&digest[..16]),
            });
        }
    }
    Ok(rows)
}

/// Writes the table as CSV.
pub fn write_results_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in &table.rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a table written by [`write_results_csv`].
pub fn read_results_csv(path: &Path) -> Result<ResultTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| csv_err(path, e))?;
    Ok(ResultTable { rows })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn series_by<F>(table: &ResultTable, metric: F) -> Vec<Series>
where
    F: Fn(&ResultRow) -> Option<f64>,
{
    let multi = table.rows.iter().any(|r| r.n_sources != table.rows[0].n_sources);
    let mut keys: Vec<(usize, Method)> = Vec::new();
    for r in &table.rows {
        if !keys.contains(&(r.n_sources, r.method)) {
            keys.push((r.n_sources, r.method));
        }
    }
    keys.iter()
        .map(|&(n, m)| Series {
            name: if multi { format!("{m} N={n}") } else { m.to_string() },
            points: table
                .rows
                .iter()
                .filter(|r| r.n_sources == n && r.method == m)
                .filter_map(|r| metric(r).map(|y| (r.sweep_value.unwrap_or(0.0), y)))
                .collect(),
            dashed: false,
        })
        .collect()
}

fn crb_series(table: &ResultTable) -> Vec<Series> {
    let mut sizes: Vec<usize> = table.rows.iter().map(|r| r.n_sources).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let multi = sizes.len() > 1;
    sizes
        .into_iter()
        .map(|n| {
            let mut pts: Vec<(f64, f64)> = Vec::new();
            for r in table.rows.iter().filter(|r| r.n_sources == n) {
                let x = r.sweep_value.unwrap_or(0.0);
                if !pts.iter().any(|p| p.0 == x) {
                    pts.push((x, r.rmse_crb_deg));
                }
            }
            Series {
                name: if multi { format!("CRB N={n}") } else { "CRB".into() },
                points: pts,
                dashed: true,
            }
        })
        .collect()
}

/// Writes `results.csv`, `rmse.svg`, `sdp.svg` and `runtime.svg` into `dir`.
pub fn emit_outputs(table: &ResultTable, dir: &Path) -> Result<()> {
    ensure_writable(dir)?;
    write_results_csv(table, &dir.join("results.csv"))?;
    let axis = table.rows.first().map_or("none", |r| r.sweep_axis.as_str()).to_string();
    let mut rmse_series = series_by(table, |r| Some(r.rmse_deg));
    rmse_series.extend(crb_series(table));
    let charts = [
        ("rmse.svg", line_chart("RMSE", &axis, "RMSE (deg)", &rmse_series, true)),
        (
            "sdp.svg",
            line_chart("Successful detection probability", &axis, "SDP", &series_by(table, |r| Some(r.sdp)), false),
        ),
        (
            "runtime.svg",
            line_chart(
                "Mean runtime",
                &axis,
                "wall time (s)",
                &series_by(table, |r| r.mean_wall_time_s),
                true,
            ),
        ),
    ];
    for (name, svg) in charts {
        let p = dir.join(name);
        std::fs::write(&p, svg).map_err(io_err(&p))?;
    }
    Ok(())
}

/// Low-complexity condition for each group size of the configuration.
pub fn complexity_reports(cfg: &ExperimentConfig) -> Result<Vec<(usize, ComplexityReport)>> {
    let lat = cfg.ripf.lattice()?;
    let mut sizes: Vec<usize> = cfg.doa_groups.iter().map(|g| g.len()).collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            appendix_b_check(&ComplexityParams {
                elements: cfg.array.element_count,
                fft_size: cfg.scenario.fft_size,
                snapshots: cfg.scenario.snapshots_per_bin(),
                source_count: n,
                avg_err_theta: cfg.ripf.avg_err_theta,
                avg_err_phi: cfg.ripf.avg_err_phi,
                bias: cfg.ripf.bias,
                step_theta: cfg.ripf.step_theta,
                step_phi: cfg.ripf.step_phi,
                grid_rows: lat.rows(),
                grid_cols: lat.cols(),
                max_iterations: cfg.ripf.max_iterations,
                convergence_iterations: cfg.convergence_iterations,
            })
            .map(|r| (n, r))
        })
        .collect()
}

/// Bound per group of the configuration: `(group index, rmse bound, per-angle
/// bounds)`, all in degrees.
pub fn crb_report(cfg: &ExperimentConfig) -> Result<Vec<(usize, Option<f64>, Vec<(f64, f64)>)>> {
    let geometry = cfg.geometry()?;
    cfg.doa_groups
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut s = cfg.scenario.clone();
            s.path_doas = g.clone();
            match CrbScenario::from_config(&geometry, &s)? {
                Some(scn) => {
                    let r = crb_closed_form(&scn)?;
                    let rm = rmse_crb(std::slice::from_ref(&r), g.len())?;
                    Ok((i, Some(rm), r.per_angle_bounds_deg2()))
                }
                None => Ok((i, None, Vec::new())),
            }
        })
        .collect()
}
