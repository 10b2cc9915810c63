//! Experiment orchestration: deterministic seeding, dispatch over the
//! experiment kinds, and CSV/JSONL persistence.
//!
//! Result files depend only on the validated config (including the master
//! seed); wall-clock timestamps live exclusively in the run manifest, so two
//! runs of the same config produce byte-identical data files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::counterexample::{
    dependence_statistic, sample_lln_counterexample, transition_gap_demo, GapDemoPlan,
};
use crate::diagnostics::{
    convergence_sweep, ConvergenceCurve, CurveRow, DistanceMetric, DistanceReport, SweepMetric,
    SweepSpec,
};
use crate::error::{Error, Result};
use crate::ipm::grid::sample_from_grid;
use crate::ipm::particle::ParticleEnsemble;
use crate::ipm::{iterate_ipm, IpmState, IpmTrajectory};
use crate::ops::apply_stack;
use crate::population::Population;
use crate::rng::RandomStream;
use crate::stats::{
    energy_distance, ks_statistic, mean, tv_histogram_distance, variance, Z_95,
};

/// Stream roles with stable codes; the table is part of the on-disk
/// reproducibility contract and is guarded by a golden test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Selection = 0,
    Mutation = 1,
    Recombination = 2,
    Init = 3,
    Ipm = 4,
}

/// Stream at path `[replicate, generation, role]` under the master seed.
pub fn seed_plan(
    master_seed: u64,
    replicate: u64,
    generation: u64,
    role: StreamRole,
) -> RandomStream {
    RandomStream::from_seed(master_seed)
        .derive(replicate)
        .derive(generation)
        .derive(role as u64)
}

/// Reserved replicate index for model-side draws (initial pools, reference
/// sampling), so they can never share a stream with a finite replicate.
pub const MODEL_REPLICATE: u64 = u64::MAX;

/// One CSV cell. Floats are serialized with 17 significant digits so values
/// round-trip exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvValue {
    Uint(u64),
    Float(f64),
    Str(String),
}

impl std::fmt::Display for CsvValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvValue::Uint(v) => write!(f, "{v}"),
            CsvValue::Float(v) => write!(f, "{v:.16e}"),
            CsvValue::Str(v) => {
                debug_assert!(!v.contains(',') && !v.contains('\n'));
                write!(f, "{v}")
            }
        }
    }
}

/// Writes a CSV file with a header row and `\n` newlines; returns the data
/// row count.
pub fn emit_results(path: &Path, header: &[&str], rows: &[Vec<CsvValue>]) -> Result<usize> {
    let mut text = String::new();
    text.push_str(&header.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&line.join(","));
        text.push('\n');
    }
    write_file(path, text.as_bytes())?;
    Ok(rows.len())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads back a convergence-curve CSV produced by the sweep kind.
pub fn read_convergence_curve(path: &Path) -> Result<ConvergenceCurve> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != CURVE_HEADER.join(",") {
        return Err(Error::InvalidArgument(format!(
            "unexpected curve header `{header}`"
        )));
    }
    let mut rows = Vec::new();
    for (number, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CURVE_HEADER.len() {
            return Err(Error::InvalidArgument(format!(
                "line {}: expected {} fields, got {}",
                number + 2,
                CURVE_HEADER.len(),
                fields.len()
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad float `{s}`")))
        };
        let parse_u = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad integer `{s}`")))
        };
        rows.push(CurveRow {
            generation: parse_u(fields[0])? as u32,
            population_size: parse_u(fields[1])? as usize,
            replicates: parse_u(fields[2])? as usize,
            metric: SweepMetric::parse(fields[3]).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown metric `{}`", fields[3]))
            })?,
            value: parse_f(fields[4])?,
            ci_half_width: parse_f(fields[5])?,
            seed: parse_u(fields[6])?,
        });
    }
    ConvergenceCurve::from_rows(rows)
}

const CURVE_HEADER: [&str; 7] = ["k", "n", "R", "metric", "value", "ci_half_width", "seed"];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmittedFile {
    pub path: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub kind: String,
    pub seed: u64,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub files: Vec<EmittedFile>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed_override: Option<u64>,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Runs one experiment and writes its result files plus `manifest.json`.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let config = match opts.seed_override {
        Some(seed) => config.with_seed(seed),
        None => config.clone(),
    };
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| config.output_dir().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir).map_err(|source| Error::Io {
        path: out_dir.clone(),
        source,
    })?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let started = now_ms();
    let files = pool.install(|| -> Result<Vec<EmittedFile>> {
        match config.kind() {
            ExperimentKind::Simulate => run_simulate(&config, &out_dir),
            ExperimentKind::Ipm => run_ipm(&config, &out_dir),
            ExperimentKind::Compare => run_compare(&config, &out_dir),
            ExperimentKind::Counterexample => run_counterexample(&config, &out_dir),
            ExperimentKind::Sweep => run_sweep(&config, &out_dir),
        }
    })?;
    let manifest = RunManifest {
        config_hash: config.hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind().name().to_string(),
        seed: config.seed(),
        started_unix_ms: started,
        finished_unix_ms: now_ms(),
        files,
    };
    let manifest_path = out_dir.join("manifest.json");
    let body = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_file(&manifest_path, &body)?;
    Ok(manifest)
}

fn record(name: &str, rows: usize) -> EmittedFile {
    EmittedFile {
        path: name.to_string(),
        rows,
    }
}

/// Finite-EA generation step inside the runner's stream discipline:
/// the stack application for (replicate, generation) draws from the
/// `[replicate, generation]` subtree of the master seed.
fn ea_generation_stream(seed: u64, replicate: u64, generation: u64) -> RandomStream {
    RandomStream::from_seed(seed)
        .derive(replicate)
        .derive(generation)
}

fn run_simulate(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<EmittedFile>> {
    let obj = config.build_objective()?;
    let stack = config.build_stack()?;
    let init = config.build_init()?;
    let seed = config.seed();
    let generations = config.generations();
    let replicates = config.replicates();

    let mut rows: Vec<Vec<CsvValue>> = Vec::new();
    for &size in config.sizes() {
        let traces: Vec<Vec<Population>> = (0..replicates)
            .into_par_iter()
            .map(|r| -> Result<Vec<Population>> {
                let mut pop = init.sample_population(
                    size,
                    &seed_plan(seed, r as u64, 0, StreamRole::Init).derive(size as u64),
                )?;
                let mut trace = vec![pop.clone()];
                for g in 1..=generations {
                    pop = apply_stack(
                        &pop,
                        &stack,
                        &obj,
                        &ea_generation_stream(seed, r as u64, g as u64).derive(size as u64),
                    )?;
                    trace.push(pop.clone());
                }
                Ok(trace)
            })
            .collect::<Result<Vec<_>>>()?;
        for (r, trace) in traces.iter().enumerate() {
            for pop in trace {
                for (slot, ind) in pop.individuals().iter().enumerate() {
                    for (coordinate, &value) in ind.coords().iter().enumerate() {
                        rows.push(vec![
                            CsvValue::Uint(size as u64),
                            CsvValue::Uint(r as u64),
                            CsvValue::Uint(pop.generation() as u64),
                            CsvValue::Uint(slot as u64),
                            CsvValue::Uint(coordinate as u64),
                            CsvValue::Float(value),
                        ]);
                    }
                }
            }
        }
    }
    let path = out_dir.join("trajectories.csv");
    let count = emit_results(
        &path,
        &[
            "n",
            "replicate",
            "generation",
            "slot",
            "coordinate",
            "value",
        ],
        &rows,
    )?;
    Ok(vec![record("trajectories.csv", count)])
}

fn build_ipm_trajectory(config: &ExperimentConfig) -> Result<IpmTrajectory> {
    let obj = config.build_objective()?;
    let stack = config.build_stack()?;
    let init = config.build_init()?;
    let seed = config.seed();
    let initial = if config.uses_grid_representation() {
        let domain = obj.domain();
        IpmState::Grid(init.marginal_grid(domain.lo()[0], domain.hi()[0], config.grid_bins())?)
    } else {
        let pop = init.sample_population(
            config.particles(),
            &seed_plan(seed, MODEL_REPLICATE, 0, StreamRole::Init),
        )?;
        IpmState::Particles(ParticleEnsemble::new(pop.individuals().to_vec(), 0)?)
    };
    iterate_ipm(
        initial,
        &stack,
        &obj,
        config.generations(),
        &seed_plan(seed, MODEL_REPLICATE, 0, StreamRole::Ipm),
    )
}

fn run_ipm(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<EmittedFile>> {
    let trajectory = build_ipm_trajectory(config)?;
    let mut files = Vec::new();

    if config.uses_grid_representation() {
        let mut rows = Vec::new();
        for state in &trajectory.states {
            let grid = state.as_grid().expect("grid representation");
            for (bin, &density) in grid.values().iter().enumerate() {
                rows.push(vec![
                    CsvValue::Uint(grid.generation() as u64),
                    CsvValue::Float(grid.midpoint(bin)),
                    CsvValue::Float(density),
                ]);
            }
        }
        let count = emit_results(
            &out_dir.join("trajectory.csv"),
            &["generation", "bin_mid", "density"],
            &rows,
        )?;
        files.push(record("trajectory.csv", count));
    }

    // one summary line per generation, for both representations
    let mut summary = String::new();
    for (k, state) in trajectory.states.iter().enumerate() {
        let line = match state {
            IpmState::Grid(grid) => {
                let width = grid.bin_width();
                let mean_value: f64 = grid
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| grid.midpoint(i) * v * width)
                    .sum();
                let second: f64 = grid
                    .values()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| grid.midpoint(i).powi(2) * v * width)
                    .sum();
                let leak = if k == 0 {
                    0.0
                } else {
                    trajectory.step_leaks[k - 1]
                };
                serde_json::json!({
                    "generation": state.generation(),
                    "representation": "grid",
                    "mass": grid.mass(),
                    "leak_mass": leak,
                    "mean": mean_value,
                    "variance": second - mean_value * mean_value,
                })
            }
            IpmState::Particles(p) => {
                let dim = p.dim();
                let mut means = Vec::with_capacity(dim);
                let mut variances = Vec::with_capacity(dim);
                for c in 0..dim {
                    let coords: Vec<f64> =
                        p.particles().iter().map(|ind| ind.coords()[c]).collect();
                    means.push(mean(&coords));
                    variances.push(variance(&coords));
                }
                serde_json::json!({
                    "generation": state.generation(),
                    "representation": "particle",
                    "count": p.len(),
                    "mean": means,
                    "variance": variances,
                })
            }
        };
        summary.push_str(&serde_json::to_string(&line).expect("summary serializes"));
        summary.push('\n');
    }
    write_file(&out_dir.join("summary.jsonl"), summary.as_bytes())?;
    files.push(record("summary.jsonl", trajectory.len()));
    Ok(files)
}

fn ipm_reference_samples(
    config: &ExperimentConfig,
    trajectory: &IpmTrajectory,
    k: usize,
) -> Result<Vec<f64>> {
    match trajectory.state(k) {
        IpmState::Grid(grid) => Ok(sample_from_grid(
            grid,
            config.ipm_samples(),
            &seed_plan(config.seed(), MODEL_REPLICATE, k as u64, StreamRole::Ipm).derive(1),
        )?
        .scalars()),
        IpmState::Particles(p) => Ok(p.scalars()),
    }
}

fn run_compare(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<EmittedFile>> {
    let obj = config.build_objective()?;
    let stack = config.build_stack()?;
    let init = config.build_init()?;
    let seed = config.seed();
    let generation = config.compare_generation();
    let size = config.compare_size();
    let replicates = config.replicates();

    let compare_config = {
        // the model trajectory only needs `generation` steps
        config.clone()
    };
    let trajectory = {
        let mut build = build_ipm_trajectory(&compare_config)?;
        if build.len() < generation + 1 {
            return Err(Error::config(
                "compare.generation",
                format!(
                    "run.generations = {} < compare.generation = {generation}",
                    build.len() - 1
                ),
            ));
        }
        build.states.truncate(generation + 1);
        build
    };
    let reference = ipm_reference_samples(config, &trajectory, generation)?;

    let finite: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut pop = init.sample_population(
                size,
                &seed_plan(seed, r as u64, 0, StreamRole::Init),
            )?;
            for g in 1..=generation {
                pop = apply_stack(&pop, &stack, &obj, &ea_generation_stream(seed, r as u64, g as u64))?;
            }
            Ok(pop.individuals()[0].as_scalar())
        })
        .collect::<Result<Vec<_>>>()?;

    let (lo, hi) = match trajectory.state(generation) {
        IpmState::Grid(grid) => (grid.lo(), grid.hi()),
        IpmState::Particles(_) => {
            let lo = reference.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = reference.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi + 1e-9)
        }
    };
    type MetricFn<'a> = Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>;
    let metrics: [(DistanceMetric, MetricFn); 3] = [
        (
            DistanceMetric::Ks,
            Box::new(|a: &[f64]| ks_statistic(a, &reference)),
        ),
        (
            DistanceMetric::TvHist,
            Box::new(|a: &[f64]| tv_histogram_distance(a, &reference, lo, hi, config.tv_bins())),
        ),
        (
            DistanceMetric::Energy,
            Box::new(|a: &[f64]| energy_distance(a, &reference)),
        ),
    ];

    // bootstrap over the finite-side samples for every metric
    let boot_stream = RandomStream::from_seed(seed).derive(u64::MAX);
    let mut rows = Vec::new();
    for (metric_kind, metric) in &metrics {
        let report = DistanceReport::new(
            *metric_kind,
            metric(&finite),
            (finite.len(), reference.len()),
            generation as u32,
            size,
        )?;
        let resamples: Vec<f64> = (0..64u64)
            .into_par_iter()
            .map(|b| {
                let mut rng = boot_stream.derive(b).rng();
                let resample: Vec<f64> = (0..finite.len())
                    .map(|_| finite[rand::Rng::random_range(&mut rng, 0..finite.len())])
                    .collect();
                metric(&resample)
            })
            .collect();
        let half_width = Z_95 * variance(&resamples).sqrt();
        rows.push(vec![
            CsvValue::Uint(report.generation as u64),
            CsvValue::Uint(report.population_size as u64),
            CsvValue::Uint(replicates as u64),
            CsvValue::Str(report.metric.name().to_string()),
            CsvValue::Float(report.value),
            CsvValue::Float(half_width),
            CsvValue::Uint(seed),
        ]);
    }
    let count = emit_results(&out_dir.join("compare.csv"), &CURVE_HEADER, &rows)?;
    Ok(vec![record("compare.csv", count)])
}

fn run_counterexample(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<EmittedFile>> {
    let seed = config.seed();
    let mut files = Vec::new();

    // dependence demo
    let lln_spec = config.build_lln_spec()?;
    let records = sample_lln_counterexample(
        &lln_spec,
        config.lln_replicates(),
        &seed_plan(seed, 0, 0, StreamRole::Init),
    );
    let report = dependence_statistic(&records);
    let (ci_lo, ci_hi) = report.ci.unwrap_or((f64::NAN, f64::NAN));
    let rows = vec![vec![
        CsvValue::Uint(lln_spec.n as u64),
        CsvValue::Uint(report.replicates as u64),
        CsvValue::Float(report.correlation.unwrap_or(f64::NAN)),
        CsvValue::Float(ci_lo),
        CsvValue::Float(ci_hi),
        CsvValue::Float(report.mean_of_means),
        CsvValue::Float((lln_spec.g_min + lln_spec.g_max) / 2.0),
        CsvValue::Uint(report.refutes_independence() as u64),
    ]];
    let count = emit_results(
        &out_dir.join("lln_dependence.csv"),
        &[
            "n",
            "replicates",
            "correlation",
            "ci_lo",
            "ci_hi",
            "mean_of_means",
            "expected_mean",
            "refutes_independence",
        ],
        &rows,
    )?;
    files.push(record("lln_dependence.csv", count));

    // transition-gap demo on the exchangeable mixture
    let obj = config.build_objective()?;
    let kernel = config.build_kernel()?;
    let mixture = config.build_mixture_spec()?;
    let domain = obj.domain();
    let (lo, hi) = (domain.lo()[0], domain.hi()[0]);
    let points = config.eval_points();
    let xs: Vec<f64> = (0..points)
        .map(|i| lo + (i as f64 + 0.5) * (hi - lo) / points as f64)
        .collect();
    let gap = transition_gap_demo(
        &mixture,
        &obj,
        &kernel,
        &GapDemoPlan {
            xs,
            pop_size: config.gap_pop_size(),
            replicates: config.gap_replicates(),
            eta_sizes: config.eta_sizes().to_vec(),
            grid_bins: config.grid_bins(),
        },
        &seed_plan(seed, 0, 0, StreamRole::Ipm),
    )?;
    let rows: Vec<Vec<CsvValue>> = gap
        .rows
        .iter()
        .map(|row| {
            vec![
                CsvValue::Float(row.x),
                CsvValue::Float(row.exact_estimate),
                CsvValue::Float(row.eq_prediction),
                CsvValue::Float(row.gap),
                CsvValue::Float(row.ci_half_width),
            ]
        })
        .collect();
    let count = emit_results(
        &out_dir.join("transition_gap.csv"),
        &[
            "x",
            "exact_estimate",
            "transition_prediction",
            "gap",
            "ci_half_width",
        ],
        &rows,
    )?;
    files.push(record("transition_gap.csv", count));

    let rows: Vec<Vec<CsvValue>> = gap
        .eta_rows
        .iter()
        .map(|row| {
            vec![
                CsvValue::Uint(row.n as u64),
                CsvValue::Float(row.var_eta),
                CsvValue::Float(row.cov_estimate),
                CsvValue::Float(row.cov_ci_half_width),
            ]
        })
        .collect();
    let count = emit_results(
        &out_dir.join("eta_variance.csv"),
        &["n", "var_eta", "cov_estimate", "cov_ci_half_width"],
        &rows,
    )?;
    files.push(record("eta_variance.csv", count));
    Ok(files)
}

fn run_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<EmittedFile>> {
    let obj = config.build_objective()?;
    let stack = config.build_stack()?;
    let init = config.build_init()?;
    let trajectory = build_ipm_trajectory(config)?;
    let spec = SweepSpec {
        stack: &stack,
        objective: &obj,
        init: &init,
        generations: config.generations(),
        sizes: config.sizes(),
        replicates: config.replicates(),
        ipm: &trajectory,
        ipm_samples: config.ipm_samples(),
        tv_bins: config.tv_bins(),
    };
    let curve = convergence_sweep(&spec, &RandomStream::from_seed(config.seed()))?;
    let count = write_curve(&out_dir.join("sweep.csv"), &curve)?;
    Ok(vec![record("sweep.csv", count)])
}

/// Writes a convergence curve in the schema consumed by
/// [`read_convergence_curve`].
pub fn write_curve(path: &Path, curve: &ConvergenceCurve) -> Result<usize> {
    let rows: Vec<Vec<CsvValue>> = curve
        .rows()
        .iter()
        .map(|row| {
            vec![
                CsvValue::Uint(row.generation as u64),
                CsvValue::Uint(row.population_size as u64),
                CsvValue::Uint(row.replicates as u64),
                CsvValue::Str(row.metric.name().to_string()),
                CsvValue::Float(row.value),
                CsvValue::Float(row.ci_half_width),
                CsvValue::Uint(row.seed),
            ]
        })
        .collect();
    emit_results(path, &CURVE_HEADER, &rows)
}
