//! The experiment verbs behind the `ici` binary. Every verb writes only into
//! its own output directory, and every output directory receives the exact
//! config it was produced from.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{dataset_base_seed, ExperimentConfig};
use crate::error::{IciError, Result};
use crate::eval::{evaluate, Band, CiMethod, Evaluation, Metric, SeedMetrics};
use crate::ici::{collect_dataset, hash_dataset_dir, ClosedLoopSystem, Dataset};
use crate::plants::{Benchmark, BenchmarkId};
use crate::seqops::{OperatorHandle, Sequence};
use crate::stable_family::StableOperatorParams;
use crate::training::{init_model, train, StrategyKind, StrategySpec};
use crate::verify::{run_suite, Suite, SuiteReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_TRAINING_ABORT: i32 = 4;

/// Process exit code for an error raised by a verb.
pub fn exit_code(e: &IciError) -> i32 {
    match e {
        IciError::Diverged { .. } => EXIT_DIVERGED,
        IciError::NonFiniteLoss { .. } => EXIT_TRAINING_ABORT,
        _ => EXIT_CONFIG,
    }
}

/// Worker pool capped by `ICI_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ICI_THREADS") {
        let n: usize = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            IciError::Config(format!("ICI_THREADS={v:?} is not a positive integer"))
        })?;
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| IciError::Config(format!("thread pool: {e}")))
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| IciError::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| IciError::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| IciError::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// The config echoed into a run directory, pinned to the seed it used.
fn echo(cfg: &ExperimentConfig, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seeds: vec![seed],
        ..cfg.clone()
    }
}

// ---------------------------------------------------------------- generate

pub fn build_dataset(cfg: &ExperimentConfig, bench: &Benchmark, seed: u64) -> Result<Dataset> {
    let cl = ClosedLoopSystem::from_benchmark(bench)?;
    collect_dataset(
        &cl,
        cfg.n_trajectories,
        cfg.horizon,
        cfg.sigma_r,
        dataset_base_seed(seed),
    )
}

/// Writes the training dataset for `seed` to `out` and returns its hash.
pub fn generate(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<String> {
    let bench = cfg.build_benchmark()?;
    save_dataset(cfg, seed, &build_dataset(cfg, &bench, seed)?, out)
}

fn save_dataset(cfg: &ExperimentConfig, seed: u64, data: &Dataset, out: &Path) -> Result<String> {
    let hash = data.save(out)?;
    write(&out.join("config.json"), &echo(cfg, seed).to_json())?;
    write(&out.join("dataset.sha256"), &format!("{hash}\n"))?;
    Ok(hash)
}

/// Loads a dataset directory and checks it against the config: recorded
/// and expected hashes, sizes, excitation level, noise and seed.
pub fn load_checked_dataset(
    cfg: &ExperimentConfig,
    seed: u64,
    dir: &Path,
) -> Result<(Dataset, String)> {
    let hash = hash_dataset_dir(dir)?;
    let mismatch = |what: &str| IciError::Config(format!("dataset {}: {what}", dir.display()));
    let recorded = dir.join("dataset.sha256");
    if recorded.exists() && read(&recorded)?.trim() != hash {
        return Err(mismatch("contents differ from the recorded hash"));
    }
    if cfg
        .expected_dataset_hash
        .as_ref()
        .is_some_and(|h| *h != hash)
    {
        return Err(mismatch("hash differs from expected_dataset_hash"));
    }
    let data = Dataset::load(dir)?;
    let bench = cfg.build_benchmark()?;
    let m = &data.meta;
    if m.plant != cfg.benchmark.as_str() || m.controller != bench.controller.id() {
        return Err(mismatch("generated for a different benchmark"));
    }
    if m.n_trajectories != cfg.n_trajectories || m.horizon != cfg.horizon {
        return Err(mismatch("N or T differ from the config"));
    }
    if m.sigma_r != cfg.sigma_r || m.noise != bench.noise {
        return Err(mismatch("excitation or noise differ from the config"));
    }
    if m.base_seed != dataset_base_seed(seed) {
        return Err(mismatch("generated from a different seed"));
    }
    Ok((data, hash))
}

// ------------------------------------------------------------------- train

/// Summary written next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: BenchmarkId,
    pub strategy: StrategyKind,
    pub sigma_r: f64,
    pub seed: u64,
    pub dataset_hash: String,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Forward passes that diverged during training and were clipped.
    pub clipped_forward_passes: usize,
}

pub fn train_dataset(
    cfg: &ExperimentConfig,
    bench: &Benchmark,
    seed: u64,
    data: &Dataset,
    dataset_hash: &str,
    out: &Path,
) -> Result<RunRecord> {
    let spec = StrategySpec::new(
        cfg.strategy,
        init_model(cfg.dims(bench), seed),
        bench.controller.clone(),
    );
    let outcome = train(&spec, data, &cfg.train_config(seed))?;
    let mut loss = String::from("epoch,loss\n");
    for (i, j) in outcome.loss_curve.iter().enumerate() {
        writeln!(loss, "{i},{j:e}").unwrap();
    }
    let record = RunRecord {
        benchmark: cfg.benchmark,
        strategy: cfg.strategy,
        sigma_r: cfg.sigma_r,
        seed,
        dataset_hash: dataset_hash.to_string(),
        best_loss: outcome.best_loss,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.loss_curve.len() - 1,
        stopped_early: outcome.stopped_early,
        clipped_forward_passes: outcome.clipped_forward_passes,
    };
    write(&out.join("config.json"), &echo(cfg, seed).to_json())?;
    let mut ck = outcome.params.to_checkpoint_json();
    ck.push('\n');
    write(&out.join("checkpoint.json"), &ck)?;
    write(&out.join("loss.csv"), &loss)?;
    write(&out.join("run.json"), &to_json(&record))?;
    Ok(record)
}

/// Trains on a saved dataset; generates one under `out/dataset` if none is given.
pub fn train_run(
    cfg: &ExperimentConfig,
    seed: u64,
    dataset: Option<&Path>,
    out: &Path,
) -> Result<RunRecord> {
    let dir = match dataset {
        Some(d) => d.to_path_buf(),
        None => {
            let d = out.join("dataset");
            generate(cfg, seed, &d)?;
            d
        }
    };
    let (data, hash) = load_checked_dataset(cfg, seed, &dir)?;
    train_dataset(cfg, &cfg.build_benchmark()?, seed, &data, &hash, out)
}

// ---------------------------------------------------------------- evaluate

/// One row of `results.csv`; empty metric fields are not computable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub benchmark: BenchmarkId,
    pub strategy: String,
    pub sigma: f64,
    pub seed: u64,
    pub ol_mse: Option<f64>,
    pub cl_mse: Option<f64>,
    pub ol_r2: Option<f64>,
    pub cl_r2: Option<f64>,
    pub diverged_flag: bool,
}

impl ResultRow {
    fn new(
        benchmark: BenchmarkId,
        strategy: &str,
        sigma: f64,
        seed: u64,
        m: Option<&SeedMetrics>,
    ) -> Self {
        ResultRow {
            benchmark,
            strategy: strategy.to_string(),
            sigma,
            seed,
            ol_mse: m.and_then(|m| m.ol_mse),
            cl_mse: m.and_then(|m| m.cl_mse),
            ol_r2: m.and_then(|m| m.ol_r2),
            cl_r2: m.and_then(|m| m.cl_r2),
            diverged_flag: m.is_none_or(|m| m.diverged()),
        }
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    let mut s =
        String::from("benchmark,strategy,sigma,seed,ol_mse,cl_mse,ol_r2,cl_r2,diverged_flag\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.benchmark,
            r.strategy,
            r.sigma,
            r.seed,
            opt(r.ol_mse),
            opt(r.cl_mse),
            opt(r.ol_r2),
            opt(r.cl_r2),
            r.diverged_flag as u8
        )
        .unwrap();
    }
    s
}

/// Per-step mean and 95% band of the true and the model output.
pub fn band_csv(bands: Option<&(Band, Band)>, dim: usize) -> String {
    let mut s = String::from("t");
    for who in ["true", "model"] {
        for stat in ["mean", "lo", "hi"] {
            for i in 0..dim {
                write!(s, ",{who}_{stat}[{i}]").unwrap();
            }
        }
    }
    s.push('\n');
    if let Some((truth, model)) = bands {
        for t in 0..truth.mean.horizon() {
            write!(s, "{t}").unwrap();
            for b in [truth, model] {
                for seq in [&b.mean, &b.lo, &b.hi] {
                    for v in seq.step(t) {
                        write!(s, ",{v:e}").unwrap();
                    }
                }
            }
            s.push('\n');
        }
    }
    s
}

/// Every non-diverged test run, one row per time step.
pub fn trajectories_csv(runs: &[Option<(Sequence, Sequence)>], dim: usize) -> String {
    let mut s = String::from("trajectory,t");
    for who in ["true", "model"] {
        for i in 0..dim {
            write!(s, ",y_{who}[{i}]").unwrap();
        }
    }
    s.push('\n');
    for (n, run) in runs.iter().enumerate() {
        let Some((truth, model)) = run else { continue };
        for t in 0..truth.horizon() {
            write!(s, "{n},{t}").unwrap();
            for v in truth.step(t).iter().chain(model.step(t)) {
                write!(s, ",{v:e}").unwrap();
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub benchmark: BenchmarkId,
    /// A strategy id, or `true_plant` for the self-check.
    pub model: String,
    pub sigma_r: f64,
    pub seed: u64,
    pub n_test: usize,
    pub test_horizon: usize,
    pub metrics: SeedMetrics,
}

fn write_evaluation(out: &Path, ev: &Evaluation, dim: usize, report: &MetricsReport) -> Result<()> {
    write(&out.join("metrics.json"), &to_json(report))?;
    let row = ResultRow::new(
        report.benchmark,
        &report.model,
        report.sigma_r,
        report.seed,
        Some(&report.metrics),
    );
    write(&out.join("results.csv"), &results_csv(&[row]))?;
    write(
        &out.join("ol_band.csv"),
        &band_csv(ev.ol_bands().as_ref(), dim),
    )?;
    write(
        &out.join("cl_band.csv"),
        &band_csv(ev.cl_bands().as_ref(), dim),
    )?;
    write(
        &out.join("ol_trajectories.csv"),
        &trajectories_csv(&ev.open_loop, dim),
    )?;
    write(
        &out.join("cl_trajectories.csv"),
        &trajectories_csv(&ev.closed_loop, dim),
    )?;
    Ok(())
}

fn evaluate_model(
    cfg: &ExperimentConfig,
    bench: &Benchmark,
    model: &OperatorHandle,
    name: &str,
    seed: u64,
    out: &Path,
) -> Result<MetricsReport> {
    let opts = cfg.eval_options(seed);
    let ev = evaluate(model, bench, &opts)?;
    let report = MetricsReport {
        benchmark: cfg.benchmark,
        model: name.to_string(),
        sigma_r: cfg.sigma_r,
        seed,
        n_test: opts.n_test,
        test_horizon: opts.horizon,
        metrics: ev.metrics.clone(),
    };
    write_evaluation(out, &ev, bench.y_dim(), &report)?;
    Ok(report)
}

/// Evaluates the checkpoint in `run_dir`. The config defaults to the one
/// echoed there; the seed comes from the run record.
pub fn evaluate_run(cfg: Option<&ExperimentConfig>, run_dir: &Path) -> Result<MetricsReport> {
    let ck_path = run_dir.join("checkpoint.json");
    if !ck_path.exists() {
        return Err(IciError::Config(format!(
            "no checkpoint in {}",
            run_dir.display()
        )));
    }
    let cfg = match cfg {
        Some(c) => c.clone(),
        None => ExperimentConfig::load(&run_dir.join("config.json"))?,
    };
    let record: RunRecord = serde_json::from_str(&read(&run_dir.join("run.json"))?)
        .map_err(|e| IciError::Parse(format!("run.json: {e}")))?;
    let params = StableOperatorParams::from_checkpoint_json(&read(&ck_path)?)?;
    let bench = cfg.build_benchmark()?;
    if params.dims() != cfg.dims(&bench) {
        return Err(IciError::Config(
            "checkpoint does not match the config's model sizing".into(),
        ));
    }
    let model =
        StrategySpec::new(record.strategy, params, bench.controller.clone()).plant_model()?;
    evaluate_model(
        &cfg,
        &bench,
        &model,
        record.strategy.as_str(),
        record.seed,
        run_dir,
    )
}

/// Evaluates the true plant against itself; closed-loop errors are zero.
pub fn self_check(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<MetricsReport> {
    let bench = cfg.build_benchmark()?;
    write(&out.join("config.json"), &echo(cfg, seed).to_json())?;
    evaluate_model(cfg, &bench, &bench.plant.clone(), "true_plant", seed, out)
}

// ------------------------------------------------------------------- sweep

/// Aggregate of one (strategy, σ) cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: StrategyKind,
    pub sigma_r: f64,
    pub ol_mse: Metric,
    pub cl_mse: Metric,
    pub ol_r2: Metric,
    pub cl_r2: Metric,
    pub runs: usize,
    pub diverged_runs: usize,
    pub aborted_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub benchmark: BenchmarkId,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellSummary>,
    #[serde(skip)]
    pub rows: Vec<ResultRow>,
}

impl SweepReport {
    pub fn cell(&self, strategy: StrategyKind, sigma_r: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.strategy == strategy && c.sigma_r == sigma_r)
    }
}

fn dir_name(sigma: f64) -> String {
    format!("sigma_{sigma}")
}

/// Cross product of sigmas × strategies × seeds. A run whose training
/// aborts is recorded as diverged and the sweep continues.
pub fn sweep(cfg: &ExperimentConfig, seeds: &[u64], out: &Path) -> Result<SweepReport> {
    let bench = cfg.build_benchmark()?;
    let sigmas = cfg.sigmas();
    let strategies = cfg.strategies();
    write(&out.join("config.json"), &cfg.to_json())?;

    let data_jobs: Vec<(f64, u64)> = sigmas
        .iter()
        .flat_map(|&s| seeds.iter().map(move |&n| (s, n)))
        .collect();
    let datasets: Vec<(Dataset, String)> = data_jobs
        .par_iter()
        .map(|&(sigma, seed)| {
            let cell = cfg.cell(cfg.strategy, sigma);
            let dir = out
                .join("datasets")
                .join(dir_name(sigma))
                .join(format!("seed_{seed}"));
            let data = build_dataset(&cell, &bench, seed)?;
            let hash = save_dataset(&cell, seed, &data, &dir)?;
            Ok((data, hash))
        })
        .collect::<Result<_>>()?;

    let runs: Vec<(StrategyKind, usize)> = strategies
        .iter()
        .flat_map(|&k| (0..data_jobs.len()).map(move |j| (k, j)))
        .collect();
    let rows: Vec<(ResultRow, bool)> = runs
        .par_iter()
        .map(|&(kind, j)| {
            let (sigma, seed) = data_jobs[j];
            let cell = cfg.cell(kind, sigma);
            let dir = out
                .join("runs")
                .join(kind.as_str())
                .join(dir_name(sigma))
                .join(format!("seed_{seed}"));
            let (data, hash) = &datasets[j];
            match train_dataset(&cell, &bench, seed, data, hash, &dir) {
                Ok(_) => {}
                Err(e @ IciError::NonFiniteLoss { .. }) => {
                    write(&dir.join("config.json"), &echo(&cell, seed).to_json())?;
                    write(&dir.join("aborted.txt"), &format!("{e}\n"))?;
                    eprintln!("{kind} sigma={sigma} seed={seed}: {e}");
                    return Ok((
                        ResultRow::new(cfg.benchmark, kind.as_str(), sigma, seed, None),
                        true,
                    ));
                }
                Err(e) => return Err(e),
            }
            let report = evaluate_run(Some(&cell), &dir)?;
            eprintln!(
                "{kind} sigma={sigma} seed={seed}: ol_mse {:?} cl_mse {:?}",
                report.metrics.ol_mse, report.metrics.cl_mse
            );
            Ok((
                ResultRow::new(
                    cfg.benchmark,
                    kind.as_str(),
                    sigma,
                    seed,
                    Some(&report.metrics),
                ),
                false,
            ))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for &kind in &strategies {
        for &sigma in &sigmas {
            let sel: Vec<&(ResultRow, bool)> = rows
                .iter()
                .filter(|(r, _)| r.strategy == kind.as_str() && r.sigma == sigma)
                .collect();
            let metric = |f: fn(&ResultRow) -> Option<f64>| {
                Metric::from_values(
                    &sel.iter().map(|(r, _)| f(r)).collect::<Vec<_>>(),
                    CiMethod::Normal,
                )
            };
            cells.push(CellSummary {
                strategy: kind,
                sigma_r: sigma,
                ol_mse: metric(|r| r.ol_mse),
                cl_mse: metric(|r| r.cl_mse),
                ol_r2: metric(|r| r.ol_r2),
                cl_r2: metric(|r| r.cl_r2),
                runs: sel.len(),
                diverged_runs: sel.iter().filter(|(r, _)| r.diverged_flag).count(),
                aborted_runs: sel.iter().filter(|(_, a)| *a).count(),
            });
        }
    }
    let report = SweepReport {
        benchmark: cfg.benchmark,
        seeds: seeds.to_vec(),
        cells,
        rows: rows.into_iter().map(|(r, _)| r).collect(),
    };
    write(&out.join("results.csv"), &results_csv(&report.rows))?;
    write(&out.join("summary.json"), &to_json(&report))?;
    Ok(report)
}

// ------------------------------------------------------------------ verify

/// Runs one property suite; the report is also written to `out` when given.
pub fn verify(suite: Suite, seed: u64, out: Option<&Path>) -> Result<SuiteReport> {
    let report = run_suite(suite, seed)?;
    if let Some(dir) = out {
        write(&dir.join(format!("verify_{suite}.json")), &to_json(&report))?;
    }
    Ok(report)
}

/// Output directory: the flag wins over the config.
pub fn out_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.clone())
}
