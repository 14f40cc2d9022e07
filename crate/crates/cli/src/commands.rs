use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use scalesgd::algorithms::{self, EvalSets, RunConfig, TrainError};
use scalesgd::data::{read_dense_csv, read_svmlight, split, write_svmlight, Dataset, OrderPolicy, SampleSource};
use scalesgd::generators::{diversity_replicate, first_sample, gen_uniform_dataset, stream_test_set, LsStream};
use scalesgd::harness::{
    detect_upper_bound, gain_growth_async, gain_growth_sync, run_sweep, GainGrowthTable, SweepMode, UpperBoundReport,
};
use scalesgd::metrics::CharacterReport;

use crate::config::{DatasetConfig, ExperimentConfig, FileFormat, GeneratorSpec};
use crate::error::CliError;

/// Settings shared by every subcommand.
pub struct Context {
    pub config: ExperimentConfig,
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn output_dir(&self) -> Result<&Path, CliError> {
        self.output_dir
            .as_deref()
            .or(self.config.output_dir.as_deref())
            .ok_or_else(|| CliError::Config("no output directory (use --output-dir or `output_dir`)".into()))
    }

    fn dataset_config(&self) -> &DatasetConfig {
        self.config.dataset.as_ref().expect("validated")
    }
}

enum Loaded {
    Finite(Dataset),
    Stream { stream: Arc<LsStream>, prefix: Dataset, test: Dataset },
}

impl Loaded {
    /// The materialized samples: the dataset itself or the stream prefix.
    fn samples(&self) -> &Dataset {
        match self {
            Loaded::Finite(ds) => ds,
            Loaded::Stream { prefix, .. } => prefix,
        }
    }
}

fn read_file(ctx: &Context, path: &Path, format: FileFormat, label_column: usize, dim: usize) -> Result<Dataset, CliError> {
    let full = ctx.resolve(path);
    let file = File::open(&full).map_err(|e| CliError::Data(format!("{}: {e}", full.display())))?;
    let name = full.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let reader = BufReader::new(file);
    let ds = match format {
        FileFormat::Svmlight => read_svmlight(reader, &name, dim),
        FileFormat::Csv => read_dense_csv(reader, &name, label_column),
    };
    ds.map_err(|e| CliError::Data(format!("{}: {e}", full.display())))
}

fn load(ctx: &Context) -> Result<Loaded, CliError> {
    let d = ctx.dataset_config();
    if let Some(path) = &d.path {
        return Ok(Loaded::Finite(read_file(ctx, path, d.format, d.label_column, d.dim)?));
    }
    match d.generator.as_ref().expect("validated") {
        GeneratorSpec::Uniform { dim, n, value_range, density, seed } => {
            Ok(Loaded::Finite(gen_uniform_dataset(*dim, *n, *value_range, *density, *seed)?))
        }
        GeneratorSpec::Stream { spec, draws, test_size, origin } => {
            let origin = origin.as_ref().map(|p| read_file(ctx, p, FileFormat::Svmlight, 0, spec.dim)).transpose()?;
            let first = first_sample(spec, origin.as_ref(), spec.seed)?;
            let stream = Arc::new(LsStream::new(*spec, first)?);
            let prefix = stream.prefix(*draws);
            let test = stream_test_set(spec, *test_size, spec.seed.wrapping_add(1))?;
            Ok(Loaded::Stream { stream, prefix, test })
        }
        GeneratorSpec::Replicate { base, parts, pattern } => {
            let ds = read_file(ctx, base, FileFormat::Svmlight, 0, 0)?;
            Ok(Loaded::Finite(diversity_replicate(&ds, *parts, pattern)?))
        }
    }
}

/// Training source and evaluation sets. Finite data is split; the training
/// part is drawn in a permutation seeded by the run seed.
fn training_inputs(ctx: &Context, run: &RunConfig) -> Result<(SampleSource, EvalSets), CliError> {
    let (src, train, test) = match load(ctx)? {
        Loaded::Finite(ds) => {
            let parts = split(&ds, &ctx.config.split)?;
            if parts.test.is_empty() {
                return Err(CliError::Config("split leaves an empty test set".into()));
            }
            let train = Arc::new(parts.train);
            let src = SampleSource::finite(train.clone(), OrderPolicy::Shuffled { seed: run.seed })?;
            (src, train, Arc::new(parts.test))
        }
        Loaded::Stream { stream, prefix, test } => (SampleSource::stream(stream), Arc::new(prefix), Arc::new(test)),
    };
    let eval = EvalSets::new(train, test)?;
    Ok((src, eval))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_svmlight(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

/// Writes `dataset.svm` (plus `test.svm` for streams) and a `dataset.json`
/// sidecar with the generator spec.
pub fn cmd_gen(ctx: &Context) -> Result<(), CliError> {
    let out = ctx.output_dir()?.to_path_buf();
    let loaded = load(ctx)?;
    fs::create_dir_all(&out)?;
    write_dataset(&out.join("dataset.svm"), loaded.samples())?;
    if let Loaded::Stream { test, .. } = &loaded {
        write_dataset(&out.join("test.svm"), test)?;
    }
    let ds = loaded.samples();
    let sidecar = json!({
        "generator": ctx.dataset_config().generator,
        "n": ds.len(),
        "dim": ds.dim(),
    });
    write_json(&out.join("dataset.json"), &sidecar)
}

/// Prints the character report and, with an output directory, also writes
/// `report.json`.
pub fn cmd_metrics(ctx: &Context) -> Result<(), CliError> {
    let loaded = load(ctx)?;
    let m = &ctx.config.metrics;
    let report = CharacterReport::compute(loaded.samples(), m.tau_max, m.batch_size, m.full)?;
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    println!("{text}");
    if let Some(out) = ctx.output_dir.as_deref().or(ctx.config.output_dir.as_deref()) {
        fs::create_dir_all(out)?;
        write_json(&out.join("report.json"), &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    algorithm: &'a algorithms::Algorithm,
    workers: usize,
    server_iters: u64,
    worker_iters: u64,
    final_train_logloss: f64,
    final_test_logloss: f64,
    best_test_logloss: f64,
    epsilon_target: Option<f64>,
    reached_target: bool,
    diverged: bool,
}

/// Writes `trace.csv`, `summary.json` and `timing.json`. A diverged run
/// keeps its partial trace.
pub fn cmd_train(ctx: &Context) -> Result<(), CliError> {
    let out = ctx.output_dir()?.to_path_buf();
    let run = ctx.config.run.as_ref().expect("validated");
    let (src, eval) = training_inputs(ctx, run)?;
    let start = Instant::now();
    let result = algorithms::run(&src, &eval, run, &ctx.config.objective);
    let wall_seconds = start.elapsed().as_secs_f64();
    let (trace, diverged) = match result {
        Ok(t) => (t, None),
        Err(TrainError::Diverged { last_finite_step, partial }) => (partial, Some(last_finite_step)),
        Err(e) => return Err(e.into()),
    };
    fs::create_dir_all(&out)?;
    fs::write(out.join("trace.csv"), trace.to_csv())?;
    let last = trace.last().copied();
    let summary = Summary {
        algorithm: &run.algorithm,
        workers: run.workers,
        server_iters: last.map_or(0, |r| r.server_iter),
        worker_iters: last.map_or(0, |r| r.worker_iters),
        final_train_logloss: last.map_or(f64::NAN, |r| r.train_logloss),
        final_test_logloss: last.map_or(f64::NAN, |r| r.test_logloss),
        best_test_logloss: trace.best_test_logloss().unwrap_or(f64::NAN),
        epsilon_target: run.epsilon_target,
        reached_target: trace.reached_target,
        diverged: diverged.is_some(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_json(&out.join("timing.json"), &json!({ "wall_seconds": wall_seconds }))?;
    if let Some(last_finite_step) = diverged {
        return Err(CliError::Diverged { last_finite_step });
    }
    if let Some(eps) = run.epsilon_target {
        if !trace.reached_target {
            return Err(CliError::TargetNotReached(format!(
                "{:?} logloss {eps} not reached in {} server iterations",
                run.target_on, run.max_server_iters
            )));
        }
    }
    Ok(())
}

/// Writes `m<k>.csv` per worker count, `gain_growth.csv` and
/// `upper_bound.json`. Fixture mode skips training and the trace files.
pub fn cmd_sweep(ctx: &Context) -> Result<(), CliError> {
    let out = ctx.output_dir()?.to_path_buf();
    let section = ctx.config.sweep.as_ref().expect("validated");
    if let Some(metrics) = &section.fixture_metrics {
        let growths = match section.mode {
            SweepMode::AsyncCost => gain_growth_async(metrics),
            SweepMode::SyncGain => gain_growth_sync(metrics),
        };
        let report = if growths.is_empty() {
            UpperBoundReport::not_reached()
        } else {
            detect_upper_bound(&section.worker_counts, &growths, section.mode, section.theta)?
        };
        fs::create_dir_all(&out)?;
        fs::write(out.join("gain_growth.csv"), GainGrowthTable::new(&section.worker_counts, metrics, &growths).to_csv())?;
        fs::write(out.join("upper_bound.json"), report.to_json())?;
        return Ok(());
    }
    let sweep = ctx.config.sweep_config()?;
    let (src, eval) = training_inputs(ctx, &sweep.base)?;
    let outcome = run_sweep(&src, &eval, &ctx.config.objective, &sweep, ctx.jobs)?;
    outcome.write_to(&out)?;
    Ok(())
}
