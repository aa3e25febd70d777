//! `rsp`: build random sample partitions and analyse them block by block.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rsp_core::bench::{run_bench, BenchConfig};
use rsp_core::ensemble::{run_asymptotic, LearnerConfig};
use rsp_core::sampler::update_ledger_file;
use rsp_core::stats::{estimate_curves, Estimand};
use rsp_core::synth::{Generator, SynthSpec};
use rsp_core::verify::{verify, TwoSampleConfig, VerifyConfig};
use rsp_core::{create_dataset, two_stage_partition, with_workers, Dataset, PartitionOptions, PartitionParams, SamplingLedger};

const LEDGER_FILE: &str = "ledger.txt";

#[derive(Parser)]
#[command(name = "rsp", version, about = "Random sample partitions for block-level analysis")]
struct Cli {
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic original dataset.
    Gen(GenArgs),
    /// Convert an original dataset into an RSP dataset.
    Partition(PartitionArgs),
    /// Check integrity and block-level distribution similarity.
    Verify(VerifyArgs),
    /// Draw blocks without replacement, recording them in the ledger.
    Sample(SampleArgs),
    /// Estimate means, standard deviations or label proportions batch by batch.
    Estimate(EstimateArgs),
    /// Train an asymptotic ensemble of trees over RSP blocks.
    Ensemble(EnsembleArgs),
    /// Time partitioning over increasing dataset sizes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    GaussianMixture,
    Uniform,
    SortedAdversarial,
}

impl From<Model> for Generator {
    fn from(m: Model) -> Self {
        match m {
            Model::GaussianMixture => Generator::GaussianMixture,
            Model::Uniform => Generator::Uniform,
            Model::SortedAdversarial => Generator::SortedAdversarial,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long = "records", short = 'n')]
    records: u64,
    #[arg(long = "features", short = 'm')]
    features: usize,
    /// Number of label classes; 0 writes unlabeled records.
    #[arg(long, default_value_t = 2)]
    classes: u32,
    #[arg(long, value_enum, default_value = "gaussian-mixture")]
    model: Model,
    /// Records per stored block.
    #[arg(long, default_value_t = 100_000)]
    block_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop this many records from the start of the stream. With the same
    /// seed, `--skip N` continues where `-n N` stopped, which gives a
    /// held-out set from the same mixture.
    #[arg(long, default_value_t = 0)]
    skip: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PartitionArgs {
    /// Original dataset directory or manifest.
    input: PathBuf,
    /// P, the number of original blocks.
    #[arg(long = "orig-blocks")]
    orig_blocks: Option<usize>,
    /// K, the number of RSP blocks.
    #[arg(long = "blocks")]
    blocks: usize,
    /// δ, records per slice; omit both this and --block-records for balanced slicing.
    #[arg(long, conflicts_with = "block_records")]
    slice: Option<usize>,
    /// n, records per RSP block (P·δ).
    #[arg(long)]
    block_records: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    keep_intermediate: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    input: PathBuf,
    /// Compare blocks with this dataset instead of the input's own full data.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Fixed KS threshold instead of 1.36·√(2/n).
    #[arg(long)]
    ks_threshold: Option<f64>,
    /// Fixed label-proportion threshold instead of 5·√(p(1−p)/n).
    #[arg(long)]
    proportion_threshold: Option<f64>,
    /// Also run MMD² and Hotelling's T² on one sampled block.
    #[arg(long)]
    two_sample: bool,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    #[arg(long)]
    mmd_threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV of every check; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    input: PathBuf,
    /// g, blocks to draw.
    #[arg(long = "batch", short = 'g')]
    batch: usize,
    /// Ledger file; defaults to ledger.txt beside the manifest.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Seed for a new ledger, or for --reset.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "cli")]
    process_id: String,
    /// Start a fresh ledger before drawing.
    #[arg(long)]
    reset: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stat {
    Mean,
    Stddev,
    Proportion,
}

#[derive(Args)]
struct EstimateArgs {
    input: PathBuf,
    #[arg(long = "batch", short = 'g')]
    batch: usize,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mean")]
    stat: Vec<Stat>,
    /// Feature names; defaults to every feature.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnsembleArgs {
    input: PathBuf,
    /// Labeled dataset used for evaluation after each batch.
    #[arg(long)]
    test: PathBuf,
    #[arg(long = "batch", short = 'g')]
    batch: usize,
    /// Stop when a batch improves accuracy by less than this.
    #[arg(long, default_value_t = 0.001, allow_negative_numbers = true)]
    threshold: f64,
    #[arg(long, default_value_t = 8)]
    max_depth: usize,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Continue a persisted ledger instead of drawing from a fresh one.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Trajectory CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the trained ensemble here.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100000,200000,400000,800000")]
    sizes: Vec<u64>,
    #[arg(long, default_value_t = 10)]
    features: usize,
    #[arg(long, default_value_t = 2)]
    classes: u32,
    /// Records per original block; P = K = N / this.
    #[arg(long, default_value_t = 100_000)]
    block_size: usize,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scratch directory; a temporary one under the system temp dir by default.
    #[arg(long)]
    work_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A check that ran and failed; exits with status 1.
#[derive(Debug)]
struct ValidationFailed(String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn csv_writer(path: Option<&Path>) -> anyhow::Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::Writer::from_writer(output(path)?))
}

fn positive(name: &str, v: usize) -> anyhow::Result<()> {
    if v == 0 {
        return Err(rsp_core::Error::InvalidParams(format!("{name} must be at least 1")).into());
    }
    Ok(())
}

fn gen(a: GenArgs) -> anyhow::Result<()> {
    positive("--records", a.records as usize)?;
    positive("--features", a.features)?;
    positive("--block-size", a.block_size)?;
    let spec = SynthSpec::new(a.records + a.skip, a.features, a.classes, a.model.into(), a.seed);
    let records = spec.records()?.skip(a.skip as usize);
    let ds = create_dataset(&a.out, spec.schema()?, records, a.block_size)?;
    println!("{}", ds.manifest_path().display());
    Ok(())
}

fn partition(a: PartitionArgs, workers: Option<usize>) -> anyhow::Result<()> {
    let source = Dataset::open(&a.input)?;
    let p = a.orig_blocks.unwrap_or(source.block_count());
    positive("--orig-blocks", p)?;
    positive("--blocks", a.blocks)?;
    let slice = match (a.slice, a.block_records) {
        (Some(d), _) => Some(d),
        (None, Some(n)) => {
            if n % p != 0 {
                return Err(rsp_core::Error::InvalidParams(format!(
                    "--block-records {n} is not a multiple of P = {p}"
                ))
                .into());
            }
            Some(n / p)
        }
        (None, None) => None,
    };
    let params = PartitionParams {
        orig_blocks: p,
        rsp_blocks: a.blocks,
        slice,
        seed: a.seed,
    };
    let options = PartitionOptions {
        keep_intermediate: a.keep_intermediate,
        workers,
    };
    let rsp = two_stage_partition(&source, &params, &a.out, &options)?;
    println!("{}", rsp.manifest_path().display());
    Ok(())
}

fn run_verify(a: VerifyArgs) -> anyhow::Result<()> {
    let ds = Dataset::open(&a.input)?;
    let reference = a.reference.as_ref().map(Dataset::open).transpose()?;
    let config = VerifyConfig {
        ks_threshold: a.ks_threshold,
        proportion_threshold: a.proportion_threshold,
        two_sample: a.two_sample.then_some(TwoSampleConfig {
            alpha: a.alpha,
            mmd_threshold: a.mmd_threshold,
        }),
        seed: a.seed,
    };
    let report = verify(&ds, reference.as_ref(), &config)?;

    let mut w = csv_writer(a.out.as_deref())?;
    w.write_record(["check", "block_id", "target", "value", "threshold", "passed"])?;
    for c in &report.validation.checks {
        w.write_record(["integrity", "", &c.name, &c.detail, "", &c.passed.to_string()])?;
    }
    for r in &report.ks {
        let block = r.block_id.map_or("all".to_string(), |b| b.to_string());
        w.write_record([
            "ks",
            &block,
            &r.feature,
            &r.ks.to_string(),
            &r.threshold.to_string(),
            &r.passed.to_string(),
        ])?;
    }
    for r in &report.proportions {
        w.write_record([
            "proportion",
            &r.block_id.to_string(),
            &format!("label={}", r.category),
            &r.proportion.to_string(),
            &r.threshold.to_string(),
            &r.passed.to_string(),
        ])?;
    }
    if let Some(t) = &report.two_sample {
        let block = t.block_id.to_string();
        w.write_record(["mmd2", &block, "", &t.mmd2.to_string(), "", &t.passed.to_string()])?;
        if let Some(h) = &t.t2 {
            w.write_record(["t2_p_value", &block, "", &h.p_value.to_string(), &a.alpha.to_string(), &t.passed.to_string()])?;
        }
    }
    w.flush()?;
    drop(w);

    let ks_fail = report.ks.iter().filter(|r| !r.passed).count();
    let prop_fail = report.proportions.iter().filter(|r| !r.passed).count();
    eprintln!(
        "integrity: {}; KS max {:.5}, {ks_fail} over threshold; proportion max deviation {:.5}, {prop_fail} over threshold",
        if report.validation.is_ok() { "ok" } else { "FAILED" },
        report.max_ks(),
        report.max_proportion_deviation(),
    );
    if report.passed() {
        eprintln!("verify: PASS");
        Ok(())
    } else {
        Err(ValidationFailed("verify: FAIL".into()).into())
    }
}

fn sample(a: SampleArgs) -> anyhow::Result<()> {
    positive("--batch", a.batch)?;
    let ds = Dataset::open(&a.input)?;
    let path = a.ledger.unwrap_or_else(|| ds.dir().join(LEDGER_FILE));
    let fresh = || SamplingLedger::for_dataset(&ds, a.seed, a.process_id.clone());
    let ids = update_ledger_file(&path, fresh, |ledger| {
        if a.reset {
            *ledger = ledger.reset(a.seed);
        }
        ledger.check_dataset(&ds)?;
        ledger.sample_blocks(a.batch)
    })?;
    let mut out = io::stdout().lock();
    for id in ids {
        writeln!(out, "{id}")?;
    }
    Ok(())
}

fn estimate(a: EstimateArgs) -> anyhow::Result<()> {
    positive("--batch", a.batch)?;
    positive("--runs", a.runs)?;
    let ds = Dataset::open(&a.input)?;
    let schema = ds.schema();
    let features: Vec<usize> = if a.features.is_empty() {
        (0..schema.feature_count()).collect()
    } else {
        a.features.iter().map(|f| schema.feature_index(f)).collect::<Result<_, _>>()?
    };
    let mut estimands = Vec::new();
    for s in &a.stat {
        match s {
            Stat::Mean => estimands.extend(features.iter().map(|&f| Estimand::Mean(f))),
            Stat::Stddev => estimands.extend(features.iter().map(|&f| Estimand::StdDev(f))),
            Stat::Proportion => {
                let cats = schema.label_categories().ok_or(rsp_core::Error::Unlabeled)?;
                estimands.extend(cats.iter().map(|&c| Estimand::Proportion(c)));
            }
        }
    }
    let curves = estimate_curves(&ds, &estimands, a.batch, a.runs, a.seed)?;
    let mut w = csv_writer(a.out.as_deref())?;
    w.write_record(["batch", "blocks_used", "feature", "statistic", "value", "reference"])?;
    for c in &curves {
        for (t, (v, used)) in c.batch_values.iter().zip(&c.blocks_used).enumerate() {
            w.write_record([
                &(t + 1).to_string(),
                &used.to_string(),
                &c.feature,
                c.statistic.name(),
                &v.to_string(),
                &c.reference.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn ensemble(a: EnsembleArgs) -> anyhow::Result<()> {
    positive("--batch", a.batch)?;
    let ds = Dataset::open(&a.input)?;
    let test_ds = Dataset::open(&a.test)?;
    if test_ds.schema() != ds.schema() {
        bail!(rsp_core::Error::InvalidParams("test set schema differs from the training data".into()));
    }
    let test = test_ds.read_all()?;
    let config = LearnerConfig {
        seed: a.seed,
        ..LearnerConfig::tree(a.max_depth, a.min_leaf)
    };
    let result = match &a.ledger {
        Some(path) => update_ledger_file(
            path,
            || SamplingLedger::for_dataset(&ds, a.seed, "ensemble"),
            |ledger| run_asymptotic(&ds, ledger, &config, a.batch, a.threshold, &test),
        )?,
        None => {
            let mut ledger = SamplingLedger::for_dataset(&ds, a.seed, "ensemble");
            run_asymptotic(&ds, &mut ledger, &config, a.batch, a.threshold, &test)?
        }
    };
    let mut w = csv_writer(a.out.as_deref())?;
    w.write_record(["batch", "blocks_used", "percent_data", "accuracy"])?;
    for b in &result.trajectory {
        w.write_record([
            b.batch.to_string(),
            b.blocks_used.to_string(),
            b.percent_data.to_string(),
            b.accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    if let Some(path) = &a.model {
        result.save(path)?;
    }
    Ok(())
}

fn bench(a: BenchArgs, workers: Option<usize>) -> anyhow::Result<()> {
    let config = BenchConfig {
        sizes: a.sizes,
        features: a.features,
        classes: a.classes,
        block_records: a.block_size,
        repeats: a.repeats,
        seed: a.seed,
        workers,
    };
    let scratch;
    let work_dir = match &a.work_dir {
        Some(d) => d.as_path(),
        None => {
            scratch = std::env::temp_dir().join(format!("rsp-bench-{}", std::process::id()));
            scratch.as_path()
        }
    };
    let report = run_bench(work_dir, &config);
    if a.work_dir.is_none() {
        let _ = std::fs::remove_dir_all(work_dir);
    }
    let report = report?;
    let mut w = csv_writer(a.out.as_deref())?;
    w.write_record(["records", "orig_blocks", "rsp_blocks", "seconds", "manifest_digest"])?;
    for r in &report.rows {
        w.write_record([
            r.records.to_string(),
            r.orig_blocks.to_string(),
            r.rsp_blocks.to_string(),
            r.seconds.to_string(),
            r.manifest_digest.clone(),
        ])?;
    }
    w.flush()?;
    if let Some(fit) = report.fit {
        eprintln!(
            "linear fit: seconds = {:.3e}·N + {:.3e}, R² = {:.4}",
            fit.slope, fit.intercept, fit.r_squared
        );
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let workers = cli.workers;
    if workers == Some(0) {
        return Err(rsp_core::Error::InvalidParams("--workers must be at least 1".into()).into());
    }
    with_workers(workers, move || match cli.command {
        Command::Gen(a) => gen(a),
        Command::Partition(a) => partition(a, workers),
        Command::Verify(a) => run_verify(a),
        Command::Sample(a) => sample(a),
        Command::Estimate(a) => estimate(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Bench(a) => bench(a, workers),
    })?
}

/// 2 for bad parameters, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    use rsp_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(
            E::InvalidParams(_)
            | E::InsufficientBlocks { .. }
            | E::UnknownFeature(_)
            | E::UndeclaredCategory(_)
            | E::Unlabeled,
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.is::<ValidationFailed>() {
                eprintln!("{e}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
