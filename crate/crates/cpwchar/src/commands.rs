//! The pipeline stages behind each subcommand. Every stage reads and writes
//! inside the run directory `<output_dir>/<run-id>/` unless given explicit
//! paths.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context as _, Result};
use cpwchar_core::automl::{self, Leaderboard, TargetModel, TrialRecord};
use cpwchar_core::dataset::{self, DataRow, Partition};
use cpwchar_core::extraction::{self, ComparisonTable, MaterialEstimate, VerificationReport};
use cpwchar_core::features::FeaturePipeline;
use cpwchar_core::netparams::{self, GammaTrace, LineMeasurement};
use cpwchar_core::physics::{log_grid, CpwModel};
use cpwchar_core::rng::mix;
use cpwchar_core::{MaterialParams, Target};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self as art, Manifest, RowCounts, Stamped, StageRecord};
use crate::config::RunConfig;
use crate::csvio;
use crate::runner::{PoolRunner, WallClock};
use crate::touchstone::{self, DataFormat, FrequencyUnit, OptionLine};

/// Validated configuration plus the global flags.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub workers: usize,
    pub dry_run: bool,
}

impl Context {
    pub fn new(config: RunConfig, seed: Option<u64>, workers: usize, dry_run: bool) -> Result<Self> {
        Ok(Self { config: config.finalize(seed)?, workers, dry_run })
    }

    pub fn run_dir(&self) -> PathBuf {
        self.config.run_dir()
    }

    fn stamp<T>(&self, body: T) -> Stamped<T> {
        Stamped { config_hash: self.config.hash(), seed: self.config.seed, body }
    }

    fn manifest(&self) -> Result<Manifest> {
        Manifest::open(&self.run_dir(), &self.config.run_id(), self.config.seed, &self.config.hash())
    }
}

pub struct Generated {
    pub rows: Vec<DataRow>,
    pub counts: RowCounts,
    pub path: Option<PathBuf>,
}

/// Sweeps the forward model, cleans and augments the rows, and writes the
/// dataset CSV.
pub fn generate(ctx: &Context) -> Result<Generated> {
    let cfg = &ctx.config;
    let grid = dataset::generate(&cfg.sweep_config())?;
    let cleaned = dataset::clean(&grid);
    let aug = &cfg.augmentation;
    let rows = dataset::augment(&cleaned, aug.noise_rel, aug.multiplier, cfg.seed)?;
    let counts =
        RowCounts { grid: grid.len(), cleaned: cleaned.len(), augmented: rows.len() - cleaned.len(), total: rows.len() };
    println!(
        "grid rows {}, after cleaning {}, augmented {}, total {}",
        counts.grid, counts.cleaned, counts.augmented, counts.total
    );
    if ctx.dry_run {
        return Ok(Generated { rows, counts, path: None });
    }
    let dir = ctx.run_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(art::DATASET);
    csvio::save_dataset(&path, &rows)?;
    let mut manifest = ctx.manifest()?;
    manifest.rows = Some(counts.clone());
    manifest.record("generate", StageRecord { files: vec![art::DATASET.into()], ..Default::default() });
    manifest.save(&dir)?;
    println!("wrote {}", path.display());
    Ok(Generated { rows, counts, path: Some(path) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardFile {
    pub leaderboards: Vec<Leaderboard>,
}

pub struct Trained {
    pub partition: Partition,
    pub run: Option<automl::TrainingRun>,
}

/// Partitions the dataset, fits the feature pipeline, searches every target
/// and persists the pipeline, the selected models and the reports.
pub fn train(ctx: &Context, dataset_path: Option<&Path>) -> Result<Trained> {
    let cfg = &ctx.config;
    let dir = ctx.run_dir();
    let path = dataset_path.map(Path::to_path_buf).unwrap_or_else(|| dir.join(art::DATASET));
    if !path.exists() {
        bail!("dataset {} not found; run `cpwchar generate` first or pass --dataset", path.display());
    }
    let rows = csvio::load_dataset(&path)?;
    let partition = dataset::partition(&rows, cfg.partition.scheme, cfg.seed)?;
    let budget = cfg.search.budget() * Target::ALL.len();
    println!(
        "rows {}: train {}, validation {}, test {}; {} trials over {} targets",
        rows.len(),
        partition.train.len(),
        partition.validation.len(),
        partition.test.len(),
        budget,
        Target::ALL.len()
    );
    if ctx.dry_run {
        return Ok(Trained { partition, run: None });
    }
    let runner = PoolRunner::new(ctx.workers)?;
    let clock = WallClock::start();
    let run = automl::train(&rows, &partition, &cfg.search, cfg.features.max_abs_corr, &runner, &clock)?;

    let mut files = vec![art::PIPELINE.to_string()];
    art::write_json(&dir.join(art::PIPELINE), &ctx.stamp(run.features.clone()))?;
    for model in &run.models {
        let rel = art::model_file(model.target);
        art::write_json(&dir.join(&rel), &ctx.stamp(model.clone()))?;
        files.push(art::relative(&dir, &dir.join(&rel)));
    }
    let boards = LeaderboardFile { leaderboards: run.leaderboards.clone() };
    art::write_json(&dir.join(art::LEADERBOARD), &ctx.stamp(boards))?;
    art::write_text(&dir.join(art::REPORT_TABLES), &automl::report_markdown(&run.leaderboards))?;
    let mut log = String::new();
    for t in &run.trials {
        log.push_str(&serde_json::to_string(t)?);
        log.push('\n');
    }
    art::write_text(&dir.join(art::TRIALS), &log)?;
    files.extend([art::LEADERBOARD, art::REPORT_TABLES, art::TRIALS].map(String::from));

    let counts = BTreeMap::from([
        ("train_rows".to_string(), partition.train.len()),
        ("validation_rows".to_string(), partition.validation.len()),
        ("test_rows".to_string(), partition.test.len()),
        ("trials".to_string(), run.trials.len()),
    ]);
    let mut manifest = ctx.manifest()?;
    manifest.record("train", StageRecord { files, counts });
    manifest.save(&dir)?;
    print!("{}", automl::report_markdown(&run.leaderboards));
    Ok(Trained { partition, run: Some(run) })
}

/// Reads one `.s2p` file per line and runs multiline extraction. All files
/// must share one frequency grid.
pub fn load_lines(inputs: &[(PathBuf, f64)]) -> Result<Vec<LineMeasurement>> {
    ensure!(inputs.len() >= 2, "multiline extraction needs at least two lines, got {}", inputs.len());
    let mut lines = Vec::with_capacity(inputs.len());
    for (path, length) in inputs {
        let file = touchstone::read(path).with_context(|| format!("reading {}", path.display()))?;
        lines.push(LineMeasurement { length: *length, records: file.records });
    }
    let (first_path, first) = (&inputs[0].0, &lines[0]);
    for ((path, _), line) in inputs.iter().zip(&lines).skip(1) {
        let same = line.records.len() == first.records.len()
            && line.records.iter().zip(&first.records).all(|(a, b)| a.frequency == b.frequency);
        ensure!(same, "frequency grids of {} and {} differ", first_path.display(), path.display());
    }
    Ok(lines)
}

pub fn gamma(ctx: &Context, inputs: &[(PathBuf, f64)], output: Option<&Path>) -> Result<GammaTrace> {
    let lines = load_lines(inputs)?;
    println!("{} lines, {} frequencies", lines.len(), lines[0].records.len());
    if ctx.dry_run {
        return Ok(GammaTrace::default());
    }
    let trace = netparams::multiline_gamma(&lines)?;
    let dir = ctx.run_dir();
    let path = output.map(Path::to_path_buf).unwrap_or_else(|| dir.join(art::GAMMA));
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    csvio::save_gamma(&path, &trace)?;
    if output.is_none() {
        let mut manifest = ctx.manifest()?;
        manifest.record("gamma", StageRecord { files: vec![art::GAMMA.into()], ..Default::default() });
        manifest.save(&dir)?;
    }
    println!("wrote {}", path.display());
    Ok(trace)
}

/// Writes synthetic `.s2p` files for every fixture line, optionally with
/// additive S-parameter noise. Returns `(path, length)` pairs.
pub fn simulate(
    ctx: &Context,
    params: &MaterialParams,
    points: usize,
    noise: f64,
    out_dir: &Path,
) -> Result<Vec<(PathBuf, f64)>> {
    params.validate()?;
    let cfg = &ctx.config;
    let grid = log_grid(cfg.sweep.freq_min, cfg.sweep.freq_max, points)?;
    let mut lines = netparams::synthesize_lines(&CpwModel::new(&cfg.geometry)?, params, &grid)?;
    netparams::add_noise(&mut lines, noise, mix(cfg.seed, 0x5e_0155))?;
    let options = OptionLine { unit: FrequencyUnit::Hz, format: DataFormat::Ri, resistance: 50.0 };
    let mut written = Vec::new();
    if ctx.dry_run {
        println!("{} lines x {} frequencies", lines.len(), points);
        return Ok(written);
    }
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (i, line) in lines.iter().enumerate() {
        let path = out_dir.join(format!("line{}_{:.2}mm.s2p", i + 1, line.length * 1e3));
        let note = format!("synthetic line, length {} m, S-parameter noise {noise}", line.length);
        touchstone::write(&path, &line.records, &options, &[&note])?;
        println!("{}={}", path.display(), line.length);
        written.push((path, line.length));
    }
    Ok(written)
}

pub enum GammaSource {
    Csv(PathBuf),
    Lines(Vec<(PathBuf, f64)>),
}

pub struct Extracted {
    pub estimate: MaterialEstimate,
    pub verification: VerificationReport,
    pub comparison: Option<ComparisonTable>,
}

/// Trained artifacts read back from a run directory.
pub struct TrainedModels {
    pub pipeline: FeaturePipeline,
    pub models: Vec<TargetModel>,
}

pub fn load_models(dir: &Path) -> Result<TrainedModels> {
    let pipeline_path = dir.join(art::PIPELINE);
    ensure!(pipeline_path.exists(), "missing feature pipeline {}; run `cpwchar train` first", pipeline_path.display());
    let pipeline: Stamped<FeaturePipeline> = art::read_json(&pipeline_path)?;
    let mut models = Vec::new();
    for target in Target::ALL {
        let path = dir.join(art::model_file(target));
        ensure!(path.exists(), "missing model artifact {}", path.display());
        let model: Stamped<TargetModel> = art::read_json(&path)?;
        ensure!(model.body.target == target, "{} holds a model for {}", path.display(), model.body.target);
        models.push(model.body);
    }
    Ok(TrainedModels { pipeline: pipeline.body, models })
}

fn fig7_csv(estimate: &MaterialEstimate) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["freq_hz".to_string()];
    header.extend(estimate.parameters.iter().map(|p| p.target.name().to_string()));
    w.write_record(&header)?;
    for (i, f) in estimate.frequencies.iter().enumerate() {
        let mut rec = vec![f.to_string()];
        rec.extend(estimate.parameters.iter().map(|p| p.trace[i].to_string()));
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn fig8_csv(report: &VerificationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["freq_hz", "measured_alpha_np_m", "simulated_alpha_np_m", "residual_np_m"])?;
    for i in 0..report.frequencies.len() {
        w.write_record(
            [report.frequencies[i], report.measured_alpha[i], report.simulated_alpha[i], report.residual[i]]
                .map(|v| v.to_string()),
        )?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Predicts the material parameters from a measured γ, verifies them by
/// re-simulation and writes the estimate, verification and plot data.
pub fn extract(ctx: &Context, models_dir: Option<&Path>, source: &GammaSource, with_reference: bool) -> Result<Extracted> {
    let cfg = &ctx.config;
    let dir = ctx.run_dir();
    let trained = load_models(models_dir.unwrap_or(&dir))?;
    let measured = match source {
        GammaSource::Csv(path) => csvio::load_gamma(path)?,
        GammaSource::Lines(inputs) => netparams::multiline_gamma(&load_lines(inputs)?)?,
    };
    let estimate = extraction::extract(&measured, &trained.pipeline, &trained.models, cfg.extraction.trim)?;
    let verification = extraction::verify(&estimate, &cfg.geometry, &measured, cfg.extraction.threshold)?;
    let comparison = with_reference.then(|| extraction::compare_table(&estimate, &cfg.extraction.reference));

    for p in &estimate.parameters {
        println!("{:>10} = {:.6e} (IQR {:.3e})", p.target.name(), p.value, p.iqr);
    }
    println!(
        "verification: max |Δα| = {:.4} Np/m, threshold {} Np/m: {}",
        verification.max_residual,
        verification.threshold,
        if verification.pass { "PASS" } else { "FAIL" }
    );
    if let Some(table) = &comparison {
        print!("{}", table.to_markdown());
    }
    if ctx.dry_run {
        return Ok(Extracted { estimate, verification, comparison });
    }

    let mut files = vec![art::ESTIMATE, art::VERIFICATION, art::FIG7, art::FIG8];
    art::write_json(&dir.join(art::ESTIMATE), &ctx.stamp(estimate.clone()))?;
    art::write_json(&dir.join(art::VERIFICATION), &ctx.stamp(verification.clone()))?;
    art::write_text(&dir.join(art::FIG7), &fig7_csv(&estimate)?)?;
    art::write_text(&dir.join(art::FIG8), &fig8_csv(&verification)?)?;
    if let Some(table) = &comparison {
        art::write_text(&dir.join(art::COMPARISON), &table.to_markdown())?;
        art::write_json(&dir.join(art::COMPARISON_JSON), &ctx.stamp(table.clone()))?;
        files.extend([art::COMPARISON, art::COMPARISON_JSON]);
    }
    let mut manifest = ctx.manifest()?;
    manifest.record("extract", StageRecord { files: files.into_iter().map(String::from).collect(), ..Default::default() });
    manifest.save(&dir)?;
    Ok(Extracted { estimate, verification, comparison })
}

/// Collates the manifest, leaderboards and extraction results of a run
/// directory into one Markdown document.
pub fn report(ctx: &Context, dir: Option<&Path>) -> Result<String> {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(|| ctx.run_dir());
    let manifest_path = dir.join(art::MANIFEST);
    if !manifest_path.exists() {
        bail!(
            "{} has no {}; run `cpwchar generate` (and `train`, `extract`) with the same config first",
            dir.display(),
            art::MANIFEST
        );
    }
    let manifest: Manifest = art::read_json(&manifest_path)?;
    let mut out = String::new();
    let _ = writeln!(out, "# Characterization run {}\n", manifest.run_id);
    let _ = writeln!(out, "- tool: {} {}", manifest.tool, manifest.version);
    let _ = writeln!(out, "- seed: {}", manifest.seed);
    let _ = writeln!(out, "- config hash: `{}`", manifest.config_hash);
    if let Some(r) = &manifest.rows {
        let _ = writeln!(
            out,
            "- rows: {} grid, {} after cleaning, {} augmented, {} total",
            r.grid, r.cleaned, r.augmented, r.total
        );
    }
    out.push('\n');
    let _ = writeln!(out, "## Stages\n");
    for (stage, rec) in &manifest.stages {
        let _ = writeln!(out, "- {stage}: {}", rec.files.join(", "));
        for (k, v) in &rec.counts {
            let _ = writeln!(out, "  - {k}: {v}");
        }
    }
    out.push('\n');

    let boards_path = dir.join(art::LEADERBOARD);
    if boards_path.exists() {
        let boards: Stamped<LeaderboardFile> = art::read_json(&boards_path)?;
        let _ = writeln!(out, "## Model selection\n");
        out.push_str(&automl::report_markdown(&boards.body.leaderboards));
        let mut sorted = boards.body.leaderboards.clone();
        sorted.sort_by_key(|b| b.target);
        for b in &sorted {
            let sel = b.selected_entry();
            let _ = write!(out, "- {}: selected {} (trial {})", b.target.label(), sel.family, sel.trial_id);
            if let Some(p) = b.p_value {
                let _ = write!(out, ", bootstrap p-value vs runner-up {p:.4}");
            }
            out.push('\n');
        }
        out.push('\n');
    }

    let estimate_path = dir.join(art::ESTIMATE);
    if estimate_path.exists() {
        let est: Stamped<MaterialEstimate> = art::read_json(&estimate_path)?;
        let _ = writeln!(out, "## Extracted parameters\n");
        let _ = writeln!(out, "| Parameter | Value | IQR |\n|---|---:|---:|");
        for p in &est.body.parameters {
            let _ = writeln!(out, "| {} | {:.4e} | {:.3e} |", p.target.label(), p.value, p.iqr);
        }
        let _ = writeln!(
            out,
            "\nAggregation: {} over {} frequencies ({} outside the training band).\n",
            est.body.aggregation,
            est.body.frequencies.len(),
            est.body.out_of_band
        );
    }
    let verification_path = dir.join(art::VERIFICATION);
    if verification_path.exists() {
        let v: Stamped<VerificationReport> = art::read_json(&verification_path)?;
        let _ = writeln!(
            out,
            "## Verification\n\nmax |Δα| = {:.4} Np/m against a threshold of {} Np/m: **{}**{}\n",
            v.body.max_residual,
            v.body.threshold,
            if v.body.pass { "pass" } else { "fail" },
            if v.body.clamped { " (parameters clamped before re-simulation)" } else { "" }
        );
    }
    let comparison_path = dir.join(art::COMPARISON_JSON);
    if comparison_path.exists() {
        let c: Stamped<ComparisonTable> = art::read_json(&comparison_path)?;
        let _ = writeln!(out, "## Comparison with reference values\n");
        out.push_str(&c.body.to_markdown());
        out.push('\n');
    }
    if !ctx.dry_run {
        art::write_text(&dir.join(art::REPORT), &out)?;
    }
    Ok(out)
}

/// Trial log of a run directory.
pub fn read_trials(dir: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(dir.join(art::TRIALS))?;
    text.lines().map(|l| serde_json::from_str(l).map_err(Into::into)).collect()
}
