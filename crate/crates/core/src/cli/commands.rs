use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::axis::{Axis, Domain};
use crate::data::{parse_manifest, split_train_val, ManifestEntry, ScoreScale};
use crate::error::{AesaError, Result};
use crate::features::{
    load_layer_stack, read_stack_header, resample, synthetic_frontend, write_layer_stack,
    AudioClip, LayerStack, FRONTEND_RATE,
};
use crate::metrics::{
    evaluate_records, render_report, Level, MetricReport, ReportFormat, ScoredRecord,
};
use crate::model::{load_checkpoint, write_checkpoint, Checkpoint, Mode, ModelParams};
use crate::training::{fit, write_history, FitResult, TrainSample};

use super::run_config::RunConfig;

pub const INDEX_FILE: &str = "index.csv";
pub const STACK_EXTENSION: &str = "aesf";
pub const PREDICTION_HEADER: &str = "clip_id,system_id,domain,axis,prediction";

/// Write through a sibling temp file so readers never see a partial artifact.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| AesaError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| AesaError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| AesaError::io(path, e))
}

fn check_clip_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(AesaError::InvalidInput(format!(
            "clip_id `{id}` cannot be used as a file name"
        )));
    }
    Ok(())
}

/// Read a WAV file as mono samples in [-1, 1]; channels are averaged.
pub fn read_wav(path: &Path, clip_id: &str) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path)
        .map_err(|e| AesaError::InvalidClip(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
        hound::SampleFormat::Int => {
            let full_scale = (1i64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full_scale))
                .collect::<std::result::Result<_, _>>()
        }
    }
    .map_err(|e| AesaError::InvalidClip(format!("{}: {e}", path.display())))?;
    let samples = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();
    AudioClip::new(samples, spec.sample_rate, clip_id)
}

/// Write a mono 32-bit float WAV.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let to_err = |e: hound::Error| AesaError::InvalidClip(format!("{}: {e}", path.display()));
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_err)?;
    for s in &clip.samples {
        writer.write_sample(*s as f32).map_err(to_err)?;
    }
    writer.finalize().map_err(to_err)
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frontend {
    /// Seeded stand-in computed from audio referenced by the manifest's `path` column.
    Synthetic { layers: usize, dims: usize },
    /// Existing `<clip_id>.aesf` files in a directory.
    Precomputed(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub manifest: PathBuf,
    pub frontend: Frontend,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub scale: ScoreScale,
}

#[derive(Debug, Default)]
pub struct ExtractSummary {
    pub written: Vec<(String, PathBuf)>,
    pub failures: Vec<(String, AesaError)>,
}

fn extract_one(entry: &ManifestEntry, opts: &ExtractOptions, base: &Path) -> Result<LayerStack> {
    check_clip_id(&entry.clip_id)?;
    match &opts.frontend {
        Frontend::Synthetic { layers, dims } => {
            let clip = read_wav(&resolve(base, &entry.path), &entry.clip_id)?;
            let clip = resample(&clip, FRONTEND_RATE)?;
            synthetic_frontend(&clip, opts.seed, *layers, *dims)
        }
        Frontend::Precomputed(dir) => {
            let path = dir.join(format!("{}.{STACK_EXTENSION}", entry.clip_id));
            let mut stack = load_layer_stack(&path)?;
            stack.clip_id = entry.clip_id.clone();
            Ok(stack)
        }
    }
}

/// One layer-stack file per clip plus an `index.csv` (`clip_id,path`).
/// Clips that fail are reported and skipped; the rest are still written.
pub fn cmd_extract_features(opts: &ExtractOptions) -> Result<ExtractSummary> {
    let entries = parse_manifest(&opts.manifest, &opts.scale)?;
    let base = opts.manifest.parent().unwrap_or(Path::new("."));

    let mut summary = ExtractSummary::default();
    let mut encoded = Vec::new();
    for entry in &entries {
        match extract_one(entry, opts, base) {
            Ok(stack) => {
                let mut bytes = Vec::new();
                write_layer_stack(&stack, &mut bytes)
                    .map_err(|e| AesaError::io(&opts.out_dir, e))?;
                encoded.push((entry.clip_id.clone(), bytes));
            }
            Err(e) => summary.failures.push((entry.clip_id.clone(), e)),
        }
    }

    std::fs::create_dir_all(&opts.out_dir).map_err(|e| AesaError::io(&opts.out_dir, e))?;
    let mut index = String::from("clip_id,path\n");
    for (clip_id, bytes) in encoded {
        let file = format!("{clip_id}.{STACK_EXTENSION}");
        let path = opts.out_dir.join(&file);
        write_atomic(&path, &bytes)?;
        writeln!(index, "{clip_id},{file}").unwrap();
        summary.written.push((clip_id, path));
    }
    write_atomic(&opts.out_dir.join(INDEX_FILE), index.as_bytes())?;
    Ok(summary)
}

/// Resolves clip ids to stack files through `index.csv`, falling back to
/// `<dir>/<clip_id>.aesf`.
pub struct FeatureIndex {
    dir: PathBuf,
    paths: HashMap<String, PathBuf>,
}

impl FeatureIndex {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let mut paths = HashMap::new();
        let index = dir.join(INDEX_FILE);
        if index.exists() {
            let mut rdr = csv::Reader::from_path(&index)?;
            for rec in rdr.records() {
                let rec = rec?;
                let (id, path) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""));
                paths.insert(id.to_string(), resolve(&dir, path));
            }
        }
        Ok(Self { dir, paths })
    }

    pub fn path(&self, clip_id: &str) -> PathBuf {
        self.paths
            .get(clip_id)
            .cloned()
            .unwrap_or_else(|| self.dir.join(format!("{clip_id}.{STACK_EXTENSION}")))
    }

    pub fn load(&self, clip_id: &str) -> Result<LayerStack> {
        let mut stack = load_layer_stack(self.path(clip_id))?;
        stack.clip_id = clip_id.to_string();
        Ok(stack)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub config: RunConfig,
    pub manifest: PathBuf,
    pub features_dir: PathBuf,
    pub checkpoint_out: PathBuf,
    pub history_out: PathBuf,
    pub metadata_out: PathBuf,
    /// Initialize from this checkpoint instead of a fresh seeded init.
    pub resume: Option<PathBuf>,
}

const VAL_TAGS: [&str; 4] = ["val", "valid", "validation", "dev"];

fn load_samples(
    entries: &[ManifestEntry],
    index: &FeatureIndex,
    scale: &ScoreScale,
) -> Result<Vec<TrainSample>> {
    entries
        .iter()
        .map(|e| {
            Ok(TrainSample {
                stack: index.load(&e.clip_id)?,
                targets: e.normalized_targets(scale)?,
            })
        })
        .collect()
}

pub fn cmd_train(opts: &TrainOptions) -> Result<FitResult> {
    let cfg = &opts.config;
    cfg.train.validate()?;
    let entries = parse_manifest(&opts.manifest, &cfg.scale)?;
    let is_val = |e: &ManifestEntry| VAL_TAGS.contains(&e.split.to_ascii_lowercase().as_str());
    let is_train =
        |e: &ManifestEntry| matches!(e.split.to_ascii_lowercase().as_str(), "train" | "");
    let tagged_val: Vec<ManifestEntry> = entries.iter().filter(|e| is_val(e)).cloned().collect();
    let train_pool: Vec<ManifestEntry> = entries.iter().filter(|e| is_train(e)).cloned().collect();
    let (train_entries, val_entries) = if tagged_val.is_empty() {
        split_train_val(&train_pool, cfg.val_count, cfg.train.seed)?
    } else {
        (train_pool, tagged_val)
    };
    if train_entries.is_empty() || val_entries.is_empty() {
        return Err(AesaError::InvalidInput(format!(
            "need non-empty train and validation sets, got {} / {}",
            train_entries.len(),
            val_entries.len()
        )));
    }

    let index = FeatureIndex::open(&opts.features_dir)?;
    let train = load_samples(&train_entries, &index, &cfg.scale)?;
    let val = load_samples(&val_entries, &index, &cfg.scale)?;
    let first = &train[0].stack;
    let (layers, dims) = (first.layers(), first.dims());
    if let Some(bad) = train
        .iter()
        .chain(&val)
        .find(|s| s.stack.layers() != layers || s.stack.dims() != dims)
    {
        return Err(AesaError::Shape(format!(
            "clip `{}` has {}x{} features, expected {layers}x{dims}",
            bad.stack.clip_id,
            bad.stack.layers(),
            bad.stack.dims()
        )));
    }

    let model_config = cfg.model_config(dims, layers)?;
    let params = match &opts.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            if ckpt.params.config != model_config {
                return Err(AesaError::Config(format!(
                    "resume checkpoint config {:?} differs from {:?}",
                    ckpt.params.config, model_config
                )));
            }
            ckpt.params
        }
        None => ModelParams::init(&model_config, cfg.train.seed)?,
    };

    let result = fit(params, &train, &val, &cfg.train, &cfg.scale)?;

    let mut ckpt_bytes = Vec::new();
    write_checkpoint(
        &Checkpoint {
            params: result.params.clone(),
            scale: cfg.scale,
        },
        &mut ckpt_bytes,
    )
    .map_err(|e| AesaError::io(&opts.checkpoint_out, e))?;
    let mut history = Vec::new();
    write_history(&result.history, &mut history)
        .map_err(|e| AesaError::io(&opts.history_out, e))?;

    let mut meta = cfg.to_metadata();
    writeln!(meta, "input_dim = {dims}").unwrap();
    writeln!(meta, "layer_count = {layers}").unwrap();
    writeln!(meta, "train_clips = {}", train.len()).unwrap();
    writeln!(meta, "val_clips = {}", val.len()).unwrap();
    writeln!(meta, "resumed = {}", opts.resume.is_some()).unwrap();
    writeln!(meta, "epochs_run = {}", result.history.len()).unwrap();
    writeln!(meta, "best_epoch = {}", result.best_epoch).unwrap();
    writeln!(meta, "best_val_mse = {}", result.best_val_mse).unwrap();

    write_atomic(&opts.checkpoint_out, &ckpt_bytes)?;
    write_atomic(&opts.history_out, &history)?;
    write_atomic(&opts.metadata_out, meta.as_bytes())?;
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct PredictOptions {
    pub checkpoint: PathBuf,
    pub manifest: PathBuf,
    pub features_dir: PathBuf,
    pub out: PathBuf,
}

/// One row per (clip, axis) with the de-normalized prediction. Returns the row count.
pub fn cmd_predict(opts: &PredictOptions) -> Result<usize> {
    let ckpt = load_checkpoint(&opts.checkpoint)?;
    let entries = parse_manifest(&opts.manifest, &ckpt.scale)?;
    let index = FeatureIndex::open(&opts.features_dir)?;

    let mut mismatches = Vec::new();
    for e in &entries {
        let header = read_stack_header(index.path(&e.clip_id))?;
        if ckpt.params.check_input(header.layers, header.dims).is_err() {
            mismatches.push(format!("{} ({}x{})", e.clip_id, header.layers, header.dims));
        }
    }
    if !mismatches.is_empty() {
        return Err(AesaError::Shape(format!(
            "checkpoint expects {} layers x {} dims; mismatched clips: {}",
            ckpt.params.config.layer_count,
            ckpt.params.config.input_dim,
            mismatches.join(", ")
        )));
    }

    let mut out = format!("{PREDICTION_HEADER}\n");
    let mut rows = 0;
    for e in &entries {
        let stack = index.load(&e.clip_id)?;
        let pred = ckpt.params.forward(&stack, Mode::Eval)?;
        for axis in Axis::ALL {
            let value = ckpt.scale.denormalize(pred.clip_scores.get(axis))?;
            writeln!(
                out,
                "{},{},{},{},{}",
                e.clip_id,
                e.system_id.as_deref().unwrap_or(""),
                e.domain,
                axis,
                value
            )
            .unwrap();
            rows += 1;
        }
    }
    write_atomic(&opts.out, out.as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub clip_id: String,
    pub system_id: Option<String>,
    pub domain: Domain,
    pub axis: Axis,
    pub prediction: f64,
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected: Vec<&str> = PREDICTION_HEADER.split(',').collect();
    if headers != expected {
        return Err(AesaError::InvalidInput(format!(
            "{}: header must be `{PREDICTION_HEADER}`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| {
            AesaError::InvalidInput(format!("{}: line {line}: {what}", path.display()))
        };
        let prediction: f64 = rec[4]
            .parse()
            .map_err(|_| bad("prediction is not a number"))?;
        if !prediction.is_finite() {
            return Err(bad("non-finite prediction"));
        }
        rows.push(PredictionRow {
            clip_id: rec[0].to_string(),
            system_id: Some(rec[1].to_string()).filter(|s| !s.is_empty()),
            domain: rec[2].parse().map_err(|_| bad("unknown domain"))?,
            axis: rec[3].parse().map_err(|_| bad("unknown axis"))?,
            prediction,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub predictions: PathBuf,
    pub gold: PathBuf,
    pub level: Level,
    /// Output prefix: `<out>.txt` (table) and `<out>.csv` (delimited).
    pub out: PathBuf,
    pub scale: ScoreScale,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<(MetricReport, String)> {
    let predictions = read_predictions(&opts.predictions)?;
    let gold = parse_manifest(&opts.gold, &opts.scale)?;
    let by_id: BTreeMap<&str, &ManifestEntry> =
        gold.iter().map(|e| (e.clip_id.as_str(), e)).collect();

    let mut unmatched: Vec<&str> = predictions
        .iter()
        .map(|p| p.clip_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    unmatched.dedup();
    if !unmatched.is_empty() {
        return Err(AesaError::InvalidInput(format!(
            "predicted clip_ids missing from gold: {}",
            unmatched.join(", ")
        )));
    }

    let records: Vec<ScoredRecord> = predictions
        .iter()
        .map(|p| {
            let g = by_id[p.clip_id.as_str()];
            ScoredRecord {
                clip_id: p.clip_id.clone(),
                system_id: g.system_id.clone().or_else(|| p.system_id.clone()),
                domain: g.domain,
                axis: p.axis,
                prediction: p.prediction,
                gold: g.scores.get(p.axis),
            }
        })
        .collect();

    let scale_note = format!(
        "raw rating scale [{}, {}]",
        opts.scale.lower, opts.scale.upper
    );
    let report = evaluate_records(&records, opts.level, scale_note)?;
    let table = render_report(&report, ReportFormat::TextTable)?;
    let csv = render_report(&report, ReportFormat::Csv)?;
    write_atomic(&with_suffix(&opts.out, ".txt"), table.as_bytes())?;
    write_atomic(&with_suffix(&opts.out, ".csv"), csv.as_bytes())?;
    Ok((report, table))
}
