//! Manifest ingestion, rating-scale normalization, and train/validation splits.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::axis::{AestheticScores, Axis, Domain};
use crate::error::{AesaError, ManifestError, Result};
use crate::rng::{stream_rng, STREAM_SPLIT};

pub const MANIFEST_COLUMNS: [&str; 9] = [
    "clip_id",
    "path",
    "domain",
    "system_id",
    "split",
    "pq",
    "pc",
    "ce",
    "cu",
];

/// Rating-scale endpoints for the affine map onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreScale {
    pub lower: f64,
    pub upper: f64,
}

impl Default for ScoreScale {
    fn default() -> Self {
        Self {
            lower: 1.0,
            upper: 10.0,
        }
    }
}

impl ScoreScale {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(AesaError::Config(format!(
                "invalid score scale [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, raw: f64) -> bool {
        raw >= self.lower && raw <= self.upper
    }

    pub fn span(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn normalize(&self, raw: f64) -> Result<f64> {
        if !self.contains(raw) {
            return Err(AesaError::InvalidInput(format!(
                "score {raw} outside [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok((raw - self.lower) / self.span())
    }

    pub fn denormalize(&self, normalized: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&normalized) {
            return Err(AesaError::InvalidInput(format!(
                "normalized score {normalized} outside [0, 1]"
            )));
        }
        Ok(self.lower + normalized * self.span())
    }
}

pub fn normalize_score(raw: f64, scale: &ScoreScale) -> Result<f64> {
    scale.normalize(raw)
}

pub fn denormalize_score(normalized: f64, scale: &ScoreScale) -> Result<f64> {
    scale.denormalize(normalized)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub clip_id: String,
    pub path: String,
    pub domain: Domain,
    pub system_id: Option<String>,
    pub split: String,
    /// Mean listener score per axis, on the raw rating scale.
    pub scores: AestheticScores,
}

impl ManifestEntry {
    /// Per-axis targets mapped onto `[0, 1]`.
    pub fn normalized_targets(&self, scale: &ScoreScale) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for axis in Axis::ALL {
            out[axis.index()] = scale.normalize(self.scores.get(axis))?;
        }
        Ok(out)
    }
}

pub fn parse_manifest(path: impl AsRef<Path>, scale: &ScoreScale) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| AesaError::io(path, e))?;
    parse_manifest_reader(file, scale)
}

/// Parse a manifest with header `clip_id,path,domain,system_id,split,pq,pc,ce,cu`.
/// Columns may appear in any order; extra columns are ignored.
pub fn parse_manifest_reader<R: Read>(reader: R, scale: &ScoreScale) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = BTreeMap::new();
    for name in MANIFEST_COLUMNS {
        let pos = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| ManifestError::MissingColumn(name.to_string()))?;
        index.insert(name, pos);
    }

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |name: &str| record.get(index[name]).unwrap_or("").to_string();

        let clip_id = field("clip_id");
        if clip_id.is_empty() {
            return Err(ManifestError::Malformed {
                line,
                message: "empty clip_id".into(),
            }
            .into());
        }
        let domain_text = field("domain");
        let domain: Domain = domain_text
            .parse()
            .map_err(|_| ManifestError::UnknownDomain {
                line,
                domain: domain_text.clone(),
            })?;

        let mut scores = [0.0; 4];
        for axis in Axis::ALL {
            let column = axis.as_str().to_ascii_lowercase();
            let text = field(&column);
            let value: f64 = text.parse().map_err(|_| ManifestError::Malformed {
                line,
                message: format!("{axis} score `{text}` is not a number"),
            })?;
            if !value.is_finite() || !scale.contains(value) {
                return Err(ManifestError::OutOfRange {
                    line,
                    axis: axis.to_string(),
                    value,
                    lower: scale.lower,
                    upper: scale.upper,
                }
                .into());
            }
            scores[axis.index()] = value;
        }

        if !seen.insert(clip_id.clone()) {
            return Err(ManifestError::DuplicateId { line, clip_id }.into());
        }
        let system_id = Some(field("system_id")).filter(|s| !s.is_empty());
        entries.push(ManifestEntry {
            clip_id,
            path: field("path"),
            domain,
            system_id,
            split: field("split"),
            scores: AestheticScores(scores),
        });
    }
    Ok(entries)
}

/// Seeded, domain-stratified split. Validation slots are shared out across
/// domains in proportion to their size (largest remainder); both halves keep
/// manifest order.
pub fn split_train_val(
    entries: &[ManifestEntry],
    val_count: usize,
    seed: u64,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>)> {
    if val_count >= entries.len() && !(val_count == 0 && entries.is_empty()) {
        return Err(AesaError::InvalidInput(format!(
            "val_count {val_count} must be below the {} entries",
            entries.len()
        )));
    }
    let mut by_domain: BTreeMap<Domain, Vec<usize>> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        by_domain.entry(e.domain).or_default().push(i);
    }

    let total = entries.len() as f64;
    let mut quotas: Vec<(Domain, usize, f64)> = by_domain
        .iter()
        .map(|(d, idx)| {
            let exact = val_count as f64 * idx.len() as f64 / total;
            (*d, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    for &k in order.iter().take(val_count - assigned) {
        quotas[k].1 += 1;
    }

    let mut rng = stream_rng(seed, STREAM_SPLIT);
    let mut is_val = vec![false; entries.len()];
    for (domain, quota, _) in quotas {
        let mut idx = by_domain[&domain].clone();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(quota) {
            is_val[i] = true;
        }
    }
    let (val, train): (Vec<_>, Vec<_>) = entries.iter().cloned().zip(is_val).partition(|(_, v)| *v);
    Ok((
        train.into_iter().map(|(e, _)| e).collect(),
        val.into_iter().map(|(e, _)| e).collect(),
    ))
}
