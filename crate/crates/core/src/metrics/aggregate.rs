use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use crate::axis::{Axis, Domain};
use crate::error::{AesaError, Result};

/// One prediction joined with its gold score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredRecord {
    pub clip_id: String,
    pub system_id: Option<String>,
    pub domain: Domain,
    pub axis: Axis,
    pub prediction: f64,
    pub gold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Level {
    Utterance,
    System,
}

impl FromStr for Level {
    type Err = AesaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "utterance" | "utt" => Ok(Level::Utterance),
            "system" | "sys" => Ok(Level::System),
            other => Err(AesaError::InvalidInput(format!("unknown level `{other}`"))),
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level::Utterance => "utterance",
            Level::System => "system",
        })
    }
}

/// Averaged predictions and golds for one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateGroup {
    /// clip_id at utterance level, system_id at system level.
    pub key: String,
    pub domain: Domain,
    pub axis: Axis,
    pub prediction: f64,
    pub gold: f64,
    pub count: usize,
}

/// Utterance level is the identity grouping; system level averages predictions
/// and golds per `(system_id, domain, axis)`. Groups keep first-seen order.
pub fn aggregate(records: &[ScoredRecord], level: Level) -> Result<Vec<AggregateGroup>> {
    if records.is_empty() {
        return Err(AesaError::InvalidInput("no records to aggregate".into()));
    }
    match level {
        Level::Utterance => Ok(records
            .iter()
            .map(|r| AggregateGroup {
                key: r.clip_id.clone(),
                domain: r.domain,
                axis: r.axis,
                prediction: r.prediction,
                gold: r.gold,
                count: 1,
            })
            .collect()),
        Level::System => {
            let mut slots: BTreeMap<(String, Domain, Axis), usize> = BTreeMap::new();
            let mut groups: Vec<(AggregateGroup, f64, f64)> = Vec::new();
            for r in records {
                let system = r.system_id.clone().ok_or_else(|| {
                    AesaError::InvalidInput(format!(
                        "clip `{}` has no system_id for system-level aggregation",
                        r.clip_id
                    ))
                })?;
                let slot = *slots
                    .entry((system.clone(), r.domain, r.axis))
                    .or_insert_with(|| {
                        groups.push((
                            AggregateGroup {
                                key: system,
                                domain: r.domain,
                                axis: r.axis,
                                prediction: 0.0,
                                gold: 0.0,
                                count: 0,
                            },
                            0.0,
                            0.0,
                        ));
                        groups.len() - 1
                    });
                let (group, pred_sum, gold_sum) = &mut groups[slot];
                group.count += 1;
                *pred_sum += r.prediction;
                *gold_sum += r.gold;
            }
            Ok(groups
                .into_iter()
                .map(|(mut g, p, y)| {
                    g.prediction = p / g.count as f64;
                    g.gold = y / g.count as f64;
                    g
                })
                .collect())
        }
    }
}
