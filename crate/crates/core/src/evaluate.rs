//! Scoring a whole prediction set and exporting the result.
//!
//! Episodes are scored independently (optionally on several threads). Each
//! subset pools its screens; the overall score combines subsets with the
//! configured [`AggregationMode`], which by default is the plain mean over
//! subsets.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episodes::{Episode, Subset};
use crate::matching::{
    aggregate, score_episode, AggregationMode, MatchConfig, MatchError, MatchReport,
};
use crate::predictions::Predictions;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error("predictions reference unknown episode `{0}`")]
    UnknownEpisode(String),
    #[error("no episodes to score")]
    NoEpisodes,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub overall: MatchReport,
    pub subsets: Vec<MatchReport>,
    pub episodes: Vec<MatchReport>,
}

fn score_one(
    e: &Episode,
    preds: &Predictions,
    cfg: &MatchConfig,
) -> Result<MatchReport, MatchError> {
    let empty = Vec::new();
    let p = preds.get(e.id()).unwrap_or(&empty);
    score_episode(p, e, cfg)
}

/// Scores every episode against its predictions. A missing episode in
/// `preds` is a length mismatch; predictions for unknown episodes are an
/// error. `workers` bounds the number of scoring threads (1 = inline).
pub fn score_all(
    episodes: &[Episode],
    preds: &Predictions,
    cfg: &MatchConfig,
    workers: usize,
) -> Result<ScoreSummary, EvaluateError> {
    if episodes.is_empty() {
        return Err(EvaluateError::NoEpisodes);
    }
    cfg.validate()?;
    let known: BTreeSet<&str> = episodes.iter().map(Episode::id).collect();
    if let Some(id) = preds.keys().find(|id| !known.contains(id.as_str())) {
        return Err(EvaluateError::UnknownEpisode(id.clone()));
    }

    let workers = workers.clamp(1, episodes.len());
    let reports: Vec<MatchReport> = if workers == 1 {
        episodes
            .iter()
            .map(|e| score_one(e, preds, cfg))
            .collect::<Result<_, _>>()?
    } else {
        let chunk = episodes.len().div_ceil(workers);
        thread::scope(|s| {
            let handles: Vec<_> = episodes
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        part.iter()
                            .map(|e| score_one(e, preds, cfg))
                            .collect::<Result<Vec<_>, _>>()
                    })
                })
                .collect();
            let mut out = Vec::with_capacity(episodes.len());
            for h in handles {
                out.extend(h.join().expect("scoring thread panicked")?);
            }
            Ok::<_, MatchError>(out)
        })?
    };

    let mut by_subset: BTreeMap<Subset, Vec<MatchReport>> = BTreeMap::new();
    for (e, r) in episodes.iter().zip(&reports) {
        by_subset.entry(e.subset()).or_default().push(r.clone());
    }
    let subsets = by_subset
        .into_iter()
        .map(|(s, rs)| {
            let mut r = aggregate(s.name(), &rs, AggregationMode::Steps)?;
            r.verdicts.clear();
            Ok(r)
        })
        .collect::<Result<Vec<_>, MatchError>>()?;
    let mut overall = aggregate("overall", &subsets, cfg.aggregation)?;
    overall.verdicts.clear();
    Ok(ScoreSummary {
        overall,
        subsets,
        episodes: reports,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    level: &'static str,
    label: &'a str,
    steps: usize,
    correct: usize,
    matching_score: f64,
    type_accuracy: f64,
    click_accuracy: Option<f64>,
    click_steps: usize,
    scroll_accuracy: Option<f64>,
    scroll_steps: usize,
    text_accuracy: Option<f64>,
    text_steps: usize,
}

impl<'a> CsvRow<'a> {
    fn new(level: &'static str, r: &'a MatchReport) -> Self {
        CsvRow {
            level,
            label: &r.label,
            steps: r.steps,
            correct: r.correct(),
            matching_score: r.matching_score,
            type_accuracy: r.type_accuracy,
            click_accuracy: r.click_accuracy,
            click_steps: r.counts.click.total,
            scroll_accuracy: r.scroll_accuracy,
            scroll_steps: r.counts.scroll.total,
            text_accuracy: r.text_accuracy,
            text_steps: r.counts.text.total,
        }
    }
}

impl ScoreSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One row per episode, then per subset, then the overall row. Undefined
    /// category accuracies are empty cells.
    pub fn write_csv(&self, w: impl io::Write) -> Result<(), EvaluateError> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.episodes {
            out.serialize(CsvRow::new("episode", r))?;
        }
        for r in &self.subsets {
            out.serialize(CsvRow::new("subset", r))?;
        }
        out.serialize(CsvRow::new("overall", &self.overall))?;
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}
