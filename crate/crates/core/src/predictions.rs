//! Prediction files: one JSON object per line,
//! `{"episode_id": .., "step": .., "decision": ..}`, where `decision` is
//! either a decision/target string or a structured action record.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{normalize, Action};
use crate::episodes::ActionRecord;
use crate::text::{parse_target_lenient, render_decision};

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("episode `{episode}`: steps must run 1..={expected} without gaps")]
    NonContiguous { episode: String, expected: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecisionField {
    Text(String),
    Structured(ActionRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub episode_id: String,
    pub step: usize,
    pub decision: DecisionField,
}

impl PredictionRecord {
    /// Canonical record: the normalized action rendered as a decision string.
    pub fn new(episode_id: &str, step: usize, action: &Action) -> Self {
        let decision = render_decision(&normalize(action)).expect("normalized actions render");
        PredictionRecord {
            episode_id: episode_id.to_string(),
            step,
            decision: DecisionField::Text(decision),
        }
    }

    pub fn action(&self) -> Result<Action, String> {
        match &self.decision {
            DecisionField::Text(s) => parse_target_lenient(s)
                .map(|(_, a)| a)
                .map_err(|e| e.to_string()),
            DecisionField::Structured(r) => {
                r.to_action().map_err(|(field, e)| format!("{field}: {e}"))
            }
        }
    }
}

/// Predicted actions per episode id, in step order.
pub type Predictions = BTreeMap<String, Vec<Action>>;

/// Reads and validates a prediction file: every line must parse, each
/// `(episode_id, step)` pair must be unique, and each episode's steps must
/// be `1..=n`.
pub fn read_predictions(reader: impl BufRead) -> Result<Predictions, PredictionError> {
    let mut by_episode: BTreeMap<String, BTreeMap<usize, Action>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| PredictionError::Line {
            line: line_no,
            message,
        };
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let action = record.action().map_err(err)?;
        let steps = by_episode.entry(record.episode_id.clone()).or_default();
        if steps.insert(record.step, action).is_some() {
            return Err(err(format!(
                "duplicate prediction for episode `{}` step {}",
                record.episode_id, record.step
            )));
        }
    }
    by_episode
        .into_iter()
        .map(|(id, steps)| {
            let n = steps.len();
            if steps.keys().copied().ne(1..=n) {
                return Err(PredictionError::NonContiguous {
                    episode: id,
                    expected: n,
                });
            }
            Ok((id, steps.into_values().collect()))
        })
        .collect()
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Predictions, PredictionError> {
    read_predictions(BufReader::new(File::open(path)?))
}

pub fn write_predictions(records: &[PredictionRecord], mut w: impl Write) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionType;

    #[test]
    fn reads_text_and_structured_decisions() {
        let text = concat!(
            r#"{"episode_id":"a","step":2,"decision":{"type_code":10,"touch":[-1.0,-1.0],"lift":[-1.0,-1.0],"text":""}}"#,
            "\n",
            r#"{"episode_id":"a","step":1,"decision":"Action Plan: [4, 10] ; Action Decision: \"action_type\": 4, \"touch_point\": [0.5, 0.5], \"lift_point\": [0.5, 0.5], \"typed_text\": \"\""}"#,
            "\n"
        );
        let preds = read_predictions(text.as_bytes()).unwrap();
        assert_eq!(
            preds["a"],
            vec![
                Action::click(0.5, 0.5).unwrap(),
                Action::system(ActionType::StatusComplete).unwrap()
            ]
        );
    }

    #[test]
    fn rejects_duplicates_and_gaps() {
        let rec = |step| {
            serde_json::to_string(&PredictionRecord::new(
                "e",
                step,
                &Action::system(ActionType::GoBack).unwrap(),
            ))
            .unwrap()
        };
        let dup = format!("{}\n{}\n", rec(1), rec(1));
        assert!(matches!(
            read_predictions(dup.as_bytes()),
            Err(PredictionError::Line { line: 2, .. })
        ));
        let gap = format!("{}\n{}\n", rec(1), rec(3));
        assert!(matches!(
            read_predictions(gap.as_bytes()),
            Err(PredictionError::NonContiguous { .. })
        ));
        let bad = r#"{"episode_id":"e","step":1,"decision":"nonsense"}"#;
        assert!(read_predictions(bad.as_bytes()).is_err());
    }

    #[test]
    fn writer_output_reads_back() {
        let actions = [
            Action::type_text("hi \"there\""),
            Action::click(0.25, 0.75).unwrap(),
        ];
        let records: Vec<_> = actions
            .iter()
            .enumerate()
            .map(|(i, a)| PredictionRecord::new("x", i + 1, a))
            .collect();
        let mut buf = Vec::new();
        write_predictions(&records, &mut buf).unwrap();
        assert_eq!(
            read_predictions(buf.as_slice()).unwrap()["x"],
            actions.to_vec()
        );
    }
}
