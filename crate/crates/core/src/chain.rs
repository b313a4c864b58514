//! Chain-of-action samples.
//!
//! For step `t` of a `k`-step episode the input carries the goal and the last
//! `min(t - 1, max_history)` executed actions; the target carries the plan of
//! action types for steps `t ..= min(t - 1 + max_plan, k)` followed by the
//! decision for step `t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{normalize, Action, ActionType};
use crate::episodes::Episode;
use crate::text::{render_decision_target, render_history, render_target, TextError};

pub const DEFAULT_MAX_HISTORY: usize = 8;
pub const DEFAULT_MAX_PLAN: usize = 4;

pub const GOAL_PREFIX: &str = "Goal: ";
pub const HISTORY_PREFIX: &str = " ; Previous Actions: ";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("max_plan must be at least 1")]
    ZeroPlan,
    #[error("episode {episode}: {got} predicted history actions for {expected} steps")]
    HistoryLength {
        episode: String,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    max_history: usize,
    max_plan: usize,
    emit_plan: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            max_history: DEFAULT_MAX_HISTORY,
            max_plan: DEFAULT_MAX_PLAN,
            emit_plan: true,
        }
    }
}

impl ChainConfig {
    pub fn new(max_history: usize, max_plan: usize) -> Result<Self, ChainError> {
        if max_plan == 0 {
            return Err(ChainError::ZeroPlan);
        }
        Ok(ChainConfig {
            max_history,
            max_plan,
            emit_plan: true,
        })
    }

    pub fn max_history(&self) -> usize {
        self.max_history
    }

    pub fn max_plan(&self) -> usize {
        self.max_plan
    }

    /// False when targets carry the decision only.
    pub fn emits_plan(&self) -> bool {
        self.emit_plan
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    NoHistory,
    NoPlan,
    Neither,
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no_history" => Ok(Ablation::NoHistory),
            "no_plan" => Ok(Ablation::NoPlan),
            "neither" => Ok(Ablation::Neither),
            other => Err(format!("unknown ablation `{other}`")),
        }
    }
}

/// Drops the history chain, the plan chain, or both.
pub fn ablate(cfg: ChainConfig, mode: Ablation) -> ChainConfig {
    let mut out = cfg;
    if matches!(mode, Ablation::NoHistory | Ablation::Neither) {
        out.max_history = 0;
    }
    if matches!(mode, Ablation::NoPlan | Ablation::Neither) {
        out.emit_plan = false;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSample {
    pub input: String,
    pub target: String,
    pub episode_id: String,
    /// 1-based step index `t`.
    pub step: usize,
}

/// `Goal: <goal> ; Previous Actions: <history>`.
pub fn render_input(goal: &str, history: &[Action]) -> String {
    format!(
        "{GOAL_PREFIX}{goal}{HISTORY_PREFIX}{}",
        render_history(history)
    )
}

/// Half-open range of step indices (0-based) visible as history at `t`
/// (1-based).
pub fn history_window(t: usize, max_history: usize) -> std::ops::Range<usize> {
    let end = t - 1;
    end.saturating_sub(max_history)..end
}

/// Half-open range of step indices (0-based) covered by the plan at `t`.
pub fn plan_window(t: usize, k: usize, max_plan: usize) -> std::ops::Range<usize> {
    let start = t - 1;
    start..(start + max_plan).min(k)
}

/// Teacher-forced samples: histories come from the gold actions.
pub fn build_samples(e: &Episode, cfg: &ChainConfig) -> Vec<ChainSample> {
    let gold: Vec<Action> = e.steps().iter().map(|s| normalize(s.gold())).collect();
    samples_with_history(e, cfg, &gold).expect("gold history has one action per step")
}

/// Closed-loop samples: the history at step `t` is the agent's own
/// predictions for steps `1 .. t`. Targets still come from gold.
pub fn build_samples_with_history(
    e: &Episode,
    cfg: &ChainConfig,
    predicted: &[Action],
) -> Result<Vec<ChainSample>, ChainError> {
    let predicted: Vec<Action> = predicted.iter().map(normalize).collect();
    samples_with_history(e, cfg, &predicted)
}

fn samples_with_history(
    e: &Episode,
    cfg: &ChainConfig,
    history: &[Action],
) -> Result<Vec<ChainSample>, ChainError> {
    let k = e.len();
    if history.len() != k {
        return Err(ChainError::HistoryLength {
            episode: e.id().to_string(),
            expected: k,
            got: history.len(),
        });
    }
    let gold: Vec<Action> = e.steps().iter().map(|s| normalize(s.gold())).collect();
    let types: Vec<ActionType> = gold.iter().map(Action::action_type).collect();
    (1..=k)
        .map(|t| {
            let input = render_input(e.goal(), &history[history_window(t, cfg.max_history)]);
            let decision = &gold[t - 1];
            let target = if cfg.emit_plan {
                render_target(&types[plan_window(t, k, cfg.max_plan)], decision)?
            } else {
                render_decision_target(decision)?
            };
            Ok(ChainSample {
                input,
                target,
                episode_id: e.id().to_string(),
                step: t,
            })
        })
        .collect()
}
