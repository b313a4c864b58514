//! Building blocks for training and evaluating screen-level GUI agents.
//!
//! - [`action`]: action space, gesture classification, coordinate normalization.
//! - [`text`]: the decision / plan / history text format and its parser.
//! - [`matching`]: the per-screen action matching metric.
//! - [`episodes`]: episode records, JSONL I/O, splits and statistics.
//! - [`chain`]: history and plan windows for sequence-to-sequence samples.
//! - [`fusion`]: single-head attention with gated fusion, plus gradient checks.
//! - [`predictions`], [`evaluate`], [`agents`], [`config`], [`synth`] and
//!   [`selfcheck`] support the command-line harness.

pub mod action;
pub mod agents;
pub mod chain;
pub mod config;
pub mod episodes;
pub mod evaluate;
pub mod fusion;
pub mod matching;
pub mod predictions;
pub mod selfcheck;
pub mod synth;
pub mod text;

pub use action::{classify_gesture, normalize, Action, ActionType, GestureKind, Point, ScrollAxis};
pub use episodes::{Episode, Step, Subset};
pub use matching::{MatchConfig, MatchReport, ScreenGeometry};
