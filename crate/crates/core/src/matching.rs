//! Screen-wise action matching.
//!
//! A predicted step is correct when its action type matches the gold type and
//! its gesture matches the gold gesture:
//!
//! - clicks: touch and lift points both within `click_threshold` of the gold
//!   points, or the touch points share a detected bounding box;
//! - scrolls: same scroll axis (or same direction in strict mode);
//! - typing: typed text equal under the configured [`TextPolicy`];
//! - system actions: the type alone decides.
//!
//! An episode's matching score is the number of correct steps over the
//! episode length. Category accuracies are taken over the gold action's
//! category, except the action type accuracy which covers every step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{
    classify_gesture, Action, ActionError, ActionType, GestureKind, Point, DEFAULT_TAP_THRESHOLD,
    SCROLL_SPAN,
};
use crate::episodes::Episode;

pub const DEFAULT_CLICK_THRESHOLD: f64 = 0.14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("episode {episode} has {expected} steps but {got} predictions were given")]
    LengthMismatch {
        episode: String,
        expected: usize,
        got: usize,
    },
    #[error("cannot aggregate an empty list of reports")]
    EmptyAggregate,
    #[error("invalid match config: {0}")]
    InvalidConfig(String),
    #[error("invalid screen geometry: {0}")]
    InvalidGeometry(String),
}

/// Axis-aligned box in normalized `[y, x]` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    y_min: f64,
    x_min: f64,
    y_max: f64,
    x_max: f64,
}

impl BoundingBox {
    pub fn new(y_min: f64, x_min: f64, y_max: f64, x_max: f64) -> Result<Self, MatchError> {
        let ordered = |lo: f64, hi: f64| 0.0 <= lo && lo <= hi && hi <= 1.0;
        if !ordered(y_min, y_max) || !ordered(x_min, x_max) {
            return Err(MatchError::InvalidGeometry(format!(
                "box [{y_min}, {x_min}, {y_max}, {x_max}] must satisfy 0 <= min <= max <= 1"
            )));
        }
        Ok(BoundingBox {
            y_min,
            x_min,
            y_max,
            x_max,
        })
    }

    pub fn contains(&self, p: &Point) -> bool {
        !p.is_sentinel()
            && (self.y_min..=self.y_max).contains(&p.y())
            && (self.x_min..=self.x_max).contains(&p.x())
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = MatchError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.y_min, b.x_min, b.y_max, b.x_max]
    }
}

/// Screen size in pixels plus optional detected element boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenGeometry {
    height: u32,
    width: u32,
    boxes: Vec<BoundingBox>,
}

impl ScreenGeometry {
    pub fn new(height: u32, width: u32, boxes: Vec<BoundingBox>) -> Result<Self, MatchError> {
        if height == 0 || width == 0 {
            return Err(MatchError::InvalidGeometry(format!(
                "screen size {height}x{width} must be positive"
            )));
        }
        Ok(ScreenGeometry {
            height,
            width,
            boxes,
        })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn boxes(&self) -> &[BoundingBox] {
        &self.boxes
    }

    fn same_box(&self, a: &Point, b: &Point) -> bool {
        self.boxes.iter().any(|bx| bx.contains(a) && bx.contains(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    /// Per-axis test: both `|dy|` and `|dx|` within the threshold.
    Chebyshev,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TextPolicy {
    /// Case-insensitive after trimming surrounding whitespace.
    #[default]
    Lenient,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScrollMode {
    /// Same scroll axis counts as a match.
    #[default]
    Axis,
    /// Scroll direction must match exactly.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    /// Unweighted mean of per-report scores.
    #[default]
    Mean,
    /// Pool all steps, then divide.
    Steps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub click_threshold: f64,
    pub tap_threshold: f64,
    pub distance: DistanceMetric,
    pub text_policy: TextPolicy,
    pub scroll_mode: ScrollMode,
    pub aggregation: AggregationMode,
    /// Whether typed text has to match for a `Type` step to be correct.
    pub text_counts: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            click_threshold: DEFAULT_CLICK_THRESHOLD,
            tap_threshold: DEFAULT_TAP_THRESHOLD,
            distance: DistanceMetric::default(),
            text_policy: TextPolicy::default(),
            scroll_mode: ScrollMode::default(),
            aggregation: AggregationMode::default(),
            text_counts: true,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !self.click_threshold.is_finite() || self.click_threshold < 0.0 {
            return Err(MatchError::InvalidConfig(format!(
                "click threshold {} must be finite and non-negative",
                self.click_threshold
            )));
        }
        if !self.tap_threshold.is_finite() || !(0.0..SCROLL_SPAN).contains(&self.tap_threshold) {
            return Err(MatchError::InvalidConfig(format!(
                "tap threshold {} must lie in [0, {SCROLL_SPAN})",
                self.tap_threshold
            )));
        }
        Ok(())
    }
}

/// Which accuracy bucket a gold step feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ClickRegion,
    ScrollDirection,
    ActionTypeOnly,
    TypedText,
}

impl Category {
    pub fn of(gold: &Action, tap_threshold: f64) -> Result<Category, ActionError> {
        Ok(match gold.action_type() {
            ActionType::DualPoint => match classify_gesture(gold, tap_threshold)? {
                GestureKind::Click => Category::ClickRegion,
                _ => Category::ScrollDirection,
            },
            ActionType::Type => Category::TypedText,
            _ => Category::ActionTypeOnly,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub type_correct: bool,
    pub gesture_correct: bool,
    pub overall_correct: bool,
    pub category: Category,
}

fn text_matches(pred: &str, gold: &str, policy: TextPolicy) -> bool {
    match policy {
        TextPolicy::Strict => pred == gold,
        TextPolicy::Lenient => pred.trim().to_lowercase() == gold.trim().to_lowercase(),
    }
}

fn within(a: &Point, b: &Point, threshold: f64, metric: DistanceMetric) -> bool {
    let d = match metric {
        DistanceMetric::Euclidean => a.distance(b),
        DistanceMetric::Chebyshev => a.chebyshev_distance(b),
    };
    d <= threshold
}

/// Scores one predicted step against the gold step.
pub fn match_step(
    pred: &Action,
    gold: &Action,
    geom: &ScreenGeometry,
    cfg: &MatchConfig,
) -> Result<StepVerdict, MatchError> {
    cfg.validate()?;
    let category = Category::of(gold, cfg.tap_threshold)?;
    let type_correct = pred.action_type() == gold.action_type();
    let gesture_correct = type_correct
        && match gold.action_type() {
            ActionType::DualPoint => {
                let p = classify_gesture(pred, cfg.tap_threshold)?;
                let g = classify_gesture(gold, cfg.tap_threshold)?;
                match (p, g) {
                    (GestureKind::Click, GestureKind::Click) => {
                        let near = within(
                            &pred.touch(),
                            &gold.touch(),
                            cfg.click_threshold,
                            cfg.distance,
                        ) && within(
                            &pred.lift(),
                            &gold.lift(),
                            cfg.click_threshold,
                            cfg.distance,
                        );
                        near || geom.same_box(&pred.touch(), &gold.touch())
                    }
                    (GestureKind::Click, _) | (_, GestureKind::Click) => false,
                    (p, g) => match cfg.scroll_mode {
                        ScrollMode::Axis => p.axis() == g.axis(),
                        ScrollMode::Strict => p == g,
                    },
                }
            }
            ActionType::Type => {
                !cfg.text_counts
                    || text_matches(pred.typed_text(), gold.typed_text(), cfg.text_policy)
            }
            _ => true,
        };
    Ok(StepVerdict {
        type_correct,
        gesture_correct,
        overall_correct: type_correct && gesture_correct,
        category,
    })
}

/// Correct-over-total counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        if correct {
            self.correct += 1;
        }
    }

    fn merge(&mut self, other: &Tally) {
        self.correct += other.correct;
        self.total += other.total;
    }

    /// `None` for an empty tally.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCounts {
    /// Overall correctness over all steps.
    pub overall: Tally,
    /// Type correctness over all steps.
    pub action_type: Tally,
    pub click: Tally,
    pub scroll: Tally,
    pub text: Tally,
    pub system: Tally,
}

impl CategoryCounts {
    fn record(&mut self, v: &StepVerdict) {
        self.overall.add(v.overall_correct);
        self.action_type.add(v.type_correct);
        match v.category {
            Category::ClickRegion => self.click.add(v.overall_correct),
            Category::ScrollDirection => self.scroll.add(v.overall_correct),
            Category::TypedText => self.text.add(v.overall_correct),
            Category::ActionTypeOnly => self.system.add(v.overall_correct),
        }
    }

    fn merge(&mut self, other: &CategoryCounts) {
        self.overall.merge(&other.overall);
        self.action_type.merge(&other.action_type);
        self.click.merge(&other.click);
        self.scroll.merge(&other.scroll);
        self.text.merge(&other.text);
        self.system.merge(&other.system);
    }
}

/// Scores for one episode, or an aggregate of several reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub label: String,
    pub steps: usize,
    pub matching_score: f64,
    pub type_accuracy: f64,
    pub click_accuracy: Option<f64>,
    pub scroll_accuracy: Option<f64>,
    pub text_accuracy: Option<f64>,
    pub counts: CategoryCounts,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<StepVerdict>,
}

impl MatchReport {
    /// Builds a report from step verdicts. Fails on an empty verdict list,
    /// where the score would be undefined.
    pub fn from_verdicts(
        label: impl Into<String>,
        verdicts: Vec<StepVerdict>,
    ) -> Result<Self, MatchError> {
        if verdicts.is_empty() {
            return Err(MatchError::EmptyAggregate);
        }
        let mut counts = CategoryCounts::default();
        for v in &verdicts {
            counts.record(v);
        }
        Ok(MatchReport::from_counts(label.into(), counts, verdicts))
    }

    fn from_counts(label: String, counts: CategoryCounts, verdicts: Vec<StepVerdict>) -> Self {
        MatchReport {
            label,
            steps: counts.overall.total,
            matching_score: counts.overall.rate().unwrap_or(0.0),
            type_accuracy: counts.action_type.rate().unwrap_or(0.0),
            click_accuracy: counts.click.rate(),
            scroll_accuracy: counts.scroll.rate(),
            text_accuracy: counts.text.rate(),
            counts,
            verdicts,
        }
    }

    pub fn correct(&self) -> usize {
        self.counts.overall.correct
    }
}

/// Scores every step of an episode. `preds` must line up with the steps.
pub fn score_episode(
    preds: &[Action],
    episode: &Episode,
    cfg: &MatchConfig,
) -> Result<MatchReport, MatchError> {
    if preds.len() != episode.steps().len() {
        return Err(MatchError::LengthMismatch {
            episode: episode.id().to_string(),
            expected: episode.steps().len(),
            got: preds.len(),
        });
    }
    let verdicts = preds
        .iter()
        .zip(episode.steps())
        .map(|(p, s)| match_step(p, s.gold(), s.screen(), cfg))
        .collect::<Result<Vec<_>, _>>()?;
    MatchReport::from_verdicts(episode.id(), verdicts)
}

/// Order-independent mean: values are sorted before summing.
fn stable_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    Some(values.into_iter().sum::<f64>() / n)
}

/// Combines reports into one. `Mean` averages the per-report scores (each
/// category over the reports where it is defined); `Steps` pools the step
/// counts. Counts are always pooled. Step verdicts are concatenated in input
/// order.
pub fn aggregate(
    label: impl Into<String>,
    reports: &[MatchReport],
    mode: AggregationMode,
) -> Result<MatchReport, MatchError> {
    if reports.is_empty() {
        return Err(MatchError::EmptyAggregate);
    }
    let mut counts = CategoryCounts::default();
    let mut verdicts = Vec::new();
    for r in reports {
        counts.merge(&r.counts);
        verdicts.extend_from_slice(&r.verdicts);
    }
    let pooled = MatchReport::from_counts(label.into(), counts, verdicts);
    Ok(match mode {
        AggregationMode::Steps => pooled,
        AggregationMode::Mean => {
            let mean_of = |f: fn(&MatchReport) -> Option<f64>| {
                stable_mean(reports.iter().filter_map(f).collect())
            };
            MatchReport {
                matching_score: mean_of(|r| Some(r.matching_score)).unwrap_or(0.0),
                type_accuracy: mean_of(|r| Some(r.type_accuracy)).unwrap_or(0.0),
                click_accuracy: mean_of(|r| r.click_accuracy),
                scroll_accuracy: mean_of(|r| r.scroll_accuracy),
                text_accuracy: mean_of(|r| r.text_accuracy),
                ..pooled
            }
        }
    })
}
