//! Action space for screen-level device control.
//!
//! An [`Action`] is one agent step: an [`ActionType`], a touch point, a lift
//! point and typed text. Points use `[y, x]` order and normalized screen
//! fractions. System actions (and `Type`) carry the sentinel point
//! `[-1.0, -1.0]`.
//!
//! Dual-point gestures encode both clicks and scrolls. [`classify_gesture`]
//! tells them apart and [`normalize`] rewrites them into the compact target
//! form: clicks rounded to four decimals, scrolls snapped to one of four fixed
//! directional point pairs.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default distance (normalized screen units) under which a dual-point
/// gesture counts as a click.
pub const DEFAULT_TAP_THRESHOLD: f64 = 0.04;

/// Length of every normalized scroll pair. Tap thresholds must stay below it,
/// otherwise a normalized scroll would classify as a click.
pub const SCROLL_SPAN: f64 = 0.6;

/// Sentinel coordinate used by non-gesture actions.
pub const SENTINEL: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("expected a dual-point gesture, got {0}")]
    InvalidActionKind(ActionType),
    #[error("invalid coordinates [{y}, {x}]: {reason}")]
    InvalidCoordinates {
        y: f64,
        x: f64,
        reason: &'static str,
    },
    #[error("unknown action type code {0}")]
    UnknownActionType(i64),
    #[error("{0}")]
    InvariantViolation(String),
    #[error("tap threshold {0} must be finite and in [0, {SCROLL_SPAN})")]
    InvalidThreshold(f64),
}

/// The six action types, with their numeric wire codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum ActionType {
    DualPoint,
    Type,
    GoBack,
    GoHome,
    Enter,
    StatusComplete,
}

impl ActionType {
    pub const ALL: [ActionType; 6] = [
        ActionType::DualPoint,
        ActionType::Type,
        ActionType::GoBack,
        ActionType::GoHome,
        ActionType::Enter,
        ActionType::StatusComplete,
    ];

    pub fn code(self) -> u8 {
        match self {
            ActionType::Type => 3,
            ActionType::DualPoint => 4,
            ActionType::GoBack => 5,
            ActionType::GoHome => 6,
            ActionType::Enter => 7,
            ActionType::StatusComplete => 10,
        }
    }

    pub fn from_code(code: i64) -> Result<Self, ActionError> {
        match code {
            3 => Ok(ActionType::Type),
            4 => Ok(ActionType::DualPoint),
            5 => Ok(ActionType::GoBack),
            6 => Ok(ActionType::GoHome),
            7 => Ok(ActionType::Enter),
            10 => Ok(ActionType::StatusComplete),
            other => Err(ActionError::UnknownActionType(other)),
        }
    }

    /// `GoBack`, `GoHome`, `Enter` and `StatusComplete`.
    pub fn is_system(self) -> bool {
        !matches!(self, ActionType::DualPoint | ActionType::Type)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionType::DualPoint => "dual_point",
            ActionType::Type => "type",
            ActionType::GoBack => "go_back",
            ActionType::GoHome => "go_home",
            ActionType::Enter => "enter",
            ActionType::StatusComplete => "status_complete",
        }
    }
}

impl fmt::Display for ActionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<i64> for ActionType {
    type Error = ActionError;

    fn try_from(code: i64) -> Result<Self, Self::Error> {
        ActionType::from_code(code)
    }
}

impl From<ActionType> for i64 {
    fn from(t: ActionType) -> i64 {
        i64::from(t.code())
    }
}

/// A screen location as `[y, x]` fractions, or the `[-1, -1]` sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    y: f64,
    x: f64,
}

impl Point {
    pub const SENTINEL: Point = Point {
        y: SENTINEL,
        x: SENTINEL,
    };

    /// Accepts both coordinates in `[0, 1]`, or both exactly `-1.0`.
    pub fn new(y: f64, x: f64) -> Result<Self, ActionError> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if y == SENTINEL && x == SENTINEL {
            return Ok(Point::SENTINEL);
        }
        if !y.is_finite() || !x.is_finite() {
            return Err(ActionError::InvalidCoordinates {
                y,
                x,
                reason: "coordinates must be finite",
            });
        }
        if y == SENTINEL || x == SENTINEL {
            return Err(ActionError::InvalidCoordinates {
                y,
                x,
                reason: "sentinel must cover both coordinates",
            });
        }
        if !in_unit(y) || !in_unit(x) {
            return Err(ActionError::InvalidCoordinates {
                y,
                x,
                reason: "coordinates must lie in [0, 1]",
            });
        }
        // Normalize -0.0 so equality and rendering agree.
        Ok(Point {
            y: y + 0.0,
            x: x + 0.0,
        })
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn is_sentinel(&self) -> bool {
        *self == Point::SENTINEL
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.y - other.y).hypot(self.x - other.x)
    }

    pub fn chebyshev_distance(&self, other: &Point) -> f64 {
        (self.y - other.y).abs().max((self.x - other.x).abs())
    }

    fn rounded(&self) -> Point {
        if self.is_sentinel() {
            return *self;
        }
        Point {
            y: round4(self.y),
            x: round4(self.x),
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.y, self.x)
    }
}

/// Rounds half away from zero to four decimal places.
pub fn round4(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0 + 0.0
}

/// One agent step. Construction validates the per-type invariants, so every
/// `Action` value in the program is well formed.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    action_type: ActionType,
    touch: Point,
    lift: Point,
    typed_text: String,
}

impl Action {
    pub fn new(
        action_type: ActionType,
        touch: Point,
        lift: Point,
        typed_text: impl Into<String>,
    ) -> Result<Self, ActionError> {
        let typed_text = typed_text.into();
        match action_type {
            ActionType::DualPoint => {
                if touch.is_sentinel() || lift.is_sentinel() {
                    return Err(ActionError::InvalidCoordinates {
                        y: SENTINEL,
                        x: SENTINEL,
                        reason: "dual-point gestures need on-screen points",
                    });
                }
                if !typed_text.is_empty() {
                    return Err(ActionError::InvariantViolation(
                        "dual-point gesture must not carry typed text".into(),
                    ));
                }
            }
            ActionType::Type => {
                if !touch.is_sentinel() || !lift.is_sentinel() {
                    return Err(ActionError::InvariantViolation(
                        "type action must use sentinel points".into(),
                    ));
                }
            }
            other => {
                if !touch.is_sentinel() || !lift.is_sentinel() {
                    return Err(ActionError::InvariantViolation(format!(
                        "{other} action must use sentinel points"
                    )));
                }
                if !typed_text.is_empty() {
                    return Err(ActionError::InvariantViolation(format!(
                        "{other} action must not carry typed text"
                    )));
                }
            }
        }
        Ok(Action {
            action_type,
            touch,
            lift,
            typed_text,
        })
    }

    pub fn dual_point(touch: Point, lift: Point) -> Result<Self, ActionError> {
        Action::new(ActionType::DualPoint, touch, lift, "")
    }

    pub fn click(y: f64, x: f64) -> Result<Self, ActionError> {
        let p = Point::new(y, x)?;
        Action::dual_point(p, p)
    }

    pub fn type_text(text: impl Into<String>) -> Self {
        Action {
            action_type: ActionType::Type,
            touch: Point::SENTINEL,
            lift: Point::SENTINEL,
            typed_text: text.into(),
        }
    }

    /// A system action (`GoBack`, `GoHome`, `Enter`, `StatusComplete`).
    pub fn system(action_type: ActionType) -> Result<Self, ActionError> {
        Action::new(action_type, Point::SENTINEL, Point::SENTINEL, "")
    }

    /// The canonical action for a type: system actions and empty `Type` use
    /// sentinels, `DualPoint` clicks the screen centre.
    pub fn default_for(action_type: ActionType) -> Self {
        match action_type {
            ActionType::DualPoint => {
                let centre = Point { y: 0.5, x: 0.5 };
                Action {
                    action_type,
                    touch: centre,
                    lift: centre,
                    typed_text: String::new(),
                }
            }
            other => Action {
                action_type: other,
                touch: Point::SENTINEL,
                lift: Point::SENTINEL,
                typed_text: String::new(),
            },
        }
    }

    pub fn action_type(&self) -> ActionType {
        self.action_type
    }

    pub fn touch(&self) -> Point {
        self.touch
    }

    pub fn lift(&self) -> Point {
        self.lift
    }

    pub fn typed_text(&self) -> &str {
        &self.typed_text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GestureKind {
    Click,
    ScrollUp,
    ScrollDown,
    ScrollLeft,
    ScrollRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScrollAxis {
    Vertical,
    Horizontal,
}

impl GestureKind {
    pub fn axis(self) -> Option<ScrollAxis> {
        match self {
            GestureKind::Click => None,
            GestureKind::ScrollUp | GestureKind::ScrollDown => Some(ScrollAxis::Vertical),
            GestureKind::ScrollLeft | GestureKind::ScrollRight => Some(ScrollAxis::Horizontal),
        }
    }

    pub fn is_scroll(self) -> bool {
        self != GestureKind::Click
    }

    /// The same-axis opposite direction. Clicks map to themselves.
    pub fn reversed(self) -> GestureKind {
        match self {
            GestureKind::Click => GestureKind::Click,
            GestureKind::ScrollUp => GestureKind::ScrollDown,
            GestureKind::ScrollDown => GestureKind::ScrollUp,
            GestureKind::ScrollLeft => GestureKind::ScrollRight,
            GestureKind::ScrollRight => GestureKind::ScrollLeft,
        }
    }

    /// Fixed `(touch, lift)` pair for a scroll direction.
    pub fn scroll_pair(self) -> Option<(Point, Point)> {
        let p = |y, x| Point { y, x };
        match self {
            GestureKind::Click => None,
            GestureKind::ScrollUp => Some((p(0.8, 0.5), p(0.2, 0.5))),
            GestureKind::ScrollDown => Some((p(0.2, 0.5), p(0.8, 0.5))),
            GestureKind::ScrollLeft => Some((p(0.5, 0.8), p(0.5, 0.2))),
            GestureKind::ScrollRight => Some((p(0.5, 0.2), p(0.5, 0.8))),
        }
    }

    pub const SCROLLS: [GestureKind; 4] = [
        GestureKind::ScrollUp,
        GestureKind::ScrollDown,
        GestureKind::ScrollLeft,
        GestureKind::ScrollRight,
    ];
}

fn check_tap_threshold(tap_threshold: f64) -> Result<(), ActionError> {
    if tap_threshold.is_finite() && (0.0..SCROLL_SPAN).contains(&tap_threshold) {
        Ok(())
    } else {
        Err(ActionError::InvalidThreshold(tap_threshold))
    }
}

/// Click if the touch and lift points are within `tap_threshold` of each
/// other, otherwise a scroll along the dominant axis of `lift - touch`.
/// Ties between the axes resolve to vertical.
pub fn classify_gesture(a: &Action, tap_threshold: f64) -> Result<GestureKind, ActionError> {
    if a.action_type != ActionType::DualPoint {
        return Err(ActionError::InvalidActionKind(a.action_type));
    }
    if !tap_threshold.is_finite() || tap_threshold < 0.0 {
        return Err(ActionError::InvalidThreshold(tap_threshold));
    }
    Ok(classify_points(&a.touch, &a.lift, tap_threshold))
}

fn classify_points(touch: &Point, lift: &Point, tap_threshold: f64) -> GestureKind {
    if touch.distance(lift) <= tap_threshold {
        return GestureKind::Click;
    }
    let dy = lift.y - touch.y;
    let dx = lift.x - touch.x;
    if dy.abs() >= dx.abs() {
        if dy > 0.0 {
            GestureKind::ScrollDown
        } else {
            GestureKind::ScrollUp
        }
    } else if dx > 0.0 {
        GestureKind::ScrollRight
    } else {
        GestureKind::ScrollLeft
    }
}

/// [`normalize_with`] at [`DEFAULT_TAP_THRESHOLD`].
pub fn normalize(a: &Action) -> Action {
    normalize_with(a, DEFAULT_TAP_THRESHOLD).expect("default tap threshold is valid")
}

/// Rewrites a gesture into target form. Clicks keep four decimals, scrolls
/// become the fixed pair for their direction, anything else is returned as is.
///
/// If rounding would push a click's two points past `tap_threshold`, the lift
/// point collapses onto the rounded touch point so the result is still a
/// click.
pub fn normalize_with(a: &Action, tap_threshold: f64) -> Result<Action, ActionError> {
    check_tap_threshold(tap_threshold)?;
    if a.action_type != ActionType::DualPoint {
        return Ok(a.clone());
    }
    let kind = classify_points(&a.touch, &a.lift, tap_threshold);
    let (touch, lift) = match kind.scroll_pair() {
        Some(pair) => pair,
        None => {
            let touch = a.touch.rounded();
            let lift = a.lift.rounded();
            if touch.distance(&lift) <= tap_threshold {
                (touch, lift)
            } else {
                (touch, touch)
            }
        }
    };
    Ok(Action {
        action_type: ActionType::DualPoint,
        touch,
        lift,
        typed_text: String::new(),
    })
}

/// True when `normalize_with(a, tap_threshold)` would leave `a` unchanged.
pub fn is_normalized(a: &Action, tap_threshold: f64) -> Result<bool, ActionError> {
    Ok(normalize_with(a, tap_threshold)? == *a)
}
