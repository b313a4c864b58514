//! Chain-of-action text format.
//!
//! Three renderings share one grammar for a single action:
//!
//! ```text
//! decision := "action_type": 4, "touch_point": [y, x], "lift_point": [y, x], "typed_text": "..."
//! plan     := [4, 10]
//! target   := Action Plan: <plan> ; Action Decision: <decision>
//! history  := step 1: {<decision>} ; step 2: {<decision>}      (empty history renders as "")
//! ```
//!
//! Rendering is canonical (double quotes, fixed key order, shortest float
//! form with at least one fractional digit). Parsing is lenient about
//! whitespace, single vs double quotes, optional braces around a decision and
//! key order. `format.md` at the repository root documents the bytes.

use std::fmt::Write as _;

use thiserror::Error;

use crate::action::{is_normalized, Action, ActionError, ActionType, Point, DEFAULT_TAP_THRESHOLD};

pub const PLAN_PREFIX: &str = "Action Plan:";
pub const DECISION_PREFIX: &str = "Action Decision:";
/// Bytes between the rendered plan and the decision section.
pub const SECTION_SEPARATOR: &str = " ; ";
/// Bytes between consecutive history entries.
pub const HISTORY_SEPARATOR: &str = " ; ";

const KEYS: [&str; 4] = ["action_type", "touch_point", "lift_point", "typed_text"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TextError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{0}` appears more than once")]
    DuplicateField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("unknown action type code {0}")]
    UnknownActionType(i64),
    #[error("malformed point for `{field}`: {detail}")]
    MalformedPoint { field: &'static str, detail: String },
    #[error("syntax error at byte {offset}: expected {expected}")]
    Syntax {
        offset: usize,
        expected: &'static str,
    },
    #[error("invalid action: {0}")]
    InvalidAction(ActionError),
    #[error("no `Action Plan:` section before the decision")]
    NoPlanSection,
    #[error("no `Action Decision:` section")]
    NoDecisionSection,
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("plan must contain at least one action type")]
    EmptyPlan,
    #[error("plan starts with {plan_head} but the decision is {decision}")]
    PlanHeadMismatch {
        plan_head: ActionType,
        decision: ActionType,
    },
    #[error("action is not normalized")]
    NotNormalized,
    #[error("malformed history: {0}")]
    MalformedHistory(String),
}

impl From<ActionError> for TextError {
    fn from(e: ActionError) -> Self {
        match e {
            ActionError::UnknownActionType(code) => TextError::UnknownActionType(code),
            other => TextError::InvalidAction(other),
        }
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn fmt_coord(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}

fn fmt_point(p: Point) -> String {
    format!("[{}, {}]", fmt_coord(p.y()), fmt_coord(p.x()))
}

/// Double-quoted string with backslash escapes for `"`, `\` and control
/// characters.
fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_decision(a: &Action) -> String {
    format!(
        "\"action_type\": {}, \"touch_point\": {}, \"lift_point\": {}, \"typed_text\": {}",
        a.action_type().code(),
        fmt_point(a.touch()),
        fmt_point(a.lift()),
        quote(a.typed_text())
    )
}

/// Renders one normalized action. Normalization is checked at
/// [`DEFAULT_TAP_THRESHOLD`].
pub fn render_decision(a: &Action) -> Result<String, TextError> {
    render_decision_with(a, DEFAULT_TAP_THRESHOLD)
}

pub fn render_decision_with(a: &Action, tap_threshold: f64) -> Result<String, TextError> {
    if !is_normalized(a, tap_threshold)? {
        return Err(TextError::NotNormalized);
    }
    Ok(write_decision(a))
}

pub fn render_plan(plan: &[ActionType]) -> String {
    let codes: Vec<String> = plan.iter().map(|t| t.code().to_string()).collect();
    format!("[{}]", codes.join(", "))
}

/// `Action Plan: [..] ; Action Decision: ..`. The plan must start with the
/// decision's own type.
pub fn render_target(plan: &[ActionType], a: &Action) -> Result<String, TextError> {
    let head = *plan.first().ok_or(TextError::EmptyPlan)?;
    if head != a.action_type() {
        return Err(TextError::PlanHeadMismatch {
            plan_head: head,
            decision: a.action_type(),
        });
    }
    let decision = render_decision(a)?;
    Ok(format!(
        "{PLAN_PREFIX} {}{SECTION_SEPARATOR}{DECISION_PREFIX} {decision}",
        render_plan(plan)
    ))
}

/// Decision-only target, used when future plans are ablated.
pub fn render_decision_target(a: &Action) -> Result<String, TextError> {
    Ok(format!("{DECISION_PREFIX} {}", render_decision(a)?))
}

/// Step-indexed history tuples. An empty history renders as the empty string.
pub fn render_history(history: &[Action]) -> String {
    history
        .iter()
        .enumerate()
        .map(|(i, a)| format!("step {}: {{{}}}", i + 1, write_decision(a)))
        .collect::<Vec<_>>()
        .join(HISTORY_SEPARATOR)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char, expected: &'static str) -> Result<(), TextError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.syntax(expected))
        }
    }

    fn syntax(&self, expected: &'static str) -> TextError {
        TextError::Syntax {
            offset: self.pos,
            expected,
        }
    }

    /// Longest run of ASCII characters matching `pred`.
    fn take_while(&mut self, pred: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && pred(bytes[self.pos]) {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn quoted(&mut self) -> Result<String, TextError> {
        let quote = match self.peek() {
            Some(q @ ('"' | '\'')) => q,
            _ => return Err(self.syntax("quoted string")),
        };
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            if c == quote {
                self.pos += i + 1;
                return Ok(out);
            }
            if c != '\\' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some((_, 'n')) => out.push('\n'),
                Some((_, 'r')) => out.push('\r'),
                Some((_, 't')) => out.push('\t'),
                Some((_, 'u')) => {
                    let tail = &self.rest()[i + 2..];
                    let parsed = tail
                        .strip_prefix('{')
                        .and_then(|t| t.find('}').map(|end| (&t[..end], end)))
                        .and_then(|(hex, end)| {
                            u32::from_str_radix(hex, 16)
                                .ok()
                                .and_then(char::from_u32)
                                .map(|c| (c, end))
                        });
                    match parsed {
                        Some((c, end)) => {
                            out.push(c);
                            // Skip `{hex}`.
                            for _ in 0..end + 2 {
                                chars.next();
                            }
                        }
                        None => out.push_str("\\u"),
                    }
                }
                Some((_, c)) if c == '"' || c == '\'' || c == '\\' => out.push(c),
                Some((_, c)) => {
                    out.push('\\');
                    out.push(c);
                }
                None => break,
            }
        }
        self.pos = self.src.len();
        Err(self.syntax("closing quote"))
    }

    fn key(&mut self) -> Result<String, TextError> {
        match self.peek() {
            Some('"' | '\'') => self.quoted(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => Ok(self
                .take_while(|b| b.is_ascii_alphanumeric() || b == b'_')
                .to_string()),
            _ => Err(self.syntax("field name")),
        }
    }

    fn integer(&mut self) -> Result<i64, TextError> {
        let start = self.pos;
        let tok = self.take_while(|b| b.is_ascii_digit() || b == b'-' || b == b'+');
        tok.parse::<i64>().map_err(|_| TextError::Syntax {
            offset: start,
            expected: "integer",
        })
    }

    fn number(&mut self) -> Option<f64> {
        let tok = self
            .take_while(|b| b.is_ascii_digit() || matches!(b, b'-' | b'+' | b'.' | b'e' | b'E'));
        tok.parse::<f64>().ok().filter(|v| v.is_finite())
    }

    fn point(&mut self, field: &'static str) -> Result<Point, TextError> {
        let malformed = |detail: &str| TextError::MalformedPoint {
            field,
            detail: detail.to_string(),
        };
        if !self.eat('[') {
            return Err(malformed("expected `[`"));
        }
        self.skip_ws();
        let y = self
            .number()
            .ok_or_else(|| malformed("expected a number"))?;
        self.skip_ws();
        if !self.eat(',') {
            return Err(malformed("expected `,` between coordinates"));
        }
        self.skip_ws();
        let x = self
            .number()
            .ok_or_else(|| malformed("expected a number"))?;
        self.skip_ws();
        if !self.eat(']') {
            return Err(malformed("expected `]` after two coordinates"));
        }
        Ok(Point::new(y, x)?)
    }

    fn plan(&mut self) -> Result<Vec<ActionType>, TextError> {
        if !self.eat('[') {
            return Err(TextError::MalformedPlan("expected `[`".into()));
        }
        let mut plan = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(']') {
                break;
            }
            if !plan.is_empty() {
                if !self.eat(',') {
                    return Err(TextError::MalformedPlan("expected `,` or `]`".into()));
                }
                self.skip_ws();
            }
            let code = self
                .integer()
                .map_err(|_| TextError::MalformedPlan("expected an action type code".into()))?;
            plan.push(ActionType::from_code(code)?);
        }
        if plan.is_empty() {
            return Err(TextError::EmptyPlan);
        }
        Ok(plan)
    }

    /// Parses a decision body. With `require_braces` the decision must be
    /// wrapped in `{}`; otherwise braces are optional.
    fn decision(&mut self, require_braces: bool) -> Result<Action, TextError> {
        self.skip_ws();
        let braced = self.eat('{');
        if require_braces && !braced {
            return Err(self.syntax("`{`"));
        }
        let mut action_type = None;
        let mut touch = None;
        let mut lift = None;
        let mut text = None;
        loop {
            self.skip_ws();
            if self.at_end() || self.peek() == Some('}') {
                break;
            }
            let key = self.key()?;
            self.skip_ws();
            self.expect(':', "`:` after field name")?;
            self.skip_ws();
            let seen = match key.as_str() {
                "action_type" => action_type.replace(self.integer()?).is_some(),
                "touch_point" => touch.replace(self.point("touch_point")?).is_some(),
                "lift_point" => lift.replace(self.point("lift_point")?).is_some(),
                "typed_text" => text.replace(self.quoted()?).is_some(),
                _ => return Err(TextError::UnknownField(key)),
            };
            if seen {
                return Err(TextError::DuplicateField(key));
            }
            self.skip_ws();
            if !self.eat(',') {
                break;
            }
        }
        self.skip_ws();
        if braced {
            self.expect('}', "`}`")?;
        }
        let code = action_type.ok_or(TextError::MissingField(KEYS[0]))?;
        let touch = touch.ok_or(TextError::MissingField(KEYS[1]))?;
        let lift = lift.ok_or(TextError::MissingField(KEYS[2]))?;
        let text = text.ok_or(TextError::MissingField(KEYS[3]))?;
        let action_type = ActionType::from_code(code)?;
        Ok(Action::new(action_type, touch, lift, text)?)
    }

    fn finish(&mut self) -> Result<(), TextError> {
        self.skip_ws();
        if self.at_end() {
            Ok(())
        } else {
            Err(self.syntax("end of input"))
        }
    }
}

/// Inverse of [`render_decision`]. Also accepts single quotes, surrounding
/// braces, extra whitespace and any key order.
pub fn parse_decision(s: &str) -> Result<Action, TextError> {
    let mut cur = Cursor::new(s);
    let a = cur.decision(false)?;
    cur.finish()?;
    Ok(a)
}

pub fn parse_plan(s: &str) -> Result<Vec<ActionType>, TextError> {
    let mut cur = Cursor::new(s);
    cur.skip_ws();
    let plan = cur.plan()?;
    cur.finish()?;
    Ok(plan)
}

/// Inverse of [`render_target`]. Leading text before `Action Plan:` is
/// skipped; a decision section that precedes the plan is a grammar error.
pub fn parse_target(s: &str) -> Result<(Vec<ActionType>, Action), TextError> {
    let plan_at = s.find(PLAN_PREFIX);
    let decision_at = s.find(DECISION_PREFIX);
    let plan_at = match (plan_at, decision_at) {
        (None, None) => return Err(TextError::NoDecisionSection),
        (None, Some(_)) => return Err(TextError::NoPlanSection),
        (Some(_), None) => return Err(TextError::NoDecisionSection),
        (Some(p), Some(d)) if d < p => return Err(TextError::NoPlanSection),
        (Some(p), Some(_)) => p,
    };
    let mut cur = Cursor::new(s);
    cur.pos = plan_at + PLAN_PREFIX.len();
    cur.skip_ws();
    let plan = cur.plan()?;
    cur.skip_ws();
    if !cur.eat(';') {
        cur.eat(',');
    }
    cur.skip_ws();
    if !cur.eat_str(DECISION_PREFIX) {
        return Err(TextError::NoDecisionSection);
    }
    let action = cur.decision(false)?;
    cur.finish()?;
    Ok((plan, action))
}

/// Best-effort parse of model output: a full target, a decision-only target,
/// or a bare decision. The plan is `None` when absent.
pub fn parse_target_lenient(s: &str) -> Result<(Option<Vec<ActionType>>, Action), TextError> {
    match parse_target(s) {
        Ok((plan, a)) => Ok((Some(plan), a)),
        Err(TextError::NoPlanSection) | Err(TextError::NoDecisionSection) => {
            let body = match s.find(DECISION_PREFIX) {
                Some(at) => &s[at + DECISION_PREFIX.len()..],
                None => s,
            };
            Ok((None, parse_decision(body)?))
        }
        Err(e) => Err(e),
    }
}

/// Inverse of [`render_history`].
pub fn parse_history(s: &str) -> Result<Vec<Action>, TextError> {
    let mut cur = Cursor::new(s);
    let mut out = Vec::new();
    cur.skip_ws();
    while !cur.at_end() {
        let expected = out.len() + 1;
        if !out.is_empty() {
            if !cur.eat(';') {
                return Err(TextError::MalformedHistory(format!(
                    "expected `;` before step {expected}"
                )));
            }
            cur.skip_ws();
        }
        if !cur.eat_str("step") {
            return Err(TextError::MalformedHistory(format!(
                "expected `step {expected}:`"
            )));
        }
        cur.skip_ws();
        let index = cur
            .integer()
            .map_err(|_| TextError::MalformedHistory(format!("expected step index {expected}")))?;
        if index != expected as i64 {
            return Err(TextError::MalformedHistory(format!(
                "step index {index} out of order, expected {expected}"
            )));
        }
        cur.skip_ws();
        cur.expect(':', "`:` after step index")?;
        out.push(cur.decision(true)?);
        cur.skip_ws();
    }
    Ok(out)
}
