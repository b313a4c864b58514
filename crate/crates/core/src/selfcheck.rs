//! Built-in verification: golden renderings, normalization examples,
//! gradient checks and split determinism.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::action::{
    classify_gesture, normalize, Action, ActionType, GestureKind, Point, DEFAULT_TAP_THRESHOLD,
};
use crate::episodes::{split, split_sizes, Episode, DEFAULT_RATIOS};
use crate::fusion::{grad_check, FeatureBundle, FusionParams, GradTarget};
use crate::synth::{synthesize, SynthKind};
use crate::text::render_decision;

/// The seven reference renderings, one per line.
pub const DECISION_GOLDEN: &str = include_str!("../golden/decisions.txt");

pub const GRAD_EPS: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn point(y: f64, x: f64) -> Point {
    Point::new(y, x).expect("literal in range")
}

/// Raw inputs whose normalized renderings form the golden table, with row names.
pub fn golden_inputs() -> Vec<(&'static str, Action)> {
    vec![
        (
            "click",
            Action::dual_point(point(0.84971234, 0.59640001), point(0.84971234, 0.59640001))
                .expect("on screen"),
        ),
        (
            "scroll",
            Action::dual_point(point(0.1898, 0.4477), point(0.8242, 0.4077)).expect("on screen"),
        ),
        ("type", Action::type_text("what's the news in chile?")),
        (
            "go_back",
            Action::system(ActionType::GoBack).expect("system"),
        ),
        (
            "go_home",
            Action::system(ActionType::GoHome).expect("system"),
        ),
        ("enter", Action::system(ActionType::Enter).expect("system")),
        (
            "status_complete",
            Action::system(ActionType::StatusComplete).expect("system"),
        ),
    ]
}

fn golden_checks(golden: &str) -> Vec<CheckResult> {
    let lines: Vec<&str> = golden.lines().collect();
    let inputs = golden_inputs();
    let mut out = Vec::new();
    if lines.len() != inputs.len() {
        out.push(check(
            "golden/rows",
            false,
            format!("golden has {} rows, expected {}", lines.len(), inputs.len()),
        ));
    }
    for (i, (name, raw)) in inputs.iter().enumerate() {
        let got = render_decision(&normalize(raw)).unwrap_or_else(|e| format!("<error: {e}>"));
        let want = lines.get(i).copied().unwrap_or("<missing>");
        let ok = got == want;
        let detail = if ok {
            "byte-exact".to_string()
        } else {
            format!("rendered {got:?}, golden {want:?}")
        };
        out.push(check(format!("golden/{name}"), ok, detail));
    }
    out
}

fn normalization_checks() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let raw = Action::dual_point(point(0.1898, 0.4477), point(0.8242, 0.4077)).expect("on screen");
    let n = normalize(&raw);
    let ok = n.touch() == point(0.2, 0.5) && n.lift() == point(0.8, 0.5);
    out.push(check(
        "normalize/scroll-example",
        ok,
        format!("-> {} {}", n.touch(), n.lift()),
    ));

    let click = Action::click(0.7761, 0.7089).expect("on screen");
    let kind = classify_gesture(&click, DEFAULT_TAP_THRESHOLD);
    out.push(check(
        "normalize/click-example",
        matches!(kind, Ok(GestureKind::Click)),
        format!("classified as {kind:?}"),
    ));

    let expected = [
        (GestureKind::ScrollUp, (0.8, 0.5), (0.2, 0.5)),
        (GestureKind::ScrollDown, (0.2, 0.5), (0.8, 0.5)),
        (GestureKind::ScrollLeft, (0.5, 0.8), (0.5, 0.2)),
        (GestureKind::ScrollRight, (0.5, 0.2), (0.5, 0.8)),
    ];
    for (kind, t, l) in expected {
        let (pt, pl) = kind.scroll_pair().expect("scroll");
        let a = Action::dual_point(pt, pl).expect("on screen");
        let ok = pt == point(t.0, t.1)
            && pl == point(l.0, l.1)
            && classify_gesture(&a, DEFAULT_TAP_THRESHOLD).ok() == Some(kind)
            && normalize(&a) == a;
        out.push(check(
            format!("normalize/pair-{kind:?}").to_lowercase(),
            ok,
            format!("{pt} -> {pl}"),
        ));
    }
    out
}

fn grad_checks(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = FeatureBundle::random(&mut rng, 3, 5, 8, 6);
    let p = FusionParams::random(&mut rng, 8, 6, 1.0);
    GradTarget::ALL
        .iter()
        .map(|&t| {
            let name = format!("grad/{t:?}");
            match grad_check(t, &b, &p, GRAD_EPS) {
                Ok(e) => check(
                    name,
                    e <= GRAD_TOLERANCE,
                    format!("max rel. error {e:.3e} (limit {GRAD_TOLERANCE:.0e})"),
                ),
                Err(e) => check(name, false, e.to_string()),
            }
        })
        .collect()
}

fn split_check(seed: u64) -> CheckResult {
    let episodes = synthesize(SynthKind::Mixed, 101, 3, seed);
    let (a, b) = match (
        split(&episodes, DEFAULT_RATIOS, seed),
        split(&episodes, DEFAULT_RATIOS, seed),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return check("split/determinism", false, e.to_string()),
    };
    let ids = |v: &[Episode]| v.iter().map(|e| e.id().to_string()).collect::<Vec<_>>();
    let same = ids(&a.train) == ids(&b.train)
        && ids(&a.val) == ids(&b.val)
        && ids(&a.test) == ids(&b.test);
    let mut all: BTreeSet<String> = BTreeSet::new();
    let total = a.train.len() + a.val.len() + a.test.len();
    for part in [&a.train, &a.val, &a.test] {
        all.extend(ids(part));
    }
    let partition = all.len() == total && total == episodes.len();
    let sizes = split_sizes(episodes.len(), DEFAULT_RATIOS)
        .map(|s| s == [a.train.len(), a.val.len(), a.test.len()])
        .unwrap_or(false);
    check(
        "split/determinism",
        same && partition && sizes,
        format!(
            "sizes {}/{}/{}, repeatable {same}, partition {partition}",
            a.train.len(),
            a.val.len(),
            a.test.len()
        ),
    )
}

/// Runs every check against the given golden text.
pub fn run_selfcheck(golden: &str) -> Vec<CheckResult> {
    let mut out = golden_checks(golden);
    out.extend(normalization_checks());
    out.extend(grad_checks(2023));
    out.push(split_check(7));
    out
}
