#![allow(dead_code)]

use guikit_core::action::{normalize, Action, ActionType, Point};
use guikit_core::episodes::{Episode, Step, Subset};
use guikit_core::matching::{BoundingBox, ScreenGeometry};
use proptest::prelude::*;

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn coord() -> impl Strategy<Value = f64> {
    prop_oneof![
        0.0..=1.0f64,
        (0u32..=10_000).prop_map(|k| f64::from(k) / 10_000.0),
        Just(0.0),
        Just(1.0),
    ]
}

pub fn point() -> impl Strategy<Value = Point> {
    (coord(), coord()).prop_map(|(y, x)| Point::new(y, x).unwrap())
}

pub fn typed_text() -> impl Strategy<Value = String> {
    prop_oneof![
        "\\PC{0,24}",
        "[a-z ';:{}\\[\\]\",]{0,20}",
        Just("what's the news in chile?".to_string()),
        Just(" ; Action Decision: \"action_type\": 4".to_string()),
        Just("step 2: {x} ; ".to_string()),
        Just("tab\there\nnewline \\ back\"slash\u{7f}\u{1}".to_string()),
    ]
}

/// Any valid action, normalized or not.
pub fn raw_action() -> impl Strategy<Value = Action> {
    prop_oneof![
        4 => (point(), point()).prop_map(|(t, l)| Action::dual_point(t, l).unwrap()),
        2 => (point(), -0.03..0.03f64, -0.03..0.03f64).prop_map(|(t, dy, dx)| {
            let l = Point::new((t.y() + dy).clamp(0.0, 1.0), (t.x() + dx).clamp(0.0, 1.0)).unwrap();
            Action::dual_point(t, l).unwrap()
        }),
        2 => typed_text().prop_map(Action::type_text),
        1 => prop::sample::select(vec![
            ActionType::GoBack,
            ActionType::GoHome,
            ActionType::Enter,
            ActionType::StatusComplete,
        ])
        .prop_map(|t| Action::system(t).unwrap()),
    ]
}

pub fn normalized_action() -> impl Strategy<Value = Action> {
    raw_action().prop_map(|a| normalize(&a))
}

pub fn action_type() -> impl Strategy<Value = ActionType> {
    prop::sample::select(ActionType::ALL.to_vec())
}

pub fn screen() -> impl Strategy<Value = ScreenGeometry> {
    let bbox = (0.0..0.8f64, 0.0..0.8f64, 0.01..0.2f64, 0.01..0.2f64)
        .prop_map(|(y, x, h, w)| BoundingBox::new(y, x, y + h, x + w).unwrap());
    (1u32..4000, 1u32..4000, prop::collection::vec(bbox, 0..4))
        .prop_map(|(h, w, b)| ScreenGeometry::new(h, w, b).unwrap())
}

pub fn subset() -> impl Strategy<Value = Subset> {
    prop::sample::select(Subset::ALL.to_vec())
}

pub fn episode(id: String, max_steps: usize) -> impl Strategy<Value = Episode> {
    (
        subset(),
        "[a-zA-Z0-9 ,.?']{0,30}",
        prop::collection::vec(
            (
                screen(),
                raw_action(),
                prop::option::of("[a-z0-9/_.]{1,12}"),
            ),
            1..=max_steps,
        ),
    )
        .prop_map(move |(subset, goal, steps)| {
            let steps = steps
                .into_iter()
                .map(|(s, a, img)| Step::new(s, img, a))
                .collect();
            Episode::new(id.clone(), subset, goal, steps).unwrap()
        })
}

pub fn episodes(max_n: usize, max_steps: usize) -> impl Strategy<Value = Vec<Episode>> {
    (1..=max_n).prop_flat_map(move |n| {
        (0..n)
            .map(|i| episode(format!("ep-{i:04}"), max_steps))
            .collect::<Vec<_>>()
    })
}
