//! Seeded synthetic episodes for tests, fixtures and benchmarks.
//!
//! Gold actions are written raw (clicks jitter slightly, scrolls have
//! arbitrary endpoints) so that loaders and scorers see unnormalized input.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{Action, ActionType, Point};
use crate::episodes::{Episode, Step, Subset};
use crate::matching::{BoundingBox, ScreenGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Every action type, ending in `StatusComplete`.
    Mixed,
    ClickOnly,
    ScrollOnly,
}

impl FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mixed" => Ok(SynthKind::Mixed),
            "clicks" => Ok(SynthKind::ClickOnly),
            "scrolls" => Ok(SynthKind::ScrollOnly),
            _ => Err(format!(
                "unknown kind `{s}` (expected mixed, clicks, scrolls)"
            )),
        }
    }
}

const GOALS: [&str; 6] = [
    "open the settings app",
    "search for hotels in paris",
    "install the weather app",
    "what's the news in chile?",
    "add a banana to the cart",
    "turn on dark mode",
];

const TEXTS: [&str; 5] = [
    "hotels in paris",
    "Weather",
    "banana",
    "what's the news in chile?",
    "dark mode",
];

/// Boxes are at most 0.25 on a side, so two points more than 0.25 apart
/// on either axis never share one.
fn screen(rng: &mut impl Rng) -> ScreenGeometry {
    let n = rng.gen_range(0..4);
    let boxes = (0..n)
        .map(|_| {
            let (h, w) = (rng.gen_range(0.05..0.25), rng.gen_range(0.05..0.25));
            let (y, x) = (rng.gen_range(0.0..1.0 - h), rng.gen_range(0.0..1.0 - w));
            BoundingBox::new(y, x, y + h, x + w).expect("box inside the screen")
        })
        .collect();
    ScreenGeometry::new(2400, 1080, boxes).expect("fixed positive size")
}

fn click(rng: &mut impl Rng) -> Action {
    let (y, x) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
    let (ly, lx) = (
        y + rng.gen_range(-0.01..0.01),
        x + rng.gen_range(-0.01..0.01),
    );
    let lift = Point::new(ly, lx).expect("jitter stays on screen");
    Action::dual_point(Point::new(y, x).expect("in range"), lift).expect("on screen")
}

fn scroll(rng: &mut impl Rng) -> Action {
    let (a, b) = (rng.gen_range(0.05..0.45), rng.gen_range(0.55..0.95));
    let (from, to) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
    let cross = rng.gen_range(0.3..0.7);
    let drift = rng.gen_range(-0.05..0.05);
    let (touch, lift) = if rng.gen_bool(0.5) {
        ((from, cross), (to, cross + drift))
    } else {
        ((cross, from), (cross + drift, to))
    };
    Action::dual_point(
        Point::new(touch.0, touch.1).expect("in range"),
        Point::new(lift.0, lift.1).expect("in range"),
    )
    .expect("on screen")
}

fn mixed_step(rng: &mut impl Rng) -> Action {
    match rng.gen_range(0..10) {
        0..=3 => click(rng),
        4 | 5 => scroll(rng),
        6 => Action::type_text(*TEXTS.choose(rng).expect("non-empty")),
        7 => Action::system(ActionType::GoBack).expect("system"),
        8 => Action::system(ActionType::GoHome).expect("system"),
        _ => Action::system(ActionType::Enter).expect("system"),
    }
}

/// `n` episodes of 1..=`max_steps` steps, cycling through the subsets.
/// Identical arguments give identical episodes.
pub fn synthesize(kind: SynthKind, n: usize, max_steps: usize, seed: u64) -> Vec<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_steps = max_steps.max(1);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..=max_steps);
            let steps = (0..len)
                .map(|t| {
                    let gold = match kind {
                        SynthKind::ClickOnly => click(&mut rng),
                        SynthKind::ScrollOnly => scroll(&mut rng),
                        SynthKind::Mixed if t + 1 == len => {
                            Action::system(ActionType::StatusComplete).expect("system")
                        }
                        SynthKind::Mixed => mixed_step(&mut rng),
                    };
                    Step::new(screen(&mut rng), None, gold)
                })
                .collect();
            let subset = Subset::ALL[i % Subset::ALL.len()];
            let goal = GOALS.choose(&mut rng).expect("non-empty");
            Episode::new(format!("synth-{seed}-{i:05}"), subset, *goal, steps)
                .expect("at least one step")
        })
        .collect()
}
