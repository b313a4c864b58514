//! Deterministic fixture agents for exercising the metric.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::{
    classify_gesture, normalize, Action, ActionType, GestureKind, Point, DEFAULT_TAP_THRESHOLD,
};
use crate::episodes::Episode;
use crate::predictions::PredictionRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixtureAgent {
    /// Replays the normalized gold actions.
    Oracle,
    /// Gold actions, with each click shifted by `radius` along both axes
    /// (random sign per axis, same shift for touch and lift).
    PerturbedOracle(f64),
    /// Gold actions, with each scroll reversed on its own axis.
    AxisFlipper,
    /// The same action type at every step.
    ConstantAction(ActionType),
}

impl fmt::Display for FixtureAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixtureAgent::Oracle => f.write_str("oracle"),
            FixtureAgent::PerturbedOracle(r) => write!(f, "perturbed:{r}"),
            FixtureAgent::AxisFlipper => f.write_str("axis-flipper"),
            FixtureAgent::ConstantAction(t) => write!(f, "constant:{t}"),
        }
    }
}

impl FromStr for FixtureAgent {
    type Err = String;

    /// `oracle`, `perturbed:<radius>`, `axis-flipper`, or
    /// `constant:<code or name>` (e.g. `constant:6`, `constant:go_home`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("oracle", None) => Ok(FixtureAgent::Oracle),
            ("axis-flipper", None) => Ok(FixtureAgent::AxisFlipper),
            ("perturbed", Some(r)) => {
                let r: f64 = r.parse().map_err(|_| format!("bad radius `{r}`"))?;
                if !(0.0..=1.0).contains(&r) {
                    return Err(format!("radius {r} must lie in [0, 1]"));
                }
                Ok(FixtureAgent::PerturbedOracle(r))
            }
            ("constant", Some(t)) => {
                let by_code = t
                    .parse::<i64>()
                    .ok()
                    .and_then(|c| ActionType::from_code(c).ok());
                by_code
                    .or_else(|| ActionType::ALL.into_iter().find(|a| a.name() == t))
                    .map(FixtureAgent::ConstantAction)
                    .ok_or_else(|| format!("unknown action type `{t}`"))
            }
            _ => Err(format!(
                "unknown agent `{s}` (expected oracle, perturbed:<r>, axis-flipper, constant:<type>)"
            )),
        }
    }
}

/// FNV-1a, so per-episode streams do not depend on std's hasher.
fn episode_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed
}

/// Picks `+radius` or `-radius` for one axis so both coordinates stay on
/// screen, preferring the random sign. Clamps if neither fits.
fn shift_axis(rng: &mut impl Rng, a: f64, b: f64, radius: f64) -> (f64, f64) {
    let first = if rng.gen_bool(0.5) { radius } else { -radius };
    let fits = |d: f64| (0.0..=1.0).contains(&(a + d)) && (0.0..=1.0).contains(&(b + d));
    if fits(first) {
        (a + first, b + first)
    } else if fits(-first) {
        (a - first, b - first)
    } else {
        ((a + first).clamp(0.0, 1.0), (b + first).clamp(0.0, 1.0))
    }
}

fn perturb_click(rng: &mut impl Rng, gold: &Action, radius: f64) -> Action {
    let (t, l) = (gold.touch(), gold.lift());
    let (ty, ly) = shift_axis(rng, t.y(), l.y(), radius);
    let (tx, lx) = shift_axis(rng, t.x(), l.x(), radius);
    let moved = Action::dual_point(
        Point::new(ty, tx).expect("shifted point stays on screen"),
        Point::new(ly, lx).expect("shifted point stays on screen"),
    )
    .expect("on-screen points form a gesture");
    normalize(&moved)
}

impl FixtureAgent {
    /// Predictions for one episode. Deterministic in `(self, episode, seed)`.
    pub fn predict(&self, e: &Episode, seed: u64) -> Vec<Action> {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(seed, e.id()));
        e.steps()
            .iter()
            .map(|s| {
                let gold = normalize(s.gold());
                let gesture = classify_gesture(&gold, DEFAULT_TAP_THRESHOLD).ok();
                match (self, gesture) {
                    (FixtureAgent::ConstantAction(t), _) => Action::default_for(*t),
                    (FixtureAgent::PerturbedOracle(r), Some(GestureKind::Click)) => {
                        perturb_click(&mut rng, &gold, *r)
                    }
                    (FixtureAgent::AxisFlipper, Some(g)) if g.is_scroll() => {
                        let (t, l) = g.reversed().scroll_pair().expect("scrolls have pairs");
                        Action::dual_point(t, l).expect("fixed pairs are on screen")
                    }
                    _ => gold,
                }
            })
            .collect()
    }
}

/// Runs an agent over episodes and returns canonical prediction records.
pub fn run_fixture_agent(
    agent: FixtureAgent,
    episodes: &[Episode],
    seed: u64,
) -> Vec<PredictionRecord> {
    episodes
        .iter()
        .flat_map(|e| {
            agent
                .predict(e, seed)
                .into_iter()
                .enumerate()
                .map(|(i, a)| PredictionRecord::new(e.id(), i + 1, &a))
                .collect::<Vec<_>>()
        })
        .collect()
}
