//! Episodes, their JSONL encoding, episode-wise splits and dataset statistics.
//!
//! One episode per line:
//!
//! ```json
//! {"id":"g-0001","subset":"general","goal":"open the clock","steps":[
//!   {"screen":{"h":2400,"w":1080,"boxes":[[0.1,0.2,0.3,0.4]],"image":"s/0.png"},
//!    "action":{"type_code":4,"touch":[0.5,0.5],"lift":[0.5,0.5],"text":""}}]}
//! ```
//!
//! `boxes` and `image` are optional and omitted by the writer when empty.
//! The full schema is in `schema.md`.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Action, ActionError, ActionType, Point};
use crate::matching::{BoundingBox, ScreenGeometry};

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("line {line}: {field}: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("need at least {needed} episodes to split, got {got}")]
    TooFewEpisodes { needed: usize, got: usize },
    #[error("split ratios {0:?} must sum to 100")]
    InvalidRatios([u32; 3]),
    #[error("fraction {0} must lie in (0, 1]")]
    InvalidFraction(f64),
    #[error("duplicate episode id `{0}`")]
    DuplicateId(String),
    #[error("episode `{0}` has no steps")]
    EmptyEpisode(String),
}

/// The five benchmark subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    General,
    Install,
    GoogleApps,
    Single,
    WebShopping,
}

impl Subset {
    pub const ALL: [Subset; 5] = [
        Subset::General,
        Subset::Install,
        Subset::GoogleApps,
        Subset::Single,
        Subset::WebShopping,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subset::General => "general",
            Subset::Install => "install",
            Subset::GoogleApps => "google_apps",
            Subset::Single => "single",
            Subset::WebShopping => "web_shopping",
        }
    }
}

impl std::str::FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subset::ALL
            .into_iter()
            .find(|sub| sub.name() == s)
            .ok_or_else(|| format!("unknown subset `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    screen: ScreenGeometry,
    image: Option<String>,
    gold: Action,
}

impl Step {
    pub fn new(screen: ScreenGeometry, image: Option<String>, gold: Action) -> Self {
        Step {
            screen,
            image,
            gold,
        }
    }

    pub fn screen(&self) -> &ScreenGeometry {
        &self.screen
    }

    pub fn image(&self) -> Option<&str> {
        self.image.as_deref()
    }

    pub fn gold(&self) -> &Action {
        &self.gold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    id: String,
    goal: String,
    subset: Subset,
    steps: Vec<Step>,
}

impl Episode {
    pub fn new(
        id: impl Into<String>,
        subset: Subset,
        goal: impl Into<String>,
        steps: Vec<Step>,
    ) -> Result<Self, EpisodeError> {
        let id = id.into();
        if steps.is_empty() {
            return Err(EpisodeError::EmptyEpisode(id));
        }
        Ok(Episode {
            id,
            goal: goal.into(),
            subset,
            steps,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn goal(&self) -> &str {
        &self.goal
    }

    pub fn subset(&self) -> Subset {
        self.subset
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Episode length `k`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn gold_actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.gold.clone()).collect()
    }
}

// ---------------------------------------------------------------------------
// Wire records
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EpisodeRecord {
    id: String,
    subset: Subset,
    goal: String,
    steps: Vec<StepRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRecord {
    screen: ScreenRecord,
    action: ActionRecord,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScreenRecord {
    h: u32,
    w: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    boxes: Vec<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<String>,
}

/// Structured action as stored in episode and prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRecord {
    pub type_code: i64,
    pub touch: [f64; 2],
    pub lift: [f64; 2],
    #[serde(default)]
    pub text: String,
}

impl ActionRecord {
    pub fn from_action(a: &Action) -> Self {
        ActionRecord {
            type_code: i64::from(a.action_type().code()),
            touch: [a.touch().y(), a.touch().x()],
            lift: [a.lift().y(), a.lift().x()],
            text: a.typed_text().to_string(),
        }
    }

    /// Validates into an [`Action`], naming the offending field on failure.
    pub fn to_action(&self) -> Result<Action, (&'static str, ActionError)> {
        let action_type = ActionType::from_code(self.type_code).map_err(|e| ("type_code", e))?;
        let touch = Point::new(self.touch[0], self.touch[1]).map_err(|e| ("touch", e))?;
        let lift = Point::new(self.lift[0], self.lift[1]).map_err(|e| ("lift", e))?;
        Action::new(action_type, touch, lift, self.text.clone()).map_err(|e| ("action", e))
    }
}

impl EpisodeRecord {
    fn from_episode(e: &Episode) -> Self {
        EpisodeRecord {
            id: e.id.clone(),
            subset: e.subset,
            goal: e.goal.clone(),
            steps: e
                .steps
                .iter()
                .map(|s| StepRecord {
                    screen: ScreenRecord {
                        h: s.screen.height(),
                        w: s.screen.width(),
                        boxes: s.screen.boxes().iter().map(|&b| b.into()).collect(),
                        image: s.image.clone(),
                    },
                    action: ActionRecord::from_action(&s.gold),
                })
                .collect(),
        }
    }

    fn into_episode(self, line: usize) -> Result<Episode, EpisodeError> {
        let schema = |field: String, message: String| EpisodeError::Schema {
            line,
            field,
            message,
        };
        if self.steps.is_empty() {
            return Err(schema(
                "steps".into(),
                "episode must have at least one step".into(),
            ));
        }
        let mut steps = Vec::with_capacity(self.steps.len());
        for (i, s) in self.steps.into_iter().enumerate() {
            let boxes = s
                .screen
                .boxes
                .iter()
                .enumerate()
                .map(|(j, &b)| {
                    BoundingBox::try_from(b)
                        .map_err(|e| schema(format!("steps[{i}].screen.boxes[{j}]"), e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let screen = ScreenGeometry::new(s.screen.h, s.screen.w, boxes)
                .map_err(|e| schema(format!("steps[{i}].screen"), e.to_string()))?;
            let gold = s.action.to_action().map_err(|(field, e)| {
                schema(format!("steps[{i}].action.{field}"), e.to_string())
            })?;
            steps.push(Step::new(screen, s.screen.image, gold));
        }
        Ok(Episode {
            id: self.id,
            goal: self.goal,
            subset: self.subset,
            steps,
        })
    }
}

/// Parses one JSONL record. `line` is 1-based and only used in errors.
pub fn parse_episode_line(text: &str, line: usize) -> Result<Episode, EpisodeError> {
    let record: EpisodeRecord = serde_json::from_str(text).map_err(|e| EpisodeError::Schema {
        line,
        field: "record".into(),
        message: e.to_string(),
    })?;
    record.into_episode(line)
}

/// Reads episodes from JSONL. Blank lines are skipped.
pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<Episode>, EpisodeError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_episode_line(&line, i + 1)?);
    }
    Ok(out)
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<Episode>, EpisodeError> {
    read_jsonl(BufReader::new(File::open(path)?))
}

/// Canonical single-line JSON for one episode (fixed key order, no spaces).
pub fn episode_to_json(e: &Episode) -> String {
    serde_json::to_string(&EpisodeRecord::from_episode(e)).expect("episode records serialize")
}

/// Canonical writer: one episode per line, LF endings.
pub fn write_jsonl(episodes: &[Episode], mut w: impl Write) -> io::Result<()> {
    for e in episodes {
        w.write_all(episode_to_json(e).as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_jsonl(episodes: &[Episode], path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = io::BufWriter::new(File::create(path)?);
    write_jsonl(episodes, &mut w)?;
    w.flush()
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

pub const DEFAULT_RATIOS: [u32; 3] = [80, 10, 10];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<Episode>,
    pub val: Vec<Episode>,
    pub test: Vec<Episode>,
}

/// Largest-remainder apportionment of `n` items to percentage `ratios`.
/// Ties in the remainder go to the earlier split.
pub fn split_sizes(n: usize, ratios: [u32; 3]) -> Result<[usize; 3], EpisodeError> {
    if ratios.iter().sum::<u32>() != 100 {
        return Err(EpisodeError::InvalidRatios(ratios));
    }
    let mut sizes = [0usize; 3];
    let mut remainders = [(0usize, 0usize); 3];
    for (i, &r) in ratios.iter().enumerate() {
        let scaled = n * r as usize;
        sizes[i] = scaled / 100;
        remainders[i] = (scaled % 100, i);
    }
    let mut left = n - sizes.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    Ok(sizes)
}

fn sorted_unique(episodes: &[Episode]) -> Result<Vec<Episode>, EpisodeError> {
    let mut sorted = episodes.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(EpisodeError::DuplicateId(w[0].id.clone()));
    }
    Ok(sorted)
}

/// Episode-wise train/val/test split. Episodes are sorted by id and then
/// shuffled with a ChaCha8 stream seeded from `seed`, so the result does not
/// depend on input order.
pub fn split(episodes: &[Episode], ratios: [u32; 3], seed: u64) -> Result<Split, EpisodeError> {
    let needed = ratios.iter().filter(|&&r| r > 0).count();
    if episodes.len() < needed {
        return Err(EpisodeError::TooFewEpisodes {
            needed,
            got: episodes.len(),
        });
    }
    let sizes = split_sizes(episodes.len(), ratios)?;
    let mut pool = sorted_unique(episodes)?;
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = pool.split_off(sizes[0] + sizes[1]);
    let val = pool.split_off(sizes[0]);
    Ok(Split {
        train: pool,
        val,
        test,
    })
}

/// Keeps `round(n * fraction)` (at least one) of the episodes in `only`
/// (or all episodes when `None`), chosen deterministically from `seed`.
/// Episodes outside `only` are kept. Output is sorted by id.
pub fn subsample(
    episodes: &[Episode],
    fraction: f64,
    seed: u64,
    only: Option<Subset>,
) -> Result<Vec<Episode>, EpisodeError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EpisodeError::InvalidFraction(fraction));
    }
    let (mut target, mut kept): (Vec<Episode>, Vec<Episode>) = sorted_unique(episodes)?
        .into_iter()
        .partition(|e| only.is_none_or(|s| e.subset == s));
    if !target.is_empty() {
        let keep = ((target.len() as f64 * fraction).round() as usize).max(1);
        target.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        target.truncate(keep);
    }
    kept.extend(target);
    kept.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(kept)
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubsetStats {
    pub episodes: usize,
    pub screens: usize,
    /// Distinct goal strings (exact equality).
    pub instructions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub subsets: BTreeMap<Subset, SubsetStats>,
    pub total: SubsetStats,
}

fn count(episodes: &[&Episode]) -> SubsetStats {
    let goals: HashSet<&str> = episodes.iter().map(|e| e.goal.as_str()).collect();
    SubsetStats {
        episodes: episodes.len(),
        screens: episodes.iter().map(|e| e.steps.len()).sum(),
        instructions: goals.len(),
    }
}

pub fn stats(episodes: &[Episode]) -> DatasetStats {
    let mut by_subset: BTreeMap<Subset, Vec<&Episode>> = BTreeMap::new();
    for e in episodes {
        by_subset.entry(e.subset).or_default().push(e);
    }
    let all: Vec<&Episode> = episodes.iter().collect();
    DatasetStats {
        subsets: by_subset
            .into_iter()
            .map(|(s, eps)| (s, count(&eps)))
            .collect(),
        total: count(&all),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLICK_EPISODE: &str = r#"{"id":"e1","subset":"general","goal":"open settings","steps":[{"screen":{"h":2400,"w":1080},"action":{"type_code":4,"touch":[0.5,0.5],"lift":[0.5,0.5],"text":""}},{"screen":{"h":2400,"w":1080},"action":{"type_code":10,"touch":[-1.0,-1.0],"lift":[-1.0,-1.0],"text":""}}]}"#;

    fn ep(id: &str, goal: &str, steps: usize) -> Episode {
        let screen = ScreenGeometry::new(100, 50, vec![]).unwrap();
        let steps = (0..steps)
            .map(|_| {
                Step::new(
                    screen.clone(),
                    None,
                    Action::system(ActionType::GoHome).unwrap(),
                )
            })
            .collect();
        Episode::new(id, Subset::General, goal, steps).unwrap()
    }

    #[test]
    fn loads_valid_episode() {
        let eps = read_jsonl(CLICK_EPISODE.as_bytes()).unwrap();
        assert_eq!(eps.len(), 1);
        assert_eq!(eps[0].len(), 2);
        assert_eq!(eps[0].steps()[0].gold(), &Action::click(0.5, 0.5).unwrap());
    }

    #[test]
    fn canonical_writer_reproduces_input() {
        let eps = read_jsonl(CLICK_EPISODE.as_bytes()).unwrap();
        assert_eq!(episode_to_json(&eps[0]), CLICK_EPISODE);
    }

    #[test]
    fn out_of_range_coordinate_is_a_schema_error() {
        let bad = CLICK_EPISODE.replacen("[0.5,0.5]", "[1.2,0.5]", 1);
        let text = format!("\n{bad}\n");
        match read_jsonl(text.as_bytes()) {
            Err(EpisodeError::Schema {
                line,
                field,
                message,
            }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "steps[0].action.touch");
                assert!(message.contains("[0, 1]"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_schema_errors() {
        for (from, to) in [
            ("\"type_code\":4", "\"type_code\":9"),
            ("\"h\":2400", "\"h\":0"),
            ("\"subset\":\"general\"", "\"subset\":\"misc\""),
            ("\"goal\"", "\"objective\""),
            (
                "{\"h\":2400,\"w\":1080}",
                "{\"h\":2400,\"w\":1080,\"boxes\":[[0.5,0.0,0.4,1.0]]}",
            ),
        ] {
            let bad = CLICK_EPISODE.replacen(from, to, 1);
            assert!(
                matches!(
                    read_jsonl(bad.as_bytes()),
                    Err(EpisodeError::Schema { line: 1, .. })
                ),
                "{to}"
            );
        }
        let no_steps = r#"{"id":"e","subset":"general","goal":"g","steps":[]}"#;
        assert!(read_jsonl(no_steps.as_bytes()).is_err());
    }

    #[test]
    fn largest_remainder_sizes() {
        assert_eq!(split_sizes(100, DEFAULT_RATIOS).unwrap(), [80, 10, 10]);
        assert_eq!(split_sizes(9476, DEFAULT_RATIOS).unwrap(), [7581, 948, 947]);
        assert_eq!(split_sizes(3, DEFAULT_RATIOS).unwrap(), [3, 0, 0]);
        assert!(split_sizes(10, [80, 10, 5]).is_err());
    }

    #[test]
    fn split_is_deterministic_partition() {
        let eps: Vec<Episode> = (0..100).map(|i| ep(&format!("e{i:03}"), "g", 1)).collect();
        let a = split(&eps, DEFAULT_RATIOS, 7).unwrap();
        let b = split(&eps, DEFAULT_RATIOS, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.val.len(), a.test.len()), (80, 10, 10));
        let mut reversed = eps.clone();
        reversed.reverse();
        assert_eq!(split(&reversed, DEFAULT_RATIOS, 7).unwrap(), a);
        let mut ids: Vec<&str> = a
            .train
            .iter()
            .chain(&a.val)
            .chain(&a.test)
            .map(|e| e.id())
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 100);
        assert_ne!(split(&eps, DEFAULT_RATIOS, 8).unwrap(), a);
    }

    #[test]
    fn split_errors() {
        let eps = vec![ep("a", "g", 1), ep("b", "g", 1)];
        assert!(matches!(
            split(&eps, DEFAULT_RATIOS, 0),
            Err(EpisodeError::TooFewEpisodes { needed: 3, got: 2 })
        ));
        let dup = vec![ep("a", "g", 1), ep("a", "h", 1), ep("b", "g", 1)];
        assert!(matches!(
            split(&dup, DEFAULT_RATIOS, 0),
            Err(EpisodeError::DuplicateId(_))
        ));
    }

    #[test]
    fn subsample_counts() {
        let eps: Vec<Episode> = (0..20).map(|i| ep(&format!("e{i:02}"), "g", 1)).collect();
        assert_eq!(subsample(&eps, 0.1, 3, None).unwrap().len(), 2);
        assert_eq!(subsample(&eps, 1.0, 3, None).unwrap().len(), 20);
        assert_eq!(
            subsample(&eps, 0.1, 3, Some(Subset::GoogleApps))
                .unwrap()
                .len(),
            20
        );
        assert!(subsample(&eps, 0.0, 3, None).is_err());
        assert_eq!(
            subsample(&eps, 0.3, 5, None).unwrap(),
            subsample(&eps, 0.3, 5, None).unwrap()
        );
    }

    #[test]
    fn stats_counts() {
        assert_eq!(stats(&[]), DatasetStats::default());
        let eps = vec![ep("a", "g1", 2), ep("b", "g1", 3), ep("c", "g2", 1)];
        let s = stats(&eps);
        assert_eq!(
            s.total,
            SubsetStats {
                episodes: 3,
                screens: 6,
                instructions: 2
            }
        );
        assert_eq!(s.subsets[&Subset::General], s.total);
    }
}
