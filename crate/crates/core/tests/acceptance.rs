//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use guikit_core::action::{classify_gesture, normalize, Action, ActionType, GestureKind, Point};
use guikit_core::agents::{run_fixture_agent, FixtureAgent};
use guikit_core::chain::{build_samples, ChainConfig, HISTORY_PREFIX};
use guikit_core::episodes::{load_jsonl, split, Episode, Step, Subset};
use guikit_core::evaluate::{score_all, ScoreSummary};
use guikit_core::fusion::{attend, forward, grad_check, FeatureBundle, FusionParams, GradTarget};
use guikit_core::matching::{
    aggregate, match_step, AggregationMode, MatchConfig, MatchReport, ScreenGeometry, ScrollMode,
};
use guikit_core::predictions::{read_predictions, write_predictions};
use guikit_core::selfcheck::golden_inputs;
use guikit_core::synth::{synthesize, SynthKind};
use guikit_core::text::{
    parse_decision, parse_history, parse_plan, parse_target, parse_target_lenient, render_decision,
    render_history, render_target,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances and budgets.
const GOLDEN_BUDGET: Duration = Duration::from_secs(1);
const ORACLE_SUITE_BUDGET: Duration = Duration::from_secs(5);
const OVERALL_TOLERANCE: f64 = 0.01;
const WINDOW_CASES: usize = 10_000;
const ROUND_TRIP_CASES: usize = 10_000;
const FUZZ_CASES: usize = 100_000;
const ROW_SUM_TOLERANCE: f64 = 1e-9;
const GRAD_TOLERANCE: f64 = 1e-4;
const GRAD_EPS: f64 = 1e-5;
const GRAD_POINTS: usize = 20;
const NAIVE_ATTEND_TOLERANCE: f64 = 1e-10;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn point(y: f64, x: f64) -> Point {
    Point::new(y, x).unwrap()
}

// ---------------------------------------------------------------------------

fn golden_renderings() -> Outcome {
    // Rows as printed in the reference table, with typographic quotes made plain.
    const EXPECTED: [&str; 7] = [
        r#""action_type": 4, "touch_point": [0.8497, 0.5964], "lift_point": [0.8497, 0.5964], "typed_text": """#,
        r#""action_type": 4, "touch_point": [0.2, 0.5], "lift_point": [0.8, 0.5], "typed_text": """#,
        r#""action_type": 3, "touch_point": [-1.0, -1.0], "lift_point": [-1.0, -1.0], "typed_text": "what's the news in chile?""#,
        r#""action_type": 5, "touch_point": [-1.0, -1.0], "lift_point": [-1.0, -1.0], "typed_text": """#,
        r#""action_type": 6, "touch_point": [-1.0, -1.0], "lift_point": [-1.0, -1.0], "typed_text": """#,
        r#""action_type": 7, "touch_point": [-1.0, -1.0], "lift_point": [-1.0, -1.0], "typed_text": """#,
        r#""action_type": 10, "touch_point": [-1.0, -1.0], "lift_point": [-1.0, -1.0], "typed_text": """#,
    ];
    let start = Instant::now();
    let golden =
        std::fs::read_to_string(root().join("golden/decisions.txt")).map_err(|e| e.to_string())?;
    let golden: Vec<&str> = golden.lines().collect();
    ensure(golden == EXPECTED, || {
        "golden file differs from the reference rows".into()
    })?;
    let inputs = golden_inputs();
    ensure(inputs.len() == 7, || format!("{} inputs", inputs.len()))?;
    for ((name, raw), want) in inputs.iter().zip(EXPECTED) {
        let got = render_decision(&normalize(raw)).map_err(|e| format!("{name}: {e}"))?;
        ensure(got == want, || format!("{name}: rendered {got:?}"))?;
        let back = parse_decision(want).map_err(|e| format!("{name}: {e}"))?;
        ensure(back == normalize(raw), || format!("{name}: parse mismatch"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < GOLDEN_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "7/7 rows byte-exact in {elapsed:?} (budget {GOLDEN_BUDGET:?})"
    ))
}

fn normalization_examples() -> Outcome {
    let raw = Action::dual_point(point(0.1898, 0.4477), point(0.8242, 0.4077)).unwrap();
    let kind = classify_gesture(&raw, 0.04).map_err(|e| e.to_string())?;
    ensure(kind == GestureKind::ScrollDown, || {
        format!("classified {kind:?}")
    })?;
    let n = normalize(&raw);
    ensure(
        n.touch() == point(0.2, 0.5) && n.lift() == point(0.8, 0.5),
        || format!("normalized to {} {}", n.touch(), n.lift()),
    )?;

    let pairs = [
        (GestureKind::ScrollUp, [0.8, 0.5], [0.2, 0.5]),
        (GestureKind::ScrollDown, [0.2, 0.5], [0.8, 0.5]),
        (GestureKind::ScrollLeft, [0.5, 0.8], [0.5, 0.2]),
        (GestureKind::ScrollRight, [0.5, 0.2], [0.5, 0.8]),
    ];
    for (kind, t, l) in pairs {
        let (pt, pl) = kind.scroll_pair().ok_or("missing pair")?;
        ensure(pt == point(t[0], t[1]) && pl == point(l[0], l[1]), || {
            format!("{kind:?} pair {pt} {pl}")
        })?;
        // A raw gesture in that direction snaps onto the pair.
        let (dy, dx) = (l[0] - t[0], l[1] - t[1]);
        let raw = Action::dual_point(
            point(0.5 - dy * 0.3, 0.5 - dx * 0.3),
            point(0.5 + dy * 0.3, 0.5 + dx * 0.3 + 0.01),
        )
        .unwrap();
        let n = normalize(&raw);
        ensure(n.touch() == pt && n.lift() == pl, || {
            format!("{kind:?} raw gesture snapped to {} {}", n.touch(), n.lift())
        })?;
    }

    let click = Action::click(0.7761, 0.7089).unwrap();
    let kind = classify_gesture(&click, 0.04).map_err(|e| e.to_string())?;
    ensure(kind == GestureKind::Click, || {
        format!("click classified {kind:?}")
    })?;
    ensure(normalize(&click) == click, || {
        "4-decimal click changed under normalization".into()
    })?;
    Ok("scroll example -> down pair; 4 fixed pairs; click example is a click".into())
}

fn score_agent(
    agent: FixtureAgent,
    eps: &[Episode],
    cfg: &MatchConfig,
    seed: u64,
) -> Result<ScoreSummary, String> {
    let mut buf = Vec::new();
    write_predictions(&run_fixture_agent(agent, eps, seed), &mut buf).map_err(|e| e.to_string())?;
    let preds = read_predictions(buf.as_slice()).map_err(|e| e.to_string())?;
    score_all(eps, &preds, cfg, 4).map_err(|e| e.to_string())
}

fn fixture(name: &str) -> Result<Vec<Episode>, String> {
    load_jsonl(root().join("fixtures").join(name)).map_err(|e| format!("{name}: {e}"))
}

fn metric_oracle_suite() -> Outcome {
    let start = Instant::now();
    let cfg = MatchConfig::default();
    for name in [
        "general_mini.jsonl",
        "clicks.jsonl",
        "scrolls.jsonl",
        "mixed.jsonl",
    ] {
        let s = score_agent(FixtureAgent::Oracle, &fixture(name)?, &cfg, 0)?;
        ensure(s.overall.matching_score == 1.0, || {
            format!("oracle on {name}: {}", s.overall.matching_score)
        })?;
    }
    let clicks = fixture("clicks.jsonl")?;
    let synth_clicks = synthesize(SynthKind::ClickOnly, 100, 8, 11);
    for (label, eps) in [
        ("clicks fixture", &clicks),
        ("synthetic clicks", &synth_clicks),
    ] {
        let near = score_agent(FixtureAgent::PerturbedOracle(0.05), eps, &cfg, 3)?;
        ensure(near.overall.click_accuracy == Some(1.0), || {
            format!("shift 0.05 on {label}: {:?}", near.overall.click_accuracy)
        })?;
        let far = score_agent(FixtureAgent::PerturbedOracle(0.30), eps, &cfg, 3)?;
        ensure(far.overall.click_accuracy == Some(0.0), || {
            format!("shift 0.30 on {label}: {:?}", far.overall.click_accuracy)
        })?;
    }

    let synth = synthesize(SynthKind::Mixed, 100, 12, 5);
    let s = score_agent(FixtureAgent::Oracle, &synth, &cfg, 0)?;
    let elapsed = start.elapsed();
    ensure(s.overall.matching_score == 1.0, || {
        format!("oracle on synthetic: {}", s.overall.matching_score)
    })?;
    ensure(elapsed < ORACLE_SUITE_BUDGET, || {
        format!("suite took {elapsed:?}")
    })?;
    Ok(format!(
        "oracle 1.000 on 4 fixtures + 100 synthetic episodes; shift 0.05 -> 1.0, 0.30 -> 0.0; whole suite {elapsed:?} (budget {ORACLE_SUITE_BUDGET:?})"
    ))
}

fn scroll_axis_rule() -> Outcome {
    let strict = MatchConfig {
        scroll_mode: ScrollMode::Strict,
        ..MatchConfig::default()
    };
    for (label, eps) in [
        ("scrolls fixture", fixture("scrolls.jsonl")?),
        (
            "synthetic scrolls",
            synthesize(SynthKind::ScrollOnly, 50, 6, 2),
        ),
    ] {
        let axis = score_agent(FixtureAgent::AxisFlipper, &eps, &MatchConfig::default(), 0)?;
        ensure(axis.overall.scroll_accuracy == Some(1.0), || {
            format!("{label} axis mode: {:?}", axis.overall.scroll_accuracy)
        })?;
        let st = score_agent(FixtureAgent::AxisFlipper, &eps, &strict, 0)?;
        ensure(st.overall.scroll_accuracy == Some(0.0), || {
            format!("{label} strict mode: {:?}", st.overall.scroll_accuracy)
        })?;
    }
    Ok("axis-flipper: axis mode 1.0, strict mode 0.0".into())
}

fn overall_arithmetic() -> Outcome {
    let subsets = [
        ("general", 6824),
        ("install", 7689),
        ("google_apps", 7137),
        ("single", 8458),
        ("web_shopping", 7026),
    ];
    let gold = Action::system(ActionType::Enter).unwrap();
    let wrong = Action::system(ActionType::GoBack).unwrap();
    let geom = ScreenGeometry::new(1, 1, vec![]).unwrap();
    let cfg = MatchConfig::default();
    let hit = match_step(&gold, &gold, &geom, &cfg).map_err(|e| e.to_string())?;
    let miss = match_step(&wrong, &gold, &geom, &cfg).map_err(|e| e.to_string())?;
    let reports: Vec<MatchReport> = subsets
        .iter()
        .map(|&(name, correct)| {
            let mut v = vec![hit; correct];
            v.resize(10_000, miss);
            MatchReport::from_verdicts(name, v).unwrap()
        })
        .collect();
    let overall =
        aggregate("overall", &reports, AggregationMode::Mean).map_err(|e| e.to_string())?;
    let pct = overall.matching_score * 100.0;
    let oracle = (68.24 + 76.89 + 71.37 + 84.58 + 70.26) / 5.0;
    ensure((pct - 74.27).abs() <= OVERALL_TOLERANCE, || {
        format!("got {pct}")
    })?;
    ensure((pct - oracle).abs() <= 1e-9, || {
        format!("got {pct}, hand mean {oracle}")
    })?;
    Ok(format!(
        "mean of 5 subsets = {pct:.4} (target 74.27 +/- {OVERALL_TOLERANCE})"
    ))
}

fn random_system(rng: &mut impl Rng) -> Action {
    let t = [
        ActionType::GoBack,
        ActionType::GoHome,
        ActionType::Enter,
        ActionType::StatusComplete,
    ][rng.gen_range(0..4)];
    Action::system(t).unwrap()
}

fn random_text(rng: &mut impl Rng) -> String {
    const PIECES: [&str; 12] = [
        "a",
        "Z",
        " ",
        "'",
        "\"",
        "\\",
        ";",
        "{",
        "}",
        "é",
        "\n",
        "Action Decision:",
    ];
    (0..rng.gen_range(0..8))
        .map(|_| PIECES[rng.gen_range(0..PIECES.len())])
        .collect()
}

fn random_action(rng: &mut impl Rng) -> Action {
    let coord = |rng: &mut dyn rand::RngCore| rng.gen_range(0.0..=1.0);
    match rng.gen_range(0..6) {
        0 | 1 => {
            let t = point(coord(rng), coord(rng));
            let l = point(
                (t.y() + rng.gen_range(-0.02..0.02f64)).clamp(0.0, 1.0),
                t.x(),
            );
            Action::dual_point(t, l).unwrap()
        }
        2 | 3 => Action::dual_point(point(coord(rng), coord(rng)), point(coord(rng), coord(rng)))
            .unwrap(),
        4 => Action::type_text(random_text(rng)),
        _ => random_system(rng),
    }
}

fn chain_windows() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let geom = ScreenGeometry::new(10, 10, vec![]).unwrap();
    let cfg = ChainConfig::default();
    let mut samples_checked = 0;
    for case in 0..WINDOW_CASES {
        let k = rng.gen_range(1..=30);
        let steps = (0..k)
            .map(|_| Step::new(geom.clone(), None, random_action(&mut rng)))
            .collect();
        let e = Episode::new(format!("w{case}"), Subset::General, "goal", steps).unwrap();
        let samples = build_samples(&e, &cfg);
        ensure(samples.len() == k, || {
            format!("case {case}: {} samples for k={k}", samples.len())
        })?;
        for s in &samples {
            let t = s.step;
            let at = s.input.find(HISTORY_PREFIX).ok_or("no history prefix")?;
            let history =
                parse_history(&s.input[at + HISTORY_PREFIX.len()..]).map_err(|e| e.to_string())?;
            let (plan, _) = parse_target(&s.target).map_err(|e| e.to_string())?;
            ensure(history.len() == (t - 1).min(8), || {
                format!("case {case} t={t}: history {}", history.len())
            })?;
            ensure(plan.len() == (k - t + 1).min(4), || {
                format!("case {case} t={t} k={k}: plan {}", plan.len())
            })?;
            samples_checked += 1;
        }
    }
    Ok(format!(
        "{WINDOW_CASES} episodes (k <= 30), {samples_checked} samples, 0 failures"
    ))
}

fn round_trip_and_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut corpus = Vec::new();
    for i in 0..ROUND_TRIP_CASES {
        let a = normalize(&random_action(&mut rng));
        let d = render_decision(&a).map_err(|e| format!("case {i}: {e}"))?;
        ensure(parse_decision(&d).as_ref() == Ok(&a), || {
            format!("decision case {i}: {d}")
        })?;
        let plan: Vec<ActionType> = std::iter::once(a.action_type())
            .chain((0..rng.gen_range(0..4)).map(|_| ActionType::ALL[rng.gen_range(0..6)]))
            .collect();
        let t = render_target(&plan, &a).map_err(|e| e.to_string())?;
        ensure(parse_target(&t) == Ok((plan.clone(), a.clone())), || {
            format!("target case {i}: {t}")
        })?;
        let h: Vec<Action> = (0..rng.gen_range(0..6))
            .map(|_| normalize(&random_action(&mut rng)))
            .collect();
        let hs = render_history(&h);
        ensure(parse_history(&hs) == Ok(h), || {
            format!("history case {i}: {hs}")
        })?;
        if i < 200 {
            corpus.push(t);
            corpus.push(hs);
        }
    }

    // Fuzz: half pure random bytes, half byte-level mutations of valid strings.
    let previous_hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    for i in 0..FUZZ_CASES {
        let bytes: Vec<u8> = if i % 2 == 0 {
            (0..rng.gen_range(0..96)).map(|_| rng.gen()).collect()
        } else {
            let mut b = corpus[rng.gen_range(0..corpus.len())].clone().into_bytes();
            for _ in 0..rng.gen_range(1..6) {
                if b.is_empty() {
                    break;
                }
                let at = rng.gen_range(0..b.len());
                match rng.gen_range(0..3) {
                    0 => b[at] = rng.gen(),
                    1 => {
                        b.remove(at);
                    }
                    _ => b.truncate(at),
                }
            }
            b
        };
        let s = String::from_utf8_lossy(&bytes);
        let ok = panic::catch_unwind(AssertUnwindSafe(|| {
            let _ = parse_decision(&s);
            let _ = parse_target(&s);
            let _ = parse_target_lenient(&s);
            let _ = parse_history(&s);
            let _ = parse_plan(&s);
        }));
        if ok.is_err() {
            crashes += 1;
        }
    }
    panic::set_hook(previous_hook);
    ensure(crashes == 0, || {
        format!("{crashes} crashes in {FUZZ_CASES} fuzz inputs")
    })?;
    Ok(format!("{ROUND_TRIP_CASES} decision/target/history round trips; {FUZZ_CASES} fuzz inputs, 0 crashes"))
}

fn fusion_math() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_grad = 0.0f64;
    let mut worst_naive = 0.0f64;
    for i in 0..GRAD_POINTS {
        let (m, n) = (rng.gen_range(1..=4), rng.gen_range(1..=6));
        let (d_s, d_l) = (rng.gen_range(2..=10), rng.gen_range(2..=6));
        let b = FeatureBundle::random(&mut rng, m, n, d_s, d_l);
        let scale = rng.gen_range(0.5..2.5);
        let p = FusionParams::random(&mut rng, d_s, d_l, scale);
        let out = forward(&b, &p).map_err(|e| e.to_string())?;
        for r in 0..out.attention.weights.rows() {
            let sum: f64 = out.attention.weights.row(r).iter().sum();
            ensure((sum - 1.0).abs() <= ROW_SUM_TOLERANCE, || {
                format!("point {i}: row sum {sum}")
            })?;
        }
        for r in 0..n {
            for c in 0..d_l {
                let (l, h, f) = (
                    b.language.get(r, c),
                    out.attention.output.get(r, c),
                    out.gated.fused.get(r, c),
                );
                ensure(f >= l.min(h) && f <= l.max(h), || {
                    format!("point {i}: fused {f} outside [{l}, {h}]")
                })?;
            }
        }
        // Naive double loop over query and key indices.
        let att = attend(&b, &p).map_err(|e| e.to_string())?;
        let inv_sqrt = 1.0 / (d_l as f64).sqrt();
        let key = |j: usize, a: usize| {
            (0..d_s)
                .map(|s| b.screen.get(j, s) * p.projection.get(a, s))
                .sum::<f64>()
        };
        for q in 0..n {
            let scores: Vec<f64> = (0..m)
                .map(|j| {
                    (0..d_l)
                        .map(|a| b.language.get(q, a) * key(j, a))
                        .sum::<f64>()
                        * inv_sqrt
                })
                .collect();
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            for a in 0..d_l {
                let o: f64 = (0..m).map(|j| scores[j].exp() / z * key(j, a)).sum();
                worst_naive = worst_naive.max((o - att.output.get(q, a)).abs());
            }
        }
        for t in GradTarget::ALL {
            let e = grad_check(t, &b, &p, GRAD_EPS).map_err(|e| e.to_string())?;
            ensure(e <= GRAD_TOLERANCE, || format!("point {i} {t:?}: {e:e}"))?;
            worst_grad = worst_grad.max(e);
        }
    }
    ensure(worst_naive <= NAIVE_ATTEND_TOLERANCE, || {
        format!("naive attend differs by {worst_naive:e}")
    })?;
    Ok(format!(
        "rows sum to 1 (tol {ROW_SUM_TOLERANCE:e}); fused within inputs; grad max rel. err {worst_grad:.2e} over {GRAD_POINTS} points x 8 targets (tol {GRAD_TOLERANCE:e}); naive attend diff {worst_naive:.1e} (tol {NAIVE_ATTEND_TOLERANCE:e})"
    ))
}

fn split_determinism() -> Outcome {
    let mut report = Vec::new();
    for (n, seed) in [(10, 1), (101, 2), (997, 3), (2000, 4)] {
        let eps = synthesize(SynthKind::Mixed, n, 2, seed);
        let a = split(&eps, [80, 10, 10], seed).map_err(|e| e.to_string())?;
        let b = split(&eps, [80, 10, 10], seed).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("n={n}: two runs differ"))?;
        let sizes = [a.train.len(), a.val.len(), a.test.len()];
        for (got, r) in sizes.iter().zip([0.8, 0.1, 0.1]) {
            ensure((*got as f64 - n as f64 * r).abs() <= 1.0, || {
                format!("n={n}: sizes {sizes:?}")
            })?;
        }
        let ids: BTreeSet<&str> = a
            .train
            .iter()
            .chain(&a.val)
            .chain(&a.test)
            .map(Episode::id)
            .collect();
        let all: BTreeSet<&str> = eps.iter().map(Episode::id).collect();
        ensure(ids.len() == sizes.iter().sum::<usize>(), || {
            format!("n={n}: parts overlap")
        })?;
        ensure(ids == all, || {
            format!("n={n}: parts do not cover the input")
        })?;
        report.push(format!("{n}->{sizes:?}"));
    }
    Ok(format!(
        "{} (repeatable, disjoint, exhaustive)",
        report.join(" ")
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("golden-renderings", golden_renderings),
        ("normalization-examples", normalization_examples),
        ("metric-oracle-suite", metric_oracle_suite),
        ("scroll-axis-rule", scroll_axis_rule),
        ("overall-score-arithmetic", overall_arithmetic),
        ("chain-windows", chain_windows),
        ("round-trip-and-fuzz", round_trip_and_fuzz),
        ("fusion-math", fusion_math),
        ("split-determinism", split_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
