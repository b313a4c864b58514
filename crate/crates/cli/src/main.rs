use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use guikit_core::agents::{run_fixture_agent, FixtureAgent};
use guikit_core::chain::{
    ablate, build_samples, build_samples_with_history, Ablation, ChainConfig,
};
use guikit_core::config::{
    parse_aggregation, parse_distance, parse_scroll_mode, parse_text_policy, Settings,
};
use guikit_core::episodes::{load_jsonl, save_jsonl, split, stats, subsample, Episode, Subset};
use guikit_core::evaluate::score_all;
use guikit_core::matching::{AggregationMode, DistanceMetric, ScrollMode, TextPolicy};
use guikit_core::predictions::{load_predictions, write_predictions};
use guikit_core::selfcheck::{run_selfcheck, DECISION_GOLDEN};
use guikit_core::synth::{synthesize, SynthKind};

/// Scoring and dataset tooling for screen-level GUI agents
#[derive(Parser, Debug)]
#[command(name = "guikit", version, about)]
struct Cli {
    /// Flat key = value config file; flags override it
    #[arg(long, global = true, env = "GUIKIT_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score predictions against gold episodes
    Score(ScoreArgs),
    /// Episode, screen and instruction counts per subset
    Stats(StatsArgs),
    /// Episode-wise train/val/test split
    Split(SplitArgs),
    /// Render chain-of-action training samples
    BuildChains(ChainArgs),
    /// Write predictions from a deterministic fixture agent
    RunFixtureAgent(AgentArgs),
    /// Golden renderings, normalization, gradient and split checks
    Selfcheck(SelfcheckArgs),
    /// Generate synthetic episodes
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HistorySource {
    Gold,
    Predicted,
}

#[derive(Args, Debug)]
struct Sampling {
    /// Keep this fraction of the episodes in --fraction-subset
    #[arg(long)]
    fraction: Option<f64>,

    /// Subset that --fraction applies to, or "all"
    #[arg(long, default_value = "google_apps")]
    fraction_subset: String,

    /// Seed for shuffling and fixture agents
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Gold episodes (JSONL)
    gold: PathBuf,
    /// Predictions (JSONL)
    pred: PathBuf,

    /// Click radius in normalized screen units
    #[arg(long)]
    threshold: Option<f64>,
    /// Distance under which a gesture is a click
    #[arg(long)]
    tap_threshold: Option<f64>,
    /// euclidean or chebyshev
    #[arg(long, value_parser = parse_distance)]
    distance: Option<DistanceMetric>,
    /// lenient or strict
    #[arg(long, value_parser = parse_text_policy)]
    text_policy: Option<TextPolicy>,
    /// Whether typed text must match for a step to count as correct
    #[arg(long)]
    text_counts: Option<bool>,
    /// axis or strict
    #[arg(long, value_parser = parse_scroll_mode)]
    scroll_mode: Option<ScrollMode>,
    /// mean (over subsets) or steps (pooled)
    #[arg(long, value_parser = parse_aggregation)]
    aggregation: Option<AggregationMode>,
    /// Scoring threads
    #[arg(long)]
    workers: Option<usize>,

    #[command(flatten)]
    sampling: Sampling,

    /// Format printed to stdout
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Also write the JSON report here
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Also write the CSV report here
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    gold: PathBuf,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args, Debug)]
struct SplitArgs {
    gold: PathBuf,
    /// Writes train.jsonl, val.jsonl and test.jsonl here
    #[arg(long)]
    out_dir: PathBuf,
    /// Three integer weights
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [80u32, 10, 10])]
    ratios: Vec<u32>,
    #[command(flatten)]
    sampling: Sampling,
}

#[derive(Args, Debug)]
struct ChainArgs {
    gold: PathBuf,
    #[arg(long, default_value_t = 8)]
    max_history: usize,
    #[arg(long, default_value_t = 4)]
    max_plan: usize,
    /// no_history, no_plan or neither
    #[arg(long)]
    ablation: Option<Ablation>,
    /// Where previous actions come from
    #[arg(long, value_enum, default_value = "gold")]
    history: HistorySource,
    /// Predictions supplying the history when --history predicted
    #[arg(long)]
    pred: Option<PathBuf>,
    #[command(flatten)]
    sampling: Sampling,
    /// Output file (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AgentArgs {
    gold: PathBuf,
    /// oracle, perturbed:<radius>, axis-flipper or constant:<type>
    #[arg(long)]
    agent: FixtureAgent,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelfcheckArgs {
    /// Replacement golden rendering file
    #[arg(long)]
    golden: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// mixed, clicks or scrolls
    #[arg(long, default_value = "mixed")]
    kind: SynthKind,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 10)]
    max_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_settings(path: Option<&Path>) -> Result<Settings> {
    match path {
        Some(p) => Settings::load(p).with_context(|| format!("config {}", p.display())),
        None => Ok(Settings::default()),
    }
}

fn load_gold(path: &Path, sampling: &Sampling, seed: u64) -> Result<Vec<Episode>> {
    let episodes =
        load_jsonl(path).with_context(|| format!("reading episodes from {}", path.display()))?;
    let Some(fraction) = sampling.fraction else {
        return Ok(episodes);
    };
    let only = match sampling.fraction_subset.as_str() {
        "all" => None,
        s => Some(s.parse::<Subset>().map_err(anyhow::Error::msg)?),
    };
    Ok(subsample(&episodes, fraction, seed, only)?)
}

fn cmd_score(args: ScoreArgs, file: Settings) -> Result<()> {
    let flags = Settings {
        threshold: args.threshold,
        tap_threshold: args.tap_threshold,
        distance: args.distance,
        text_policy: args.text_policy,
        text_counts: args.text_counts,
        scroll_mode: args.scroll_mode,
        aggregation: args.aggregation,
        workers: args.workers,
        seed: args.sampling.seed,
    };
    let settings = file.overlay(flags);
    let cfg = settings.match_config();
    cfg.validate()?;
    let gold = load_gold(&args.gold, &args.sampling, settings.seed.unwrap_or(0))?;
    let mut preds = load_predictions(&args.pred)
        .with_context(|| format!("reading predictions from {}", args.pred.display()))?;
    if args.sampling.fraction.is_some() {
        preds.retain(|id, _| gold.iter().any(|e| e.id() == id));
    }
    let summary = score_all(&gold, &preds, &cfg, settings.workers.unwrap_or(1))?;
    if let Some(p) = &args.json {
        emit(Some(p), &(summary.to_json() + "\n"))?;
    }
    if let Some(p) = &args.csv {
        emit(Some(p), &summary.to_csv())?;
    }
    match args.format {
        Format::Json => emit(None, &(summary.to_json() + "\n")),
        Format::Csv => emit(None, &summary.to_csv()),
    }
}

fn cmd_stats(args: StatsArgs, file: Settings) -> Result<()> {
    let seed = args.sampling.seed.or(file.seed).unwrap_or(0);
    let gold = load_gold(&args.gold, &args.sampling, seed)?;
    let s = stats(&gold);
    match args.format {
        Format::Json => emit(None, &(serde_json::to_string_pretty(&s)? + "\n")),
        Format::Csv => {
            let mut text = String::from("subset,episodes,screens,instructions\n");
            let rows = s
                .subsets
                .iter()
                .map(|(k, v)| (k.name(), v))
                .chain([("total", &s.total)]);
            for (name, v) in rows {
                text += &format!("{name},{},{},{}\n", v.episodes, v.screens, v.instructions);
            }
            emit(None, &text)
        }
    }
}

fn cmd_split(args: SplitArgs, file: Settings) -> Result<()> {
    let seed = args.sampling.seed.or(file.seed).unwrap_or(0);
    let gold = load_gold(&args.gold, &args.sampling, seed)?;
    let ratios: [u32; 3] = args
        .ratios
        .as_slice()
        .try_into()
        .context("--ratios needs three values")?;
    let parts = split(&gold, ratios, seed)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    for (name, part) in [
        ("train", &parts.train),
        ("val", &parts.val),
        ("test", &parts.test),
    ] {
        let path = args.out_dir.join(format!("{name}.jsonl"));
        save_jsonl(part, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "train={} val={} test={}",
        parts.train.len(),
        parts.val.len(),
        parts.test.len()
    );
    Ok(())
}

fn cmd_build_chains(args: ChainArgs, file: Settings) -> Result<()> {
    let seed = args.sampling.seed.or(file.seed).unwrap_or(0);
    let gold = load_gold(&args.gold, &args.sampling, seed)?;
    let mut cfg = ChainConfig::new(args.max_history, args.max_plan)?;
    if let Some(a) = args.ablation {
        cfg = ablate(cfg, a);
    }
    let preds = match (args.history, &args.pred) {
        (HistorySource::Gold, None) => None,
        (HistorySource::Predicted, Some(p)) => Some(
            load_predictions(p)
                .with_context(|| format!("reading predictions from {}", p.display()))?,
        ),
        (HistorySource::Gold, Some(_)) => bail!("--pred is only used with --history predicted"),
        (HistorySource::Predicted, None) => bail!("--history predicted needs --pred"),
    };
    let mut text = String::new();
    for e in &gold {
        let samples = match &preds {
            None => build_samples(e, &cfg),
            Some(p) => {
                let history = p
                    .get(e.id())
                    .with_context(|| format!("no predictions for episode `{}`", e.id()))?;
                build_samples_with_history(e, &cfg, history)?
            }
        };
        for s in samples {
            text += &serde_json::to_string(&s)?;
            text.push('\n');
        }
    }
    emit(args.out.as_deref(), &text)
}

fn cmd_run_fixture_agent(args: AgentArgs, file: Settings) -> Result<()> {
    let seed = args.sampling.seed.or(file.seed).unwrap_or(0);
    let gold = load_gold(&args.gold, &args.sampling, seed)?;
    let records = run_fixture_agent(args.agent, &gold, seed);
    let mut buf = Vec::new();
    write_predictions(&records, &mut buf)?;
    emit(args.out.as_deref(), &String::from_utf8(buf)?)
}

fn cmd_selfcheck(args: SelfcheckArgs) -> Result<()> {
    let golden = match &args.golden {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => DECISION_GOLDEN.to_string(),
    };
    let results = run_selfcheck(&golden);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        bail!("{failed} of {} checks failed", results.len());
    }
    println!("all {} checks passed", results.len());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let episodes = synthesize(args.kind, args.episodes, args.max_steps, args.seed);
    let mut buf = Vec::new();
    guikit_core::episodes::write_jsonl(&episodes, &mut buf)?;
    emit(args.out.as_deref(), &String::from_utf8(buf)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file = load_settings(cli.config.as_deref())?;
    match cli.command {
        Command::Score(a) => cmd_score(a, file),
        Command::Stats(a) => cmd_stats(a, file),
        Command::Split(a) => cmd_split(a, file),
        Command::BuildChains(a) => cmd_build_chains(a, file),
        Command::RunFixtureAgent(a) => cmd_run_fixture_agent(a, file),
        Command::Selfcheck(a) => cmd_selfcheck(a),
        Command::Synth(a) => cmd_synth(a),
    }
}
