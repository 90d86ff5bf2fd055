mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blockstair::bundle::ModelBundle;
use blockstair::dataset::{parse_example, synthesize_corpus, Corpus, NoiseParams};
use blockstair::eval::{bench, pointing, render, staircase_score, Pointing, RenderFormat};
use blockstair::heuristics::HeuristicKind;
use blockstair::nn::TrainParams;
use blockstair::par::Exec;
use blockstair::planner::{GenerationConfig, Generator, Plan};
use blockstair::qsr::{closure, RelationSet};
use blockstair::{Error, Scene, VERSION};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::ConfigFile;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(Error::GenerationStuck { .. }) => 3,
            CliError::Core(Error::UnsupportedFormat(_) | Error::Io(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "blockstair", version, about = "Learn a block-structure concept and generate new instances")]
struct Cli {
    /// key=value file consulted for any flag not given on the command line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a corpus of noisy staircases.
    Synth(SynthArgs),
    /// Train the three networks on a corpus.
    Train(TrainArgs),
    /// Generate one structure.
    Generate(GenerateArgs),
    /// Draw a scene or plan as ASCII or SVG.
    Render(SourceArgs),
    /// Score a scene or plan with the staircase rubric.
    Score(SourceArgs),
    /// Score seeded generations for each heuristic.
    Bench(BenchArgs),
    /// Show relation sets with the relations closure adds.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long)]
    noise_jitter: Option<f64>,
    #[arg(long)]
    noise_p_gap: Option<f64>,
    #[arg(long)]
    noise_p_rot: Option<f64>,
    #[arg(long)]
    noise_rot_max: Option<f64>,
    #[arg(long)]
    noise_p_flip: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    noise: NoiseArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Defaults to the corpus copy stored next to the bundle.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    heuristic: Option<HeuristicKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_best: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SourceArgs {
    #[arg(long, conflicts_with = "plan")]
    scene: Option<PathBuf>,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Restrict to one heuristic; all five by default.
    #[arg(long)]
    heuristic: Option<HeuristicKind>,
    #[arg(long)]
    runs: Option<usize>,
    /// First seed; runs use consecutive seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// A single `.rel` file.
    #[arg(long, conflicts_with = "corpus")]
    rel: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
}

struct Ctx {
    config: ConfigFile,
    verbose: bool,
}

impl Ctx {
    fn note(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }

    fn existing(&self, flag: Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
        let p: PathBuf = self.config.require(flag, key)?;
        if !p.exists() {
            return Err(CliError::Usage(format!("--{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }
}

fn header(seed: Option<u64>, extra: &str) -> String {
    let mut h = format!("# {VERSION}");
    if let Some(s) = seed {
        let _ = write!(h, " seed={s}");
    }
    if !extra.is_empty() {
        let _ = write!(h, " {extra}");
    }
    h
}

/// `seed=` from the `#` header lines of an artifact.
fn header_seed(text: &str) -> Option<u64> {
    text.lines()
        .filter(|l| l.starts_with('#'))
        .flat_map(str::split_whitespace)
        .find_map(|tok| tok.strip_prefix("seed=")?.parse().ok())
}

/// Writes `name` under `out`, or prints it when there is no output directory.
fn emit(out: Option<&Path>, name: &str, content: &str) -> CliResult<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(Error::from)?;
            fs::write(dir.join(name), content).map_err(Error::from)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn bundle_file(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("bundle.json")
    } else {
        p.to_path_buf()
    }
}

/// The bundle and the corpus it was trained on.
fn load_models(ctx: &Ctx, bundle: Option<PathBuf>, corpus: Option<PathBuf>) -> CliResult<(Corpus, ModelBundle)> {
    let bundle = ctx.existing(bundle, "bundle")?;
    let file = bundle_file(&bundle);
    if !file.exists() {
        return Err(CliError::Usage(format!("--bundle: {} does not exist", file.display())));
    }
    let corpus_dir = match ctx.config.resolve(corpus, "corpus", None)? {
        Some(p) => p,
        None => file.parent().unwrap_or(Path::new(".")).join("corpus"),
    };
    if !corpus_dir.exists() {
        return Err(CliError::Usage(format!("--corpus: {} does not exist", corpus_dir.display())));
    }
    let corpus = Corpus::read_dir(&corpus_dir)?;
    let b = ModelBundle::load_for(&file, &corpus)?;
    Ok((corpus, b))
}

fn synth(ctx: &Ctx, a: SynthArgs) -> CliResult<()> {
    let c = &ctx.config;
    let seed: u64 = c.require(a.seed, "seed")?;
    let out: PathBuf = c.require(a.out, "out")?;
    let count = c.resolve(a.count, "count", Some(17))?.unwrap_or(17);
    let d = NoiseParams::default();
    let noise = NoiseParams {
        jitter: c.resolve(a.noise.noise_jitter, "noise.jitter", Some(d.jitter))?.unwrap_or(d.jitter),
        p_gap: c.resolve(a.noise.noise_p_gap, "noise.p_gap", Some(d.p_gap))?.unwrap_or(d.p_gap),
        p_rot: c.resolve(a.noise.noise_p_rot, "noise.p_rot", Some(d.p_rot))?.unwrap_or(d.p_rot),
        rot_max: c.resolve(a.noise.noise_rot_max, "noise.rot_max", Some(d.rot_max))?.unwrap_or(d.rot_max),
        p_flip: c.resolve(a.noise.noise_p_flip, "noise.p_flip", Some(d.p_flip))?.unwrap_or(d.p_flip),
    };
    let corpus = synthesize_corpus(count, &noise, seed)?;
    corpus.write_dir(&out)?;
    for w in corpus.warnings() {
        eprintln!("warning: {w}");
    }
    ctx.note(&format!(
        "wrote {} examples (n = {}) to {}",
        corpus.len(),
        corpus.n(),
        out.display()
    ));
    Ok(())
}

fn train(ctx: &Ctx, a: TrainArgs) -> CliResult<()> {
    let c = &ctx.config;
    let corpus_dir = ctx.existing(a.corpus, "corpus")?;
    let seed: u64 = c.require(a.seed, "seed")?;
    let out: PathBuf = c.require(a.out, "out")?;
    let hp = TrainParams {
        seed,
        epochs: c.resolve(a.epochs, "epochs", Some(20))?.unwrap_or(20),
        ..TrainParams::default()
    };
    let corpus = Corpus::read_dir(&corpus_dir)?;
    ctx.note(&format!("training on {} examples", corpus.len()));
    let bundle = ModelBundle::train(&corpus, &hp, Exec::default())?;
    bundle.save(&out.join("bundle.json"))?;
    corpus.write_dir(&out.join("corpus"))?;
    let mut log = header(Some(seed), "training log");
    log.push_str("\nmodel,epoch,loss\n");
    for (name, l) in [("mlp", &bundle.mlp.log), ("cnn", &bundle.cnn.log), ("lstm", &bundle.lstm.log)] {
        for (e, loss) in l.epoch_losses.iter().enumerate() {
            let _ = writeln!(log, "{name},{},{loss:.6}", e + 1);
        }
    }
    let t = bundle.times();
    let _ = writeln!(log, "# seconds mlp={:.2} cnn={:.2} lstm={:.2}", t.mlp, t.cnn, t.lstm);
    emit(Some(&out), "train.log", &log)?;
    ctx.note(&format!("bundle written to {}", out.display()));
    Ok(())
}

fn generate(ctx: &Ctx, a: GenerateArgs) -> CliResult<()> {
    let c = &ctx.config;
    let seed: u64 = c.require(a.seed, "seed")?;
    let heuristic = c
        .resolve(a.heuristic, "heuristic", Some(HeuristicKind::GraphMatch))?
        .unwrap_or(HeuristicKind::GraphMatch);
    let n_best = c.resolve(a.n_best, "n_best", Some(1))?.unwrap_or(1);
    let out: Option<PathBuf> = c.resolve(a.out, "out", None)?;
    let (corpus, bundle) = load_models(ctx, a.bundle, a.corpus)?;
    let generator = Generator::new(&corpus, &bundle)?;
    let config = GenerationConfig {
        n_best,
        ..GenerationConfig::new(heuristic, seed)
    };
    let plan = generator.generate(&config)?;
    let head = header(Some(seed), &format!("heuristic={heuristic}"));
    let text = format!("{head}\n{}\n", plan.to_text());
    match out.as_deref() {
        Some(dir) => {
            emit(Some(dir), "plan.txt", &text)?;
            let scene = plan.execute()?;
            emit(Some(dir), "scene.txt", &format!("{head}\n{}", scene.to_text()))?;
            emit(Some(dir), "trace.txt", &format!("{head}\n{}", plan.trace_text()))?;
        }
        None => emit(None, "", &text)?,
    }
    Ok(())
}

/// The scene named by `--scene`, or the result of executing `--plan`, with
/// the seed from its header.
fn load_scene(ctx: &Ctx, a: &SourceArgs) -> CliResult<(Scene, Option<u64>)> {
    let (path, is_plan) = match (&a.scene, &a.plan) {
        (Some(p), None) => (p.clone(), false),
        (None, Some(p)) => (p.clone(), true),
        _ => match (ctx.config.get("scene"), ctx.config.get("plan")) {
            (Some(p), _) => (PathBuf::from(p), false),
            (None, Some(p)) => (PathBuf::from(p), true),
            _ => return Err(CliError::Usage("one of --scene or --plan is required".to_string())),
        },
    };
    if !path.exists() {
        return Err(CliError::Usage(format!("{} does not exist", path.display())));
    }
    let text = fs::read_to_string(&path).map_err(Error::from)?;
    let scene = if is_plan {
        Plan::from_text(&text)?.execute()?
    } else {
        Scene::from_text(&text)?
    };
    Ok((scene, header_seed(&text)))
}

fn render_cmd(ctx: &Ctx, a: SourceArgs) -> CliResult<()> {
    let (scene, seed) = load_scene(ctx, &a)?;
    let format: String = ctx.config.resolve(a.format.clone(), "format", Some("ascii".to_string()))?.unwrap_or_default();
    let fmt: RenderFormat = format.parse()?;
    let out: Option<PathBuf> = ctx.config.resolve(a.out, "out", None)?;
    let body = render(&scene, fmt)?;
    let head = header(seed, "render");
    match fmt {
        RenderFormat::Ascii => emit(out.as_deref(), "render.txt", &format!("{head}\n{body}")),
        RenderFormat::Svg => {
            let comment = format!("<!-- {} -->\n", head.trim_start_matches("# "));
            emit(out.as_deref(), "render.svg", &format!("{comment}{body}"))
        }
    }
}

fn score_cmd(ctx: &Ctx, a: SourceArgs) -> CliResult<()> {
    let (scene, seed) = load_scene(ctx, &a)?;
    let out: Option<PathBuf> = ctx.config.resolve(a.out, "out", None)?;
    let r = staircase_score(&scene)?;
    let join = |v: Vec<String>| v.join(",");
    let mut text = header(seed, "score");
    text.push('\n');
    let _ = writeln!(text, "score {:.4}", r.score);
    let _ = writeln!(text, "heights {}", join(r.heights.iter().map(|h| h.to_string()).collect()));
    let _ = writeln!(text, "run_length {}", r.run_length);
    let _ = writeln!(text, "run_blocks {}", r.run_blocks);
    let _ = writeln!(text, "flags {}", r.flags.join(";"));
    let dir = match pointing(&scene) {
        Some(Pointing::Left) => "left",
        Some(Pointing::Right) => "right",
        None => "none",
    };
    let _ = writeln!(text, "pointing {dir}");
    emit(out.as_deref(), "score.txt", &text)
}

fn bench_cmd(ctx: &Ctx, a: BenchArgs) -> CliResult<()> {
    let c = &ctx.config;
    let seed: u64 = c.require(a.seed, "seed")?;
    let runs = c.resolve(a.runs, "runs", Some(10))?.unwrap_or(10);
    let heuristic: Option<HeuristicKind> = c.resolve(a.heuristic, "heuristic", None)?;
    let out: Option<PathBuf> = c.resolve(a.out, "out", None)?;
    let (corpus, bundle) = load_models(ctx, a.bundle, a.corpus)?;
    let kinds: Vec<HeuristicKind> = match heuristic {
        Some(k) => vec![k],
        None => HeuristicKind::ALL.to_vec(),
    };
    ctx.note(&format!("{} generations", kinds.len() * runs));
    let report = bench(&corpus, &bundle, &kinds, runs, seed, Exec::default())?;
    let text = format!("{}\n{}", header(Some(seed), &format!("runs={runs}")), report.to_table());
    emit(out.as_deref(), "bench.txt", &text)
}

fn describe(rels: &RelationSet, stored: &RelationSet) -> CliResult<String> {
    let closed = closure(stored)?;
    let mut out = String::new();
    let mut derived = 0;
    for t in closed.iter() {
        let origin = if stored.contains(t) {
            "stored"
        } else {
            derived += 1;
            "derived"
        };
        let _ = writeln!(out, "  {:<8} {}", origin, t.token());
    }
    let _ = writeln!(out, "  {} stored, {derived} derived by closure", stored.len());
    if derived > 0 {
        let _ = writeln!(out, "  note: the stored set is not closure-complete");
    }
    if rels.len() != closed.len() {
        let _ = writeln!(out, "  note: {} relations in memory, {} after closure", rels.len(), closed.len());
    }
    Ok(out)
}

fn inspect(ctx: &Ctx, a: InspectArgs) -> CliResult<()> {
    let rel: Option<PathBuf> = ctx.config.resolve(a.rel, "rel", None)?;
    if let Some(path) = rel {
        if !path.exists() {
            return Err(CliError::Usage(format!("--rel: {} does not exist", path.display())));
        }
        let ex = parse_example(&fs::read_to_string(&path).map_err(Error::from)?)?;
        print!("{}\n{}", path.display(), describe(&ex.relations, &ex.stored_relations())?);
        return Ok(());
    }
    let dir = ctx.existing(a.corpus, "corpus")?;
    let corpus = Corpus::read_dir(&dir)?;
    let names = |v: Vec<String>| v.join(" ");
    println!("{} examples, n = {}", corpus.len(), corpus.n());
    println!("roster: {}", names(corpus.index.roster.iter().map(|b| b.to_string()).collect()));
    println!("labels: {}", names(corpus.index.relations.iter().map(|l| l.to_string()).collect()));
    println!("tokens: {}", corpus.index.vocab_size());
    for ex in &corpus.examples {
        println!("example {}", ex.id);
        print!("{}", describe(&ex.relations, &ex.stored_relations())?);
    }
    for w in corpus.warnings() {
        println!("warning: {w}");
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let ctx = Ctx {
        config,
        verbose: cli.verbose,
    };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Generate(a) => generate(&ctx, a),
        Command::Render(a) => render_cmd(&ctx, a),
        Command::Score(a) => score_cmd(&ctx, a),
        Command::Bench(a) => bench_cmd(&ctx, a),
        Command::Inspect(a) => inspect(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
