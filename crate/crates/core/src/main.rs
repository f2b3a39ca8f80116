use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use i2v_search::global_query::GlobalQueryConfig;
use i2v_search::pipeline::{
    build_global, build_local, fuse_runs, load_global_inputs, load_local_inputs,
    run_global_queries, run_local_queries, train_codebooks,
};
use i2v_search::synth::{generate, SynthConfig};
use i2v_search::{
    evaluate, Channel, CodebookSet, EngineConfig, Error, GlobalIndex, GroundTruth, LocalIndex,
    Result, RunFile,
};

#[derive(Parser)]
#[command(
    name = "i2v",
    version,
    about = "Image-to-video retrieval with local and global channels"
)]
struct Cli {
    /// key = value file of engine parameters; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores); output does not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the codebook bundle from reference features
    Train(TrainArgs),
    /// Build the local inverted file
    IndexLocal(IndexArgs),
    /// Build the global signature index
    IndexGlobal(IndexArgs),
    /// Rank videos for local query descriptors
    QueryLocal(QueryLocalArgs),
    /// Rank videos for global query features
    QueryGlobal(QueryGlobalArgs),
    /// Fuse a local and a global run
    Fuse(FuseArgs),
    /// Score a run against ground truth
    Eval(EvalArgs),
    /// Write a synthetic corpus with planted queries
    Synth(SynthArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Directory holding .ldsc/.txt and .gdsc files
    #[arg(long, required_unless_present_all = ["local", "global"])]
    features: Option<PathBuf>,
    /// Local descriptor file or directory (instead of --features)
    #[arg(long)]
    local: Option<PathBuf>,
    /// Global feature file or directory (instead of --features)
    #[arg(long)]
    global: Option<PathBuf>,
    #[arg(long)]
    d_bow: Option<usize>,
    #[arg(long)]
    d_fk: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IndexArgs {
    /// Feature file or directory
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    codebooks: PathBuf,
    #[arg(long)]
    prune_fraction: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryLocalArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    codebooks: PathBuf,
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    tau_pq: Option<f32>,
    #[arg(long)]
    top_n: Option<usize>,
    /// Compare raw query residuals with reference centers
    #[arg(long)]
    asymmetric: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryGlobalArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    codebooks: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Number of nearest binary clusters to probe
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
    /// Score every signature instead of probing clusters
    #[arg(long)]
    brute_force: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    #[arg(long)]
    local: PathBuf,
    #[arg(long)]
    global: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    hold: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 100)]
    cutoff: usize,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    videos: usize,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 20)]
    queries: usize,
    #[arg(long, default_value_t = 20)]
    distractors: usize,
    #[arg(long, default_value_t = 30)]
    global_features: usize,
    /// Largest random query rotation, radians
    #[arg(long, default_value_t = 0.6)]
    max_rotation: f32,
    /// Largest random query log2 scale change
    #[arg(long, default_value_t = 0.4)]
    max_log_scale: f32,
    #[arg(long, default_value_t = 30.0)]
    max_translation: f32,
    /// Fixed query rotation in radians (with --scale)
    #[arg(long, requires = "scale")]
    rotation: Option<f32>,
    /// Fixed query scale factor (with --rotation)
    #[arg(long, requires = "rotation")]
    scale: Option<f32>,
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

fn load_codebooks(path: &Path) -> Result<CodebookSet> {
    CodebookSet::load(path)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => EngineConfig::load(p)?,
        None => EngineConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("threads: {e}")))?;
    }
    match cli.command {
        Command::Train(a) => {
            set(&mut cfg.d_bow, a.d_bow);
            set(&mut cfg.d_fk, a.d_fk);
            let local_src = a
                .local
                .as_ref()
                .or(a.features.as_ref())
                .expect("clap enforces");
            let global_src = a
                .global
                .as_ref()
                .or(a.features.as_ref())
                .expect("clap enforces");
            let local = load_local_inputs(local_src)?;
            let global = load_global_inputs(global_src)?;
            let cb = train_codebooks(&local, &global, &cfg)?;
            cb.save(&a.out)
        }
        Command::IndexLocal(a) => {
            set(&mut cfg.prune_fraction, a.prune_fraction);
            let cb = load_codebooks(&a.codebooks)?;
            let frames = load_local_inputs(&a.features)?;
            build_local(&frames, &cb, &cfg)?.save(&a.out)
        }
        Command::IndexGlobal(a) => {
            let cb = load_codebooks(&a.codebooks)?;
            let frames = load_global_inputs(&a.features)?;
            build_global(&frames, &cb)?.save(&a.out)
        }
        Command::QueryLocal(a) => {
            set(&mut cfg.tau_pq, a.tau_pq);
            set(&mut cfg.top_n, a.top_n);
            if a.asymmetric {
                cfg.score_mode = i2v_search::local_query::ScoreMode::Asymmetric;
            }
            let cb = load_codebooks(&a.codebooks)?;
            let index = LocalIndex::load(&a.index)?;
            let queries = load_local_inputs(&a.query)?;
            run_local_queries(&queries, &index, &cb, &cfg)?.save(&a.out)
        }
        Command::QueryGlobal(a) => {
            set(&mut cfg.k_probe, a.k);
            set(&mut cfg.top_n, a.top_n);
            let cb = load_codebooks(&a.codebooks)?;
            let index = GlobalIndex::load(&a.index)?;
            let queries = load_global_inputs(&a.query)?;
            let qcfg = GlobalQueryConfig {
                brute_force: a.brute_force,
                ..cfg.global_query()
            };
            run_global_queries(&queries, &index, &cb, &qcfg)?.save(&a.out)
        }
        Command::Fuse(a) => {
            set(&mut cfg.epsilon, a.epsilon);
            set(&mut cfg.warmup, a.warmup);
            set(&mut cfg.hold, a.hold);
            set(&mut cfg.window, a.window);
            let local = RunFile::load(&a.local, Channel::Local)?;
            let global = RunFile::load(&a.global, Channel::Global)?;
            fuse_runs(&local, &global, &cfg.fusion())?.save(&a.out)
        }
        Command::Eval(a) => {
            let run = RunFile::load(&a.run, Channel::Fused)?;
            let gt = GroundTruth::load(&a.gt)?;
            let r = evaluate(&run, &gt, a.cutoff)?;
            println!("mAP={:.6}", r.map);
            println!("mAP@1={:.6}", r.map_at_1);
            println!("queries={}", r.queries);
            Ok(())
        }
        Command::Synth(a) => {
            let synth = SynthConfig {
                videos: a.videos,
                frames_per_video: a.frames,
                queries: a.queries,
                distractors: a.distractors,
                global_features: a.global_features,
                max_rotation: a.max_rotation,
                max_log_scale: a.max_log_scale,
                max_translation: a.max_translation,
                fixed_transform: a.rotation.zip(a.scale.map(f32::log2)),
                frame: cfg.frame(),
                seed: cfg.seed,
                ..Default::default()
            };
            generate(&synth)?.save(&a.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
