//! `apppop`: staged pipeline from app source snapshots to popularity models.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apppop_core::config::{parse_task, RunConfig, Target};
use apppop_core::fdroid::fetch_fdroid_index;
use apppop_core::pipeline::{render_table, Pipeline};
use apppop_core::synth::{write_corpus, SynthOptions};
use apppop_core::CoreError;
use apppop_model::select::FeatureSet;
use apppop_model::Task;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "apppop", version, about = "Predict app popularity from source code metrics")]
struct Cli {
    #[command(flatten)]
    opts: GlobalOpts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Default)]
struct GlobalOpts {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus root: one directory per app, each with an app.json.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Output directory for stage artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Restrict to one feature set: size, handpicked or voting.
    #[arg(long, global = true, value_parser = parse_feature_set)]
    feature_set: Option<FeatureSet>,
    /// Restrict to one target: rating, dpy or log_dpy.
    #[arg(long, global = true, value_parser = parse_target)]
    target: Option<Target>,
    /// Restrict to one task: classification or regression.
    #[arg(long, global = true, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse, measure and aggregate every app into features.csv.
    Extract,
    /// Compute popularity labels and thresholds.
    Label,
    /// Choose features per feature set, target and task.
    Select,
    /// Fit every configured model on the full data.
    Train,
    /// Leave-one-out evaluation of every configured model.
    Evaluate,
    /// Render report.csv and report.txt from report.json.
    Report,
    /// All stages in order.
    Run,
    /// Download an F-Droid index and list its packages.
    FetchIndex {
        #[arg(long, default_value = "https://f-droid.org/repo/index-v1.json")]
        url: String,
        /// Where to store the raw index.
        #[arg(long)]
        file: PathBuf,
    },
    /// Write a synthetic corpus for trying the pipeline.
    Synth {
        /// Target directory.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 24)]
        apps: usize,
        /// Skip the three apps the filters are meant to reject.
        #[arg(long)]
        no_rejects: bool,
    },
}

fn parse_feature_set(s: &str) -> Result<FeatureSet, String> {
    s.parse::<FeatureSet>()
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse()
}

fn load_config(o: &GlobalOpts) -> Result<RunConfig, CoreError> {
    let mut cfg = match &o.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if o.corpus.is_some() {
        cfg.corpus.clone_from(&o.corpus);
    }
    if o.out.is_some() {
        cfg.out.clone_from(&o.out);
    }
    if let Some(fs) = o.feature_set {
        cfg.selection.feature_sets = vec![fs];
    }
    if let Some(t) = o.target {
        cfg.evaluation.targets = vec![t];
    }
    if let Some(t) = o.task {
        cfg.evaluation.tasks = vec![t];
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(j) = o.jobs {
        cfg.jobs = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CoreError> {
    p.as_deref().ok_or_else(|| CoreError::Config(format!("no {what} given; pass --{what} or set `{what}` in the config")))
}

fn run(cli: Cli) -> Result<(), CoreError> {
    match cli.cmd {
        Command::FetchIndex { url, file } => {
            let s = fetch_fdroid_index(&url, &file)?;
            let with_source = s.packages.iter().filter(|p| p.source_code.is_some()).count();
            println!("{} packages ({with_source} with a source repository) -> {}", s.packages.len(), file.display());
            return Ok(());
        }
        Command::Synth { dir, apps, no_rejects } => {
            let seed = cli.opts.seed.unwrap_or(SynthOptions::default().seed);
            let written = write_corpus(&dir, &SynthOptions { apps, seed, with_rejects: !no_rejects })?;
            println!("wrote {} apps to {}", written.len(), dir.display());
            return Ok(());
        }
        _ => {}
    }

    let cfg = load_config(&cli.opts)?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(|e| CoreError::Internal(e.to_string()))?;
    }
    let out = required(&cfg.out, "out")?.to_path_buf();
    let corpus = cfg.corpus.clone();
    let p = Pipeline::new(cfg, &out)?;
    log::info!("config hash {}", p.config_hash());

    match cli.cmd {
        Command::Extract => {
            let s = p.extract(required(&corpus, "corpus")?)?;
            println!(
                "{} apps, {} features ({} analysed, {} reused, {} skipped)",
                s.apps, s.features, s.analysed, s.reused, s.skipped.len()
            );
        }
        Command::Label => {
            let rows = p.label()?;
            println!("labelled {} apps", rows.len());
        }
        Command::Select => {
            let sel = p.select()?;
            for e in &sel.entries {
                println!("{} {} {}: {} features", e.feature_set, e.target, e.task, e.features.len());
            }
        }
        Command::Train => {
            let idx = p.train()?;
            println!("trained {} models", idx.entries.len());
        }
        Command::Evaluate => {
            let r = p.evaluate()?;
            println!("evaluated {} models", r.results.len());
        }
        Command::Report => {
            let rows = p.report()?;
            print!("{}", render_table(&rows, p.config_hash()));
        }
        Command::Run => {
            let rows = p.run(required(&corpus, "corpus")?)?;
            print!("{}", render_table(&rows, p.config_hash()));
        }
        Command::FetchIndex { .. } | Command::Synth { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
