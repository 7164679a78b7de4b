//! Command-line entry point: one subcommand per pipeline stage, an
//! end-to-end `run`, standalone tokenizer and language-id tools, and the
//! synthetic fixture generator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use corpusprep::config::RunConfig;
use corpusprep::fixture::{generate_corpus, FixtureOptions};
use corpusprep::langid::{LangIdConfig, LangIdModel};
use corpusprep::model::Lang;
use corpusprep::pipeline::{PipeStage, Pipeline, PipelineError};
use corpusprep::report::ReportFormat;
use corpusprep::tokenizer::{train_bpe, BpeModel};

#[derive(Parser)]
#[command(
    name = "corpusprep",
    version,
    about = "Deterministic multilingual corpus preparation: ingest, identify, clean, dedup, tokenize, pack, split, report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every stage-running subcommand; values override the
/// config file.
#[derive(Args, Clone)]
struct StageArgs {
    /// Run configuration (TOML or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the manifest path.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Re-run stages even if the checkpoint marks them complete.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline (or up to --stage).
    Run {
        #[command(flatten)]
        stage_args: StageArgs,
        /// Stop after this stage (ingest, langid, clean, dedup, filter,
        /// tok, assemble, report).
        #[arg(long)]
        stage: Option<String>,
    },
    /// Read raw sources into canonical document shards.
    Ingest(StageArgs),
    /// Language identification (pipeline stage, or train/classify tools).
    Langid {
        #[command(subcommand)]
        cmd: Option<LangidCmd>,
        #[command(flatten)]
        stage_args: OptionalStageArgs,
    },
    /// Normalization and structural filtering stage.
    Clean(StageArgs),
    /// Exact and near deduplication stage.
    Dedup(StageArgs),
    /// PII scrubbing and quality filtering stage.
    Filter(StageArgs),
    /// Tokenizer (pipeline stage, or train/encode/count tools).
    Tok {
        #[command(subcommand)]
        cmd: Option<TokCmd>,
        #[command(flatten)]
        stage_args: OptionalStageArgs,
    },
    /// Packing, splits, caps, and optional rebalance.
    Assemble(StageArgs),
    /// Build reports; optionally verify them against the artifacts.
    Report {
        #[command(flatten)]
        stage_args: StageArgs,
        /// Recompute every reported number from the persisted shards.
        #[arg(long)]
        verify: bool,
        /// Print the report to stdout in this format (text, csv, json).
        #[arg(long)]
        format: Option<String>,
    },
    /// Generate the synthetic multilingual fixture corpus.
    Fixture {
        /// Directory to generate into.
        #[arg(long)]
        out: PathBuf,
        /// Approximate raw text size in MiB.
        #[arg(long, default_value_t = 50)]
        size_mb: u64,
        #[arg(long, default_value_t = 0xC0FFEE)]
        seed: u64,
        /// Also write a ready-to-run config.toml into the directory.
        #[arg(long, default_value_t = true)]
        write_config: bool,
    },
}

/// StageArgs with the config optional, for subcommands that also offer
/// tool modes without a pipeline config.
#[derive(Args, Clone)]
struct OptionalStageArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    force: bool,
}

impl OptionalStageArgs {
    fn require(&self, what: &'static str) -> Result<StageArgs, PipelineError> {
        let config = self.config.clone().ok_or(PipelineError::Stage {
            stage: what,
            message: "missing --config (stage mode) or a subcommand".to_string(),
        })?;
        Ok(StageArgs {
            config,
            manifest: self.manifest.clone(),
            out: self.out.clone(),
            seed: self.seed,
            workers: self.workers,
            force: self.force,
        })
    }
}

#[derive(Subcommand)]
enum LangidCmd {
    /// Train a model from per-language seed files (<iso>.txt).
    Train {
        #[arg(long)]
        seed_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify text (from --text or --file) and print the decision.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TokCmd {
    /// Train a BPE model on plain-text files (one document per line).
    Train {
        /// Input file or directory of files.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 65_536)]
        vocab_size: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode text and print the token ids.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Count tokens in text.
    Count {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        text: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

fn load_config(args: &StageArgs) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(m) = &args.manifest {
        cfg.manifest = m.clone();
    }
    if let Some(o) = &args.out {
        cfg.output_dir = Some(o.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

/// Runs `f` inside a rayon pool sized by the config's worker count.
fn with_workers<T>(
    workers: usize,
    f: impl FnOnce() -> Result<T, PipelineError> + Send,
) -> Result<T, PipelineError>
where
    T: Send,
{
    if workers == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Stage {
            stage: "setup",
            message: e.to_string(),
        })?;
    pool.install(f)
}

fn run_stage_command(args: &StageArgs, stage: PipeStage) -> Result<(), PipelineError> {
    let cfg = load_config(args)?;
    let workers = cfg.workers;
    let pipeline = Pipeline::new(cfg)?;
    with_workers(workers, || pipeline.run_stage(stage, args.force))?;
    Ok(())
}

fn read_text_arg(text: &Option<String>, file: &Option<PathBuf>) -> Result<String, PipelineError> {
    match (text, file) {
        (Some(t), None) => Ok(t.clone()),
        (None, Some(p)) => Ok(std::fs::read_to_string(p)?),
        _ => Err(PipelineError::Stage {
            stage: "cli",
            message: "provide exactly one of --text or --file".into(),
        }),
    }
}

fn real_main() -> Result<(), PipelineError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { stage_args, stage } => {
            let upto = match &stage {
                Some(name) => Some(PipeStage::parse(name).ok_or_else(|| PipelineError::Stage {
                    stage: "cli",
                    message: format!("unknown stage {name:?}"),
                })?),
                None => None,
            };
            let cfg = load_config(&stage_args)?;
            let workers = cfg.workers;
            let pipeline = Pipeline::new(cfg)?;
            let report = with_workers(workers, || pipeline.run(stage_args.force, upto))?;
            if let Some(report) = report {
                print!("{}", String::from_utf8_lossy(&corpusprep::report::render(
                    &report,
                    ReportFormat::Text,
                )));
            }
            Ok(())
        }
        Command::Ingest(args) => run_stage_command(&args, PipeStage::Ingest),
        Command::Clean(args) => run_stage_command(&args, PipeStage::Clean),
        Command::Dedup(args) => run_stage_command(&args, PipeStage::Dedup),
        Command::Filter(args) => run_stage_command(&args, PipeStage::Filter),
        Command::Assemble(args) => run_stage_command(&args, PipeStage::Assemble),
        Command::Langid { cmd, stage_args } => match (cmd, stage_args) {
            (Some(LangidCmd::Train { seed_dir, out }), _) => {
                let mut samples = Vec::new();
                for lang in Lang::ALL {
                    let path = seed_dir.join(format!("{}.txt", lang.iso_code()));
                    if let Ok(body) = std::fs::read_to_string(&path) {
                        for line in body.lines().filter(|l| !l.trim().is_empty()) {
                            samples.push((lang, line.to_string()));
                        }
                    }
                }
                let model = LangIdModel::train(samples, LangIdConfig::default())
                    .map_err(|e| PipelineError::Stage {
                        stage: "langid",
                        message: e.to_string(),
                    })?;
                model.save(&out).map_err(|e| PipelineError::Stage {
                    stage: "langid",
                    message: e.to_string(),
                })?;
                eprintln!("trained on {} samples -> {}", model.trained_on(), out.display());
                Ok(())
            }
            (Some(LangidCmd::Classify { model, text, file }), _) => {
                let model = LangIdModel::load(&model).map_err(|e| PipelineError::Stage {
                    stage: "langid",
                    message: e.to_string(),
                })?;
                let text = read_text_arg(&text, &file)?;
                match model.classify(&text) {
                    Ok(decision) => {
                        match decision.lang {
                            Some(lang) => println!("{}\t{:.4}", lang.iso_code(), decision.confidence),
                            None => println!("none\t{:.4}", decision.confidence),
                        }
                        Ok(())
                    }
                    Err(e) => Err(PipelineError::Stage {
                        stage: "langid",
                        message: e.to_string(),
                    }),
                }
            }
            (None, args) => run_stage_command(&args.require("langid")?, PipeStage::LangId),
        },
        Command::Tok { cmd, stage_args } => match (cmd, stage_args) {
            (Some(TokCmd::Train { input, vocab_size, out }), _) => {
                let files = if input.is_dir() {
                    let mut v: Vec<PathBuf> = std::fs::read_dir(&input)?
                        .filter_map(|e| e.ok().map(|e| e.path()))
                        .filter(|p| p.is_file())
                        .collect();
                    v.sort();
                    v
                } else {
                    vec![input]
                };
                let mut texts = Vec::new();
                for f in files {
                    texts.push(std::fs::read_to_string(f)?);
                }
                let model = train_bpe(texts.iter().map(|t| t.as_str()), vocab_size)
                    .map_err(|e| PipelineError::Stage {
                        stage: "tok",
                        message: e.to_string(),
                    })?;
                model.save(&out).map_err(|e| PipelineError::Stage {
                    stage: "tok",
                    message: e.to_string(),
                })?;
                eprintln!("vocab {} -> {}", model.vocab_size(), out.display());
                Ok(())
            }
            (Some(TokCmd::Encode { model, text, file }), _) => {
                let model = BpeModel::load(&model).map_err(|e| PipelineError::Stage {
                    stage: "tok",
                    message: e.to_string(),
                })?;
                let text = read_text_arg(&text, &file)?;
                let ids = model.encode(&text);
                println!(
                    "{}",
                    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
                );
                Ok(())
            }
            (Some(TokCmd::Count { model, text, file }), _) => {
                let model = BpeModel::load(&model).map_err(|e| PipelineError::Stage {
                    stage: "tok",
                    message: e.to_string(),
                })?;
                let text = read_text_arg(&text, &file)?;
                println!("{}", model.count_tokens(&text));
                Ok(())
            }
            (None, args) => run_stage_command(&args.require("tok")?, PipeStage::Tok),
        },
        Command::Report {
            stage_args,
            verify,
            format,
        } => {
            let cfg = load_config(&stage_args)?;
            let workers = cfg.workers;
            let pipeline = Pipeline::new(cfg)?;
            let report =
                with_workers(workers, || pipeline.run_stage(PipeStage::Report, stage_args.force))?;
            if verify {
                pipeline.verify()?;
                eprintln!("verification passed: report matches persisted artifacts exactly");
            }
            if let Some(format) = format {
                let format: ReportFormat = format.parse().map_err(|e| PipelineError::Stage {
                    stage: "report",
                    message: format!("{e}"),
                })?;
                let report = match report {
                    Some(r) => r,
                    None => serde_json::from_str(&std::fs::read_to_string(
                        pipeline.output_dir().join("reports/run_report.json"),
                    )?)
                    .map_err(|e| PipelineError::Stage {
                        stage: "report",
                        message: e.to_string(),
                    })?,
                };
                print!("{}", String::from_utf8_lossy(&corpusprep::report::render(&report, format)));
            }
            Ok(())
        }
        Command::Fixture {
            out,
            size_mb,
            seed,
            write_config,
        } => {
            let opts = FixtureOptions {
                seed,
                total_bytes: size_mb * 1024 * 1024,
                ..FixtureOptions::default()
            };
            let summary = generate_corpus(&out, &opts)?;
            if write_config {
                let config = format!(
                    "manifest = \"{}\"\noutput_dir = \"{}\"\nseed = {}\nvocab_size = 65536\n\n[langid]\nseed_dir = \"{}\"\n",
                    out.join("manifest.json").display(),
                    out.join("out").display(),
                    seed,
                    summary.seed_dir.display(),
                );
                std::fs::write(out.join("config.toml"), config)?;
            }
            eprintln!(
                "generated {} docs (~{} MiB) across 3 sources under {}",
                summary.total_docs,
                summary.total_bytes / (1024 * 1024),
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                PipelineError::Config(_)
                | PipelineError::Manifest(_)
                | PipelineError::StaleCheckpoint { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
