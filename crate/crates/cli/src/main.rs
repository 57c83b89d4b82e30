use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use svsprep_cli::commands::{adapt, eval, g2p, plan, pseudo, transcode, write_output};
use svsprep_cli::config::{ConfigFile, Overrides, PipelineConfig, Strategy};
use svsprep_cli::manifest::load_manifest;
use svsprep_cli::{exit_code, read_input, EXIT_INPUT, EXIT_OK};

/// Data preparation and evaluation for bilingual singing voice synthesis.
#[derive(Parser)]
#[command(name = "svsprep", version)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel utterances for batch commands.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Annotation adaptation: average or proportional.
    #[arg(long, global = true)]
    strategy: Option<Strategy>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Lyrics to CMU phones and language tokens.
    G2p {
        /// Lyrics; read from --file or stdin when absent.
        text: Vec<String>,
        #[arg(short, long, conflicts_with = "text")]
        file: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Syllable-level score JSON to phone-level lists.
    Transcode {
        score: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Split Pinyin-unit annotations into CMU phones.
    Adapt {
        annotation: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Directory of <utt_id>.TextGrid alignments.
        #[arg(long)]
        alignments: Option<PathBuf>,
        /// JSON map from unit to duration weights.
        #[arg(long)]
        ratios: Option<PathBuf>,
    },
    /// Resynthesize speech on melodies.
    Pseudo {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Use this melody for every file instead of a seeded choice.
        #[arg(long)]
        melody: Option<String>,
        /// Exit 0 even when some files fail.
        #[arg(long)]
        keep_going: bool,
    },
    /// Pair source recordings with target singers and their transpositions.
    PlanSvc {
        sources: PathBuf,
        targets: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Objective metrics between reference and hypothesis audio.
    Eval {
        reference: PathBuf,
        hypothesis: PathBuf,
        /// Receives report.json and report.txt.
        #[arg(long)]
        out_dir: PathBuf,
        /// Exit 0 even when some utterances fail.
        #[arg(long)]
        keep_going: bool,
    },
}

fn emit(out: &Output, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => write_output(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let flags = Overrides { seed: cli.seed, workers: cli.workers, strategy: cli.strategy };
    PipelineConfig::resolve(file, &flags)
}

fn failures(count: usize, keep_going: bool, what: &str) -> i32 {
    if count == 0 {
        return EXIT_OK;
    }
    log::warn!("{count} {what} failed");
    if keep_going {
        EXIT_OK
    } else {
        EXIT_INPUT
    }
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = config(&cli)?;
    log::debug!("configuration: {cfg:?}");
    match &cli.command {
        Command::G2p { text, file, out } => {
            let input = match (file, text.is_empty()) {
                (Some(path), _) => read_input(path)?,
                (None, false) => text.join(" "),
                (None, true) => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
                    s
                }
            };
            emit(out, &g2p::run(&input, &cfg.lexicon()?)?)?;
        }
        Command::Transcode { score, out } => {
            let t = transcode::run(&read_input(score)?, &cfg.lexicon()?)?;
            emit(out, &(serde_json::to_string_pretty(&t)? + "\n"))?;
        }
        Command::Adapt { annotation, output, alignments, ratios } => {
            let sources = adapt::RatioSources { alignments: alignments.as_deref(), ratios: ratios.as_deref() };
            let result = adapt::run(&read_input(annotation)?, cfg.strategy, sources, &cfg.lexicon()?)?;
            write_output(output, result.to_json()?.as_bytes())?;
            print!("{}", result.report_table(cfg.strategy));
            if result.report.iter().any(|r| !r.conserved) {
                anyhow::bail!("duration conservation violated; see report");
            }
        }
        Command::Pseudo { manifest, out_dir, melody, keep_going } => {
            let entries = load_manifest(manifest)?;
            let summary = pseudo::run(&entries, out_dir, melody.as_deref(), &cfg)?;
            eprintln!("{} generated, {} failed; summary in {}", summary.processed, summary.failed, out_dir.join(pseudo::SUMMARY_FILE).display());
            return Ok(failures(summary.failed, *keep_going, "files"));
        }
        Command::PlanSvc { sources, targets, out } => {
            let jobs = plan::run(&read_input(sources)?, &read_input(targets)?)?;
            log::info!("{} jobs", jobs.jobs.len());
            emit(out, &jobs.to_json()?)?;
        }
        Command::Eval { reference, hypothesis, out_dir, keep_going } => {
            let report = eval::run(&load_manifest(reference)?, &load_manifest(hypothesis)?, &cfg)?;
            write_output(&out_dir.join(eval::REPORT_JSON), report.to_json().as_bytes())?;
            let table = report.to_table();
            write_output(&out_dir.join(eval::REPORT_TABLE), table.as_bytes())?;
            print!("{table}");
            let failed = report.utterances.iter().filter(|u| u.error.is_some()).count();
            return Ok(failures(failed, *keep_going, "utterances"));
        }
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
