//! The `midsmith` command line.
//!
//! Exit codes: 0 on success, 1 on a usage error (the synopsis is printed),
//! 2 when the command itself fails.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use midsmith_core::{
    load_dataset, save_dataset, ContentAddress, ImageStore, Language, Modality, ModalityScenario, UserTurnInput,
    VocabularySet,
};
use midsmith_engine::Engine;
use midsmith_evalbench::{read_logs, render_report_table, score_logs, EvalOptions, EvalOutcome};
use midsmith_forge::export::{read_jsonl, write_jsonl};
use midsmith_forge::{
    build_correction_dataset, build_meta_prompt, enumerate_compositions, export_training_mix, filter_intent_mismatch,
    mix_pseudo_multiturn, recaption_corpus, select_icl_samples, CaptionedPair, Composition, CorrectionInput,
    IclSample, InstructionSample, MetaPromptSpec, TrainingParts,
};

use crate::api::EvalRequest;
use crate::config::AppConfig;
use crate::jobs::JobRunner;

#[derive(Debug, Parser)]
#[command(name = "midsmith", version, about = "Multi-turn text and image dialogue: engine, evaluation and data tools")]
struct Cli {
    /// JSON config file; MIDSMITH_* environment variables override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long, value_name = "HOST:PORT")]
        listen: Option<String>,
    },
    /// Talk to the engine in the terminal. `/image PATH text` attaches an
    /// image, `/quit` leaves.
    Chat {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        two_step: bool,
    },
    /// Run the benchmark and write logs and reports.
    Eval(EvalArgs),
    /// Offline data pipelines.
    #[command(subcommand)]
    Forge(ForgeCommand),
    /// Rebuild the modality-switching report from recorded logs.
    Report {
        #[arg(long = "in", value_name = "LOGS")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    dataset: PathBuf,
    /// Score an existing logs.jsonl instead of running inference.
    #[arg(long, value_name = "LOGS")]
    score_only: Option<PathBuf>,
    /// Also score generation coherence with the configured VQA backend.
    #[arg(long)]
    coherence: bool,
    #[arg(long)]
    two_step: bool,
    /// Output directory; defaults to `<report_dir>/<dataset name>`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum ForgeCommand {
    /// Print every per-turn modality composition, one per line.
    Compositions {
        #[arg(long, default_value_t = 3)]
        turns: usize,
    },
    /// Print the meta prompt for one composition.
    Meta {
        /// Comma-separated scenario codes, e.g. "T->I,IT->I,IT->T".
        #[arg(long, allow_hyphen_values = true)]
        composition: String,
        #[arg(long)]
        topic: String,
        #[arg(long)]
        edit_type: Option<String>,
        #[arg(long, default_value = "en")]
        language: Language,
        /// JSONL of captioned pairs to draw in-context examples from.
        #[arg(long, value_name = "JSONL")]
        icl: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        icl_count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Vocabulary file; defaults to the configured one.
        #[arg(long, value_name = "PATH")]
        vocab: Option<PathBuf>,
    },
    /// Shuffle single-turn samples into pseudo multi-turn conversations.
    Mix {
        #[arg(long, value_name = "JSONL")]
        d_o: PathBuf,
        /// Prompt-generation samples; defaults to the bundled seed examples.
        #[arg(long, value_name = "JSONL")]
        d_p: Option<PathBuf>,
        #[arg(long)]
        conversations: usize,
        #[arg(long, default_value_t = 2)]
        turns: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
    },
    /// Caption every image in a directory with the chat backend.
    Recaption {
        #[arg(long, value_name = "DIR")]
        images: PathBuf,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long, value_name = "JSONL")]
        failures: Option<PathBuf>,
    },
    /// Drop records whose instructions do not imply the labelled modality.
    Filter {
        #[arg(long, value_name = "PATH")]
        dataset: PathBuf,
        #[arg(long, value_name = "JSONL")]
        kept: PathBuf,
        #[arg(long, value_name = "JSONL")]
        rejected: PathBuf,
        #[arg(long, value_name = "JSONL")]
        undecided: Option<PathBuf>,
    },
    /// Label (question, output) pairs with the teacher.
    Corrections {
        #[arg(long = "in", value_name = "JSONL")]
        input: PathBuf,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
        #[arg(long, value_name = "JSONL")]
        quarantine: Option<PathBuf>,
        #[arg(long, value_name = "CSV")]
        review_csv: Option<PathBuf>,
    },
    /// Export a training mix with a per-source manifest.
    ExportMix {
        #[arg(long, value_name = "JSONL")]
        d_o: PathBuf,
        #[arg(long, value_name = "JSONL")]
        d_p: PathBuf,
        #[arg(long, value_name = "JSONL")]
        d_pm: PathBuf,
        /// Benchmark training records (dataset JSONL).
        #[arg(long, value_name = "PATH")]
        dialogben: Option<PathBuf>,
        /// Include the benchmark training split (D_B instead of D_A).
        #[arg(long, requires = "dialogben")]
        with_dialogben: bool,
        #[arg(long, value_name = "JSONL")]
        out: PathBuf,
    },
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, input: &mut dyn BufRead) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start runtime: {e}");
            return 2;
        }
    };
    match runtime.block_on(dispatch(cli, out, input)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

async fn dispatch(cli: Cli, out: &mut dyn Write, input: &mut dyn BufRead) -> anyhow::Result<()> {
    // Pure commands run without loading any config.
    if let Command::Forge(ForgeCommand::Compositions { turns }) = &cli.command {
        for c in enumerate_compositions(*turns)? {
            writeln!(out, "{c}")?;
        }
        return Ok(());
    }
    let config = AppConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { listen } => {
            let mut config = config;
            if let Some(l) = listen {
                config.listen_addr = l;
            }
            crate::serve(config).await?;
        }
        Command::Chat { seed, two_step } => chat(config, seed, two_step, out, input).await?,
        Command::Eval(args) => eval(config, args, out).await?,
        Command::Forge(cmd) => forge(config, cmd, out).await?,
        Command::Report { input, out: dir } => {
            let run = read_logs(&input).with_context(|| format!("reading {}", input.display()))?;
            let outcome = score_logs(run, &[], None, EvalOptions::default(), &dir).await?;
            print_outcome(out, &outcome, &dir)?;
        }
    }
    Ok(())
}

fn open_store(config: &AppConfig) -> anyhow::Result<ImageStore> {
    config.ensure_dirs()?;
    ImageStore::open_dir(&config.image_store_dir)
        .with_context(|| format!("opening image store {}", config.image_store_dir.display()))
}

fn print_outcome(out: &mut dyn Write, outcome: &EvalOutcome, dir: &Path) -> anyhow::Result<()> {
    write!(out, "{}", render_report_table(&outcome.ms, outcome.coherence.as_ref()))?;
    writeln!(out, "report written to {}", dir.display())?;
    Ok(())
}

async fn eval(mut config: AppConfig, args: EvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if let Some(p) = args.parallelism {
        if p == 0 {
            bail!("--parallelism must be at least 1");
        }
        config.parallelism = p;
    }
    let dir = match args.out {
        Some(d) => d,
        None => {
            let stem = args.dataset.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or("eval".into());
            config.report_dir.join(stem)
        }
    };
    let store = open_store(&config)?;
    let req = EvalRequest { dataset_path: args.dataset, coherence: args.coherence, two_step: args.two_step };
    let runner = JobRunner::new(config.into(), store);
    let outcome = runner.run(&req, args.score_only.as_deref(), &dir).await?;
    for f in &outcome.run.failures {
        writeln!(out, "conversation {} failed at round {}: {} ({})", f.conversation_id, f.round, f.error, f.kind)?;
    }
    print_outcome(out, &outcome, &dir)
}

async fn chat(
    config: AppConfig,
    seed: Option<u64>,
    two_step: bool,
    out: &mut dyn Write,
    input: &mut dyn BufRead,
) -> anyhow::Result<()> {
    let store = open_store(&config)?;
    let mut engine_config = config.engine.clone();
    engine_config.two_step |= two_step;
    let engine = Engine::from_config(engine_config, &store)?;
    let mut session = engine.new_session(seed);
    writeln!(out, "session {} seed {}", session.id(), session.seed())?;
    let mut line = String::new();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            break;
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == "/quit" {
            break;
        }
        let user = match text.strip_prefix("/image ") {
            Some(rest) => {
                let (path, instruction) = rest.trim().split_once(' ').unwrap_or((rest.trim(), ""));
                let bytes = match fs::read(path) {
                    Ok(b) => b,
                    Err(e) => {
                        writeln!(out, "cannot read {path}: {e}")?;
                        continue;
                    }
                };
                UserTurnInput::with_image(instruction, store.put(&bytes)?.content_address)
            }
            None => UserTurnInput::text(text),
        };
        match engine.step(&mut session, user).await {
            Ok(r) if r.modality == Modality::Image => {
                let addr = r.image.map(|i| i.content_address.to_string()).unwrap_or_default();
                writeln!(out, "[image {addr}] {}", r.text)?;
            }
            Ok(r) => writeln!(out, "{}", r.text)?,
            // A failed turn leaves the session untouched; keep going.
            Err(e) => writeln!(out, "turn failed ({}): {e}", e.kind())?,
        }
    }
    Ok(())
}

fn parse_composition(s: &str) -> anyhow::Result<Composition> {
    let turns = s
        .split(',')
        .map(|c| c.trim().parse::<ModalityScenario>().map_err(|e| anyhow::anyhow!("{e:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(Composition(turns))
}

/// Regular files of `dir` in name order, skipping hidden ones.
fn image_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        if entry.file_type()?.is_file() && !entry.file_name().to_string_lossy().starts_with('.') {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

async fn forge(config: AppConfig, cmd: ForgeCommand, out: &mut dyn Write) -> anyhow::Result<()> {
    let templates = &config.engine.templates;
    let parallelism = config.parallelism;
    match cmd {
        ForgeCommand::Compositions { .. } => unreachable!("handled before config load"),
        ForgeCommand::Meta { composition, topic, edit_type, language, icl, icl_count, seed, vocab } => {
            let vocab_path = vocab.unwrap_or_else(|| config.vocab_file.clone());
            let vocab = VocabularySet::load(&vocab_path).with_context(|| format!("loading {}", vocab_path.display()))?;
            let icl_samples = match icl {
                Some(p) => {
                    let corpus: Vec<CaptionedPair> = read_jsonl(&p)?;
                    select_icl_samples(&corpus, icl_count, seed)?.iter().map(IclSample::from_captioned).collect()
                }
                None => Vec::new(),
            };
            let spec = MetaPromptSpec { composition: parse_composition(&composition)?, topic, edit_type, language, icl_samples };
            writeln!(out, "{}", build_meta_prompt(&spec, templates, &vocab)?)?;
        }
        ForgeCommand::Mix { d_o, d_p, conversations, turns, seed, out: path } => {
            let d_o: Vec<InstructionSample> = read_jsonl(&d_o)?;
            let d_p = match d_p {
                Some(p) => read_jsonl(&p)?,
                None => midsmith_forge::dp_seed_examples(),
            };
            let mixed = mix_pseudo_multiturn(&d_o, &d_p, conversations, turns, seed)?;
            write_jsonl(&mixed, &path)?;
            writeln!(out, "wrote {} conversations to {}", mixed.len(), path.display())?;
        }
        ForgeCommand::Recaption { images, out: path, prompt, failures } => {
            let store = open_store(&config)?;
            let mut addrs: Vec<ContentAddress> = Vec::new();
            for f in image_files(&images)? {
                let bytes = fs::read(&f).with_context(|| format!("reading {}", f.display()))?;
                addrs.push(store.put(&bytes)?.content_address);
            }
            let chat = config.engine.chat.build_chat(&store)?;
            let prompt = prompt.unwrap_or_else(|| templates.caption_prompt.clone());
            let outcome = recaption_corpus(&addrs, chat.as_ref(), &prompt, parallelism).await;
            write_jsonl(&outcome.pairs, &path)?;
            if let Some(f) = failures {
                write_jsonl(&outcome.failures, f)?;
            }
            writeln!(out, "captioned {} images, {} failed", outcome.pairs.len(), outcome.failures.len())?;
        }
        ForgeCommand::Filter { dataset, kept, rejected, undecided } => {
            let records = load_dataset(&dataset).with_context(|| format!("loading {}", dataset.display()))?;
            let store = open_store(&config)?;
            let judge = config.teacher.build_chat(&store)?;
            let outcome = filter_intent_mismatch(&records, judge.as_ref(), templates, parallelism).await;
            save_dataset(&outcome.kept, &kept)?;
            write_jsonl(&outcome.rejected, &rejected)?;
            if let Some(u) = undecided {
                write_jsonl(&outcome.undecided, u)?;
            }
            writeln!(
                out,
                "kept {} rejected {} undecided {}",
                outcome.kept.len(),
                outcome.rejected.len(),
                outcome.undecided.len()
            )?;
        }
        ForgeCommand::Corrections { input, out: path, quarantine, review_csv } => {
            let inputs: Vec<CorrectionInput> = read_jsonl(&input)?;
            let store = open_store(&config)?;
            let teacher = config.teacher.build_chat(&store)?;
            let outcome = build_correction_dataset(&inputs, teacher.as_ref(), templates, parallelism).await;
            write_jsonl(&outcome.samples, &path)?;
            if let Some(q) = quarantine {
                write_jsonl(&outcome.quarantine, q)?;
            }
            if let Some(csv) = review_csv {
                let file = fs::File::create(&csv).with_context(|| format!("creating {}", csv.display()))?;
                midsmith_forge::correction::write_review_csv(&outcome.samples, file)?;
            }
            writeln!(out, "labelled {}, quarantined {}", outcome.samples.len(), outcome.quarantine.len())?;
        }
        ForgeCommand::ExportMix { d_o, d_p, d_pm, dialogben, with_dialogben, out: path } => {
            let dialogben_train = match dialogben {
                Some(p) => load_dataset(&p)?
                    .iter()
                    .map(InstructionSample::from_record)
                    .collect::<Result<Vec<_>, _>>()?,
                None => Vec::new(),
            };
            let parts = TrainingParts { d_o: read_jsonl(&d_o)?, d_p: read_jsonl(&d_p)?, d_pm: read_jsonl(&d_pm)?, dialogben_train };
            let manifest = export_training_mix(&parts, with_dialogben, &path)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&manifest)?)?;
        }
    }
    Ok(())
}
