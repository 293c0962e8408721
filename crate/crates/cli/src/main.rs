//! `aphasr`: batch driver for corpus preparation, training, decoding and
//! evaluation.

mod data;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use aphasr::chat::clean_files;
use aphasr::corpus::{
    filter_duration, generate_synthetic, read_manifest, records_from_chat, stratified_split,
    write_manifest, SplitSpec, SyntheticSpec,
};
use aphasr::decode::{decode_all, evaluate, nbest_entries};
use aphasr::io::{to_jsonl, write_atomic};
use aphasr::model::{train, AsrModel, ExperimentConfig, Vocabulary, CHECKPOINT_FILE};

/// Joint disordered-speech recognition and Aphasia detection.
#[derive(Debug, Parser)]
#[command(name = "aphasr", version)]
struct Cli {
    /// Worker threads for per-file and per-utterance parallelism
    /// (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean CHAT transcripts into a manifest.
    Prepare {
        /// Directory searched (non-recursively) for `*.cha` files.
        #[arg(long)]
        chat_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Speaker-disjoint, severity-stratified train/valid/test split.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        /// Train, valid and test fractions.
        #[arg(long, default_value = "0.56,0.19,0.25", value_parser = parse_ratios)]
        ratios: [f64; 3],
        /// Receives train.jsonl, valid.jsonl and test.jsonl.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate the synthetic corpus: manifest.jsonl plus features/.
    Synth {
        /// TOML file with generator settings; omitted keys use defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model and write it to a directory.
    Train {
        #[command(flatten)]
        hyper: Hyper,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        valid: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Decode a manifest into an n-best JSONL file.
    Decode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long)]
        nbest: Option<usize>,
    },
    /// Decode a manifest and write the WER/detection report.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also write per-utterance results as JSONL.
        #[arg(long)]
        utterances: Option<PathBuf>,
        #[arg(long)]
        beam: Option<usize>,
    },
}

/// Training settings; flags override the config file, which overrides the
/// built-in defaults.
#[derive(Debug, Args)]
struct Hyper {
    /// Experiment config (TOML with [model], [train] and [decode] tables).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    warmup_steps: Option<u64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    ctc_weight: Option<f64>,
    #[arg(long)]
    interctc_weight: Option<f64>,
    #[arg(long)]
    beam: Option<usize>,
    /// Turn off speed perturbation and SpecAugment.
    #[arg(long)]
    no_augment: bool,
}

impl Hyper {
    fn resolve(&self, seed: Option<u64>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let t = &mut cfg.train;
        set(&mut t.epochs, self.epochs);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.base_lr, self.lr);
        set(&mut t.warmup_steps, self.warmup_steps);
        set(&mut t.weight_decay, self.weight_decay);
        set(&mut t.top_k, self.top_k);
        set(&mut t.seed, seed);
        if self.no_augment {
            t.augment = aphasr::model::AugmentConfig::disabled();
        }
        set(&mut cfg.model.ctc_weight, self.ctc_weight);
        set(&mut cfg.model.interctc_weight, self.interctc_weight);
        set(&mut cfg.decode.beam, self.beam);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_ratios(text: &str) -> Result<[f64; 3], String> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    <[f64; 3]>::try_from(values)
        .map_err(|v| format!("expected 3 comma-separated values, got {}", v.len()))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn require_file(path: &Path) -> Result<()> {
    ensure!(path.is_file(), "{}: no such file", path.display());
    Ok(())
}

fn prepare(chat_dir: &Path, out: &Path) -> Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(chat_dir)
        .with_context(|| format!("reading {}", chat_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "cha"));
    paths.sort();
    ensure!(!paths.is_empty(), "no .cha files in {}", chat_dir.display());
    let texts = paths
        .iter()
        .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let docs = clean_files(&texts)?;
    let mut records = Vec::new();
    for (path, (doc, clean)) in paths.iter().zip(&docs) {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy();
        records.extend(records_from_chat(&stem, doc, clean));
    }
    let before = records.len();
    let records = filter_duration(records);
    info!(
        "{} transcripts, {} utterances kept ({} outside the duration window)",
        paths.len(),
        records.len(),
        before - records.len()
    );
    write_manifest(out, &records)?;
    Ok(())
}

fn split(manifest: &Path, ratios: [f64; 3], seed: u64, out_dir: &Path) -> Result<()> {
    require_file(manifest)?;
    let spec = SplitSpec::new(ratios, seed)?;
    let mut records = read_manifest(manifest)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    data::rebase_feature_paths(&mut records, manifest, out_dir)?;
    let parts = stratified_split(&records, &spec)?;
    for (name, part) in [
        ("train", &parts.train),
        ("valid", &parts.valid),
        ("test", &parts.test),
    ] {
        info!("{name}: {} utterances", part.len());
        write_manifest(&out_dir.join(format!("{name}.jsonl")), part)?;
    }
    Ok(())
}

fn synth(spec_path: Option<&Path>, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let mut spec: SyntheticSpec = match spec_path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SyntheticSpec::default(),
    };
    set(&mut spec.seed, seed);
    let utterances = generate_synthetic(&spec)?;
    let mut records = Vec::with_capacity(utterances.len());
    for u in utterances {
        let rel = format!("features/{}.feat", u.record.utt_id);
        u.features.write(&out_dir.join(&rel))?;
        records.push(aphasr::corpus::UtteranceRecord {
            feature_path: Some(rel),
            ..u.record
        });
    }
    info!("{} synthetic utterances", records.len());
    write_manifest(&out_dir.join("manifest.jsonl"), &records)?;
    Ok(())
}

fn train_cmd(
    cfg: ExperimentConfig,
    train_path: &Path,
    valid_path: &Path,
    out_dir: &Path,
) -> Result<()> {
    require_file(train_path)?;
    require_file(valid_path)?;
    let train_records = read_manifest(train_path)?;
    let vocab = Vocabulary::new(train_records.iter().flat_map(|r| r.tokens.iter().cloned()));
    info!("vocabulary: {} words", vocab.num_words());
    let train_set = data::load_examples(&train_records, train_path, &vocab)?;
    let valid_set = data::load_examples(&read_manifest(valid_path)?, valid_path, &vocab)?;
    let outcome = train(&train_set, &valid_set, &cfg, vocab)?;
    outcome.model.save(out_dir)?;
    write_atomic(
        &out_dir.join("train_log.jsonl"),
        to_jsonl(&outcome.log)?.as_bytes(),
    )?;
    info!("averaged epochs {:?}", outcome.selected_epochs);
    Ok(())
}

fn load_model(checkpoint: &Path, beam: Option<usize>, nbest: Option<usize>) -> Result<AsrModel> {
    let checkpoint = if checkpoint.is_dir() {
        checkpoint.join(CHECKPOINT_FILE)
    } else {
        checkpoint.to_path_buf()
    };
    require_file(&checkpoint)?;
    let mut model = AsrModel::load(&checkpoint)?;
    set(&mut model.config.decode.beam, beam);
    set(&mut model.config.decode.nbest, nbest);
    model.config.validate()?;
    Ok(model)
}

fn decode_cmd(model: &AsrModel, manifest: &Path, out: &Path) -> Result<()> {
    require_file(manifest)?;
    let examples = data::load_examples(&read_manifest(manifest)?, manifest, &model.vocab)?;
    let results = decode_all(model, &examples)?;
    write_atomic(out, to_jsonl(&nbest_entries(model, &results))?.as_bytes())?;
    Ok(())
}

fn evaluate_cmd(
    model: &AsrModel,
    manifest: &Path,
    report: &Path,
    utterances: Option<&Path>,
) -> Result<()> {
    require_file(manifest)?;
    let examples = data::load_examples(&read_manifest(manifest)?, manifest, &model.vocab)?;
    let (summary, results) = evaluate(model, &examples)?;
    if let Some(wer) = summary.overall_wer {
        info!("WER {:.4}", wer);
    }
    if let (Some(name), Some(sent), Some(spk)) = (
        &summary.primary_detector,
        summary.sentence_acc,
        summary.speaker_acc,
    ) {
        info!("{name}: sentence {sent:.4}, speaker {spk:.4}");
    }
    let json = serde_json::to_string_pretty(&summary)? + "\n";
    write_atomic(report, json.as_bytes())?;
    if let Some(path) = utterances {
        write_atomic(path, to_jsonl(&results)?.as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    match cli.command {
        Command::Prepare { chat_dir, out } => prepare(&chat_dir, &out),
        Command::Split {
            manifest,
            ratios,
            out_dir,
        } => split(&manifest, ratios, cli.seed.unwrap_or(0), &out_dir),
        Command::Synth { spec, out_dir } => synth(spec.as_deref(), cli.seed, &out_dir),
        Command::Train {
            hyper,
            train,
            valid,
            out_dir,
        } => train_cmd(hyper.resolve(cli.seed)?, &train, &valid, &out_dir),
        Command::Decode {
            checkpoint,
            manifest,
            out,
            beam,
            nbest,
        } => decode_cmd(&load_model(&checkpoint, beam, nbest)?, &manifest, &out),
        Command::Evaluate {
            checkpoint,
            manifest,
            report,
            utterances,
            beam,
        } => evaluate_cmd(
            &load_model(&checkpoint, beam, None)?,
            &manifest,
            &report,
            utterances.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
