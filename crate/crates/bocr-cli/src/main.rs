//! Command-line frontend: segmentation, synthetic corpora, training,
//! recognition and evaluation.
//!
//! Exit codes are a stable contract: 0 success, 1 usage error, 2 data
//! error (bad files, unsupported symbols, corrupt models), 3 internal
//! error.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use bocr::codec::{load_alphabet, CountCheck, LabelAlphabet};
use bocr::ctc::DEFAULT_BEAM_WIDTH;
use bocr::error::Error;
use bocr::image::{load_gray, save_pgm};
use bocr::modelio::{load_model, recognize_line, save_model};
use bocr::preproc::{segment_lines, SegmentConfig};
use bocr::synth::{
    build_glyph_atlas, derive_word_list, generate_corpus, write_corpus, CorpusCounts, Degrade,
};
use bocr::trainer::{load_manifest, train_observed, TrainConfig, REPORT_CSV_HEADER};

#[derive(Parser)]
#[command(name = "bocr", version, about = "Printed text line OCR engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a page image into text line images.
    Segment(SegmentArgs),
    /// Generate a synthetic corpus in the training manifest layout.
    Synth(SynthArgs),
    /// Train a recognizer from manifests of line images.
    Train(TrainArgs),
    /// Recognize text line images with a trained model.
    Recognize(RecognizeArgs),
    /// Score a trained model against a test manifest.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Page image (PGM or 8-bit grayscale PNG).
    page: PathBuf,
    /// Directory the line crops are written to.
    #[arg(long)]
    out_dir: PathBuf,
    /// Vertical strips for the projection profile.
    #[arg(long, default_value_t = 4)]
    strips: usize,
    /// Also write a <page>.boxes.txt with top,bottom,left,right rows.
    #[arg(long)]
    emit_boxes: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Alphabet manifest path.
    #[arg(long)]
    alphabet: PathBuf,
    /// Accept manifests that do not have the standard 165 symbols.
    #[arg(long)]
    relax_alphabet: bool,
    /// Lines per split as train,val,test.
    #[arg(long, value_parser = parse_counts)]
    counts: CorpusCounts,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Degradations, e.g. `noise=10,scale=0.2,jitter=1`.
    #[arg(long, value_parser = parse_degrade)]
    degrade: Option<Degrade>,
    /// Word list file, one word per line; defaults to pseudo-words drawn
    /// from the alphabet.
    #[arg(long)]
    words: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training manifest (image<TAB>truth per line).
    #[arg(long)]
    manifest: PathBuf,
    /// Validation manifest.
    #[arg(long)]
    val: PathBuf,
    /// Alphabet manifest path.
    #[arg(long)]
    alphabet: PathBuf,
    #[arg(long)]
    relax_alphabet: bool,
    /// LSTM units per direction.
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 80)]
    max_epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Global-norm gradient clip (off when absent).
    #[arg(long)]
    grad_clip: Option<f64>,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Epoch report CSV, appended as epochs finish.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct RecognizeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Line images to recognize.
    #[arg(required = true)]
    images: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    beam: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Test manifest (image<TAB>truth per line).
    #[arg(long)]
    manifest: PathBuf,
    /// Per-line CSV report path.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BEAM_WIDTH)]
    beam: usize,
}

fn parse_counts(value: &str) -> Result<CorpusCounts, String> {
    let parts: Vec<&str> = value.split(',').collect();
    if parts.len() != 3 {
        return Err("expected train,val,test".into());
    }
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|e| e.to_string());
    Ok(CorpusCounts {
        train: parse(parts[0])?,
        val: parse(parts[1])?,
        test: parse(parts[2])?,
    })
}

fn parse_degrade(value: &str) -> Result<Degrade, String> {
    let mut degrade = Degrade::none();
    for part in value.split(',') {
        let (key, v) = part
            .split_once('=')
            .ok_or_else(|| format!("`{part}` is not key=value"))?;
        match key.trim() {
            "noise" => degrade.noise_sigma = v.trim().parse().map_err(|e| format!("{e}"))?,
            "scale" => degrade.scale_jitter = v.trim().parse().map_err(|e| format!("{e}"))?,
            "jitter" => degrade.baseline_jitter = v.trim().parse().map_err(|e| format!("{e}"))?,
            other => return Err(format!("unknown degradation `{other}`")),
        }
    }
    Ok(degrade)
}

fn load_alphabet_file(path: &PathBuf, relaxed: bool) -> Result<LabelAlphabet, Error> {
    let text = std::fs::read_to_string(path)?;
    let check = if relaxed {
        CountCheck::Relaxed
    } else {
        CountCheck::Standard
    };
    load_alphabet(&text, check)
}

fn run_segment(args: SegmentArgs) -> Result<(), Error> {
    let page = load_gray(&args.page)?;
    let config = SegmentConfig {
        strips: args.strips,
        ..SegmentConfig::default()
    };
    let boxes = segment_lines(&page, &config)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let stem = args
        .page
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "page".into());
    for (i, b) in boxes.iter().enumerate() {
        let crop = page.crop(b.top, b.bottom, b.left, b.right)?;
        save_pgm(&crop, args.out_dir.join(format!("{stem}-line-{i:03}.pgm")))?;
    }
    if args.emit_boxes {
        let mut sidecar = String::new();
        for b in &boxes {
            sidecar.push_str(&format!("{},{},{},{}\n", b.top, b.bottom, b.left, b.right));
        }
        std::fs::write(args.out_dir.join(format!("{stem}.boxes.txt")), sidecar)?;
    }
    println!("{} lines -> {}", boxes.len(), args.out_dir.display());
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), Error> {
    let alphabet = load_alphabet_file(&args.alphabet, args.relax_alphabet)?;
    let atlas = build_glyph_atlas(&alphabet, args.seed)?;
    let words = match &args.words {
        Some(path) => std::fs::read_to_string(path)?
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(String::from)
            .collect(),
        None => derive_word_list(&alphabet, 40, args.seed)?,
    };
    let degrade = args.degrade.unwrap_or_else(Degrade::none);
    let corpus = generate_corpus(&atlas, &words, args.counts, args.seed, degrade)?;
    write_corpus(&args.out_dir, &corpus)?;
    println!(
        "{} train / {} val / {} test lines -> {}",
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<(), Error> {
    let alphabet = load_alphabet_file(&args.alphabet, args.relax_alphabet)?;
    let train_set = load_manifest(&args.manifest)?;
    let val_set = load_manifest(&args.val)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        momentum: args.momentum,
        max_epochs: args.max_epochs,
        hidden_size: args.hidden,
        seed: args.seed,
        grad_clip: args.grad_clip,
        ..TrainConfig::default()
    };

    let mut report_file = std::fs::File::create(&args.report)?;
    writeln!(report_file, "{REPORT_CSV_HEADER}")?;
    let outcome = train_observed(&train_set, &val_set, &alphabet, &cfg, |report| {
        let row = bocr::trainer::report_csv_row(report);
        let _ = writeln!(report_file, "{row}");
        let _ = report_file.flush();
        eprintln!(
            "epoch {:>3}: train {:.4}  val {:.4}  ({:.1}s)",
            report.epoch, report.train_ctc_loss, report.val_error, report.wall_time_s
        );
    })?;

    for skipped in &outcome.skipped {
        eprintln!("warning: skipped {}: {}", skipped.id, skipped.reason);
    }
    save_model(&outcome.model, &alphabet, &args.out)?;
    println!(
        "best epoch {} of {} -> {}",
        outcome.best_epoch,
        outcome.reports.len(),
        args.out.display()
    );
    Ok(())
}

fn run_recognize(args: RecognizeArgs) -> Result<(), Error> {
    let (model, alphabet) = load_model(&args.model)?;
    let results: Vec<Result<String, Error>> = args
        .images
        .par_iter()
        .map(|path| {
            let line = load_gray(path)?;
            recognize_line(&model, &alphabet, &line, args.beam)
        })
        .collect();
    for (path, result) in args.images.iter().zip(results) {
        println!("{}\t{}", path.display(), result?);
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let (model, alphabet) = load_model(&args.model)?;
    let records = load_manifest(&args.manifest)?;
    let pairs: Vec<Result<bocr::eval::ScoredPair, Error>> = records
        .par_iter()
        .map(|record| {
            let hypothesis = recognize_line(&model, &alphabet, &record.image, args.beam)?;
            Ok(bocr::eval::ScoredPair {
                id: record.id.clone(),
                hypothesis,
                reference: record.truth.clone(),
            })
        })
        .collect();
    let pairs: Vec<bocr::eval::ScoredPair> = pairs.into_iter().collect::<Result<_, _>>()?;
    let report = bocr::eval::score_corpus(&pairs)?;
    std::fs::write(&args.report, report.to_csv())?;
    print!("{}", report.summary());
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        // Shape mismatches mean the wiring is wrong, not the data.
        Error::DimensionMismatch(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Segment(args) => run_segment(args),
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Recognize(args) => run_recognize(args),
        Command::Evaluate(args) => run_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
