//! End-to-end checks of the command-line surface and its exit-code
//! contract: 0 success, 1 usage, 2 data, 3 internal.

use std::path::Path;
use std::process::{Command, Output};

const DESK_ALPHABET: &str = include_str!("../../bocr/assets/desk21.alphabet");

fn bocr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bocr"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let none = bocr(&[], dir.path());
    assert_eq!(code(&none), 1);
    let unknown = bocr(&["frobnicate"], dir.path());
    assert_eq!(code(&unknown), 1);
    let bad_flag = bocr(&["recognize", "--no-such-flag"], dir.path());
    assert_eq!(code(&bad_flag), 1);
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let help = bocr(&["--help"], dir.path());
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("recognize"));
}

#[test]
fn missing_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bocr(
        &["recognize", "--model", "nope.bocr", "image.pgm"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn garbage_model_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.bocr"), b"not a model at all").unwrap();
    let out = bocr(
        &["recognize", "--model", "bad.bocr", "image.pgm"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));
}

#[test]
fn wrong_alphabet_count_without_relax_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.alphabet"), "a\nb\n").unwrap();
    let out = bocr(
        &[
            "synth",
            "--alphabet",
            "tiny.alphabet",
            "--counts",
            "1,1,1",
            "--seed",
            "3",
            "--out-dir",
            "corpus",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_train_recognize_evaluate_flow() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("desk.alphabet"), DESK_ALPHABET).unwrap();

    let synth = bocr(
        &[
            "synth",
            "--alphabet",
            "desk.alphabet",
            "--relax-alphabet",
            "--counts",
            "4,2,2",
            "--seed",
            "7",
            "--out-dir",
            "corpus",
        ],
        dir.path(),
    );
    assert_eq!(code(&synth), 0, "{}", String::from_utf8_lossy(&synth.stderr));
    assert!(dir.path().join("corpus/train.tsv").exists());
    assert!(dir.path().join("corpus/images/train-00000.pgm").exists());
    assert!(dir.path().join("corpus/truths/test-00001.gt.txt").exists());

    let train = bocr(
        &[
            "train",
            "--manifest",
            "corpus/train.tsv",
            "--val",
            "corpus/val.tsv",
            "--alphabet",
            "desk.alphabet",
            "--relax-alphabet",
            "--hidden",
            "2",
            "--max-epochs",
            "2",
            "--seed",
            "5",
            "--out",
            "model.bocr",
            "--report",
            "report.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&train), 0, "{}", String::from_utf8_lossy(&train.stderr));
    assert!(dir.path().join("model.bocr").exists());
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("epoch,train_ctc_loss,val_error,wall_time_s\n"));
    assert_eq!(report.lines().count(), 3, "header plus two epochs");

    let recognize = bocr(
        &[
            "recognize",
            "--model",
            "model.bocr",
            "corpus/images/train-00000.pgm",
            "corpus/images/train-00001.pgm",
        ],
        dir.path(),
    );
    assert_eq!(code(&recognize), 0);
    let stdout = String::from_utf8_lossy(&recognize.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("corpus/images/train-00000.pgm\t"));
    assert!(lines[1].starts_with("corpus/images/train-00001.pgm\t"));

    let evaluate = bocr(
        &[
            "evaluate",
            "--model",
            "model.bocr",
            "--manifest",
            "corpus/test.tsv",
            "--report",
            "eval.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&evaluate), 0, "{}", String::from_utf8_lossy(&evaluate.stderr));
    let eval_csv = std::fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    assert!(eval_csv.starts_with("line_id,char_med,word_med\n"));
    assert_eq!(eval_csv.lines().count(), 3);
    let summary = String::from_utf8_lossy(&evaluate.stdout);
    assert!(summary.contains("character accuracy"), "{summary}");
}

#[test]
fn segment_writes_line_crops_and_boxes() {
    let dir = tempfile::tempdir().unwrap();
    // Compose a two-line page from library primitives.
    let alphabet =
        bocr::codec::load_alphabet(DESK_ALPHABET, bocr::codec::CountCheck::Relaxed).unwrap();
    let atlas = bocr::synth::build_glyph_atlas(&alphabet, 9).unwrap();
    let words = bocr::synth::derive_word_list(&alphabet, 10, 9).unwrap();
    let pages = bocr::synth::generate_pages(&atlas, &words, 1, (2, 2), 31, 0.0).unwrap();
    bocr::image::save_pgm(&pages[0].image, dir.path().join("page.pgm")).unwrap();

    let out = bocr(
        &[
            "segment",
            "page.pgm",
            "--out-dir",
            "lines",
            "--emit-boxes",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("lines/page-line-000.pgm").exists());
    assert!(dir.path().join("lines/page-line-001.pgm").exists());
    let boxes = std::fs::read_to_string(dir.path().join("lines/page.boxes.txt")).unwrap();
    assert_eq!(boxes.lines().count(), 2);
    for line in boxes.lines() {
        assert_eq!(line.split(',').count(), 4);
    }
}
