//! Runs the CLI binary in scratch directories.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_advaudio"));
    c.env_remove("ADVAUDIO_OUT");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn advaudio")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "advaudio {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every file below `dir`, keyed by relative path, except the resolved
/// config (it names the output directory).
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "run_config.txt" {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs every artifact-producing command, then reruns each one from the
/// config it persisted into a second directory; returns the compared
/// file count, or the first difference.
pub fn rerun_is_byte_identical(root: &Path) -> Result<String, String> {
    let first = root.join("first");
    let model_dir = first.join("train");
    run_ok(&[
        "train-victim", "--out", s(&model_dir), "--epochs", "1",
        "--set", "synth.n_clips=12", "--set", "train.max_wer=1000", "--set", "train.arch.hidden=16",
    ]);
    let ckpt = model_dir.join("model.ckpt");
    let clip_dir = first.join("rirs");
    run_ok(&["rir-gen", "--out", s(&clip_dir), "--count", "3", "--seed", "4"]);

    let wav_path = root.join("input.wav");
    let corpus = advaudio::asr::synth::synthetic_corpus(&advaudio::asr::synth::attack_corpus_config(1, 5)).unwrap();
    advaudio::dsp::wav::write(&wav_path, &corpus[0].clip).unwrap();

    let mask_dir = first.join("mask");
    run_ok(&["mask-analyze", "--out", s(&mask_dir), "--input", s(&wav_path)]);
    let attack_dir = first.join("attack");
    run_ok(&[
        "attack", "--out", s(&attack_dir), "--input", s(&wav_path), "--model", s(&ckpt),
        "--variant", "combined", "--iterations", "4", "--target", "go",
    ]);
    let eval_dir = first.join("eval");
    run_ok(&["simulate-eval", "--out", s(&eval_dir), "--results", s(&attack_dir), "--model", s(&ckpt), "--transforms", "3"]);
    let report_dir = first.join("report");
    run_ok(&["report", "--out", s(&report_dir), "--results", s(&eval_dir)]);

    let second = root.join("second");
    let rerun = |name: &str, extra: &[&str]| {
        let cfg = first.join(name).join("run_config.txt");
        let out = second.join(name);
        let mut args = vec![extra[0], "--config", s(&cfg), "--out", s(&out)];
        args.extend_from_slice(&extra[1..]);
        run_ok(&args);
    };
    rerun("train", &["train-victim"]);
    rerun("rirs", &["rir-gen", "--count", "3"]);
    rerun("mask", &["mask-analyze", "--input", s(&wav_path)]);
    rerun("attack", &["attack", "--input", s(&wav_path)]);
    rerun("eval", &["simulate-eval", "--results", s(&attack_dir)]);
    rerun("report", &["report", "--results", s(&eval_dir)]);

    let a = snapshot(&first);
    let b = snapshot(&second);
    if a.keys().ne(b.keys()) {
        return Err(format!("different file sets: {:?} vs {:?}", a.keys(), b.keys()));
    }
    for (k, v) in &a {
        if b[k] != *v {
            return Err(format!("{} differs", k.display()));
        }
    }
    let kinds = |ext: &str| a.keys().filter(|k| k.extension().is_some_and(|e| e == ext)).count();
    Ok(format!("{} files identical ({} wav, {} csv)", a.len(), kinds("wav"), kinds("csv")))
}
