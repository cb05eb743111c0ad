use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use advaudio::asr::{self, synth, TrainConfig, Utterance, VictimModel};
use advaudio::attack::{run_attack_with_pool, AttackConfig, AttackResult};
use advaudio::config::RunConfig;
use advaudio::dsp::{wav, write_grid_csv};
use advaudio::eval::{self, EvalRecord};
use advaudio::psycho::MaskingThresholdGrid;
use advaudio::rir::{measure_rt60, RirPool, RoomMode};
use advaudio::{Error, Result};

pub const RECORDS_JSON: &str = "eval_records.json";
const RESULT_SUFFIX: &str = ".result.json";

/// One attacked input as stored on disk.
#[derive(Debug, Serialize, Deserialize)]
struct AttackRecord {
    input: PathBuf,
    example_index: usize,
    example_id: String,
    result: AttackResult,
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    cfg.write_beside(&cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn load_model(cfg: &RunConfig) -> Result<VictimModel> {
    let path = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Config("no model checkpoint given (--model or `model = ...`)".into()))?;
    asr::load_checkpoint(path)
}

/// Seeds in the config are offsets from the master seed.
fn attack_cfg(cfg: &RunConfig) -> AttackConfig {
    AttackConfig { seed: cfg.attack.seed ^ cfg.seed, ..cfg.attack.clone() }
}

fn train_cfg(cfg: &RunConfig) -> TrainConfig {
    TrainConfig { seed: cfg.train.seed ^ cfg.seed, ..cfg.train.clone() }
}

fn eval_cfg(cfg: &RunConfig) -> eval::EvalConfig {
    eval::EvalConfig { seed: cfg.eval.seed ^ cfg.seed, ..cfg.eval.clone() }
}

pub fn train_victim(cfg: &RunConfig) -> Result<()> {
    let data = match &cfg.dataset {
        Some(dir) => asr::load_dataset(dir)?,
        None => synth::synthetic_corpus(&synth::SynthConfig { seed: cfg.synth.seed ^ cfg.seed, ..cfg.synth.clone() })?,
    };
    let dir = out_dir(cfg)?;
    let (model, report) = asr::fit(&data, &train_cfg(cfg))?;
    write_json(&dir.join("train_report.json"), &report)?;
    if report.heldout_wer > cfg.train.max_wer {
        return Err(Error::NotConverged { wer: report.heldout_wer, epochs: cfg.train.epochs });
    }
    asr::save_checkpoint(dir.join("model.ckpt"), &model)?;
    println!(
        "trained on {} clips: train WER {:.2}%, held-out WER {:.2}% -> {}",
        report.train_clips,
        report.train_wer,
        report.heldout_wer,
        dir.join("model.ckpt").display()
    );
    Ok(())
}

pub fn attack(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::Config("no input clips".into()));
    }
    let model = load_model(cfg)?;
    let target = model.target(&cfg.target)?;
    let acfg = attack_cfg(cfg);
    let pool = acfg.pool.build(&acfg.room_ranges, acfg.rir_settings.clone())?;
    let dir = out_dir(cfg)?;
    for (i, input) in inputs.iter().enumerate() {
        let x = wav::read(input)?;
        let stem = input.file_stem().map_or_else(|| "clip".into(), |s| s.to_string_lossy().into_owned());
        let id = format!("{i:03}_{stem}");
        let run_cfg = AttackConfig { seed: acfg.seed ^ i as u64, ..acfg.clone() };
        let result = run_attack_with_pool(&x, &target, &model, &run_cfg, &pool)?;
        wav::write(dir.join(format!("{id}_adv.wav")), &result.adversarial(&x).clamped())?;
        wav::write(dir.join(format!("{id}_delta.wav")), &result.delta_clip(x.sample_rate))?;
        let mut trace = create(&dir.join(format!("{id}_trace.csv")))?;
        result.write_trace_csv(&mut trace)?;
        trace.flush()?;
        println!(
            "{id}: success={} iterations={} per_rir={} snr={} transcript='{}'",
            result.success_found,
            result.iterations_run,
            result.per_rir_success_count,
            result.snr_db.map_or_else(|| "inf".into(), |s| format!("{s:.2} dB")),
            result.transcript_clean.join(" ")
        );
        let record = AttackRecord { input: input.clone(), example_index: i, example_id: id.clone(), result };
        write_json(&dir.join(format!("{id}{RESULT_SUFFIX}")), &record)?;
    }
    Ok(())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    v.sort();
    Ok(v)
}

fn write_eval_outputs(dir: &Path, records: &[EvalRecord]) -> Result<Vec<eval::Summary>> {
    write_json(&dir.join(RECORDS_JSON), &records)?;
    let mut f = create(&dir.join("eval_records.csv"))?;
    eval::write_records_csv(records, &mut f)?;
    f.flush()?;
    let summary = eval::summarize(records)?;
    write_json(&dir.join("summary.json"), &summary)?;
    let mut f = create(&dir.join("summary.csv"))?;
    eval::write_summary_csv(&summary, &mut f)?;
    f.flush()?;
    Ok(summary)
}

fn print_summary(rows: &[eval::Summary]) {
    println!("{:<15} {:<45} {:>9} {:>9} {:>9}", "variant", "target", "WER", "SNR", "success%");
    for s in rows {
        println!(
            "{:<15} {:<45} {:>9.2} {:>9} {:>9.1}",
            s.variant.name(),
            s.target,
            s.mean_wer,
            s.mean_snr_db.map_or_else(|| "-".into(), |v| format!("{v:.2}")),
            s.success_rate
        );
    }
}

pub fn simulate_eval(cfg: &RunConfig, results: &Path) -> Result<()> {
    let model = load_model(cfg)?;
    let ecfg = eval_cfg(cfg);
    let pool = RirPool::dynamic(ecfg.ranges.clone(), ecfg.rir_settings.clone())?;
    let mut records = Vec::new();
    for path in sorted_entries(results)? {
        if !path.to_string_lossy().ends_with(RESULT_SUFFIX) {
            continue;
        }
        let rec: AttackRecord = serde_json::from_slice(&fs::read(&path)?)?;
        let x = wav::read(&rec.input)?;
        records.push(eval::evaluate_example(rec.example_index, &rec.example_id, &x, &rec.result, &model, &pool, &ecfg)?);
    }
    if records.is_empty() {
        return Err(Error::NoRecords(results.to_owned()));
    }
    let dir = out_dir(cfg)?;
    print_summary(&write_eval_outputs(&dir, &records)?);
    Ok(())
}

fn experiment_corpus(cfg: &RunConfig, clips: Option<usize>) -> Result<Vec<Utterance>> {
    let mut corpus = match &cfg.dataset {
        Some(dir) => asr::load_dataset(dir)?,
        None => {
            let mut s = synth::attack_corpus_config(clips.unwrap_or(8), cfg.synth.seed ^ cfg.seed);
            s.sample_rate = cfg.synth.sample_rate;
            synth::synthetic_corpus(&s)?
        }
    };
    if let Some(n) = clips {
        corpus.truncate(n);
    }
    Ok(corpus)
}

pub fn experiment_sweep(cfg: &RunConfig, clips: Option<usize>) -> Result<()> {
    let model = load_model(cfg)?;
    let corpus = experiment_corpus(cfg, clips)?;
    let target = model.target(&cfg.target)?;
    let acfg = AttackConfig { variant: advaudio::attack::Variant::Robust, ..attack_cfg(cfg) };
    let rows = eval::sweep_reverberation(&corpus, &target, &model, &acfg, &eval::SWEEP_INTERVALS, eval::SWEEP_TRUE_RT60, &eval_cfg(cfg))?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("sweep.json"), &rows)?;
    let mut f = create(&dir.join("sweep.csv"))?;
    writeln!(f, "rt60_min,rt60_max,mean_wer,success_rate")?;
    for r in &rows {
        writeln!(f, "{},{},{:.4},{:.2}", r.rt60_min, r.rt60_max, r.mean_wer, r.success_rate)?;
        println!("[{:.1}, {:.1}]  WER {:>7.2}  success {:>5.1}%", r.rt60_min, r.rt60_max, r.mean_wer, r.success_rate);
    }
    f.flush()?;
    Ok(())
}

pub fn experiment_pools(cfg: &RunConfig, clips: Option<usize>) -> Result<()> {
    let model = load_model(cfg)?;
    let corpus = experiment_corpus(cfg, clips)?;
    let target = model.target(&cfg.target)?;
    let acfg = AttackConfig { variant: advaudio::attack::Variant::Robust, ..attack_cfg(cfg) };
    let specs = eval::pool_specs(acfg.seed);
    let rows = eval::compare_pools(&corpus, &target, &model, &acfg, &specs, &eval_cfg(cfg))?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("pools.json"), &rows)?;
    let mut f = create(&dir.join("pools.csv"))?;
    writeln!(f, "pool,mean_wer,success_rate,mean_wer_successful,correct_rate_successful")?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
    for r in &rows {
        writeln!(f, "{},{:.4},{:.2},{},{}", r.pool, r.mean_wer, r.success_rate, opt(r.mean_wer_successful), opt(r.correct_rate_successful))?;
        println!("{:<16} WER {:>7.2}  success {:>5.1}%", r.pool, r.mean_wer, r.success_rate);
    }
    f.flush()?;
    Ok(())
}

pub fn rir_gen(cfg: &RunConfig, count: usize, mode: RoomMode) -> Result<()> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand_chacha::rand_core::SeedableRng>::seed_from_u64(cfg.seed);
    let pool = RirPool::fixed(cfg.rooms.clone(), cfg.attack.rir_settings.clone(), count, mode, &mut rng)?;
    let dir = out_dir(cfg)?;
    pool.save_dir(&dir)?;
    let mut f = create(&dir.join("rt60.csv"))?;
    writeln!(f, "index,requested_rt60,measured_rt60,taps")?;
    for (i, (rir, room)) in pool.members().enumerate() {
        let measured = measure_rt60(rir).map_or_else(|_| String::new(), |v| format!("{v:.4}"));
        let requested = room.map_or_else(String::new, |r| format!("{:.4}", r.rt60));
        writeln!(f, "{i},{requested},{measured},{}", rir.taps.len())?;
    }
    f.flush()?;
    println!("wrote {count} impulse responses to {}", dir.display());
    Ok(())
}

pub fn mask_analyze(cfg: &RunConfig, input: &Path) -> Result<()> {
    let x = wav::read(input)?;
    let grid = MaskingThresholdGrid::compute(&x, &cfg.attack.psycho)?;
    let dir = out_dir(cfg)?;
    let mut f = create(&dir.join("threshold.csv"))?;
    write_grid_csv(&mut f, grid.n_bins, &grid.thresholds, "bin")?;
    f.flush()?;
    let mut f = create(&dir.join("psd.csv"))?;
    write_grid_csv(&mut f, grid.n_bins, &grid.psd, "bin")?;
    f.flush()?;
    write_json(&dir.join("maskers.json"), &grid.maskers)?;
    let n: usize = grid.maskers.iter().map(Vec::len).sum();
    println!("{} frames x {} bins, {n} maskers -> {}", grid.n_frames, grid.n_bins, dir.display());
    Ok(())
}

fn collect_records(dir: &Path, out: &mut Vec<EvalRecord>) -> Result<()> {
    for path in sorted_entries(dir)? {
        if path.is_dir() {
            collect_records(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == RECORDS_JSON) {
            let recs: Vec<EvalRecord> = serde_json::from_slice(&fs::read(&path)?)?;
            out.extend(recs);
        }
    }
    Ok(())
}

pub fn report(cfg: &RunConfig, results: &Path) -> Result<()> {
    if !results.is_dir() {
        return Err(Error::NoRecords(results.to_owned()));
    }
    let mut records = Vec::new();
    collect_records(results, &mut records)?;
    if records.is_empty() {
        return Err(Error::NoRecords(results.to_owned()));
    }
    let summary = eval::summarize(&records)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("report.json"), &summary)?;
    let mut f = create(&dir.join("report.csv"))?;
    eval::write_summary_csv(&summary, &mut f)?;
    f.flush()?;
    print_summary(&summary);
    Ok(())
}

