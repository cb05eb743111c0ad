mod common;

use advaudio::asr::synth::{attack_corpus_config, synthetic_corpus};
use advaudio::attack::{draw_transforms, iteration_rng, run_attack, AttackConfig, Variant};
use advaudio::dsp::AudioClip;
use advaudio::eval::{
    draw_environment, evaluate_example, simulate_environment, summarize, EvalConfig, EvalRecord,
};
use advaudio::rir::{RirPool, RoomRanges};
use rand::seq::SliceRandom;

#[test]
fn degenerate_environment_returns_padded_copies() {
    let cfg = EvalConfig { noise_sigma: 0.0, max_offset: 0, ..Default::default() };
    let adv = AudioClip::new(common::noise(3000, 0.5, &mut common::rng(41)), 16_000);
    let copies = simulate_environment(&adv, 10, &RirPool::identity(16_000), &cfg, &mut cfg.rng(0, 0)).unwrap();
    assert_eq!(copies.len(), 10);
    assert!(copies.iter().all(|c| *c == adv));
}

#[test]
fn environment_draws_are_reproducible_per_example_and_index() {
    let cfg = EvalConfig::default();
    let pool = RirPool::dynamic(cfg.ranges.clone(), cfg.rir_settings.clone()).unwrap();
    let adv = AudioClip::new(common::noise(3000, 0.5, &mut common::rng(42)), 16_000);
    let a = simulate_environment(&adv, 1, &pool, &cfg, &mut cfg.rng(3, 7)).unwrap();
    let b = simulate_environment(&adv, 1, &pool, &cfg, &mut cfg.rng(3, 7)).unwrap();
    let c = simulate_environment(&adv, 1, &pool, &cfg, &mut cfg.rng(3, 8)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

// Rooms drawn for evaluation never coincide with rooms drawn while attacking,
// even when the attack and evaluation seeds are equal.
#[test]
fn evaluation_rooms_are_disjoint_from_attack_rooms() {
    let eval = EvalConfig { seed: 0, ..Default::default() };
    let attack = AttackConfig { variant: Variant::Robust, seed: 0, ..Default::default() };
    let pool = RirPool::dynamic(RoomRanges::default(), Default::default()).unwrap();
    let mut attack_rooms = Vec::new();
    for example in 0..4u64 {
        for it in 0..100 {
            for t in draw_transforms(100, &pool, &attack, &mut iteration_rng(attack.seed ^ example, it)).unwrap() {
                attack_rooms.push(t.record.room.unwrap());
            }
        }
    }
    for example in 0..4 {
        for t in 0..eval.n_transforms {
            let drawn = draw_environment(100, 1, &pool, &eval, &mut eval.rng(example, t)).unwrap();
            let room = drawn[0].record.room.as_ref().unwrap();
            assert!(!attack_rooms.contains(room));
        }
    }
}

#[test]
fn exact_decode_under_identity_environment_scores_zero() {
    let (model, _) = common::trained_victim();
    let u = &synthetic_corpus(&attack_corpus_config(1, 43)).unwrap()[0];
    let heard = model.transcribe(&u.clip).unwrap().join(" ");
    let result = run_attack(&u.clip, &model.target(&heard).unwrap(), model, &AttackConfig { min_iterations: 1, ..Default::default() }).unwrap();
    let cfg = EvalConfig { noise_sigma: 0.0, max_offset: 0, ..Default::default() };
    let rec = evaluate_example(0, &u.id, &u.clip, &result, model, &RirPool::identity(16_000), &cfg).unwrap();
    assert_eq!(rec.wer_to_target, 0.0);
    assert_eq!(rec.exact_matches, cfg.n_transforms);
}

fn record(i: usize, variant: Variant, r: &mut impl rand::Rng) -> EvalRecord {
    EvalRecord {
        example_id: format!("ex{i}"),
        variant,
        target: "please open the door".into(),
        wer_to_target: r.gen_range(0.0..150.0),
        snr_db: Some(r.gen_range(0.0..30.0)),
        perceptual_loss: r.gen_range(0.0..10.0),
        success_found: r.gen_bool(0.5),
        exact_matches: r.gen_range(0..=10),
        transcripts: vec![String::new(); 10],
    }
}

#[test]
fn summary_is_invariant_to_record_order() {
    let mut r = common::rng(44);
    let mut records: Vec<EvalRecord> =
        (0..40).map(|i| record(i, if i % 2 == 0 { Variant::Base } else { Variant::Robust }, &mut r)).collect();
    let before = summarize(&records).unwrap();
    for _ in 0..5 {
        records.shuffle(&mut r);
        assert_eq!(summarize(&records).unwrap(), before);
    }
    assert_eq!(before.len(), 2);
}

#[test]
fn summary_rejects_empty_input() {
    assert!(summarize(&[]).is_err());
}
