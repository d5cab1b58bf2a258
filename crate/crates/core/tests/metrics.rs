mod common;

use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use tabinhib::fretboard::FretboardConfig;
use tabinhib::inhibition::string_constraint_weights;
use tabinhib::metrics::{duplicate_pitch_errors, evaluate_track, false_alarm_errors, match_counts, tablature_prf, tdr};

/// Three strings a whole tone apart, so most pitches are playable on two or three strings.
fn crowded() -> FretboardConfig {
    FretboardConfig::new(3, 3, vec![40, 42, 44]).unwrap()
}

fn random_pair(cfg: &FretboardConfig, seed: u64) -> (Array2<u8>, Array2<u8>) {
    let mut r = rng(seed);
    let frames = r.random_range(1..=10);
    if seed % 2 == 0 {
        let density = r.random_range(0.05..0.6);
        (
            random_binary(cfg.num_combos(), frames, density, &mut r),
            random_binary(cfg.num_combos(), frames, density, &mut r),
        )
    } else {
        (
            one_hot(cfg, &random_frets(cfg, frames, 0.3, &mut r)),
            one_hot(cfg, &random_frets(cfg, frames, 0.3, &mut r)),
        )
    }
}

#[test]
fn error_counts_match_loop_oracles() {
    let cfg = crowded();
    assert!(cfg.num_combos() <= 20);
    for seed in 0..200 {
        let (pred, truth) = random_pair(&cfg, seed);
        assert_eq!(
            duplicate_pitch_errors(&cfg, pred.view(), truth.view()).unwrap(),
            duplicate_pitch_oracle(&cfg, &pred, &truth),
            "seed {seed}"
        );
        assert_eq!(
            false_alarm_errors(&cfg, pred.view(), truth.view()).unwrap(),
            false_alarm_oracle(&cfg, &pred, &truth),
            "seed {seed}"
        );
    }
}

#[test]
fn disambiguation_bounds() {
    let cfg = crowded();
    for seed in 0..200 {
        let (pred, truth) = random_pair(&cfg, seed);
        let c = match_counts(&cfg, pred.view(), truth.view()).unwrap();
        assert!(c.tablature <= c.pitch, "seed {seed}: {c:?}");
        let rate = tdr(&cfg, pred.view(), truth.view()).unwrap();
        assert!((0.0..=1.0).contains(&rate), "seed {seed}: {rate}");
    }
}

#[test]
fn wrong_string_example() {
    // truth: 42 on string 2 open, 44 on string 3 open
    // pred: 42 on string 1 fret 2, 44 on string 3 open
    let cfg = crowded();
    let truth = one_hot(&cfg, &ndarray::array![[-1], [0], [0]]);
    let pred = one_hot(&cfg, &ndarray::array![[2], [-1], [0]]);
    assert_eq!(tdr(&cfg, pred.view(), truth.view()).unwrap(), 0.5);
    let prf = tablature_prf(&cfg, pred.view(), truth.view()).unwrap();
    assert_eq!((prf.precision, prf.recall), (0.5, 0.5));
}

#[test]
fn rows_report_the_harmonic_mean() {
    let cfg = crowded();
    let w = string_constraint_weights(&cfg);
    for seed in 0..50 {
        let (pred, truth) = random_pair(&cfg, seed);
        let row = evaluate_track(&cfg, "t", pred.view(), truth.view(), &w, &w).unwrap();
        for (p, r, f) in [(row.p_tab, row.r_tab, row.f_tab), (row.p_pitch, row.r_pitch, row.f_pitch)] {
            let want = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            assert_eq!(f, want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn moving_a_note_to_its_true_string_never_lowers_tdr(seed in any::<u64>()) {
        let cfg = crowded();
        let mut r = rng(seed);
        let frames = r.random_range(1..=6);
        let truth_frets = random_frets(&cfg, frames, 0.2, &mut r);
        let mut pred_frets = random_frets(&cfg, frames, 0.2, &mut r);
        let n = r.random_range(0..frames);
        let s = r.random_range(0..3);
        let f = truth_frets[[s, n]];
        prop_assume!(f >= 0 && pred_frets[[s, n]] != f);
        let pitch = cfg.tuning()[s] + f;
        let other = (0..3).find(|&o| o != s && pred_frets[[o, n]] >= 0 && cfg.tuning()[o] + pred_frets[[o, n]] == pitch);
        let before = tdr(&cfg, one_hot(&cfg, &pred_frets).view(), one_hot(&cfg, &truth_frets).view()).unwrap();
        if let Some(o) = other {
            pred_frets[[o, n]] = -1;
        }
        pred_frets[[s, n]] = f;
        let after = tdr(&cfg, one_hot(&cfg, &pred_frets).view(), one_hot(&cfg, &truth_frets).view()).unwrap();
        prop_assert!(after >= before, "{before} -> {after}");
    }

    #[test]
    fn perfect_prediction_scores_perfectly(seed in any::<u64>()) {
        let cfg = crowded();
        let mut r = rng(seed);
        let truth = one_hot(&cfg, &random_frets(&cfg, 8, 0.4, &mut r));
        let w = string_constraint_weights(&cfg);
        let row = evaluate_track(&cfg, "t", truth.view(), truth.view(), &w, &w).unwrap();
        prop_assert_eq!((row.f_tab, row.f_pitch, row.tdr, row.e_dp, row.e_fa), (1.0, 1.0, 1.0, 0.0, 0.0));
        prop_assert_eq!(row.l_inh, 0.0);
    }
}
