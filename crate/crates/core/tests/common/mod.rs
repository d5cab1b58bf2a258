//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's arithmetic: combination indices,
//! pitches and counts are recomputed from the raw fret grids.

#![allow(dead_code)]

pub mod grad;

use ndarray::Array2;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabinhib::fretboard::FretboardConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `strings x frames` grid of fret classes, silence with probability `silence`.
pub fn random_frets(cfg: &FretboardConfig, frames: usize, silence: f64, rng: &mut ChaCha8Rng) -> Array2<i32> {
    Array2::from_shape_simple_fn((cfg.num_strings(), frames), || {
        if rng.random::<f64>() < silence {
            -1
        } else {
            rng.random_range(0..=cfg.num_frets() as i32)
        }
    })
}

pub fn random_binary(rows: usize, cols: usize, density: f64, rng: &mut ChaCha8Rng) -> Array2<u8> {
    Array2::from_shape_simple_fn((rows, cols), || (rng.random::<f64>() < density) as u8)
}

/// Row index of `(string, fret)` with 0-based strings.
pub fn index_of(num_frets: usize, string: usize, fret: i32) -> usize {
    string * (num_frets + 2) + (fret + 1) as usize
}

pub fn one_hot(cfg: &FretboardConfig, frets: &Array2<i32>) -> Array2<u8> {
    let c = cfg.num_strings() * (cfg.num_frets() + 2);
    let mut t = Array2::zeros((c, frets.ncols()));
    for s in 0..frets.nrows() {
        for n in 0..frets.ncols() {
            t[[index_of(cfg.num_frets(), s, frets[[s, n]]), n]] = 1;
        }
    }
    t
}

/// Pitch of row `k`, `None` for silence rows.
pub fn pitch_of_row(cfg: &FretboardConfig, k: usize) -> Option<i32> {
    let width = cfg.num_frets() + 2;
    let fret = (k % width) as i32 - 1;
    (fret >= 0).then(|| cfg.tuning()[k / width] + fret)
}

/// Averaged intersection over union as exact fractions.
pub fn cooccurrence_oracle(c: usize, tracks: &[Array2<u8>]) -> Vec<Vec<Ratio<i64>>> {
    let mut out = vec![vec![Ratio::from_integer(0); c]; c];
    for i in 0..c {
        for j in 0..c {
            let mut sum = Ratio::from_integer(0);
            let mut valid = 0i64;
            for t in tracks {
                let occurs_i = (0..t.ncols()).any(|n| t[[i, n]] == 1);
                let occurs_j = (0..t.ncols()).any(|n| t[[j, n]] == 1);
                if !(occurs_i && occurs_j) {
                    continue;
                }
                let mut inter = 0i64;
                let mut union = 0i64;
                for n in 0..t.ncols() {
                    let (a, b) = (t[[i, n]] == 1, t[[j, n]] == 1);
                    inter += (a && b) as i64;
                    union += (a || b) as i64;
                }
                sum += Ratio::new(inter, union);
                valid += 1;
            }
            if valid > 0 {
                out[i][j] = sum / valid;
            }
        }
    }
    out
}

pub fn ratio_to_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// The hard string-constraint predicate, written out directly.
pub fn string_constraint_oracle(num_frets: usize, i: usize, j: usize) -> f64 {
    let width = num_frets + 2;
    let close = (i as i64 - j as i64).abs() < width as i64;
    if close && i != j && i / width == j / width {
        1.0
    } else {
        0.0
    }
}

fn multiplicity(cfg: &FretboardConfig, t: &Array2<u8>, n: usize, pitch: i32) -> i64 {
    (0..t.nrows())
        .filter(|&k| t[[k, n]] == 1 && pitch_of_row(cfg, k) == Some(pitch))
        .count() as i64
}

fn pitch_range(cfg: &FretboardConfig) -> std::ops::RangeInclusive<i32> {
    let lo = *cfg.tuning().iter().min().unwrap();
    let hi = *cfg.tuning().iter().max().unwrap() + cfg.num_frets() as i32;
    lo..=hi
}

pub fn duplicate_pitch_oracle(cfg: &FretboardConfig, pred: &Array2<u8>, truth: &Array2<u8>) -> u64 {
    let mut total = 0i64;
    for n in 0..pred.ncols() {
        for p in pitch_range(cfg) {
            total += (multiplicity(cfg, pred, n, p) - multiplicity(cfg, truth, n, p)).max(0);
        }
    }
    total as u64
}

pub fn false_alarm_oracle(cfg: &FretboardConfig, pred: &Array2<u8>, truth: &Array2<u8>) -> u64 {
    let mut total = 0;
    for n in 0..pred.ncols() {
        for k in 0..pred.nrows() {
            if pitch_of_row(cfg, k).is_some() && pred[[k, n]] == 1 && truth[[k, n]] == 0 {
                total += 1;
            }
        }
    }
    total
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_FLOOR: f64 = 1e-3;

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_gradient(x: &mut [f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let orig = x[k];
            x[k] = orig + FD_STEP;
            let up = f(x);
            x[k] = orig - FD_STEP;
            let down = f(x);
            x[k] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Diagonal 1 exactly on occurring combinations, distinct same-string pairs 0,
/// exact symmetry and every entry in `[0, 1]`.
pub fn check_matrix_invariants(cfg: &FretboardConfig, targets: &[Array2<u8>], values: &Array2<f64>) -> Result<(), String> {
    let c = values.nrows();
    let width = cfg.num_frets() + 2;
    for i in 0..c {
        let occurs = targets.iter().any(|t| t.row(i).iter().any(|&v| v == 1));
        let d = values[[i, i]];
        if (occurs && d != 1.0) || (!occurs && d != 0.0) {
            return Err(format!("diagonal {i} is {d}, occurs = {occurs}"));
        }
        for j in 0..c {
            let v = values[[i, j]];
            if v != values[[j, i]] {
                return Err(format!("asymmetric at ({i}, {j})"));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("entry ({i}, {j}) = {v} outside [0, 1]"));
            }
            if i != j && i / width == j / width && v != 0.0 {
                return Err(format!("same-string pair ({i}, {j}) = {v}"));
            }
        }
    }
    Ok(())
}

/// Random corpus of one-hot tracks on `cfg`.
pub fn random_corpus(cfg: &FretboardConfig, max_tracks: usize, max_frames: usize, rng: &mut ChaCha8Rng) -> Vec<Array2<i32>> {
    let tracks = rng.random_range(1..=max_tracks);
    (0..tracks)
        .map(|_| {
            let frames = rng.random_range(1..=max_frames);
            let silence = rng.random_range(0.0..0.8);
            random_frets(cfg, frames, silence, rng)
        })
        .collect()
}

/// Saves `value`, loads it back, saves again and compares the two files byte for byte.
pub fn resave<T: PartialEq + std::fmt::Debug>(
    dir: &std::path::Path,
    name: &str,
    value: &T,
    save: impl Fn(&std::path::Path, &T) -> tabinhib::Result<()>,
    load: impl Fn(&std::path::Path) -> tabinhib::Result<T>,
) -> Result<(), String> {
    let first = dir.join(format!("first-{name}"));
    let second = dir.join(format!("second-{name}"));
    save(&first, value).map_err(|e| format!("{name}: {e}"))?;
    let back = load(&first).map_err(|e| format!("{name}: {e}"))?;
    if &back != value {
        return Err(format!("{name}: loaded value differs"));
    }
    save(&second, &back).map_err(|e| format!("{name}: {e}"))?;
    let (a, b) = (read_all(&first), read_all(&second));
    if a != b {
        return Err(format!("{name}: second save differs from the first"));
    }
    Ok(())
}

/// File bytes, or every file under a directory in name order.
fn read_all(path: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    if path.is_dir() {
        let mut names: Vec<_> = std::fs::read_dir(path).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        names
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect()
    } else {
        vec![(String::new(), std::fs::read(path).unwrap())]
    }
}
