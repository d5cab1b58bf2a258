//! Seeded synthetic corpora.
//!
//! Each track is a random walk over chord fingering templates, every chord
//! held for a random number of frames with occasional rests. With probability
//! `unison_confusability` a chord is played in an alternate voicing that sounds
//! the exact same pitches on different strings. Features are noisy pitch
//! salience maps that only see pitches, so the two voicings are
//! indistinguishable from the features alone.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusTrack;
use crate::error::{Error, Result};
use crate::fretboard::{FretboardConfig, SILENCE};
use crate::tab::FrameTablature;

/// Largest fret distance between fretted notes of an alternate voicing.
const MAX_SPAN: i32 = 4;
/// Alternate voicings stay at or below this fret.
const MAX_ALT_FRET: i32 = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChordTemplate {
    pub name: String,
    /// `(string, fret)` pairs, strings 1-based and distinct.
    pub notes: Vec<(usize, i32)>,
}

impl ChordTemplate {
    /// Parses a chart such as `x32010`, lowest string first.
    pub fn from_chart(name: &str, chart: &str) -> Self {
        let notes = chart
            .chars()
            .enumerate()
            .filter_map(|(i, ch)| ch.to_digit(10).map(|f| (i + 1, f as i32)))
            .collect();
        ChordTemplate {
            name: name.to_string(),
            notes,
        }
    }
}

/// Twenty-four common open and barre chord shapes in standard tuning.
pub fn default_vocabulary() -> Vec<ChordTemplate> {
    [
        ("C", "x32010"),
        ("A", "x02220"),
        ("G", "320003"),
        ("E", "022100"),
        ("D", "xx0232"),
        ("Am", "x02210"),
        ("Em", "022000"),
        ("Dm", "xx0231"),
        ("F", "133211"),
        ("Bm", "x24432"),
        ("B7", "x21202"),
        ("E7", "020100"),
        ("A7", "x02020"),
        ("D7", "xx0212"),
        ("G7", "320001"),
        ("C7", "x32310"),
        ("Fmaj7", "xx3210"),
        ("Cadd9", "x32033"),
        ("Asus2", "x02200"),
        ("Dsus4", "xx0233"),
        ("Bb", "x13331"),
        ("F#m", "244222"),
        ("Gm", "355333"),
        ("Cm", "x35543"),
    ]
    .into_iter()
    .map(|(n, c)| ChordTemplate::from_chart(n, c))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub seed: u64,
    pub num_tracks: usize,
    pub frames_per_track: usize,
    pub chord_vocabulary: Vec<ChordTemplate>,
    /// Standard deviation of the additive feature noise.
    pub pitch_noise: f64,
    /// Probability that a chord is re-voiced onto other strings.
    pub unison_confusability: f64,
    pub min_hold: usize,
    pub max_hold: usize,
    pub rest_probability: f64,
    pub fretboard: FretboardConfig,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            num_tracks: 60,
            frames_per_track: 256,
            chord_vocabulary: default_vocabulary(),
            pitch_noise: 0.25,
            unison_confusability: 0.5,
            min_hold: 6,
            max_hold: 24,
            rest_probability: 0.1,
            fretboard: FretboardConfig::default(),
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.chord_vocabulary.is_empty() {
            return Err(Error::Validation("chord vocabulary is empty".into()));
        }
        for t in &self.chord_vocabulary {
            let mut seen = vec![false; self.fretboard.num_strings()];
            for &(s, f) in &t.notes {
                let pitch = self.fretboard.pitch_of(s, f).map_err(|e| {
                    Error::Validation(format!("template {}: {e}", t.name))
                })?;
                if pitch.is_none() {
                    return Err(Error::Validation(format!("template {} lists a silent note", t.name)));
                }
                if std::mem::replace(&mut seen[s - 1], true) {
                    return Err(Error::Validation(format!(
                        "template {} uses string {s} more than once",
                        t.name
                    )));
                }
            }
        }
        if !self.chord_vocabulary.iter().any(|t| t.notes.len() >= 2) {
            return Err(Error::Validation("no template spans two or more strings".into()));
        }
        if self.num_tracks == 0 || self.frames_per_track == 0 {
            return Err(Error::Validation("num_tracks and frames_per_track must be positive".into()));
        }
        if self.min_hold == 0 || self.min_hold > self.max_hold {
            return Err(Error::Validation("hold range must satisfy 1 <= min_hold <= max_hold".into()));
        }
        if !(self.pitch_noise >= 0.0 && self.pitch_noise.is_finite()) {
            return Err(Error::Validation("pitch_noise must be finite and >= 0".into()));
        }
        for (name, p) in [
            ("unison_confusability", self.unison_confusability),
            ("rest_probability", self.rest_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Validation(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// Every other assignment of the template's pitches to distinct strings that
/// stays within `MAX_ALT_FRET` and a `MAX_SPAN`-fret hand span.
pub fn alternate_voicings(config: &FretboardConfig, template: &ChordTemplate) -> Vec<Vec<(usize, i32)>> {
    let pitches: Vec<i32> = template
        .notes
        .iter()
        .map(|&(s, f)| config.tuning()[s - 1] + f)
        .collect();
    let mut original: Vec<(usize, i32)> = template.notes.clone();
    original.sort();
    let max_fret = MAX_ALT_FRET.min(config.num_frets() as i32);

    let mut found = Vec::new();
    let mut current = Vec::with_capacity(pitches.len());
    let mut used = vec![false; config.num_strings()];

    fn search(
        k: usize,
        pitches: &[i32],
        config: &FretboardConfig,
        max_fret: i32,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, i32)>,
        found: &mut Vec<Vec<(usize, i32)>>,
    ) {
        if k == pitches.len() {
            let fretted: Vec<i32> = current.iter().map(|&(_, f)| f).filter(|&f| f > 0).collect();
            let span = fretted.iter().max().unwrap_or(&0) - fretted.iter().min().unwrap_or(&0);
            if span <= MAX_SPAN {
                let mut v = current.clone();
                v.sort();
                if !found.contains(&v) {
                    found.push(v);
                }
            }
            return;
        }
        for s in 0..config.num_strings() {
            let f = pitches[k] - config.tuning()[s];
            if used[s] || f < 0 || f > max_fret {
                continue;
            }
            used[s] = true;
            current.push((s + 1, f));
            search(k + 1, pitches, config, max_fret, used, current, found);
            current.pop();
            used[s] = false;
        }
    }

    search(0, &pitches, config, max_fret, &mut used, &mut current, &mut found);
    found.retain(|v| *v != original);
    found.sort();
    found
}

/// Generates the corpus described by `params`. Identical params give
/// bitwise-identical output; each track draws from its own ChaCha stream.
pub fn generate_corpus(params: &SynthParams) -> Result<Vec<CorpusTrack>> {
    params.validate()?;
    let cfg = &params.fretboard;
    let alternates: Vec<_> = params
        .chord_vocabulary
        .iter()
        .map(|t| alternate_voicings(cfg, t))
        .collect();
    let noise = Normal::new(0.0, params.pitch_noise).expect("validated noise");
    let space = cfg.pitch_space();
    let vocab = params.chord_vocabulary.len();

    let mut tracks = Vec::with_capacity(params.num_tracks);
    for k in 0..params.num_tracks {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(k as u64 + 1);

        let n_frames = params.frames_per_track;
        let mut frets = Array2::from_elem((cfg.num_strings(), n_frames), SILENCE);
        let mut chord = rng.random_range(0..vocab);
        let mut n = 0;
        while n < n_frames {
            let hold = rng.random_range(params.min_hold..=params.max_hold);
            let end = (n + hold).min(n_frames);
            if rng.random::<f64>() >= params.rest_probability {
                let revoice = rng.random::<f64>() < params.unison_confusability;
                let alts = &alternates[chord];
                let notes = if revoice && !alts.is_empty() {
                    &alts[rng.random_range(0..alts.len())]
                } else {
                    &params.chord_vocabulary[chord].notes
                };
                for &(s, f) in notes {
                    frets.row_mut(s - 1).slice_mut(ndarray::s![n..end]).fill(f);
                }
                let step = rng.random_range(1..=3usize);
                chord = if rng.random::<bool>() {
                    (chord + step) % vocab
                } else {
                    (chord + vocab - step % vocab) % vocab
                };
            }
            n = end;
        }

        let mut features = Array2::zeros((space.len(), n_frames));
        for s in 0..cfg.num_strings() {
            for n in 0..n_frames {
                let f = frets[[s, n]];
                if f != SILENCE {
                    let p = space.index_of(cfg.tuning()[s] + f).expect("pitch in range");
                    features[[p, n]] = 1.0;
                }
            }
        }
        if params.pitch_noise > 0.0 {
            features.mapv_inplace(|v| v + noise.sample(&mut rng));
        }

        tracks.push(CorpusTrack {
            track_id: format!("synth-{}-{k:03}", params.seed),
            tablature: FrameTablature::new(cfg.clone(), frets)?,
            features: Some(features),
        });
    }
    Ok(tracks)
}

/// Shuffles indices with `seed` and cuts them by `ratios` (train, validation,
/// test). Sizes are rounded for the first two splits; the test split takes the
/// remainder. Items keep their original relative order within a split.
pub fn split_corpus<T: Clone>(items: &[T], ratios: [f64; 3], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    if ratios.iter().any(|&r| !(r > 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "split ratios must be positive and sum to 1, got {ratios:?}"
        )));
    }
    let n = items.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5_u64 << 32);
    for i in (1..n).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    let n_train = (ratios[0] * n as f64).round() as usize;
    let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train.min(n));
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Validation(format!(
            "split of {n} items by {ratios:?} leaves a split empty"
        )));
    }
    let pick = |range: &[usize]| {
        let mut r = range.to_vec();
        r.sort_unstable();
        r.into_iter().map(|i| items[i].clone()).collect::<Vec<T>>()
    };
    Ok((
        pick(&idx[..n_train]),
        pick(&idx[n_train..n_train + n_val]),
        pick(&idx[n_train + n_val..]),
    ))
}

pub const DEFAULT_SPLIT: [f64; 3] = [4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
