//! Instrument geometry and the flattened string/fret combination index space.
//!
//! Strings are numbered from 1 (lowest open pitch in standard tuning) and fret
//! classes run over `-1..=num_frets`, where `-1` is silence and `0` the open
//! string. Combinations are laid out string-major with silence first inside
//! each string block, so index `(s - 1) * (F + 2) + (f + 1)`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Fret class denoting a silent string.
pub const SILENCE: i32 = -1;

/// Standard six-string tuning, low to high, as MIDI note numbers.
pub const STANDARD_TUNING: [i32; 6] = [40, 45, 50, 55, 59, 64];

pub const DEFAULT_NUM_FRETS: usize = 19;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFretboard", into = "RawFretboard")]
pub struct FretboardConfig {
    num_strings: usize,
    num_frets: usize,
    tuning: Vec<i32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFretboard {
    num_strings: usize,
    num_frets: usize,
    tuning: Vec<i32>,
}

impl TryFrom<RawFretboard> for FretboardConfig {
    type Error = Error;

    fn try_from(raw: RawFretboard) -> Result<Self> {
        FretboardConfig::new(raw.num_strings, raw.num_frets, raw.tuning)
    }
}

impl From<FretboardConfig> for RawFretboard {
    fn from(cfg: FretboardConfig) -> Self {
        RawFretboard {
            num_strings: cfg.num_strings,
            num_frets: cfg.num_frets,
            tuning: cfg.tuning,
        }
    }
}

impl Default for FretboardConfig {
    fn default() -> Self {
        FretboardConfig {
            num_strings: STANDARD_TUNING.len(),
            num_frets: DEFAULT_NUM_FRETS,
            tuning: STANDARD_TUNING.to_vec(),
        }
    }
}

/// A flattened (string, fret class) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComboIndex(pub usize);

impl ComboIndex {
    pub fn get(self) -> usize {
        self.0
    }
}

/// Range of pitches reachable on a fretboard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PitchSpace {
    pub min_pitch: i32,
    pub max_pitch: i32,
}

impl PitchSpace {
    /// Number of distinct pitches `P`.
    pub fn len(&self) -> usize {
        (self.max_pitch - self.min_pitch + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row of `pitch` in a pitch-major matrix.
    pub fn index_of(&self, pitch: i32) -> Option<usize> {
        (self.min_pitch..=self.max_pitch)
            .contains(&pitch)
            .then(|| (pitch - self.min_pitch) as usize)
    }
}

impl FretboardConfig {
    pub fn new(num_strings: usize, num_frets: usize, tuning: Vec<i32>) -> Result<Self> {
        if num_strings == 0 {
            return Err(Error::Validation("num_strings must be at least 1".into()));
        }
        if num_frets == 0 {
            return Err(Error::Validation("num_frets must be at least 1".into()));
        }
        if tuning.len() != num_strings {
            return Err(Error::Validation(format!(
                "tuning has {} pitches but num_strings is {num_strings}",
                tuning.len()
            )));
        }
        if let Some(p) = tuning.iter().find(|&&p| p <= 0) {
            return Err(Error::Validation(format!(
                "tuning pitches must be positive, got {p}"
            )));
        }
        Ok(FretboardConfig {
            num_strings,
            num_frets,
            tuning,
        })
    }

    pub fn num_strings(&self) -> usize {
        self.num_strings
    }

    pub fn num_frets(&self) -> usize {
        self.num_frets
    }

    pub fn tuning(&self) -> &[i32] {
        &self.tuning
    }

    /// Fret classes per string, `F + 2` (silence, open, frets 1..=F).
    pub fn classes_per_string(&self) -> usize {
        self.num_frets + 2
    }

    /// Total number of combinations `C`.
    pub fn num_combos(&self) -> usize {
        self.num_strings * self.classes_per_string()
    }

    pub fn pitch_space(&self) -> PitchSpace {
        let min_pitch = *self.tuning.iter().min().expect("tuning is nonempty");
        let max_pitch = *self.tuning.iter().max().expect("tuning is nonempty") + self.num_frets as i32;
        PitchSpace {
            min_pitch,
            max_pitch,
        }
    }

    fn check_string(&self, string: usize) -> Result<()> {
        if string == 0 || string > self.num_strings {
            return Err(Error::Domain(format!(
                "string {string} outside 1..={}",
                self.num_strings
            )));
        }
        Ok(())
    }

    fn check_fret(&self, fret_class: i32) -> Result<()> {
        if fret_class < SILENCE || fret_class > self.num_frets as i32 {
            return Err(Error::Domain(format!(
                "fret class {fret_class} outside -1..={}",
                self.num_frets
            )));
        }
        Ok(())
    }

    pub fn combo_of(&self, string: usize, fret_class: i32) -> Result<ComboIndex> {
        self.check_string(string)?;
        self.check_fret(fret_class)?;
        Ok(ComboIndex(
            (string - 1) * self.classes_per_string() + (fret_class + 1) as usize,
        ))
    }

    pub fn split_combo(&self, combo: ComboIndex) -> Result<(usize, i32)> {
        if combo.0 >= self.num_combos() {
            return Err(Error::Domain(format!(
                "combination {} outside 0..{}",
                combo.0,
                self.num_combos()
            )));
        }
        let width = self.classes_per_string();
        Ok((combo.0 / width + 1, (combo.0 % width) as i32 - 1))
    }

    /// Sounding pitch of a combination, `None` for silence.
    pub fn pitch_of(&self, string: usize, fret_class: i32) -> Result<Option<i32>> {
        self.check_string(string)?;
        self.check_fret(fret_class)?;
        Ok((fret_class >= 0).then(|| self.tuning[string - 1] + fret_class))
    }

    /// Pitch of every combination in index order (`None` at silence indices).
    pub fn combo_pitches(&self) -> Vec<Option<i32>> {
        (0..self.num_combos())
            .map(|c| {
                let (s, f) = self.split_combo(ComboIndex(c)).expect("index in range");
                self.pitch_of(s, f).expect("valid combination")
            })
            .collect()
    }

    /// String block (0-based) of a flattened index.
    pub fn string_block(&self, combo: usize) -> usize {
        combo / self.classes_per_string()
    }

    pub fn is_silence(&self, combo: usize) -> bool {
        combo % self.classes_per_string() == 0
    }

    /// Short stable fingerprint used to tag persisted matrices.
    pub fn fingerprint(&self) -> String {
        let tuning: Vec<String> = self.tuning.iter().map(i32::to_string).collect();
        let canonical = format!(
            "strings={};frets={};tuning={}",
            self.num_strings,
            self.num_frets,
            tuning.join(",")
        );
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}
