//! Pairwise co-occurrence likelihood: per-track intersection over union of
//! frame-level activity, averaged over the tracks where both combinations occur.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fretboard::FretboardConfig;
use crate::tab::{targets_of, FrameTablature};

/// Intersection and union frame counts for one track.
///
/// Only pairs with a nonzero intersection are stored; unions follow from the
/// per-combination occurrence counts (`union = count_i + count_j - inter`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrackPairStats {
    dim: usize,
    num_frames: usize,
    counts: Vec<u64>,
    inter: BTreeMap<(usize, usize), u64>,
}

impl TrackPairStats {
    /// Counts logical AND / OR of every pair of rows of a binary `C x N` tensor.
    pub fn from_targets(targets: &Array2<u8>) -> Self {
        let (dim, num_frames) = targets.dim();
        let mut counts = vec![0u64; dim];
        let mut inter = BTreeMap::new();
        let mut active = Vec::with_capacity(dim);
        for col in targets.columns() {
            active.clear();
            active.extend(col.iter().enumerate().filter(|(_, &v)| v != 0).map(|(c, _)| c));
            for (a, &i) in active.iter().enumerate() {
                counts[i] += 1;
                for &j in &active[a + 1..] {
                    *inter.entry((i, j)).or_insert(0) += 1;
                }
            }
        }
        TrackPairStats {
            dim,
            num_frames,
            counts,
            inter,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    /// Number of frames where combination `i` is active.
    pub fn occurrences(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn inter(&self, i: usize, j: usize) -> u64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => self.counts[i],
            std::cmp::Ordering::Less => self.inter.get(&(i, j)).copied().unwrap_or(0),
            std::cmp::Ordering::Greater => self.inter.get(&(j, i)).copied().unwrap_or(0),
        }
    }

    pub fn union(&self, i: usize, j: usize) -> u64 {
        if i == j {
            self.counts[i]
        } else {
            self.counts[i] + self.counts[j] - self.inter(i, j)
        }
    }

    /// Combinations active in at least one frame, ascending.
    pub fn occurring(&self) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.counts[i] > 0).collect()
    }
}

/// Averaged IoU for every pair, plus the number of tracks each average ran over.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    pub values: Array2<f64>,
    pub valid_track_counts: Array2<u64>,
    /// Fingerprint of the fretboard the corpus was rasterized on.
    pub config_hash: String,
    pub track_count: u64,
}

impl CooccurrenceMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

/// Running sums for [`accumulate`]. Partial accumulators over disjoint track
/// sets can be merged in any order: each pair keeps its list of per-track IoU
/// contributions and the final mean sums them in sorted order, so the result
/// is bitwise independent of track order and merge tree.
#[derive(Debug, Clone)]
pub struct PairAccumulator {
    dim: usize,
    tracks: u64,
    contributions: BTreeMap<(usize, usize), Vec<f64>>,
    skip: Vec<bool>,
}

impl PairAccumulator {
    pub fn new(dim: usize) -> Self {
        PairAccumulator {
            dim,
            tracks: 0,
            contributions: BTreeMap::new(),
            skip: vec![false; dim],
        }
    }

    /// Excludes the given combinations from every pair (their rows stay zero).
    pub fn excluding(mut self, combos: impl IntoIterator<Item = usize>) -> Self {
        for c in combos {
            self.skip[c] = true;
        }
        self
    }

    pub fn add(&mut self, stats: &TrackPairStats) -> Result<()> {
        if stats.dim != self.dim {
            return Err(Error::Dimension(format!(
                "track statistics have dimension {}, accumulator has {}",
                stats.dim, self.dim
            )));
        }
        self.tracks += 1;
        let occ: Vec<usize> = stats.occurring().into_iter().filter(|&c| !self.skip[c]).collect();
        for (a, &i) in occ.iter().enumerate() {
            for &j in &occ[a..] {
                let iou = stats.inter(i, j) as f64 / stats.union(i, j) as f64;
                self.contributions.entry((i, j)).or_default().push(iou);
            }
        }
        Ok(())
    }

    pub fn merge(mut self, other: PairAccumulator) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::Dimension(format!(
                "cannot merge accumulators of dimension {} and {}",
                self.dim, other.dim
            )));
        }
        self.tracks += other.tracks;
        for (k, mut v) in other.contributions {
            self.contributions.entry(k).or_default().append(&mut v);
        }
        Ok(self)
    }

    pub fn finish(self, config_hash: &str) -> CooccurrenceMatrix {
        let mut values = Array2::zeros((self.dim, self.dim));
        let mut valid = Array2::zeros((self.dim, self.dim));
        for ((i, j), mut v) in self.contributions {
            v.sort_by(f64::total_cmp);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            values[[i, j]] = mean;
            values[[j, i]] = mean;
            valid[[i, j]] = v.len() as u64;
            valid[[j, i]] = v.len() as u64;
        }
        CooccurrenceMatrix {
            values,
            valid_track_counts: valid,
            config_hash: config_hash.to_string(),
            track_count: self.tracks,
        }
    }
}

/// Averages per-track IoU over a stream of track statistics.
pub fn accumulate<'a>(
    stats: impl IntoIterator<Item = &'a TrackPairStats>,
    config_hash: &str,
) -> Result<CooccurrenceMatrix> {
    let mut stats = stats.into_iter().peekable();
    let dim = stats
        .peek()
        .map(|s| s.dim)
        .ok_or_else(|| Error::Validation("no track statistics to accumulate".into()))?;
    let mut acc = PairAccumulator::new(dim);
    for s in stats {
        acc.add(s)?;
    }
    Ok(acc.finish(config_hash))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimateOptions {
    /// Whether silence classes take part in the matrix.
    pub include_silence: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            include_silence: true,
        }
    }
}

/// End to end estimation over a corpus of frame tablature. Tracks are processed
/// in parallel.
pub fn estimate_corpus(tracks: &[FrameTablature]) -> Result<CooccurrenceMatrix> {
    estimate_corpus_with(tracks, EstimateOptions::default())
}

pub fn estimate_corpus_with(tracks: &[FrameTablature], opts: EstimateOptions) -> Result<CooccurrenceMatrix> {
    let first = tracks
        .first()
        .ok_or_else(|| Error::Validation("cannot estimate co-occurrence from an empty corpus".into()))?;
    let config: &FretboardConfig = first.config();
    if let Some(other) = tracks.iter().find(|t| t.config() != config) {
        return Err(Error::Validation(format!(
            "corpus mixes fretboard configs {} and {}",
            config.fingerprint(),
            other.config().fingerprint()
        )));
    }
    let dim = config.num_combos();
    let skipped: Vec<usize> = if opts.include_silence {
        Vec::new()
    } else {
        (0..dim).filter(|&c| config.is_silence(c)).collect()
    };
    let acc = tracks
        .par_iter()
        .map(|t| {
            let mut acc = PairAccumulator::new(dim).excluding(skipped.iter().copied());
            acc.add(&TrackPairStats::from_targets(&targets_of(t)))?;
            Ok(acc)
        })
        .try_reduce(
            || PairAccumulator::new(dim).excluding(skipped.iter().copied()),
            |a, b| a.merge(b),
        )?;
    Ok(acc.finish(&config.fingerprint()))
}
