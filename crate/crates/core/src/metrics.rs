//! Frame-level transcription metrics, computed per track and averaged over
//! tracks with equal weight.
//!
//! Empty-set conventions: precision (recall) over zero predicted (reference)
//! positives is 1 when both sides are empty and 0 otherwise; the f-measure is
//! 0 when `p + r == 0`; TDR over zero pitch matches is 1.

use std::io;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fretboard::FretboardConfig;
use crate::inhibition::{inhibition_energy, InhibitionMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl Prf {
    pub fn from_counts(tp: u64, predicted: u64, reference: u64) -> Self {
        let ratio = |num: u64, den: u64, other: u64| {
            if den > 0 {
                num as f64 / den as f64
            } else if other == 0 {
                1.0
            } else {
                0.0
            }
        };
        let precision = ratio(tp, predicted, reference);
        let recall = ratio(tp, reference, predicted);
        Prf {
            precision,
            recall,
            f_measure: f_measure(precision, recall),
        }
    }
}

pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn check_pair(config: &FretboardConfig, pred: &ArrayView2<u8>, truth: &ArrayView2<u8>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::Dimension(format!(
            "prediction is {:?} but ground truth is {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    if pred.nrows() != config.num_combos() {
        return Err(Error::Dimension(format!(
            "tensors have {} rows, fretboard has {} combinations",
            pred.nrows(),
            config.num_combos()
        )));
    }
    Ok(())
}

/// `P x N` count of active non-silence combinations sounding each pitch.
pub fn pitch_activation_map(config: &FretboardConfig, tensor: ArrayView2<u8>) -> Array2<u32> {
    let space = config.pitch_space();
    let pitches = config.combo_pitches();
    let mut m = Array2::zeros((space.len(), tensor.ncols()));
    for ((c, n), &v) in tensor.indexed_iter() {
        if v != 0 {
            if let Some(p) = pitches[c] {
                m[[space.index_of(p).expect("pitch in range"), n]] += 1;
            }
        }
    }
    m
}

struct TabCounts {
    tp: u64,
    predicted: u64,
    reference: u64,
}

fn tab_counts(config: &FretboardConfig, pred: &ArrayView2<u8>, truth: &ArrayView2<u8>) -> TabCounts {
    let mut c = TabCounts {
        tp: 0,
        predicted: 0,
        reference: 0,
    };
    for (((k, _), &y), &t) in pred.indexed_iter().zip(truth.iter()) {
        if config.is_silence(k) {
            continue;
        }
        let (y, t) = (y != 0, t != 0);
        c.predicted += y as u64;
        c.reference += t as u64;
        c.tp += (y && t) as u64;
    }
    c
}

pub fn tablature_prf(config: &FretboardConfig, pred: ArrayView2<u8>, truth: ArrayView2<u8>) -> Result<Prf> {
    check_pair(config, &pred, &truth)?;
    let c = tab_counts(config, &pred, &truth);
    Ok(Prf::from_counts(c.tp, c.predicted, c.reference))
}

pub fn multipitch_prf(config: &FretboardConfig, pred: ArrayView2<u8>, truth: ArrayView2<u8>) -> Result<Prf> {
    check_pair(config, &pred, &truth)?;
    let my = pitch_activation_map(config, pred);
    let mt = pitch_activation_map(config, truth);
    let (mut tp, mut np, mut nt) = (0, 0, 0);
    for (&y, &t) in my.iter().zip(mt.iter()) {
        let (y, t) = (y > 0, t > 0);
        np += y as u64;
        nt += t as u64;
        tp += (y && t) as u64;
    }
    Ok(Prf::from_counts(tp, np, nt))
}

/// Pitch matches counted with multiplicity, `sum min(m_y, m_t)`.
fn pitch_matches(my: &Array2<u32>, mt: &Array2<u32>) -> u64 {
    my.iter().zip(mt.iter()).map(|(&y, &t)| y.min(t) as u64).sum()
}

/// True positives behind the disambiguation rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchCounts {
    /// Predicted combinations present in the ground truth, silence excluded.
    pub tablature: u64,
    /// Pitch matches counted with multiplicity.
    pub pitch: u64,
}

pub fn match_counts(config: &FretboardConfig, pred: ArrayView2<u8>, truth: ArrayView2<u8>) -> Result<MatchCounts> {
    check_pair(config, &pred, &truth)?;
    Ok(MatchCounts {
        tablature: tab_counts(config, &pred, &truth).tp,
        pitch: pitch_matches(&pitch_activation_map(config, pred), &pitch_activation_map(config, truth)),
    })
}

/// Tablature true positives over pitch matches. Pitch matches are counted with
/// multiplicity so a correctly transcribed unison scores 1, not 2.
pub fn tdr(config: &FretboardConfig, pred: ArrayView2<u8>, truth: ArrayView2<u8>) -> Result<f64> {
    let c = match_counts(config, pred, truth)?;
    Ok(if c.pitch == 0 {
        1.0
    } else {
        c.tablature as f64 / c.pitch as f64
    })
}

pub fn duplicate_pitch_errors(config: &FretboardConfig, pred: ArrayView2<u8>, truth: ArrayView2<u8>) -> Result<u64> {
    check_pair(config, &pred, &truth)?;
    let my = pitch_activation_map(config, pred);
    let mt = pitch_activation_map(config, truth);
    Ok(my
        .iter()
        .zip(mt.iter())
        .map(|(&y, &t)| y.saturating_sub(t) as u64)
        .sum())
}

/// Fretted predictions absent from the ground truth. Wrong silences do not count.
pub fn false_alarm_errors(config: &FretboardConfig, pred: ArrayView2<u8>, truth: ArrayView2<u8>) -> Result<u64> {
    check_pair(config, &pred, &truth)?;
    Ok(pred
        .indexed_iter()
        .zip(truth.iter())
        .filter(|(((k, _), &y), &t)| !config.is_silence(*k) && y != 0 && t == 0)
        .count() as u64)
}

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub track_id: String,
    pub p_tab: f64,
    pub r_tab: f64,
    pub f_tab: f64,
    pub p_pitch: f64,
    pub r_pitch: f64,
    pub f_pitch: f64,
    pub tdr: f64,
    pub l_inh: f64,
    pub l_inh_plus: f64,
    pub e_dp: f64,
    pub e_fa: f64,
}

impl EvalRow {
    fn values(&self) -> [f64; 11] {
        [
            self.p_tab,
            self.r_tab,
            self.f_tab,
            self.p_pitch,
            self.r_pitch,
            self.f_pitch,
            self.tdr,
            self.l_inh,
            self.l_inh_plus,
            self.e_dp,
            self.e_fa,
        ]
    }

    fn from_values(track_id: String, v: [f64; 11]) -> Self {
        EvalRow {
            track_id,
            p_tab: v[0],
            r_tab: v[1],
            f_tab: v[2],
            p_pitch: v[3],
            r_pitch: v[4],
            f_pitch: v[5],
            tdr: v[6],
            l_inh: v[7],
            l_inh_plus: v[8],
            e_dp: v[9],
            e_fa: v[10],
        }
    }

    /// Unweighted mean of every column.
    pub fn mean(track_id: &str, rows: &[EvalRow]) -> Self {
        let mut acc = [0.0; 11];
        for r in rows {
            for (a, v) in acc.iter_mut().zip(r.values()) {
                *a += v;
            }
        }
        if !rows.is_empty() {
            acc.iter_mut().for_each(|a| *a /= rows.len() as f64);
        }
        EvalRow::from_values(track_id.to_string(), acc)
    }
}

/// Every metric for one track. `w_std` and `w_boost` are the standard and
/// boosted corpus weights; both energies are taken on the binary predictions.
pub fn evaluate_track(
    config: &FretboardConfig,
    track_id: &str,
    pred: ArrayView2<u8>,
    truth: ArrayView2<u8>,
    w_std: &InhibitionMatrix,
    w_boost: &InhibitionMatrix,
) -> Result<EvalRow> {
    check_pair(config, &pred, &truth)?;
    let tab = tablature_prf(config, pred, truth)?;
    let pitch = multipitch_prf(config, pred, truth)?;
    let y = pred.mapv(f64::from);
    Ok(EvalRow {
        track_id: track_id.to_string(),
        p_tab: tab.precision,
        r_tab: tab.recall,
        f_tab: tab.f_measure,
        p_pitch: pitch.precision,
        r_pitch: pitch.recall,
        f_pitch: pitch.f_measure,
        tdr: tdr(config, pred, truth)?,
        l_inh: inhibition_energy(y.view(), w_std)?,
        l_inh_plus: inhibition_energy(y.view(), w_boost)?,
        e_dp: duplicate_pitch_errors(config, pred, truth)? as f64,
        e_fa: false_alarm_errors(config, pred, truth)? as f64,
    })
}

/// Per-track rows plus their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean: EvalRow,
}

pub const MEAN_ROW: &str = "mean";

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>) -> Self {
        let mean = EvalRow::mean(MEAN_ROW, &rows);
        EvalReport { rows, mean }
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        write_rows(out, self.rows.iter().chain(std::iter::once(&self.mean)))
    }

    pub fn read_csv<R: io::Read>(input: R) -> Result<Self> {
        let mut rows = read_rows(input)?;
        match rows.pop() {
            Some(mean) if mean.track_id == MEAN_ROW => Ok(EvalReport { rows, mean }),
            _ => Err(Error::Format("report is missing its `mean` row".into())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

pub(crate) fn write_rows<'a, W: io::Write>(out: W, rows: impl Iterator<Item = &'a EvalRow>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub(crate) fn read_rows<R: io::Read>(input: R) -> Result<Vec<EvalRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Format(e.to_string())))
        .collect()
}
