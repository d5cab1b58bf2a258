//! Inhibition weights and the pairwise inhibition energy.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::cooccurrence::CooccurrenceMatrix;
use crate::error::{Error, Result};
use crate::fretboard::FretboardConfig;

/// Boost used for the sharpened weights.
pub const DEFAULT_BOOST: u32 = 1 << 7;

/// Upper bound accepted for the boost exponent.
pub const MAX_BOOST: u32 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightOrigin {
    Corpus,
    StringConstraints,
}

impl WeightOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightOrigin::Corpus => "corpus",
            WeightOrigin::StringConstraints => "string-constraints",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "corpus" => Some(WeightOrigin::Corpus),
            "string-constraints" => Some(WeightOrigin::StringConstraints),
            _ => None,
        }
    }
}

/// Symmetric `C x C` penalty for co-activating two combinations in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InhibitionMatrix {
    weights: Array2<f64>,
    boost: u32,
    source: WeightOrigin,
    config_hash: String,
    track_count: u64,
}

impl InhibitionMatrix {
    /// Wraps raw weights after checking they are square, symmetric and in `[0, 1]`.
    pub fn from_parts(
        weights: Array2<f64>,
        boost: u32,
        source: WeightOrigin,
        config_hash: String,
        track_count: u64,
    ) -> Result<Self> {
        let (r, c) = weights.dim();
        if r != c {
            return Err(Error::Dimension(format!("weight matrix is {r}x{c}, expected square")));
        }
        if boost == 0 {
            return Err(Error::Domain("boost must be at least 1".into()));
        }
        for i in 0..r {
            for j in 0..r {
                let w = weights[[i, j]];
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::Validation(format!("weight ({i},{j}) = {w} outside [0,1]")));
                }
                if w != weights[[j, i]] {
                    return Err(Error::Validation(format!("weights not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(InhibitionMatrix {
            weights,
            boost,
            source,
            config_hash,
            track_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn boost(&self) -> u32 {
        self.boost
    }

    pub fn source(&self) -> WeightOrigin {
        self.source
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn track_count(&self) -> u64 {
        self.track_count
    }

    /// Complement `1 - w`, the effective pairwise likelihood the weights encode.
    pub fn likelihood_view(&self) -> Array2<f64> {
        self.weights.mapv(|w| 1.0 - w)
    }
}

/// `(1 - IoU)^b`, evaluated as `exp(b * ln(1 - IoU))`.
pub fn boosted_weight(iou: f64, boost: u32) -> f64 {
    (boost as f64 * (-iou).ln_1p()).exp()
}

pub fn weights_from_cooccurrence(m: &CooccurrenceMatrix, boost: u32) -> Result<InhibitionMatrix> {
    if boost == 0 || boost > MAX_BOOST {
        return Err(Error::Domain(format!("boost must lie in 1..={MAX_BOOST}, got {boost}")));
    }
    let dim = m.dim();
    let mut weights = Array2::zeros((dim, dim));
    for i in 0..dim {
        for j in i..dim {
            let w = boosted_weight(m.values[[i, j]], boost);
            weights[[i, j]] = w;
            weights[[j, i]] = w;
        }
    }
    Ok(InhibitionMatrix {
        weights,
        boost,
        source: WeightOrigin::Corpus,
        config_hash: m.config_hash.clone(),
        track_count: m.track_count,
    })
}

/// Weight 1 between distinct combinations of the same string, 0 elsewhere.
pub fn string_constraint_weights(config: &FretboardConfig) -> InhibitionMatrix {
    let dim = config.num_combos();
    let weights = Array2::from_shape_fn((dim, dim), |(i, j)| {
        if i != j && config.string_block(i) == config.string_block(j) {
            1.0
        } else {
            0.0
        }
    });
    InhibitionMatrix {
        weights,
        boost: 1,
        source: WeightOrigin::StringConstraints,
        config_hash: config.fingerprint(),
        track_count: 0,
    }
}

fn check_dims(sheet: &ArrayView2<f64>, w: &InhibitionMatrix) -> Result<()> {
    if sheet.nrows() != w.dim() {
        return Err(Error::Dimension(format!(
            "sheet has {} rows but weights are {}x{}",
            sheet.nrows(),
            w.dim(),
            w.dim()
        )));
    }
    Ok(())
}

/// `(1/2N) sum_n z_n^T W z_n` over the columns of a `C x N` sheet.
pub fn inhibition_energy(sheet: ArrayView2<f64>, w: &InhibitionMatrix) -> Result<f64> {
    check_dims(&sheet, w)?;
    let n = sheet.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let wz = w.weights.dot(&sheet);
    let quad: f64 = sheet.iter().zip(wz.iter()).map(|(z, y)| z * y).sum();
    Ok(quad / (2.0 * n as f64))
}

/// Gradient of [`inhibition_energy`] with respect to every sheet entry, `W z_n / N`.
pub fn inhibition_gradient(sheet: ArrayView2<f64>, w: &InhibitionMatrix) -> Result<Array2<f64>> {
    check_dims(&sheet, w)?;
    let n = sheet.ncols();
    if n == 0 {
        return Ok(Array2::zeros(sheet.dim()));
    }
    let mut g = w.weights.dot(&sheet);
    g /= n as f64;
    Ok(g)
}
