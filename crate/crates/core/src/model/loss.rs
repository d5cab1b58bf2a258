use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::inhibition::{inhibition_energy, InhibitionMatrix};

/// Lower clamp applied to every logarithm argument.
pub const LOG_EPS: f64 = 1e-12;

fn check(z: &ArrayView2<f64>, t: &ArrayView2<u8>) -> Result<()> {
    if z.dim() != t.dim() {
        return Err(Error::Dimension(format!(
            "activations are {:?}, targets are {:?}",
            z.dim(),
            t.dim()
        )));
    }
    Ok(())
}

/// Categorical cross-entropy summed over string blocks, averaged over frames.
/// `targets` must be one-hot within each block.
pub fn loss_cce(activations: ArrayView2<f64>, targets: ArrayView2<u8>) -> Result<f64> {
    check(&activations, &targets)?;
    let n = activations.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = activations
        .iter()
        .zip(targets.iter())
        .filter(|(_, &t)| t != 0)
        .map(|(&z, _)| z.max(LOG_EPS).ln())
        .sum();
    Ok(-sum / n as f64)
}

/// Binary cross-entropy summed over all combinations, averaged over frames.
pub fn loss_bce(activations: ArrayView2<f64>, targets: ArrayView2<u8>) -> Result<f64> {
    check(&activations, &targets)?;
    let n = activations.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = activations
        .iter()
        .zip(targets.iter())
        .map(|(&z, &t)| {
            let z = z.clamp(LOG_EPS, 1.0 - LOG_EPS);
            if t != 0 {
                z.ln()
            } else {
                (1.0 - z).ln()
            }
        })
        .sum();
    Ok(-sum / n as f64)
}

/// `loss_bce + lambda * inhibition_energy`.
pub fn loss_total(
    activations: ArrayView2<f64>,
    targets: ArrayView2<u8>,
    w: &InhibitionMatrix,
    lambda: f64,
) -> Result<f64> {
    let bce = loss_bce(activations, targets)?;
    if lambda == 0.0 {
        // still validates the shape
        inhibition_energy(activations, w)?;
        return Ok(bce);
    }
    Ok(bce + lambda * inhibition_energy(activations, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fretboard::FretboardConfig;
    use crate::inhibition::string_constraint_weights;
    use crate::tab::{targets_of, FrameTablature};
    use ndarray::Array2;

    fn silent_targets(frames: usize) -> Array2<u8> {
        targets_of(&FrameTablature::silent(FretboardConfig::default(), frames))
    }

    #[test]
    fn uniform_cce() {
        let t = silent_targets(3);
        let z = Array2::from_elem((126, 3), 1.0 / 21.0);
        let l = loss_cce(z.view(), t.view()).unwrap();
        assert!((l - 18.267134626340538).abs() < 1e-12, "{l}");
    }

    #[test]
    fn perfect_cce_and_frame_averaging() {
        let t = silent_targets(2);
        let z = t.mapv(f64::from);
        assert_eq!(loss_cce(z.view(), t.view()).unwrap(), 0.0);
        let mut z = Array2::from_elem((126, 1), 0.01);
        z[[0, 0]] = 0.3;
        let t1 = silent_targets(1);
        let single = loss_cce(z.view(), t1.view()).unwrap();
        let z2 = ndarray::concatenate![ndarray::Axis(1), z, z];
        let t2 = silent_targets(2);
        assert!((loss_cce(z2.view(), t2.view()).unwrap() - single).abs() < 1e-12);
    }

    #[test]
    fn half_bce() {
        let t = silent_targets(4);
        let z = Array2::from_elem((126, 4), 0.5);
        let l = loss_bce(z.view(), t.view()).unwrap();
        assert!((l - 87.33654475055311).abs() < 1e-10, "{l}");
    }

    #[test]
    fn perfect_bce_is_near_zero() {
        let t = silent_targets(2);
        let z = t.mapv(f64::from);
        let l = loss_bce(z.view(), t.view()).unwrap();
        assert!(l >= 0.0 && l < 126.0 * 2e-12, "{l}");
    }

    #[test]
    fn bce_symmetry() {
        let t = silent_targets(2);
        let z = Array2::from_shape_fn((126, 2), |(i, j)| ((i * 13 + j * 7) % 97) as f64 / 100.0 + 0.005);
        let a = loss_bce(z.view(), t.view()).unwrap();
        let b = loss_bce(z.mapv(|v| 1.0 - v).view(), t.mapv(|v| 1 - v).view()).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn total_is_linear_in_lambda() {
        let cfg = FretboardConfig::default();
        let w = string_constraint_weights(&cfg);
        let t = silent_targets(3);
        let z = Array2::from_shape_fn((126, 3), |(i, j)| ((i * 5 + j * 11) % 89) as f64 / 100.0 + 0.01);
        let bce = loss_bce(z.view(), t.view()).unwrap();
        assert_eq!(loss_total(z.view(), t.view(), &w, 0.0).unwrap(), bce);
        let e = inhibition_energy(z.view(), &w).unwrap();
        let l1 = loss_total(z.view(), t.view(), &w, 1.0).unwrap();
        let l10 = loss_total(z.view(), t.view(), &w, 10.0).unwrap();
        assert!((l10 - l1 - 9.0 * e).abs() < 1e-9);
        let zero = Array2::zeros((126, 3));
        assert_eq!(
            loss_total(zero.view(), t.view(), &w, 10.0).unwrap(),
            loss_bce(zero.view(), t.view()).unwrap()
        );
    }
}
