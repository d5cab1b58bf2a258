//! Portable pixmap (binary PPM) rendering of square matrices.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

// Viridis sampled at nine evenly spaced stops.
const RAMP: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 82, 139],
    [44, 113, 142],
    [33, 145, 140],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

const GRID: [u8; 3] = [255, 255, 255];

/// Maps `[0, 1]` onto the ramp, dark purple at 0 and bright yellow at 1.
/// Values outside the range are clamped.
pub fn color_of(v: f64) -> [u8; 3] {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let pos = v * (RAMP.len() - 1) as f64;
    let lo = (pos.floor() as usize).min(RAMP.len() - 2);
    let t = pos - lo as f64;
    let mut out = [0u8; 3];
    for k in 0..3 {
        let a = RAMP[lo][k] as f64;
        let b = RAMP[lo + 1][k] as f64;
        out[k] = (a + (b - a) * t).round() as u8;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pixmap {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Pixmap {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]]
    }

    /// Binary `P6` encoding.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

/// Renders each cell as a `scale x scale` square and overlays one-pixel grid
/// lines at every multiple of `block` (the string boundaries).
pub fn render(values: &Array2<f64>, block: usize, scale: usize) -> Pixmap {
    let scale = scale.max(1);
    let (rows, cols) = values.dim();
    let (width, height) = (cols * scale, rows * scale);
    let mut rgb = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let on_grid = block > 0
                && ((x > 0 && x % (block * scale) == 0) || (y > 0 && y % (block * scale) == 0));
            let c = if on_grid {
                GRID
            } else {
                color_of(values[[y / scale, x / scale]])
            };
            rgb.extend_from_slice(&c);
        }
    }
    Pixmap { width, height, rgb }
}
