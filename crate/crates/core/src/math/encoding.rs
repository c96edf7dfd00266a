use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// NeRF-style positional encoding: for every input component emits
/// `sin(2^k π x), cos(2^k π x)` for `k = 0..n_freq`.
pub fn sinusoidal_pe(x: &[f64], n_freq: usize) -> Result<Vec<f64>> {
    if n_freq == 0 {
        return Err(invalid("n_freq must be at least 1"));
    }
    let mut out = Vec::with_capacity(x.len() * 2 * n_freq);
    for &v in x {
        let mut scale = PI;
        for _ in 0..n_freq {
            let (s, c) = (scale * v).sin_cos();
            out.push(s);
            out.push(c);
            scale *= 2.0;
        }
    }
    Ok(out)
}

/// Dense square matrix of side `2r`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    pub side: usize,
    pub data: Vec<f64>,
}

impl SquareMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.side + col]
    }
}

/// Gaussian positional-encoding kernel over a `2r × 2r` agent-centered map.
///
/// Entry `(i, j)` is `b² / √(2π w²) · exp(−d² / (2w²))` where `d` is the
/// Euclidean offset of cell `(i, j)` from the agent cell `(r, r)`.
pub fn gaussian_pe_kernel(r: usize, w: f64, b: f64) -> Result<SquareMatrix> {
    if r == 0 {
        return Err(invalid("kernel half-extent must be at least 1"));
    }
    if !(w > 0.0 && w.is_finite()) {
        return Err(invalid(format!("kernel scale must be positive, got {w}")));
    }
    let side = 2 * r;
    let peak = b * b / (2.0 * PI * w * w).sqrt();
    let mut data = Vec::with_capacity(side * side);
    for i in 0..side {
        for j in 0..side {
            let di = i as f64 - r as f64;
            let dj = j as f64 - r as f64;
            let d2 = di * di + dj * dj;
            data.push(peak * (-d2 / (2.0 * w * w)).exp());
        }
    }
    Ok(SquareMatrix { side, data })
}
