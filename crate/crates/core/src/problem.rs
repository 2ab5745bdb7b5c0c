//! Right-hand sides and boundary data: analytic presets or CIGRID files.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{io, Grid, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Preset {
    Constant {
        value: f64,
    },
    /// `amplitude · exp(−|x − center|² / (2 width²))`.
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `c0 + Σ lin_k x_k + Σ quad_k x_k²`.
    Polynomial {
        c0: f64,
        lin: Vec<f64>,
        quad: Vec<f64>,
    },
    /// `amplitude · Π_k sin(π freq_k x_k + phase)`.
    Trig {
        amplitude: f64,
        freq: Vec<f64>,
        phase: f64,
    },
    /// `c (x₁² − x₂²)`.
    Saddle {
        c: f64,
    },
    /// `c0 + coeffs · x`.
    Linear {
        c0: f64,
        coeffs: Vec<f64>,
    },
    /// Multilinear interpolation of a scalar CIGRID file.
    File {
        path: PathBuf,
    },
}

fn coeff(v: &[f64], k: usize) -> f64 {
    v.get(k).copied().unwrap_or(0.0)
}

impl Preset {
    /// Pointwise value; `File` presets must go through [`Preset::sample`].
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Preset::Constant { value } => *value,
            Preset::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let r2: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (v - coeff(center, k)).powi(2))
                    .sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            Preset::Polynomial { c0, lin, quad } => {
                c0 + x
                    .iter()
                    .enumerate()
                    .map(|(k, v)| coeff(lin, k) * v + coeff(quad, k) * v * v)
                    .sum::<f64>()
            }
            Preset::Trig {
                amplitude,
                freq,
                phase,
            } => {
                amplitude
                    * x.iter()
                        .enumerate()
                        .map(|(k, v)| (std::f64::consts::PI * coeff(freq, k) * v + phase).sin())
                        .product::<f64>()
            }
            Preset::Saddle { c } => c * (x[0] * x[0] - x[1] * x[1]),
            Preset::Linear { c0, coeffs } => {
                c0 + x
                    .iter()
                    .enumerate()
                    .map(|(k, v)| coeff(coeffs, k) * v)
                    .sum::<f64>()
            }
            Preset::File { .. } => f64::NAN,
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Preset::File { .. })
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Result<ScalarField> {
        match self {
            Preset::File { path } => {
                let src = io::load(path, Some(grid.domain))?.into_scalar()?;
                resample(&src, grid)
            }
            other => Ok(ScalarField::from_fn(grid, |x| other.eval(x))),
        }
    }
}

/// Multilinear interpolation of `src` at every point of `grid`, clamped to
/// the sampled box of `src`.
pub fn resample(src: &ScalarField, grid: &Arc<Grid>) -> Result<ScalarField> {
    let s = &src.grid;
    if s.n != grid.n {
        return Err(Error::Format(format!(
            "file is {}-dimensional, run is {}-dimensional",
            s.n, grid.n
        )));
    }
    if s.same_layout(grid) {
        return Ok(ScalarField {
            grid: grid.clone(),
            values: src.values.clone(),
        });
    }
    let n = s.n;
    let bbox = s.bbox();
    Ok(ScalarField::from_fn(grid, |x| {
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for k in 0..n {
            let t = ((x[k] - bbox[k].0) / s.h).clamp(0.0, (s.shape[k] - 1) as f64);
            let i = (t.floor() as usize).min(s.shape[k] - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut p = 0;
            for k in 0..n {
                let bit = (corner >> k) & 1;
                weight *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                p += (base[k] + bit) * s.strides[k];
            }
            acc += weight * src.values[p];
        }
        acc
    }))
}
