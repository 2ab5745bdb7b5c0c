use std::f64::consts::PI;

use rayon::prelude::*;

use super::{Grid, ScalarField, SymMatrixField, VectorField};
use crate::error::{Error, Result};

/// Radial bump `c · exp(-1/(1-|x|²))` on the unit ball, with `c` chosen so the
/// continuous profile has unit mass.
#[derive(Debug, Clone, Copy)]
pub struct Mollifier {
    pub n: usize,
    pub norm: f64,
}

impl Mollifier {
    pub fn new(n: usize) -> Self {
        // |S^{n-1}|
        let sphere = match n {
            1 => 2.0,
            2 => 2.0 * PI,
            3 => 4.0 * PI,
            4 => 2.0 * PI * PI,
            _ => panic!("mollifier dimension {n} not supported"),
        };
        let steps = 20_000;
        let dr = 1.0 / steps as f64;
        let g = |r: f64| {
            if r >= 1.0 {
                0.0
            } else {
                r.powi(n as i32 - 1) * (-1.0 / (1.0 - r * r)).exp()
            }
        };
        // composite Simpson
        let mut acc = g(0.0) + g(1.0);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * g(i as f64 * dr);
        }
        let mass = sphere * acc * dr / 3.0;
        Self {
            n,
            norm: 1.0 / mass,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 1.0 {
            0.0
        } else {
            self.norm * (-1.0 / (1.0 - r2)).exp()
        }
    }

    /// φ_l sampled on the lattice `h ℤⁿ`, renormalised to unit discrete mass.
    pub fn kernel(&self, l: f64, h: f64) -> DiscreteKernel {
        let r = (l / h).floor() as isize;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut raw = 0.0;
        let n = self.n;
        let side = (2 * r + 1) as usize;
        let total = side.pow(n as u32);
        let mut rel = vec![0isize; n];
        let mut y = vec![0.0; n];
        for m in 0..total {
            let mut rest = m;
            for k in (0..n).rev() {
                rel[k] = (rest % side) as isize - r;
                rest /= side;
            }
            for k in 0..n {
                y[k] = rel[k] as f64 * h / l;
            }
            let w = self.value(&y) / l.powi(n as i32) * h.powi(n as i32);
            if w > 0.0 {
                raw += w;
                offsets.push(rel.clone());
                weights.push(w);
            }
        }
        if weights.is_empty() {
            offsets.push(vec![0; n]);
            weights.push(1.0);
            raw = 1.0;
        }
        let total_w: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total_w;
        }
        DiscreteKernel {
            radius: r.max(0) as usize,
            offsets,
            weights,
            raw_mass: raw,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    /// Support radius in grid points.
    pub radius: usize,
    pub offsets: Vec<Vec<isize>>,
    pub weights: Vec<f64>,
    /// Σ φ_l(kh) hⁿ before renormalisation.
    pub raw_mass: f64,
}

impl DiscreteKernel {
    fn apply(&self, values: &[f64], grid: &Grid) -> Vec<f64> {
        if self.weights.len() == 1 {
            return values.to_vec();
        }
        let n = grid.n;
        let r = self.radius;
        let flat: Vec<isize> = self
            .offsets
            .iter()
            .map(|rel| {
                rel.iter()
                    .zip(&grid.strides)
                    .map(|(o, s)| o * *s as isize)
                    .sum()
            })
            .collect();
        (0..values.len())
            .into_par_iter()
            .map_init(
                || vec![0usize; n],
                |idx, p| {
                    grid.unravel(p, idx);
                    let inside = (0..n).all(|k| idx[k] >= r && idx[k] + r < grid.shape[k]);
                    if inside {
                        let mut acc = 0.0;
                        for (o, w) in flat.iter().zip(&self.weights) {
                            acc += w * values[(p as isize + o) as usize];
                        }
                        acc
                    } else {
                        // zero extension beyond the sampled box
                        let mut acc = 0.0;
                        'taps: for ((rel, o), w) in
                            self.offsets.iter().zip(&flat).zip(&self.weights)
                        {
                            for k in 0..n {
                                let j = idx[k] as isize + rel[k];
                                if j < 0 || j >= grid.shape[k] as isize {
                                    continue 'taps;
                                }
                            }
                            acc += w * values[(p as isize + o) as usize];
                        }
                        acc
                    }
                },
            )
            .collect()
    }
}

fn kernel_for(grid: &Grid, l: f64) -> Result<DiscreteKernel> {
    if l > grid.pad {
        return Err(Error::MollifierExceedsPad { l, pad: grid.pad });
    }
    Ok(Mollifier::new(grid.n).kernel(l, grid.h))
}

pub fn mollify_scalar(f: &ScalarField, l: f64) -> Result<ScalarField> {
    let k = kernel_for(&f.grid, l)?;
    Ok(ScalarField {
        grid: f.grid.clone(),
        values: k.apply(&f.values, &f.grid),
    })
}

pub fn mollify_vector(f: &VectorField, l: f64) -> Result<VectorField> {
    let k = kernel_for(&f.grid, l)?;
    Ok(VectorField {
        grid: f.grid.clone(),
        comps: f.comps.iter().map(|c| k.apply(c, &f.grid)).collect(),
    })
}

pub fn mollify_sym(f: &SymMatrixField, l: f64) -> Result<SymMatrixField> {
    let k = kernel_for(&f.grid, l)?;
    Ok(SymMatrixField {
        grid: f.grid.clone(),
        comps: f.comps.iter().map(|c| k.apply(c, &f.grid)).collect(),
    })
}
