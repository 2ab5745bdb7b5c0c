//! Sampled fields on a padded uniform grid, with finite differences,
//! mollification and norm estimates.

mod grid;
pub mod io;
mod mollify;
mod norms;
mod ops;

use std::sync::Arc;

use rayon::prelude::*;

pub use grid::{collar_cutoff, smooth_step, Domain, Grid, PointClass};
pub use mollify::{mollify_scalar, mollify_sym, mollify_vector, DiscreteKernel, Mollifier};
pub use norms::{c_norm, holder_norm, holder_seminorm, sup_norm, sup_norm_where, Region};
pub use ops::{gradient, hessian, outer_half, sym_grad};

use crate::error::{Error, Result};

/// Number of independent entries of an n×n symmetric matrix.
pub const fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of entry (i, j) in upper-triangle storage.
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<Grid>,
    /// One array per component.
    pub comps: Vec<Vec<f64>>,
}

/// Symmetric-matrix field stored as its upper triangle, see [`sym_index`].
#[derive(Debug, Clone)]
pub struct SymMatrixField {
    pub grid: Arc<Grid>,
    pub comps: Vec<Vec<f64>>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(grid: &Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.n],
                |x, p| {
                    grid.coords_into(p, x);
                    f(x)
                },
            )
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<F: Fn(f64, f64) -> f64 + Sync>(&self, other: &Self, f: F) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .par_iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            comps: vec![vec![0.0; grid.len()]; grid.n],
        }
    }

    pub fn from_fn<F>(grid: &Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let n = grid.n;
        let flat: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .flat_map_iter(|p| {
                let x = grid.coords(p);
                let mut out = vec![0.0; n];
                f(&x, &mut out);
                out
            })
            .collect();
        let mut comps = vec![vec![0.0; grid.len()]; n];
        for (p, chunk) in flat.chunks_exact(n).enumerate() {
            for k in 0..n {
                comps[k][p] = chunk[k];
            }
        }
        Self {
            grid: grid.clone(),
            comps,
        }
    }

    pub fn component(&self, k: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.comps[k].clone(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().map(|v| s * v).collect())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }
}

impl SymMatrixField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self {
            grid: grid.clone(),
            comps: vec![vec![0.0; grid.len()]; sym_len(grid.n)],
        }
    }

    /// `s(x) · Id`.
    pub fn scaled_identity(s: &ScalarField) -> Self {
        let n = s.grid.n;
        let mut out = Self::zeros(&s.grid);
        for i in 0..n {
            out.comps[sym_index(n, i, i)].clone_from(&s.values);
        }
        out
    }

    pub fn get(&self, p: usize, i: usize, j: usize) -> f64 {
        self.comps[sym_index(self.grid.n, i, j)][p]
    }

    /// Dense n×n matrix at point `p`, row-major.
    pub fn matrix_at(&self, p: usize) -> Vec<f64> {
        let n = self.grid.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.get(p, i, j);
            }
        }
        m
    }

    pub fn combine<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        check_same(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.par_iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().map(|v| s * v).collect())
                .collect(),
        }
    }

    /// Subtracts `shift(x) · Id` in place.
    pub fn sub_diagonal(&mut self, shift: impl Fn(usize) -> f64 + Sync) {
        let n = self.grid.n;
        for i in 0..n {
            let k = sym_index(n, i, i);
            self.comps[k]
                .par_iter_mut()
                .enumerate()
                .for_each(|(p, v)| *v -= shift(p));
        }
    }

    /// Entrywise sup norm of the matrix at point `p`.
    pub fn max_abs_at(&self, p: usize) -> f64 {
        self.comps.iter().map(|c| c[p].abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }
}

pub(crate) fn check_same(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.same_layout(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_covers_upper_triangle() {
        for n in 2..=4 {
            let mut seen = vec![false; sym_len(n)];
            for i in 0..n {
                for j in i..n {
                    let k = sym_index(n, i, j);
                    assert!(!seen[k]);
                    seen[k] = true;
                    assert_eq!(k, sym_index(n, j, i));
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }
}
