//! Decomposition of symmetric matrices near the identity into positive
//! combinations of rank-one directions `ξ_i ⊗ ξ_i`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{sym_index, sym_len, ScalarField, SymMatrixField};

const MAX_CONDITION: f64 = 1e3;
const MAX_RETRIES: usize = 100_000;

/// `N*` unit directions whose outer products span the symmetric matrices,
/// with the certified constants of the decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub n: usize,
    pub n_star: usize,
    pub xis: Vec<Vec<f64>>,
    /// Inverse of `c ↦ Σ c_i ξ_i⊗ξ_i` in upper-triangle coordinates, row-major.
    pub t_inv: Vec<Vec<f64>>,
    /// Coefficients of the identity.
    pub c_id: Vec<f64>,
    pub sigma_star: f64,
    pub c_star: f64,
    pub big_c_star: f64,
    /// ∞→∞ operator norm of `t_inv`.
    pub t_inv_norm: f64,
    /// 2-norm condition number of the coefficient map.
    pub condition: f64,
    /// Candidate sets examined before acceptance.
    pub attempts: usize,
}

/// Upper-triangle coordinates of `ξ ⊗ ξ`.
fn outer_vech(xi: &[f64]) -> Vec<f64> {
    let n = xi.len();
    let mut out = vec![0.0; sym_len(n)];
    for i in 0..n {
        for j in i..n {
            out[sym_index(n, i, j)] = xi[i] * xi[j];
        }
    }
    out
}

fn identity_vech(n: usize) -> Vec<f64> {
    let mut id = vec![0.0; sym_len(n)];
    for i in 0..n {
        id[sym_index(n, i, i)] = 1.0;
    }
    id
}

impl Frame {
    /// Certifies a candidate direction set. `None` if the map is singular,
    /// too badly conditioned, or the identity is not strictly inside the cone.
    pub fn from_directions(xis: Vec<Vec<f64>>) -> Option<Frame> {
        let n = xis.first()?.len();
        let m = sym_len(n);
        if xis.len() != m {
            return None;
        }
        let mut t = DMatrix::<f64>::zeros(m, m);
        for (col, xi) in xis.iter().enumerate() {
            for (row, v) in outer_vech(xi).into_iter().enumerate() {
                t[(row, col)] = v;
            }
        }
        let sv = t.clone().svd(false, false).singular_values;
        let smin = sv.min();
        if smin <= 0.0 {
            return None;
        }
        let condition = sv.max() / smin;
        if !(condition <= MAX_CONDITION) {
            return None;
        }
        let inv = t.try_inverse()?;
        let id = identity_vech(n);
        let c_id: Vec<f64> = (0..m)
            .map(|r| (0..m).map(|k| inv[(r, k)] * id[k]).sum())
            .collect();
        let min_c = c_id.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_c > 0.0) {
            return None;
        }
        let row_sums: Vec<f64> = (0..m)
            .map(|r| (0..m).map(|k| inv[(r, k)].abs()).sum())
            .collect();
        let t_inv_norm = row_sums.iter().cloned().fold(0.0, f64::max);
        let sigma_star = (min_c / (2.0 * t_inv_norm)).min(0.49);
        let c_star = (min_c / 2.0).sqrt();
        let big_c_star = c_id
            .iter()
            .zip(&row_sums)
            .map(|(c, r)| c + r * sigma_star)
            .fold(0.0, f64::max)
            .sqrt();
        Some(Frame {
            n,
            n_star: m,
            xis,
            t_inv: (0..m)
                .map(|r| (0..m).map(|k| inv[(r, k)]).collect())
                .collect(),
            c_id,
            sigma_star,
            c_star,
            big_c_star,
            t_inv_norm,
            condition,
            attempts: 1,
        })
    }

    /// Coefficients `c = T⁻¹ vech(D)`, so that `D = Σ c_i ξ_i⊗ξ_i`.
    pub fn coefficients(&self, d: &[f64]) -> Vec<f64> {
        self.t_inv
            .iter()
            .map(|row| row.iter().zip(d).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Σ d_i² ξ_i⊗ξ_i` in upper-triangle coordinates.
    pub fn reconstruct(&self, amps: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_star];
        for (xi, a) in self.xis.iter().zip(amps) {
            for (o, v) in out.iter_mut().zip(outer_vech(xi)) {
                *o += a * a * v;
            }
        }
        out
    }

    /// Constant amplitudes of the identity, `d_i* = √(c_id_i)`.
    pub fn identity_amplitudes(&self) -> Vec<f64> {
        self.c_id.iter().map(|c| c.sqrt()).collect()
    }

    /// Lipschitz constant of `D ↦ d(D)` on the σ*-ball (sup norms).
    pub fn lipschitz(&self) -> f64 {
        self.t_inv_norm / (2.0 * self.c_star)
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "frame n={} N*={} attempts={}",
            self.n, self.n_star, self.attempts
        )?;
        for (i, xi) in self.xis.iter().enumerate() {
            let coords: Vec<String> = xi.iter().map(|v| format!("{v:+.12}")).collect();
            writeln!(
                f,
                "  xi[{i}] = ({})  c_id = {:.12}",
                coords.join(", "),
                self.c_id[i]
            )?;
        }
        write!(
            f,
            "  sigma_star = {:.6e}  c_star = {:.6e}  C_star = {:.6e}  condition = {:.4e}",
            self.sigma_star, self.c_star, self.big_c_star, self.condition
        )
    }
}

/// Builds a frame for dimension `n`. In 2D the equiangular frame (rotated by a
/// seeded angle when `seed != 0`); otherwise the first admissible random set.
pub fn build_frame(n: usize, seed: u64) -> Result<Frame> {
    if n < 2 {
        return Err(Error::Precondition(format!("frame dimension {n} < 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 2 {
        let rot = if seed == 0 {
            0.0
        } else {
            rng.gen_range(0.0..PI / 3.0)
        };
        let xis = (0..3)
            .map(|k| {
                let th = rot + k as f64 * PI / 3.0;
                vec![th.cos(), th.sin()]
            })
            .collect();
        return Frame::from_directions(xis).ok_or(Error::NoAdmissibleFrame {
            retries: 0,
            best_condition: f64::INFINITY,
        });
    }
    let m = sym_len(n);
    let mut best_condition = f64::INFINITY;
    for attempt in 1..=MAX_RETRIES {
        let xis: Vec<Vec<f64>> = (0..m).map(|_| random_unit(&mut rng, n)).collect();
        if let Some(mut frame) = Frame::from_directions(xis.clone()) {
            frame.attempts = attempt;
            return Ok(frame);
        }
        if let Some(c) = condition_of(&xis) {
            best_condition = best_condition.min(c);
        }
    }
    Err(Error::NoAdmissibleFrame {
        retries: MAX_RETRIES,
        best_condition,
    })
}

fn condition_of(xis: &[Vec<f64>]) -> Option<f64> {
    let m = xis.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for (col, xi) in xis.iter().enumerate() {
        for (row, v) in outer_vech(xi).into_iter().enumerate() {
            t[(row, col)] = v;
        }
    }
    let sv = t.svd(false, false).singular_values;
    (sv.min() > 0.0).then(|| sv.max() / sv.min())
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 > 1e-4 && r2 <= 1.0 {
            let r = r2.sqrt();
            return x.into_iter().map(|v| v / r).collect();
        }
    }
}

/// Entrywise sup distance of `d` (upper-triangle coordinates) from Id.
pub fn distance_from_identity(n: usize, d: &[f64]) -> f64 {
    let id = identity_vech(n);
    d.iter()
        .zip(&id)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Amplitudes `d_i = √c_i` with `D = Σ d_i² ξ_i⊗ξ_i`, for `‖D − Id‖₀ ≤ σ*`.
pub fn decompose(frame: &Frame, d: &[f64]) -> Result<Vec<f64>> {
    let distance = distance_from_identity(frame.n, d);
    if distance > frame.sigma_star * (1.0 + 1e-12) {
        return Err(Error::OutsideSigmaStarBall {
            distance,
            sigma_star: frame.sigma_star,
        });
    }
    Ok(frame
        .coefficients(d)
        .into_iter()
        .map(|c| c.max(0.0).sqrt())
        .collect())
}

/// Like [`decompose`], but pulls `D` radially back onto the σ*-ball first.
/// Returns whether clamping happened.
pub fn decompose_clamped(frame: &Frame, d: &[f64]) -> (Vec<f64>, bool) {
    let distance = distance_from_identity(frame.n, d);
    if distance <= frame.sigma_star {
        let c = frame.coefficients(d);
        return (c.into_iter().map(|c| c.max(0.0).sqrt()).collect(), false);
    }
    let id = identity_vech(frame.n);
    let s = frame.sigma_star / distance;
    let pulled: Vec<f64> = d.iter().zip(&id).map(|(x, e)| e + s * (x - e)).collect();
    let c = frame.coefficients(&pulled);
    (c.into_iter().map(|c| c.max(0.0).sqrt()).collect(), true)
}

/// Result of decomposing a matrix field.
#[derive(Debug, Clone)]
pub struct FieldDecomposition {
    /// One amplitude field per frame direction.
    pub amplitudes: Vec<ScalarField>,
    /// Points where the input left the σ*-ball and was clamped.
    pub clamped: usize,
    /// Largest `‖D/s − Id‖₀` met on the active set.
    pub max_distance: f64,
}

/// Pointwise decomposition of `D(x)/s(x)` on points with `active(p)`, scaled
/// back by `√s(x)`. Inactive points get amplitude 0. With `clamp = false` the
/// first point outside the ball aborts with an error.
pub fn decompose_field<S, A>(
    frame: &Frame,
    d: &SymMatrixField,
    scale: S,
    active: A,
    clamp: bool,
) -> Result<FieldDecomposition>
where
    S: Fn(usize) -> f64 + Sync,
    A: Fn(usize) -> bool + Sync,
{
    let grid = &d.grid;
    let m = frame.n_star;
    let per_point: Vec<Result<(Vec<f64>, bool, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            if !active(p) {
                return Ok((vec![0.0; m], false, 0.0));
            }
            let s = scale(p);
            if !(s > 0.0) {
                return Err(Error::Precondition(format!(
                    "non-positive decomposition scale {s} at point {p}"
                )));
            }
            let local: Vec<f64> = d.comps.iter().map(|c| c[p] / s).collect();
            let dist = distance_from_identity(frame.n, &local);
            let root = s.sqrt();
            if clamp {
                let (amps, clamped) = decompose_clamped(frame, &local);
                Ok((amps.into_iter().map(|a| a * root).collect(), clamped, dist))
            } else {
                let amps = decompose(frame, &local)?;
                Ok((amps.into_iter().map(|a| a * root).collect(), false, dist))
            }
        })
        .collect();
    let mut amplitudes = vec![vec![0.0; grid.len()]; m];
    let mut clamped = 0;
    let mut max_distance = 0.0f64;
    for (p, r) in per_point.into_iter().enumerate() {
        let (amps, c, dist) = r?;
        for (k, a) in amps.into_iter().enumerate() {
            amplitudes[k][p] = a;
        }
        clamped += c as usize;
        max_distance = max_distance.max(dist);
    }
    Ok(FieldDecomposition {
        amplitudes: amplitudes
            .into_iter()
            .map(|values| ScalarField {
                grid: grid.clone(),
                values,
            })
            .collect(),
        clamped,
        max_distance,
    })
}
