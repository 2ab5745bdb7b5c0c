//! Independent checks: pointwise σ₂, the double-divergence operator `L`, the
//! very weak residual against bump test functions, and deficit assembly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{
    gradient, hessian, outer_half, sup_norm, sym_grad, sym_index, Domain, Region, ScalarField,
    SymMatrixField, VectorField,
};

/// `σ₂(M) = (tr M)² − |M|²_F` for a dense row-major n×n matrix.
pub fn sigma2_matrix(n: usize, m: &[f64]) -> f64 {
    let tr: f64 = (0..n).map(|i| m[i * n + i]).sum();
    let frob: f64 = m.iter().map(|v| v * v).sum();
    tr * tr - frob
}

/// Pointwise `Σ_{i,j} ∂ᵢᵢv ∂ⱼⱼv − (∂ᵢⱼv)²` on the discrete Hessian.
pub fn sigma2_classical(v: &ScalarField) -> ScalarField {
    let h = hessian(v);
    let n = v.grid.n;
    let values = (0..v.grid.len())
        .into_par_iter()
        .map(|p| {
            let mut tr = 0.0;
            let mut frob = 0.0;
            for i in 0..n {
                tr += h.comps[sym_index(n, i, i)][p];
                for j in 0..n {
                    let x = h.comps[sym_index(n, i, j)][p];
                    frob += x * x;
                }
            }
            tr * tr - frob
        })
        .collect();
    ScalarField {
        grid: v.grid.clone(),
        values,
    }
}

/// `L(A) = Σ_{i,j} ∂ᵢᵢAⱼⱼ + ∂ⱼⱼAᵢᵢ − 2∂ᵢⱼAᵢⱼ = 2Δ tr A − 2 Σ_{i,j} ∂ᵢⱼAᵢⱼ`.
#[allow(non_snake_case)]
pub fn L_operator(a: &SymMatrixField) -> ScalarField {
    let grid = &a.grid;
    let n = grid.n;
    let mut trace = vec![0.0; grid.len()];
    for i in 0..n {
        for (t, v) in trace.iter_mut().zip(&a.comps[sym_index(n, i, i)]) {
            *t += v;
        }
    }
    let ht = hessian(&ScalarField {
        grid: grid.clone(),
        values: trace,
    });
    let mut out = vec![0.0; grid.len()];
    for i in 0..n {
        let k = sym_index(n, i, i);
        for (o, v) in out.iter_mut().zip(&ht.comps[k]) {
            *o += 2.0 * v;
        }
    }
    for i in 0..n {
        for j in i..n {
            let k = sym_index(n, i, j);
            let hk = hessian(&ScalarField {
                grid: grid.clone(),
                values: a.comps[k].clone(),
            });
            let weight = if i == j { 2.0 } else { 4.0 };
            for (o, v) in out.iter_mut().zip(&hk.comps[k]) {
                *o -= weight * v;
            }
        }
    }
    ScalarField {
        grid: grid.clone(),
        values: out,
    }
}

/// Radial bump `exp(−1/(1 − |x−x₀|²/r²))` with analytic derivatives.
#[derive(Debug, Clone, Serialize)]
pub struct TestFunction {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl TestFunction {
    fn profile(&self, x: &[f64]) -> Option<(f64, f64, f64, f64)> {
        let r2 = self.radius * self.radius;
        let s: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / r2;
        if s >= 1.0 {
            return None;
        }
        let u = 1.0 - s;
        let g = (-1.0 / u).exp();
        let g1 = -g / (u * u);
        let g2 = g * (1.0 / u.powi(4) - 2.0 / u.powi(3));
        Some((s, g, g1, g2))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.profile(x).map_or(0.0, |(_, g, _, _)| g)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let r2 = self.radius * self.radius;
        match self.profile(x) {
            None => vec![0.0; x.len()],
            Some((_, _, g1, _)) => x
                .iter()
                .zip(&self.center)
                .map(|(a, b)| 2.0 * g1 * (a - b) / r2)
                .collect(),
        }
    }

    /// Dense row-major Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let mut h = vec![0.0; n * n];
        if let Some((_, _, g1, g2)) = self.profile(x) {
            let r2 = self.radius * self.radius;
            for i in 0..n {
                for j in 0..n {
                    let di = x[i] - self.center[i];
                    let dj = x[j] - self.center[j];
                    h[i * n + j] = 4.0 * g2 * di * dj / (r2 * r2);
                    if i == j {
                        h[i * n + j] += 2.0 * g1 / r2;
                    }
                }
            }
        }
        h
    }

    /// Whether the closed support lies strictly inside Ω.
    pub fn inside(&self, domain: Domain) -> bool {
        domain.signed_distance(&self.center) + self.radius < 0.0
    }

    /// `count` bumps with seeded centres and radii, supported inside Ω.
    pub fn family(domain: Domain, n: usize, count: usize, seed: u64) -> Vec<TestFunction> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7465_7374_6675_6e63);
        let (lo, hi) = match domain {
            Domain::Square => (0.0, 1.0),
            Domain::Disc => (-1.0, 1.0),
        };
        let scale = domain.extent();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let radius = scale * rng.gen_range(0.1..0.25);
            let center: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
            let phi = TestFunction { center, radius };
            if domain.signed_distance(&phi.center) + phi.radius < -0.02 * scale {
                out.push(phi);
            }
        }
        out
    }
}

/// `σ₂^{ij}(∇²φ) = Δφ δᵢⱼ − ∂ᵢⱼφ`, dense row-major.
pub fn sigma2_cofactor(phi: &TestFunction, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut h = phi.hessian(x);
    let lap: f64 = (0..n).map(|i| h[i * n + i]).sum();
    for v in h.iter_mut() {
        *v = -*v;
    }
    for i in 0..n {
        h[i * n + i] += lap;
    }
    h
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualEntry {
    pub center: Vec<f64>,
    pub radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub max_abs: f64,
    pub max_rel: f64,
    pub mean_rel: f64,
}

/// Both sides of `−Σ∫σ₂^{ij}(∇²φ)∂ᵢv∂ⱼv = ∫fφ` by grid quadrature, using
/// only the discrete gradient of `v`.
pub fn weak_residual(
    v: &ScalarField,
    f: &ScalarField,
    phis: &[TestFunction],
) -> Result<ResidualReport> {
    crate::field::check_same(&v.grid, &f.grid)?;
    let grid = &v.grid;
    let n = grid.n;
    for phi in phis {
        if !phi.inside(grid.domain) {
            return Err(Error::SupportTouchesBoundary(format!(
                "centre {:?}, radius {}",
                phi.center, phi.radius
            )));
        }
    }
    let gv = gradient(v);
    let cell = grid.h.powi(n as i32);
    let entries: Vec<ResidualEntry> = phis
        .par_iter()
        .map(|phi| {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            let mut x = vec![0.0; n];
            for p in 0..grid.len() {
                grid.coords_into(p, &mut x);
                let Some((_, g, _, _)) = phi.profile(&x) else {
                    continue;
                };
                let cof = sigma2_cofactor(phi, &x);
                let mut quad = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        quad += cof[i * n + j] * gv.comps[i][p] * gv.comps[j][p];
                    }
                }
                lhs -= quad;
                rhs += f.values[p] * g;
            }
            lhs *= cell;
            rhs *= cell;
            let abs = (lhs - rhs).abs();
            let rel = if rhs != 0.0 {
                abs / rhs.abs()
            } else if abs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            ResidualEntry {
                center: phi.center.clone(),
                radius: phi.radius,
                lhs,
                rhs,
                abs,
                rel,
            }
        })
        .collect();
    let max_abs = entries.iter().map(|e| e.abs).fold(0.0, f64::max);
    let max_rel = entries.iter().map(|e| e.rel).fold(0.0, f64::max);
    let mean_rel = if entries.is_empty() {
        0.0
    } else {
        entries.iter().map(|e| e.rel).sum::<f64>() / entries.len() as f64
    };
    Ok(ResidualReport {
        entries,
        max_abs,
        max_rel,
        mean_rel,
    })
}

/// Multiple of the identity subtracted from a deficit.
#[derive(Debug, Clone, Copy)]
pub enum Shift<'a> {
    Constant(f64),
    Field(&'a ScalarField),
}

/// `A − ½∇V⊗∇V − sym∇W − shift·Id` and its sup norm over Ω.
pub fn deficit(
    a: &SymMatrixField,
    v: &ScalarField,
    w: &VectorField,
    shift: Shift<'_>,
) -> Result<(SymMatrixField, f64)> {
    let mut d = a.sub(&outer_half(&gradient(v)))?.sub(&sym_grad(w))?;
    match shift {
        Shift::Constant(c) => d.sub_diagonal(|_| c),
        Shift::Field(s) => {
            crate::field::check_same(&a.grid, &s.grid)?;
            d.sub_diagonal(|p| s.values[p]);
        }
    }
    let norm = matrix_sup_norm(&d, Region::Interior);
    Ok((d, norm))
}

/// Entrywise sup norm of a matrix field over `region`.
pub fn matrix_sup_norm(d: &SymMatrixField, region: Region) -> f64 {
    d.comps
        .iter()
        .map(|c| sup_norm(c, &d.grid, region))
        .fold(0.0, f64::max)
}
