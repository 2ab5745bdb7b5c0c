//! The corrugation profiles Γ₁, Γ₂ and the single-direction step.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{
    gradient, hessian, outer_half, sym_grad, sym_index, ScalarField, SymMatrixField, VectorField,
};

/// k-th derivative of `sin` evaluated at `x`.
#[inline]
fn sin_deriv(k: usize, x: f64) -> f64 {
    match k % 4 {
        0 => x.sin(),
        1 => x.cos(),
        2 => -x.sin(),
        _ => -x.cos(),
    }
}

/// `(∂ₛ^ds ∂ₜ^dt Γ₁, ∂ₛ^ds ∂ₜ^dt Γ₂)` at `(s, t)`, with
/// `Γ₁ = (s/π) sin(2πt)` and `Γ₂ = −(s²/4π) sin(4πt)`.
pub fn gamma(s: f64, t: f64, ds: usize, dt: usize) -> Result<(f64, f64)> {
    if ds > 2 || dt > 3 {
        return Err(Error::DerivativeOrder { ds, dt });
    }
    let w1 = 2.0 * PI;
    let w2 = 4.0 * PI;
    let t1 = w1.powi(dt as i32) * sin_deriv(dt, w1 * t);
    let t2 = w2.powi(dt as i32) * sin_deriv(dt, w2 * t);
    let s1 = match ds {
        0 => s / PI,
        1 => 1.0 / PI,
        _ => 0.0,
    };
    let s2 = match ds {
        0 => -s * s / w2,
        1 => -2.0 * s / w2,
        _ => -2.0 / w2,
    };
    Ok((s1 * t1, s2 * t2))
}

/// Closed-form bound on `|∂ₛ^ds ∂ₜ^dt Γ₁|`.
pub fn gamma1_bound(s: f64, ds: usize, dt: usize) -> f64 {
    let f = (2.0 * PI).powi(dt as i32) / PI;
    match ds {
        0 => f * s.abs(),
        1 => f,
        _ => 0.0,
    }
}

/// Closed-form bound on `|∂ₛ^ds ∂ₜ^dt Γ₂|`.
pub fn gamma2_bound(s: f64, ds: usize, dt: usize) -> f64 {
    let f = (4.0 * PI).powi(dt as i32);
    match ds {
        0 => f * s * s / (4.0 * PI),
        1 => f * s.abs() / (2.0 * PI),
        _ => f / (2.0 * PI),
    }
}

/// One corrugation: amplitude, direction, frequency and a phase offset in `t`.
#[derive(Debug, Clone)]
pub struct CorrugationParams {
    pub a: ScalarField,
    pub xi: Vec<f64>,
    pub mu: f64,
    pub phase: f64,
}

impl CorrugationParams {
    #[inline]
    fn t_at(&self, x: &[f64]) -> f64 {
        self.mu * x.iter().zip(&self.xi).map(|(a, b)| a * b).sum::<f64>() + self.phase
    }
}

pub const DEFAULT_POINTS_PER_PERIOD: usize = 16;

/// Errors unless the grid has `points_per_period` samples per period of `μ`.
pub fn check_resolution(h: f64, mu: f64, points_per_period: usize) -> Result<()> {
    if h * mu * points_per_period as f64 > 1.0 + 1e-12 {
        return Err(Error::FrequencyExceedsGrid {
            mu,
            h,
            points_per_period,
        });
    }
    Ok(())
}

/// `v' = v + Γ₁(a, t)/μ`, `w' = w − Γ₁(a, t)/μ ∇v + Γ₂(a, t)/μ ξ` with
/// `t = μ x·ξ + phase`. Points with `a = 0` are copied unchanged.
pub fn step(
    v: &ScalarField,
    w: &VectorField,
    p: &CorrugationParams,
    points_per_period: usize,
) -> Result<(ScalarField, VectorField)> {
    crate::field::check_same(&v.grid, &w.grid)?;
    crate::field::check_same(&v.grid, &p.a.grid)?;
    let grid = &v.grid;
    check_resolution(grid.h, p.mu, points_per_period)?;
    let n = grid.n;
    let g = gradient(v);
    let updates: Vec<Option<(f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |x, q| {
                let a = p.a.values[q];
                if a == 0.0 {
                    return None;
                }
                grid.coords_into(q, x);
                let t = p.t_at(x);
                let (g1, g2) = gamma(a, t, 0, 0).expect("order 0");
                Some((g1 / p.mu, g2 / p.mu))
            },
        )
        .collect();
    let mut v2 = v.values.clone();
    let mut w2 = w.comps.clone();
    for (q, u) in updates.iter().enumerate() {
        if let Some((g1, g2)) = *u {
            v2[q] += g1;
            for k in 0..n {
                w2[k][q] += -g1 * g.comps[k][q] + g2 * p.xi[k];
            }
        }
    }
    Ok((
        ScalarField {
            grid: grid.clone(),
            values: v2,
        },
        VectorField {
            grid: grid.clone(),
            comps: w2,
        },
    ))
}

/// Analytic step error
/// `(1/μ)Γ₁∇²v − (1/μ)[∂ₛΓ₂ + ∂ₛΓ₁∂ₜΓ₁] sym(∇a⊗ξ) − (1/2μ²)|∂ₛΓ₁|² ∇a⊗∇a`
/// for a step applied to `v`.
pub fn step_error(v: &ScalarField, p: &CorrugationParams) -> Result<SymMatrixField> {
    crate::field::check_same(&v.grid, &p.a.grid)?;
    let grid = &v.grid;
    let n = grid.n;
    let hess = hessian(v);
    let ga = gradient(&p.a);
    let mut out = SymMatrixField::zeros(grid);
    let rows: Vec<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |x, q| {
                let a = p.a.values[q];
                grid.coords_into(q, x);
                let t = p.t_at(x);
                let (g1, _) = gamma(a, t, 0, 0).expect("order 0");
                let (ds1, ds2) = gamma(a, t, 1, 0).expect("order (1,0)");
                let (dt1, _) = gamma(a, t, 0, 1).expect("order (0,1)");
                let c1 = g1 / p.mu;
                let c2 = (ds2 + ds1 * dt1) / p.mu;
                let c3 = ds1 * ds1 / (2.0 * p.mu * p.mu);
                let mut e = vec![0.0; n * (n + 1) / 2];
                for i in 0..n {
                    for j in i..n {
                        let k = sym_index(n, i, j);
                        let gai = ga.comps[i][q];
                        let gaj = ga.comps[j][q];
                        let sym = 0.5 * (gai * p.xi[j] + gaj * p.xi[i]);
                        e[k] = c1 * hess.comps[k][q] - c2 * sym - c3 * gai * gaj;
                    }
                }
                e
            },
        )
        .collect();
    for (q, e) in rows.into_iter().enumerate() {
        for (k, v) in e.into_iter().enumerate() {
            out.comps[k][q] = v;
        }
    }
    Ok(out)
}

/// Finite-difference assembly of
/// `a²ξ⊗ξ + (½∇v⊗∇v + sym∇w) − (½∇v'⊗∇v' + sym∇w')`.
pub fn assembled_step_error(
    v: &ScalarField,
    w: &VectorField,
    v_new: &ScalarField,
    w_new: &VectorField,
    a: &ScalarField,
    xi: &[f64],
) -> Result<SymMatrixField> {
    let before = outer_half(&gradient(v)).add(&sym_grad(w))?;
    let after = outer_half(&gradient(v_new)).add(&sym_grad(w_new))?;
    let mut out = before.sub(&after)?;
    let n = v.grid.n;
    for i in 0..n {
        for j in i..n {
            let k = sym_index(n, i, j);
            let c = xi[i] * xi[j];
            out.comps[k]
                .iter_mut()
                .zip(&a.values)
                .for_each(|(o, a)| *o += a * a * c);
        }
    }
    Ok(out)
}
