//! Dirichlet Poisson solves and the background data `(u, τ, A, v^b, ψ)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{
    c_norm, collar_cutoff, gradient, outer_half, sup_norm, Domain, Grid, Region, ScalarField,
    SymMatrixField, VectorField,
};
use crate::verify::{sigma2_classical, sigma2_matrix};

/// Relative sup-norm residual target of the linear solves.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `‖M u − b‖∞`.
    pub residual: f64,
    /// `‖b‖∞` of the assembled system.
    pub rhs_norm: f64,
}

/// Assembled `−Δ_h` on the interior points, boundary values moved to `b`.
struct System {
    unknown: Vec<usize>,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
    b: Vec<f64>,
    symmetric: bool,
}

impl System {
    fn assemble(rhs: &ScalarField, bc: &(dyn Fn(&[f64]) -> f64 + Sync), coeff: f64) -> System {
        let grid = &rhs.grid;
        let n = grid.n;
        let h = grid.h;
        let mut index = vec![usize::MAX; grid.len()];
        let unknown: Vec<usize> = grid.interior_points().collect();
        for (i, &p) in unknown.iter().enumerate() {
            index[p] = i;
        }
        let mut row_start = Vec::with_capacity(unknown.len() + 1);
        let mut cols = Vec::with_capacity(unknown.len() * 2 * n);
        let mut vals = Vec::with_capacity(unknown.len() * 2 * n);
        let mut diag = Vec::with_capacity(unknown.len());
        let mut b = Vec::with_capacity(unknown.len());
        let mut symmetric = true;
        let regular = 2.0 * n as f64 / (h * h);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for &p in &unknown {
            row_start.push(cols.len());
            grid.coords_into(p, &mut x);
            let mut d = 0.0;
            let mut bi = rhs.values[p] / coeff;
            for k in 0..n {
                let s = grid.strides[k];
                // (arm length, neighbour unknown or boundary value) for −, +
                let mut arms = [(h, None, 0.0); 2];
                for (slot, dir) in [(0usize, -1.0f64), (1, 1.0)] {
                    let q = if dir < 0.0 { p - s } else { p + s };
                    if index[q] != usize::MAX {
                        arms[slot] = (h, Some(index[q]), 0.0);
                        continue;
                    }
                    let t = match grid.domain {
                        Domain::Square => h,
                        Domain::Disc => grid
                            .domain
                            .boundary_hit(&x, k, dir, h)
                            .unwrap_or(h)
                            .max(1e-6 * h),
                    };
                    if t != h {
                        symmetric = false;
                    }
                    y.copy_from_slice(&x);
                    y[k] += dir * t;
                    arms[slot] = (t, None, bc(&y));
                }
                let (hm, hp) = (arms[0].0, arms[1].0);
                let cm = 2.0 / (hm * (hm + hp));
                let cp = 2.0 / (hp * (hm + hp));
                d += cm + cp;
                for ((_, col, value), c) in arms.into_iter().zip([cm, cp]) {
                    match col {
                        Some(j) => {
                            cols.push(j);
                            vals.push(-c);
                        }
                        None => bi += c * value,
                    }
                }
            }
            // rows with short arms are scaled to the regular diagonal
            let scale = regular / d;
            if scale < 1.0 {
                d = regular;
                bi *= scale;
                let start = row_start[row_start.len() - 1];
                vals[start..].iter_mut().for_each(|v| *v *= scale);
            }
            diag.push(d);
            b.push(bi);
        }
        row_start.push(cols.len());
        System {
            unknown,
            row_start,
            cols,
            vals,
            diag,
            b,
            symmetric,
        }
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.diag[i] * u[i];
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.vals[k] * u[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// Residual floor set by rounding in `M u`.
    fn rounding_floor(&self, u: &[f64]) -> f64 {
        let m_norm = self.diag.iter().fold(0.0f64, |a, d| a.max(2.0 * d));
        let u_norm = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        64.0 * f64::EPSILON * m_norm * u_norm
    }

    fn true_residual(&self, u: &[f64], scratch: &mut [f64]) -> f64 {
        self.apply(u, scratch);
        scratch
            .iter()
            .zip(&self.b)
            .fold(0.0f64, |a, (mu, b)| a.max((mu - b).abs()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn conjugate_gradient(sys: &System, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let m = sys.b.len();
    let b_norm = sys.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut u = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    if b_norm == 0.0 {
        return Ok((
            u,
            SolveStats {
                iterations: 0,
                residual: 0.0,
                rhs_norm: 0.0,
            },
        ));
    }
    let mut r = sys.b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        sys.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        axpy(alpha, &p, &mut u);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let r_inf = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if r_inf <= 0.5 * SOLVER_TOLERANCE * b_norm || it % 200 == 0 {
            let res = sys.true_residual(&u, &mut scratch);
            if res <= SOLVER_TOLERANCE * b_norm + sys.rounding_floor(&u) {
                return Ok((
                    u,
                    SolveStats {
                        iterations: it,
                        residual: res,
                        rhs_norm: b_norm,
                    },
                ));
            }
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Err(Error::SolverDiverged {
        iterations: max_iter,
        residual: sys.true_residual(&u, &mut scratch) / b_norm,
    })
}

/// Jacobi-preconditioned BiCGSTAB for the non-symmetric unequal-arm system.
fn bicgstab(sys: &System, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let m = sys.b.len();
    let b_norm = sys.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut u = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    if b_norm == 0.0 {
        return Ok((
            u,
            SolveStats {
                iterations: 0,
                residual: 0.0,
                rhs_norm: 0.0,
            },
        ));
    }
    let precond = |x: &[f64], out: &mut [f64]| {
        for ((o, xi), d) in out.iter_mut().zip(x).zip(&sys.diag) {
            *o = xi / d;
        }
    };
    let mut r = sys.b.clone();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; m];
    let mut p = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; m];
    let mut s = vec![0.0; m];
    let mut t = vec![0.0; m];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..m {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        sys.apply(&y, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..m {
            s[i] = r[i] - alpha * v[i];
        }
        precond(&s, &mut z);
        sys.apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..m {
            u[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        let r_inf = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if r_inf <= 0.5 * SOLVER_TOLERANCE * b_norm || it % 200 == 0 {
            let res = sys.true_residual(&u, &mut scratch);
            if res <= SOLVER_TOLERANCE * b_norm + sys.rounding_floor(&u) {
                return Ok((
                    u,
                    SolveStats {
                        iterations: it,
                        residual: res,
                        rhs_norm: b_norm,
                    },
                ));
            }
            // restart from the true residual to shed drift
            for i in 0..m {
                r[i] = sys.b[i] - scratch[i];
            }
        }
    }
    Err(Error::SolverDiverged {
        iterations: max_iter,
        residual: sys.true_residual(&u, &mut scratch) / b_norm,
    })
}

/// Solves `coeff·Δu = −rhs` in Ω with `u = bc` on ∂Ω. Points outside Ω are
/// filled with `bc` evaluated there.
pub fn solve_poisson(
    rhs: &ScalarField,
    bc: &(dyn Fn(&[f64]) -> f64 + Sync),
    coeff: f64,
) -> Result<(ScalarField, SolveStats)> {
    if coeff == 0.0 || !coeff.is_finite() {
        return Err(Error::Precondition(format!(
            "Poisson coefficient must be nonzero, got {coeff}"
        )));
    }
    let grid = &rhs.grid;
    let sys = System::assemble(rhs, bc, coeff);
    let max_iter = 100 * grid.resolution + 1000;
    let (u, stats) = if sys.symmetric {
        conjugate_gradient(&sys, max_iter)?
    } else {
        bicgstab(&sys, max_iter)?
    };
    let mut values = ScalarField::from_fn(grid, |x| bc(x)).values;
    for (i, &p) in sys.unknown.iter().enumerate() {
        values[p] = u[i];
    }
    Ok((
        ScalarField {
            grid: grid.clone(),
            values,
        },
        stats,
    ))
}

pub fn solve_poisson_dirichlet(
    rhs: &ScalarField,
    bc: &(dyn Fn(&[f64]) -> f64 + Sync),
    coeff: f64,
) -> Result<ScalarField> {
    solve_poisson(rhs, bc, coeff).map(|(u, _)| u)
}

/// Background data of either pipeline.
#[derive(Debug, Clone)]
pub struct Background {
    pub f: ScalarField,
    pub vb: ScalarField,
    pub wb: VectorField,
    pub a: SymMatrixField,
    /// Interior mode only.
    pub u: Option<ScalarField>,
    /// Boundary mode only.
    pub psi: Option<ScalarField>,
    /// Interior mode only, 0 otherwise.
    pub tau: f64,
    /// Boundary values, sampled at every non-interior point.
    pub g: Option<ScalarField>,
    /// `C` of `v^b = C(x₁² − x₂²)` when the background was selected.
    pub selected_c: Option<f64>,
    pub solves: Vec<SolveStats>,
}

/// `τ = (K + σ⁻¹)(‖u‖₀ + ‖v^b‖₂² + 100)`.
pub fn tau_formula(k: f64, sigma: f64, u_sup: f64, vb_c2: f64) -> f64 {
    (k + 1.0 / sigma) * (u_sup + vb_c2 * vb_c2 + 100.0)
}

/// `−(2n−2)Δu = f`, `u = 0` on ∂Ω, `A = (u + τ)Id`, `v^b` cut off in the pad.
pub fn build_background_interior(
    f: &ScalarField,
    vb_init: &ScalarField,
    k: f64,
    sigma: f64,
) -> Result<Background> {
    crate::field::check_same(&f.grid, &vb_init.grid)?;
    let grid = &f.grid;
    let n = grid.n as f64;
    let (u, stats) = solve_poisson(f, &|_| 0.0, 2.0 * n - 2.0)?;
    let vb = ScalarField {
        grid: grid.clone(),
        values: vb_init
            .values
            .iter()
            .enumerate()
            .map(|(p, v)| v * collar_cutoff(grid, p))
            .collect(),
    };
    let tau = tau_formula(
        k,
        sigma,
        sup_norm(&u.values, grid, Region::Interior),
        c_norm(&vb, 2, Region::Interior),
    );
    let a = SymMatrixField::scaled_identity(&u.map(|x| x + tau));
    Ok(Background {
        f: f.clone(),
        vb,
        wb: VectorField::zeros(grid),
        a,
        u: Some(u),
        psi: None,
        tau,
        g: None,
        selected_c: None,
        solves: vec![stats],
    })
}

/// Smallest power of two `C ≥ 1` with `min f + 8C² ≥ 0.1‖f‖₀ + 0.1`, and the
/// field `C(x₁² − x₂²)`.
pub fn select_background(f: &ScalarField) -> Result<(ScalarField, f64)> {
    let grid = &f.grid;
    let n = grid.n;
    let f_sup = sup_norm(&f.values, grid, Region::Interior);
    let f_min = grid
        .interior_points()
        .map(|p| f.values[p])
        .fold(f64::INFINITY, f64::min);
    let margin = 0.1 * f_sup + 0.1;
    let mut c = 1.0f64;
    loop {
        let mut hess = vec![0.0; n * n];
        hess[0] = 2.0 * c;
        hess[n + 1] = -2.0 * c;
        let s2 = sigma2_matrix(n, &hess);
        if !(s2 < 0.0) {
            return Err(Error::Precondition(format!(
                "σ₂ of the saddle is {s2}, expected negative"
            )));
        }
        if f_min - s2 >= margin {
            break;
        }
        c *= 2.0;
        if !c.is_finite() {
            return Err(Error::Precondition("f is unbounded below".into()));
        }
    }
    Ok((
        ScalarField::from_fn(grid, |x| c * (x[0] * x[0] - x[1] * x[1])),
        c,
    ))
}

/// Boundary pipeline background. With `g`, `f > 0` is required and `v^b` is
/// the harmonic extension of `g`; without it `v^b` comes from
/// [`select_background`].
pub fn build_background_boundary(
    f: &ScalarField,
    g: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
) -> Result<Background> {
    let grid = f.grid.clone();
    let n = grid.n as f64;
    let mut solves = Vec::new();
    let (vb, selected_c) = match g {
        Some(g) => {
            if let Some(p) = grid.interior_points().find(|&p| !(f.values[p] > 0.0)) {
                return Err(Error::ModeMisuse(format!(
                    "f must be positive on Ω when g is given; f = {} at {:?}",
                    f.values[p],
                    grid.coords(p)
                )));
            }
            let (vb, stats) = solve_poisson(&ScalarField::zeros(&grid), g, 1.0)?;
            solves.push(stats);
            (vb, None)
        }
        None => {
            let (vb, c) = select_background(f)?;
            (vb, Some(c))
        }
    };
    let s2 = sigma2_classical(&vb);
    let rhs = f.sub(&s2)?;
    if let Some(p) = grid.interior_points().find(|&p| !(rhs.values[p] > 0.0)) {
        return Err(Error::ModeMisuse(format!(
            "f − σ₂(∇²v^b) = {} ≤ 0 at {:?}",
            rhs.values[p],
            grid.coords(p)
        )));
    }
    let (psi, stats) = solve_poisson(&rhs, &|_| 0.0, 2.0 * n - 2.0)?;
    solves.push(stats);
    if let Some(p) = grid.interior_points().find(|&p| !(psi.values[p] > 0.0)) {
        return Err(Error::Precondition(format!(
            "ψ = {} is not positive at interior point {:?}",
            psi.values[p],
            grid.coords(p)
        )));
    }
    let a = SymMatrixField::scaled_identity(&psi).add(&outer_half(&gradient(&vb)))?;
    let g_samples = ScalarField {
        grid: grid.clone(),
        values: vb
            .values
            .iter()
            .enumerate()
            .map(|(p, v)| if grid.is_interior(p) { 0.0 } else { *v })
            .collect(),
    };
    Ok(Background {
        f: f.clone(),
        vb,
        wb: VectorField::zeros(&grid),
        a,
        u: None,
        psi: Some(psi),
        tau: 0.0,
        g: Some(g_samples),
        selected_c,
        solves,
    })
}

/// Sup-norm distance between `v` and the stored boundary samples over the
/// boundary band: non-interior points with an interior neighbour.
pub fn boundary_trace_error(v: &ScalarField, bg: &Background) -> Option<f64> {
    let g = bg.g.as_ref()?;
    let grid: &Grid = &v.grid;
    let mut worst = 0.0f64;
    for p in 0..grid.len() {
        if grid.is_interior(p) {
            continue;
        }
        let touches = (0..grid.n).any(|k| {
            let s = grid.strides[k];
            let i = grid.axis_index(p, k);
            (i > 0 && grid.is_interior(p - s)) || (i + 1 < grid.shape[k] && grid.is_interior(p + s))
        });
        if touches {
            worst = worst.max((v.values[p] - g.values[p]).abs());
        }
    }
    Some(worst)
}
