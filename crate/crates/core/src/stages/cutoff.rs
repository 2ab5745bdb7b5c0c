use serde::Serialize;

use crate::field::{c_norm, gradient, smooth_step, Region, ScalarField};

/// Level-set cut-offs of ψ.
#[derive(Debug, Clone)]
pub struct CutoffData {
    pub psi: ScalarField,
    /// `‖ψ‖₁` over Ω.
    pub psi_c1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CutoffStats {
    pub delta: f64,
    /// `δ_q ‖∇η_q‖₀`.
    pub scaled_gradient: f64,
    pub omega_points: usize,
    pub omega_tilde_points: usize,
}

impl CutoffData {
    pub fn new(psi: &ScalarField) -> Self {
        CutoffData {
            psi: psi.clone(),
            psi_c1: c_norm(psi, 1, Region::Interior),
        }
    }

    /// `{ψ > 2δ}`.
    pub fn omega(&self, delta: f64) -> Vec<bool> {
        self.level_set(2.0 * delta)
    }

    /// `{ψ > 3δ/2}`.
    pub fn omega_tilde(&self, delta: f64) -> Vec<bool> {
        self.level_set(1.5 * delta)
    }

    fn level_set(&self, level: f64) -> Vec<bool> {
        let grid = &self.psi.grid;
        (0..grid.len())
            .map(|p| grid.is_interior(p) && self.psi.values[p] > level)
            .collect()
    }

    /// `η_q`: 1 where `ψ ≥ 2δ`, 0 where `ψ ≤ 3δ/2`.
    pub fn eta_q(&self, delta: f64) -> ScalarField {
        self.psi
            .map(|s| smooth_step((s - 1.5 * delta) / (0.5 * delta)))
    }

    /// `ψ_q = η_q² δ + (1 − η_q²) ψ`.
    pub fn psi_q(&self, delta: f64) -> ScalarField {
        let eta = self.eta_q(delta);
        self.psi
            .zip_map(&eta, |s, e| e * e * delta + (1.0 - e * e) * s)
            .expect("same grid")
    }

    /// Stage cut-off: 1 where `ψ ≥ 5δ/4`, 0 where `ψ ≤ δ`.
    pub fn stage_eta(&self, delta: f64) -> ScalarField {
        self.psi.map(|s| smooth_step((s - delta) / (0.25 * delta)))
    }

    pub fn stats(&self, delta: f64) -> CutoffStats {
        let eta = self.eta_q(delta);
        let g = gradient(&eta);
        let grad_sup = (0..eta.grid.len())
            .filter(|&p| eta.grid.is_interior(p))
            .map(|p| g.comps.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        CutoffStats {
            delta,
            scaled_gradient: delta * grad_sup,
            omega_points: self.omega(delta).iter().filter(|&&b| b).count(),
            omega_tilde_points: self.omega_tilde(delta).iter().filter(|&&b| b).count(),
        }
    }
}
