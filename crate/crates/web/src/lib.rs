//! Browser bindings: a single corrugation as a heatmap, the 2×2 frame
//! decomposition, and the schedule ledger.

use corrugate::corrugation::{check_resolution, step, CorrugationParams};
use corrugate::decomp::{build_frame, decompose_clamped, distance_from_identity, Frame};
use corrugate::field::{
    gradient, outer_half, sym_grad, Domain, Grid, Region, ScalarField, VectorField,
};
use corrugate::scheduler::{
    alpha_threshold, check_ledger, find_feasible, Feasibility, Mode, SearchInput,
};
use corrugate::verify::matrix_sup_norm;
use serde_json::json;
use wasm_bindgen::prelude::*;

const MAX_SIZE: usize = 256;
const POINTS_PER_PERIOD: usize = 4;

#[wasm_bindgen]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    min: f64,
    max: f64,
    step_error: f64,
}

#[wasm_bindgen]
impl Heatmap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major, `height` rows of `width` values.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// `max |Δ(½∇v⊗∇v + sym∇w) − a²ξ⊗ξ|` over the square.
    pub fn step_error(&self) -> f64 {
        self.step_error
    }
}

/// One corrugation of `v = 0`, `w = 0` on the unit square with the bump
/// amplitude `amplitude · (1 − |x − c|²/r²)²`, direction at `angle` and
/// frequency `mu`. Returns `v'` on the `size × size` interior lattice.
#[wasm_bindgen]
pub fn corrugation_heatmap(
    size: usize,
    mu: f64,
    angle: f64,
    amplitude: f64,
) -> Result<Heatmap, String> {
    if !(8..=MAX_SIZE).contains(&size) {
        return Err(format!("size must lie in 8..={MAX_SIZE}"));
    }
    let grid = Grid::new(Domain::Square, 2, size, 0.05).map_err(|e| e.to_string())?;
    check_resolution(grid.h, mu, POINTS_PER_PERIOD).map_err(|e| e.to_string())?;
    let a = ScalarField::from_fn(&grid, |x| {
        let r2 = ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) / 0.16;
        if r2 < 1.0 {
            amplitude * (1.0 - r2).powi(2)
        } else {
            0.0
        }
    });
    let xi = vec![angle.cos(), angle.sin()];
    let v = ScalarField::zeros(&grid);
    let w = VectorField::zeros(&grid);
    let p = CorrugationParams {
        a: a.clone(),
        xi: xi.clone(),
        mu,
        phase: 0.0,
    };
    let (v1, w1) = step(&v, &w, &p, POINTS_PER_PERIOD).map_err(|e| e.to_string())?;

    let mut change = outer_half(&gradient(&v1))
        .add(&sym_grad(&w1))
        .map_err(|e| e.to_string())?;
    for (k, (i, j)) in [(0, 0), (0, 1), (1, 1)].into_iter().enumerate() {
        for (c, s) in change.comps[k].iter_mut().zip(&a.values) {
            *c -= s * s * xi[i] * xi[j];
        }
    }
    let step_error = matrix_sup_norm(&change, Region::Interior);

    let lo = grid.zero.iter().map(|z| z + 1).collect::<Vec<_>>();
    let side = grid.shape[0] - 2 * lo[0];
    let mut values = Vec::with_capacity(side * side);
    for row in (0..side).rev() {
        for col in 0..side {
            values.push(v1.values[grid.ravel(&[lo[0] + col, lo[1] + row])]);
        }
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Heatmap {
        width: side,
        height: side,
        values,
        min,
        max,
        step_error,
    })
}

#[wasm_bindgen]
pub struct Decomposition {
    amplitudes: Vec<f64>,
    directions: Vec<f64>,
    distance: f64,
    sigma_star: f64,
    reconstruction_error: f64,
    clamped: bool,
}

#[wasm_bindgen]
impl Decomposition {
    /// `a_i` with `D ≈ Σ a_i² ξ_i⊗ξ_i`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.amplitudes.clone()
    }

    /// `ξ_i` flattened, two entries each.
    pub fn directions(&self) -> Vec<f64> {
        self.directions.clone()
    }

    /// `|D − Id|`.
    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn sigma_star(&self) -> f64 {
        self.sigma_star
    }

    pub fn reconstruction_error(&self) -> f64 {
        self.reconstruction_error
    }

    /// True when `D` lies outside the σ* ball and was projected onto it.
    pub fn clamped(&self) -> bool {
        self.clamped
    }
}

/// Frame of three directions 60° apart, turned by `rotation` radians.
fn rotated_frame(rotation: f64) -> Result<Frame, String> {
    let xis = (0..3)
        .map(|k| {
            let t = rotation + k as f64 * std::f64::consts::FRAC_PI_3;
            vec![t.cos(), t.sin()]
        })
        .collect();
    Frame::from_directions(xis).ok_or_else(|| "degenerate frame".to_string())
}

/// Decomposes `D = [[d11, d12], [d12, d22]]` over a rotated frame.
#[wasm_bindgen]
pub fn decompose_2x2(d11: f64, d12: f64, d22: f64, rotation: f64) -> Result<Decomposition, String> {
    let frame = rotated_frame(rotation)?;
    let d = [d11, d12, d22];
    let (amplitudes, clamped) = decompose_clamped(&frame, &d);
    let rec = frame.reconstruct(&amplitudes);
    let reconstruction_error = rec
        .iter()
        .zip(&d)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(Decomposition {
        directions: frame.xis.concat(),
        amplitudes,
        distance: distance_from_identity(2, &d),
        sigma_star: frame.sigma_star,
        reconstruction_error,
        clamped,
    })
}

/// Searches a schedule for dimension `n` and exponent `alpha` and returns
/// the verdict with every ledger entry as JSON.
#[wasm_bindgen]
pub fn ledger_json(n: usize, alpha: f64, q_max: usize) -> Result<String, String> {
    if !(2..=4).contains(&n) {
        return Err("n must be 2, 3 or 4".into());
    }
    let frame = build_frame(n, 0).map_err(|e| e.to_string())?;
    let found = find_feasible(&SearchInput {
        n,
        alpha,
        sigma: frame.sigma_star / 3.0,
        k: 4.0,
        c_universal: 2.0,
        psi_norm: 0.0,
        sigma_star: frame.sigma_star,
        q_max,
        mode: Mode::Interior,
    });
    let out = match &found {
        Feasibility::Feasible {
            schedule,
            candidates_tried,
            ..
        } => json!({
            "feasible": true,
            "threshold": alpha_threshold(n),
            "schedule": {
                "ln_a": schedule.ln_a,
                "b": schedule.b,
                "c": schedule.c,
                "sigma": schedule.sigma,
                "ln_max_frequency": schedule.ln_max_frequency(),
            },
            "candidates_tried": candidates_tried,
            "entries": check_ledger(schedule).entries,
        }),
        Feasibility::Infeasible { reason, violated } => json!({
            "feasible": false,
            "threshold": alpha_threshold(n),
            "reason": reason,
            "violated": violated,
            "entries": [],
        }),
    };
    Ok(out.to_string())
}
