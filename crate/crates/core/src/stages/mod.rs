//! The interior and boundary stage inductions, their initialisations and the
//! multi-stage driver.

mod boundary;
mod cutoff;
mod driver;
mod interior;
mod report;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use boundary::{boundary_amplitudes, boundary_stage, init_boundary};
pub use cutoff::{CutoffData, CutoffStats};
pub use driver::{check_run_resolution, run, run_plan, NormRow, Snapshot, Solution};
pub use interior::{init_interior, interior_stage, InteriorScaling};
pub use report::{Check, DeficitReport, Timings};

use crate::corrugation::{step, CorrugationParams, DEFAULT_POINTS_PER_PERIOD};
use crate::decomp::Frame;
use crate::error::{Error, Result};
use crate::field::{c_norm, Region, ScalarField, SymMatrixField, VectorField};
use crate::scheduler::{Schedule, StageParams};

/// What to do when a measured bound fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AssertionPolicy {
    /// Abort with [`Error::StageAssertion`].
    Strict,
    /// Keep the failed check in the report and continue.
    Record,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageConfig {
    pub points_per_period: usize,
    /// `C_h` of the allowance `ε_h = C_h h² λ_{q+1}²`.
    pub c_h: f64,
    pub policy: AssertionPolicy,
    /// Zero keeps all phases at 0.
    pub seed: u64,
    /// Target for `‖v − v^b‖₀`.
    pub epsilon: Option<f64>,
    /// Number of bump test functions for the per-stage residual; 0 disables it.
    pub residual_tests: usize,
    pub residual_seed: u64,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            points_per_period: DEFAULT_POINTS_PER_PERIOD,
            c_h: 10.0,
            policy: AssertionPolicy::Strict,
            seed: 0,
            epsilon: None,
            residual_tests: 16,
            residual_seed: 1,
        }
    }
}

impl StageConfig {
    /// Turns a failed report into an error under [`AssertionPolicy::Strict`].
    pub(crate) fn enforce(&self, report: &DeficitReport) -> Result<()> {
        if self.policy == AssertionPolicy::Strict && !report.passed() {
            return Err(Error::StageAssertion(Box::new(report.clone())));
        }
        Ok(())
    }
}

/// Quantities of the initialisation.
#[derive(Debug, Clone, Serialize)]
pub struct InitParams {
    pub delta0: f64,
    pub delta1: f64,
    pub lambda0: f64,
    /// `μ̂_1, …, μ̂_{N*}`, used by the boundary pipeline.
    pub hat_mus: Vec<f64>,
}

/// Per-stage parameters of a run. Usually derived from a [`Schedule`], but
/// any ladder can be supplied to probe the stage mechanics at frequencies a
/// grid can hold.
#[derive(Debug, Clone, Serialize)]
pub struct Plan {
    pub init: InitParams,
    pub stages: Vec<StageParams>,
}

impl Plan {
    pub fn from_schedule(sched: &Schedule) -> Result<Plan> {
        let hat_mus = match sched.mode {
            crate::scheduler::Mode::Dirichlet => sched.hat_mus()?,
            crate::scheduler::Mode::Interior => Vec::new(),
        };
        Ok(Plan {
            init: InitParams {
                delta0: sched.delta(0)?,
                delta1: sched.delta(1)?,
                lambda0: sched.lambda(0)?,
                hat_mus,
            },
            stages: (0..sched.q_max)
                .map(|q| sched.sequences(q))
                .collect::<Result<Vec<_>>>()?,
        })
    }

    /// Largest corrugation frequency of the plan.
    pub fn max_frequency(&self) -> f64 {
        self.stages
            .iter()
            .flat_map(|s| s.mus[1..].iter())
            .chain(&self.init.hat_mus)
            .fold(0.0, |a: f64, &m| a.max(m))
    }
}

/// `(V_q, W_q)` and the deficit `D_q`.
#[derive(Debug, Clone)]
pub struct State {
    pub q: usize,
    pub v: ScalarField,
    pub w: VectorField,
    pub d: SymMatrixField,
    pub deficit_norm: f64,
}

/// Corrugation phases for stage `q`, one per frame direction.
pub fn phases(seed: u64, q: usize, count: usize) -> Vec<f64> {
    if seed == 0 {
        return vec![0.0; count];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ q as u64);
    (0..count).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// Applies one corrugation per frame direction in order.
pub(crate) fn run_steps(
    mut v: ScalarField,
    mut w: VectorField,
    amplitudes: Vec<ScalarField>,
    frame: &Frame,
    frequencies: &[f64],
    phases: &[f64],
    points_per_period: usize,
) -> Result<(ScalarField, VectorField)> {
    for (i, a) in amplitudes.into_iter().enumerate() {
        let p = CorrugationParams {
            a,
            xi: frame.xis[i].clone(),
            mu: frequencies[i],
            phase: phases[i],
        };
        (v, w) = step(&v, &w, &p, points_per_period)?;
    }
    Ok((v, w))
}

/// `‖(V, W)‖_k` as the largest `C^k` norm over the scalar components.
pub fn pair_norm(v: &ScalarField, w: &VectorField, k: usize) -> f64 {
    (0..w.comps.len())
        .map(|i| c_norm(&w.component(i), k, Region::Interior))
        .fold(c_norm(v, k, Region::Interior), f64::max)
}

/// `‖(V − V', W − W')‖_k`.
pub fn pair_increment_norm(
    v: &ScalarField,
    w: &VectorField,
    v0: &ScalarField,
    w0: &VectorField,
    k: usize,
) -> Result<f64> {
    Ok(pair_norm(&v.sub(v0)?, &w.sub(w0)?, k))
}

fn seconds(t: std::time::Instant) -> f64 {
    t.elapsed().as_secs_f64()
}
