//! Assembly of grid, frame, background and schedule from a [`RunConfig`].

use std::sync::Arc;

use crate::config::RunConfig;
use crate::decomp::{build_frame, Frame};
use crate::elliptic::{build_background_boundary, build_background_interior, Background};
use crate::error::{Error, Result};
use crate::field::{c_norm, Grid, Region};
use crate::scheduler::{check_ledger, find_feasible, Feasibility, Mode, Schedule, SearchInput};
use crate::stages::StageConfig;

pub fn build_grid(cfg: &RunConfig) -> Result<Arc<Grid>> {
    Grid::new(cfg.domain, cfg.n, cfg.resolution, cfg.pad())
}

pub fn build_background(cfg: &RunConfig, grid: &Arc<Grid>) -> Result<Background> {
    let f = cfg.f.sample(grid)?;
    match cfg.mode {
        Mode::Interior => {
            let vb = cfg.vb.sample(grid)?;
            build_background_interior(&f, &vb, cfg.schedule.k, sigma(cfg, None))
        }
        Mode::Dirichlet => match &cfg.g {
            Some(g) if g.is_analytic() => {
                let g = g.clone();
                build_background_boundary(&f, Some(&move |x: &[f64]| g.eval(x)))
            }
            Some(g) => {
                let samples = g.sample(grid)?;
                let lookup = move |x: &[f64]| {
                    let p = samples.grid.ravel(
                        &x.iter()
                            .enumerate()
                            .map(|(k, v)| {
                                ((v / samples.grid.h).round() as isize
                                    + samples.grid.zero[k] as isize)
                                    .clamp(0, samples.grid.shape[k] as isize - 1)
                                    as usize
                            })
                            .collect::<Vec<_>>(),
                    );
                    samples.values[p]
                };
                build_background_boundary(&f, Some(&lookup))
            }
            None => build_background_boundary(&f, None),
        },
    }
}

/// Configured σ, or `σ*/3` of the frame (a placeholder of 0.06 before the
/// frame exists).
fn sigma(cfg: &RunConfig, frame: Option<&Frame>) -> f64 {
    cfg.schedule
        .sigma
        .unwrap_or_else(|| frame.map_or(0.06, |f| f.sigma_star / 3.0))
}

/// The explicit schedule of the config (kept even when the ledger rejects
/// it), or the result of the search.
pub fn build_schedule(
    cfg: &RunConfig,
    frame: &Frame,
    psi_norm: f64,
) -> (Option<Schedule>, Feasibility) {
    let s = &cfg.schedule;
    let sigma = sigma(cfg, Some(frame));
    if let (Some(a), Some(b), Some(c)) = (s.a, s.b, s.c) {
        let schedule = Schedule {
            ln_a: a.ln(),
            b,
            c,
            alpha: s.alpha,
            sigma,
            k: s.k,
            c_universal: s.c_universal,
            q_max: s.q_max,
            n: cfg.n,
            n_star: frame.n_star,
            sigma_star: frame.sigma_star,
            mode: cfg.mode,
            psi_norm,
            hat_mu_base: s.hat_mu_base,
        };
        let report = check_ledger(&schedule);
        let verdict = if report.feasible() {
            Feasibility::Feasible {
                schedule: schedule.clone(),
                report,
                candidates_tried: 0,
            }
        } else {
            Feasibility::Infeasible {
                reason: "explicit schedule violates the ledger".into(),
                violated: report.failures().iter().map(|e| e.name.clone()).collect(),
            }
        };
        return (Some(schedule), verdict);
    }
    let mut found = find_feasible(&SearchInput {
        n: cfg.n,
        alpha: s.alpha,
        sigma,
        k: s.k,
        c_universal: s.c_universal,
        psi_norm,
        sigma_star: frame.sigma_star,
        q_max: s.q_max,
        mode: cfg.mode,
    });
    if let Feasibility::Feasible { schedule, .. } = &mut found {
        schedule.hat_mu_base = s.hat_mu_base;
    }
    (found.schedule().cloned(), found)
}

/// Everything a run needs.
pub struct Setup {
    pub grid: Arc<Grid>,
    pub frame: Frame,
    pub background: Background,
    pub schedule: Option<Schedule>,
    pub feasibility: Feasibility,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Setup> {
        let grid = build_grid(cfg)?;
        let frame = build_frame(cfg.n, cfg.seed)?;
        let background = build_background(cfg, &grid)?;
        let psi_norm = background
            .psi
            .as_ref()
            .map_or(0.0, |psi| c_norm(psi, 1, Region::Interior));
        let (schedule, feasibility) = build_schedule(cfg, &frame, psi_norm);
        Ok(Setup {
            grid,
            frame,
            background,
            schedule,
            feasibility,
        })
    }

    /// The schedule to run with, explicit or found.
    pub fn schedule(&self) -> Result<&Schedule> {
        self.schedule
            .as_ref()
            .ok_or_else(|| match &self.feasibility {
                Feasibility::Infeasible { reason, .. } => Error::Precondition(reason.clone()),
                Feasibility::Feasible { .. } => Error::Precondition("no schedule".into()),
            })
    }
}

pub fn stage_config(cfg: &RunConfig) -> StageConfig {
    StageConfig {
        points_per_period: cfg.points_per_period,
        c_h: cfg.c_h,
        policy: cfg.policy,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        residual_tests: cfg.residual_tests,
        residual_seed: 1,
    }
}
