use serde::Serialize;

use super::{
    boundary_stage, init_boundary, init_interior, interior_stage, AssertionPolicy, Check,
    CutoffData, DeficitReport, InteriorScaling, Plan, StageConfig, State,
};
use crate::corrugation::check_resolution;
use crate::decomp::Frame;
use crate::elliptic::{boundary_trace_error, Background};
use crate::error::{Error, Result};
use crate::field::{sup_norm, Region, ScalarField, VectorField};
use crate::scheduler::{check_ledger, Mode, Schedule};
use crate::verify::{weak_residual, ResidualReport, TestFunction};

/// Handed to the observer after every stage, before its checks are enforced.
pub struct Snapshot<'a> {
    pub state: &'a State,
    /// `V_q`, `W_q` mapped back to the original problem.
    pub v: &'a ScalarField,
    pub w: &'a VectorField,
    pub report: &'a DeficitReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormRow {
    pub q: usize,
    pub deficit: f64,
    pub deficit_bound: f64,
    pub c0_increment: Option<f64>,
    pub c1_increment: Option<f64>,
    pub holder_increment: Option<f64>,
    pub residual_max_rel: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub mode: Mode,
    pub v: ScalarField,
    pub w: VectorField,
    pub reports: Vec<DeficitReport>,
    pub norm_table: Vec<NormRow>,
    pub residual: Option<ResidualReport>,
    /// `‖v − v^b‖₀` over Ω.
    pub distance_from_background: f64,
    /// Boundary mode: sup distance of the trace of `v` from `g`.
    pub trace_error: Option<f64>,
    /// Boundary mode: points where `v` differs from `v^b`.
    pub modified_points: usize,
    pub v_factor: f64,
    pub w_factor: f64,
}

impl Solution {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed())
    }
}

/// Errors unless the grid samples the largest frequency of the run with
/// `points_per_period` points per period.
pub fn check_run_resolution(sched: &Schedule, h: f64, points_per_period: usize) -> Result<()> {
    let ln = sched.ln_max_frequency();
    let mu = ln.exp();
    if !mu.is_finite() {
        return Err(Error::FrequencyExceedsGrid {
            mu,
            h,
            points_per_period,
        });
    }
    check_resolution(h, mu, points_per_period)
}

fn row(r: &DeficitReport) -> NormRow {
    NormRow {
        q: r.q,
        deficit: r.deficit_norm,
        deficit_bound: r.deficit_bound,
        c0_increment: r.norm("c0_increment"),
        c1_increment: r.norm("c1_increment"),
        holder_increment: r.norm("holder_increment"),
        residual_max_rel: r.residual.as_ref().map(|x| x.max_rel),
        passed: r.passed(),
    }
}

/// Initialisation followed by `sched.q_max` stages.
pub fn run(
    bg: &Background,
    frame: &Frame,
    sched: &Schedule,
    cfg: &StageConfig,
    observer: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<Solution> {
    let ledger = check_ledger(sched);
    let names = || {
        ledger
            .failures()
            .iter()
            .map(|e| e.name.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    };
    if !ledger.representable() {
        return Err(Error::ScheduleOverflow(format!(
            "schedule is not representable: {}",
            names()
        )));
    }
    if !ledger.feasible() && cfg.policy == AssertionPolicy::Strict {
        return Err(Error::Infeasible(names()));
    }
    check_run_resolution(sched, bg.vb.grid.h, cfg.points_per_period)?;
    let plan = Plan::from_schedule(sched)?;
    run_plan(bg, frame, sched, &plan, cfg, observer)
}

/// Like [`run`], with the per-stage parameters taken from `plan` instead of
/// the schedule. The schedule still supplies σ, K, α and the mode.
pub fn run_plan(
    bg: &Background,
    frame: &Frame,
    sched: &Schedule,
    plan: &Plan,
    cfg: &StageConfig,
    observer: &mut dyn FnMut(&Snapshot<'_>),
) -> Result<Solution> {
    let grid = bg.vb.grid.clone();
    check_resolution(grid.h, plan.max_frequency(), cfg.points_per_period)?;
    if frame.n != grid.n || sched.n != grid.n {
        return Err(Error::Precondition(
            "frame, schedule and grid dimensions differ".into(),
        ));
    }
    let phis = if cfg.residual_tests > 0 {
        TestFunction::family(grid.domain, grid.n, cfg.residual_tests, cfg.residual_seed)
    } else {
        Vec::new()
    };

    enum Pipeline {
        Interior(InteriorScaling),
        Boundary(CutoffData),
    }
    let (pipeline, mut state, mut report) = match sched.mode {
        Mode::Interior => {
            let (scaling, st, rep) = init_interior(bg, &plan.init, sched)?;
            (Pipeline::Interior(scaling), st, rep)
        }
        Mode::Dirichlet => {
            let psi = bg.psi.as_ref().ok_or_else(|| {
                Error::ModeMisuse("Dirichlet mode needs a boundary background".into())
            })?;
            let cut = CutoffData::new(psi);
            let (st, rep) = init_boundary(bg, &cut, frame, &plan.init, sched, cfg)?;
            (Pipeline::Boundary(cut), st, rep)
        }
    };
    let (v_factor, w_factor) = match &pipeline {
        Pipeline::Interior(s) => (s.v_factor, s.w_factor),
        Pipeline::Boundary(_) => (1.0, 1.0),
    };

    let mut reports = Vec::new();
    loop {
        let v = state.v.scale(v_factor);
        let w = state.w.scale(w_factor);
        if !phis.is_empty() {
            report.residual = Some(weak_residual(&v, &bg.f, &phis)?);
        }
        observer(&Snapshot {
            state: &state,
            v: &v,
            w: &w,
            report: &report,
        });
        cfg.enforce(&report)?;
        reports.push(report);
        if state.q >= plan.stages.len() {
            break;
        }
        let sp = &plan.stages[state.q];
        let (next, rep) = match &pipeline {
            Pipeline::Interior(s) => interior_stage(s, &state, frame, sp, sched, cfg)?,
            Pipeline::Boundary(cut) => boundary_stage(bg, cut, &state, frame, sp, sched, cfg)?,
        };
        state = next;
        report = rep;
    }

    let v = state.v.scale(v_factor);
    let w = state.w.scale(w_factor);
    let distance = sup_norm(&v.sub(&bg.vb)?.values, &grid, Region::Interior);
    if let (Some(eps), Some(last)) = (cfg.epsilon, reports.last_mut()) {
        last.checks
            .push(Check::new("distance_from_background", distance, eps, 0.0));
        cfg.enforce(last)?;
    }
    let modified_points = match sched.mode {
        Mode::Dirichlet => (0..grid.len())
            .filter(|&p| v.values[p].to_bits() != bg.vb.values[p].to_bits())
            .count(),
        Mode::Interior => 0,
    };
    Ok(Solution {
        mode: sched.mode,
        trace_error: boundary_trace_error(&v, bg),
        residual: reports.last().and_then(|r| r.residual.clone()),
        norm_table: reports.iter().map(row).collect(),
        reports,
        distance_from_background: distance,
        modified_points,
        v,
        w,
        v_factor,
        w_factor,
    })
}
