use std::time::Instant;

use super::{
    pair_increment_norm, pair_norm, phases, run_steps, seconds, AssertionPolicy, Check, CutoffData,
    DeficitReport, InitParams, StageConfig, State,
};
use crate::decomp::{decompose_field, Frame};
use crate::elliptic::{boundary_trace_error, Background, SOLVER_TOLERANCE};
use crate::error::{Error, Result};
use crate::field::{
    holder_norm, mollify_scalar, mollify_sym, mollify_vector, sym_index, Region, ScalarField,
    SymMatrixField, VectorField,
};
use crate::scheduler::{Mode, Schedule, StageParams};
use crate::verify::{deficit, Shift};

/// True when `(v, w)` equals `(v^b, w^b)` bit for bit wherever `inside` is false.
pub(crate) fn untouched_outside(
    v: &ScalarField,
    w: &VectorField,
    bg: &Background,
    inside: &[bool],
) -> bool {
    (0..v.grid.len()).filter(|&p| !inside[p]).all(|p| {
        v.values[p].to_bits() == bg.vb.values[p].to_bits()
            && w.comps
                .iter()
                .zip(&bg.wb.comps)
                .all(|(a, b)| a[p].to_bits() == b[p].to_bits())
    })
}

/// Tolerance for the boundary trace, relative to the data.
fn trace_tolerance(bg: &Background) -> f64 {
    let g =
        bg.g.as_ref()
            .map_or(0.0, |g| g.values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    SOLVER_TOLERANCE * g.max(1.0)
}

fn scalar(grid: &std::sync::Arc<crate::field::Grid>, values: Vec<f64>) -> ScalarField {
    ScalarField {
        grid: grid.clone(),
        values,
    }
}

/// N* corrugations with `â_i = η₁(ψ − δ₁)^{1/2} d_i*` and frequencies
/// `μ̂_i`, starting from `(v^b, w^b)`.
pub fn init_boundary(
    bg: &Background,
    cut: &CutoffData,
    frame: &Frame,
    init: &InitParams,
    sched: &Schedule,
    cfg: &StageConfig,
) -> Result<(State, DeficitReport)> {
    let grid = bg.vb.grid.clone();
    let (delta0, delta1) = (init.delta0, init.delta1);
    let hat = &init.hat_mus;
    if hat.len() != frame.n_star {
        return Err(Error::Precondition(format!(
            "need {} initialisation frequencies, got {}",
            frame.n_star,
            hat.len()
        )));
    }
    let mut report = DeficitReport::new(0, Mode::Dirichlet);
    report.eps_h = cfg.c_h * grid.h * grid.h * hat[hat.len() - 1].powi(2);

    let t = Instant::now();
    let eta1 = cut.eta_q(delta1);
    let d_star = frame.identity_amplitudes();
    let amplitudes: Vec<ScalarField> = d_star
        .iter()
        .map(|d| {
            let values = (0..grid.len())
                .map(|p| {
                    let e = eta1.values[p];
                    if e == 0.0 {
                        0.0
                    } else {
                        e * (cut.psi.values[p] - delta1).max(0.0).sqrt() * d
                    }
                })
                .collect();
            scalar(&grid, values)
        })
        .collect();
    report.timings.decompose_s = seconds(t);

    let t = Instant::now();
    let ph = phases(cfg.seed, 0, frame.n_star);
    let (v, w) = run_steps(
        bg.vb.clone(),
        bg.wb.clone(),
        amplitudes,
        frame,
        hat,
        &ph,
        cfg.points_per_period,
    )?;
    report.timings.steps_s = seconds(t);

    let t = Instant::now();
    let psi1 = cut.psi_q(delta1);
    let (d, norm) = deficit(&bg.a, &v, &w, Shift::Field(&psi1))?;
    let c0_inc = pair_increment_norm(&v, &w, &bg.vb, &bg.wb, 0)?;
    let c1 = pair_norm(&v, &w, 1);
    let c2 = pair_norm(&v, &w, 2);
    let c2_bound = sched.k * delta0.sqrt() * init.lambda0;
    let exact = untouched_outside(&v, &w, bg, &cut.omega_tilde(delta1));
    let trace = boundary_trace_error(&v, bg).unwrap_or(0.0);
    report.deficit_norm = norm;
    report.deficit_bound = sched.sigma * delta1;
    let eps = report.eps_h;
    report.checks = vec![
        Check::new("deficit", norm, report.deficit_bound, eps),
        Check::new("c0_increment", c0_inc, sched.sigma * delta1, eps),
        Check::new("c1_norm", c1, 0.5 * sched.k.sqrt(), eps),
        Check::new("c2_norm", c2, c2_bound, eps),
        Check::flag("untouched_outside", exact),
        Check::new("trace", trace, trace_tolerance(bg), 0.0),
    ];
    report.norms = vec![
        ("deficit".into(), norm),
        ("c0_increment".into(), c0_inc),
        ("c1".into(), c1),
        ("c2".into(), c2),
        ("trace".into(), trace),
        ("psi_c1".into(), cut.psi_c1),
        ("delta0".into(), delta0),
        ("hat_mu_max".into(), hat[hat.len() - 1]),
    ];
    report.timings.measure_s = seconds(t);
    Ok((
        State {
            q: 0,
            v,
            w,
            d,
            deficit_norm: norm,
        },
        report,
    ))
}

struct Prepared {
    v_m: ScalarField,
    w_m: VectorField,
    eta: ScalarField,
    amplitudes: Vec<ScalarField>,
    clamped: usize,
    max_distance: f64,
}

/// Mollified fields, the stage cut-off η and the glued amplitudes.
fn prepare(
    bg: &Background,
    cut: &CutoffData,
    st: &State,
    frame: &Frame,
    sp: &StageParams,
    cfg: &StageConfig,
) -> Result<Prepared> {
    let grid = st.v.grid.clone();
    let n = grid.n;
    let psi_q1 = cut.psi_q(sp.delta_q1);
    let v_m = mollify_scalar(&st.v, sp.l)?;
    let w_m = mollify_vector(&st.w, sp.l)?;
    let a_m = mollify_sym(&bg.a, sp.l)?;
    let psi_m = mollify_scalar(&psi_q1, sp.l)?;

    let eta = cut.stage_eta(sp.delta_q1);
    let eta2 = cut.eta_q(sp.delta_q2);
    let (inner, _) = deficit(&a_m, &v_m, &w_m, Shift::Constant(sp.delta_q2))?;
    let s: Vec<f64> = (0..grid.len())
        .map(|p| eta2.values[p].powi(2) * (psi_m.values[p] - sp.delta_q2))
        .collect();
    let mut d_tilde = SymMatrixField::zeros(&grid);
    for (k, comp) in d_tilde.comps.iter_mut().enumerate() {
        let diagonal = (0..n).any(|i| sym_index(n, i, i) == k);
        for p in 0..grid.len() {
            let e = eta.values[p] * eta.values[p];
            let mut x = e * inner.comps[k][p];
            if diagonal {
                x += (1.0 - e) * s[p];
            }
            comp[p] = x;
        }
    }
    let case1 = |p: usize| grid.is_interior(p) && cut.psi.values[p] >= sp.delta_q1 && s[p] > 0.0;
    let clamp = cfg.policy == AssertionPolicy::Record;
    let dec = decompose_field(frame, &d_tilde, |p| s[p], case1, clamp)?;
    let d_star = frame.identity_amplitudes();
    let mut amplitudes = dec.amplitudes;
    for (i, a) in amplitudes.iter_mut().enumerate() {
        for p in 0..grid.len() {
            if grid.is_interior(p) && cut.psi.values[p] < sp.delta_q1 && eta2.values[p] > 0.0 {
                a.values[p] =
                    eta2.values[p] * (psi_m.values[p] - sp.delta_q2).max(0.0).sqrt() * d_star[i];
            }
        }
    }
    Ok(Prepared {
        v_m,
        w_m,
        eta,
        amplitudes,
        clamped: dec.clamped,
        max_distance: dec.max_distance,
    })
}

/// The glued stage amplitudes `a_i`: the decomposition of `D̃` where
/// `ψ ≥ δ_{q+1}` and `η_{q+2}(ψ̃_{q+1} − δ_{q+2})^{1/2} d_i*` below.
pub fn boundary_amplitudes(
    bg: &Background,
    cut: &CutoffData,
    st: &State,
    frame: &Frame,
    sp: &StageParams,
    cfg: &StageConfig,
) -> Result<Vec<ScalarField>> {
    prepare(bg, cut, st, frame, sp, cfg).map(|p| p.amplitudes)
}

/// One boundary stage: the same induction as the interior one, glued to
/// `(V_q, W_q)` by level-set cut-offs of ψ so nothing outside `Ω̃_{q+2}` moves.
pub fn boundary_stage(
    bg: &Background,
    cut: &CutoffData,
    st: &State,
    frame: &Frame,
    sp: &StageParams,
    sched: &Schedule,
    cfg: &StageConfig,
) -> Result<(State, DeficitReport)> {
    let q = st.q;
    let grid = st.v.grid.clone();
    let n = grid.n;
    let mut report = DeficitReport::new(q + 1, Mode::Dirichlet);
    report.eps_h = cfg.c_h * grid.h * grid.h * sp.lambda_q1 * sp.lambda_q1;

    let collar = Check::new(
        "cutoff_collar",
        sp.l,
        sp.delta_q2 / (4.0 * cut.psi_c1 + 1.0),
        0.0,
    );
    if !collar.pass && cfg.policy == AssertionPolicy::Strict {
        report.checks.push(collar);
        return Err(Error::StageAssertion(Box::new(report)));
    }

    let t = Instant::now();
    let Prepared {
        v_m,
        w_m,
        eta,
        amplitudes,
        clamped,
        max_distance,
    } = prepare(bg, cut, st, frame, sp, cfg)?;
    report.clamped_points = clamped;
    report.timings.decompose_s = seconds(t);

    let t = Instant::now();
    let blend = |cur: &[f64], moll: &[f64]| -> Vec<f64> {
        (0..grid.len())
            .map(|p| {
                let e = eta.values[p] * eta.values[p];
                if e == 0.0 {
                    cur[p]
                } else {
                    e * moll[p] + (1.0 - e) * cur[p]
                }
            })
            .collect()
    };
    let v0 = scalar(&grid, blend(&st.v.values, &v_m.values));
    let w0 = VectorField {
        grid: grid.clone(),
        comps: (0..n)
            .map(|k| blend(&st.w.comps[k], &w_m.comps[k]))
            .collect(),
    };
    let ph = phases(cfg.seed, q, frame.n_star);
    let (v, w) = run_steps(
        v0,
        w0,
        amplitudes,
        frame,
        &sp.mus[1..],
        &ph,
        cfg.points_per_period,
    )?;
    report.timings.steps_s = seconds(t);

    let t = Instant::now();
    let psi_q2 = cut.psi_q(sp.delta_q2);
    let (d, norm) = deficit(&bg.a, &v, &w, Shift::Field(&psi_q2))?;
    let root = sp.delta_q1.sqrt();
    let c0_inc = pair_increment_norm(&v, &w, &st.v, &st.w, 0)?;
    let c1_inc = pair_increment_norm(&v, &w, &st.v, &st.w, 1)?;
    let c2 = pair_norm(&v, &w, 2);
    let holder_inc = holder_norm(&v.sub(&st.v)?, 1, sched.alpha, Region::Interior);
    let exact = untouched_outside(&v, &w, bg, &cut.omega_tilde(sp.delta_q2));
    let trace = boundary_trace_error(&v, bg).unwrap_or(0.0);
    report.deficit_norm = norm;
    report.deficit_bound = sched.sigma * sp.delta_q2;
    let eps = report.eps_h;
    report.checks = vec![
        collar,
        Check::new("decomposition_range", max_distance, frame.sigma_star, 0.0),
        Check::new("deficit", norm, report.deficit_bound, eps),
        Check::new("c1_increment", c1_inc, sched.k * root, eps),
        Check::new("c2_norm", c2, sched.k * root * sp.lambda_q1, eps),
        Check::new(
            "holder_increment",
            holder_inc,
            sched.k * root * sp.lambda_q1.powf(sched.alpha),
            eps,
        ),
        Check::flag("untouched_outside", exact),
        Check::new("trace", trace, trace_tolerance(bg), 0.0),
    ];
    report.norms = vec![
        ("deficit".into(), norm),
        ("deficit_over_delta_q1".into(), norm / sp.delta_q1),
        ("c0_increment".into(), c0_inc),
        ("c1_increment".into(), c1_inc),
        ("c2".into(), c2),
        ("holder_increment".into(), holder_inc),
        ("normalised_distance".into(), max_distance),
        ("trace".into(), trace),
        ("l".into(), sp.l),
        ("mu0".into(), sp.mu0),
        ("lambda_q1".into(), sp.lambda_q1),
    ];
    if clamped > 0 {
        report
            .warnings
            .push(format!("{} points clamped onto the sigma* ball", clamped));
    }
    report.timings.measure_s = seconds(t);
    if !v.is_finite() || !w.is_finite() {
        return Err(Error::StageAssertion(Box::new(report)));
    }
    Ok((
        State {
            q: q + 1,
            v,
            w,
            d,
            deficit_norm: norm,
        },
        report,
    ))
}
