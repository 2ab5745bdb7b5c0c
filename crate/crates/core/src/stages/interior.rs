use std::time::Instant;

use super::{
    pair_increment_norm, pair_norm, phases, run_steps, seconds, Check, DeficitReport, InitParams,
    StageConfig, State,
};
use crate::decomp::{decompose_field, Frame};
use crate::elliptic::Background;
use crate::error::{Error, Result};
use crate::field::{
    c_norm, collar_cutoff, holder_norm, mollify_scalar, mollify_sym, mollify_vector, Region,
    SymMatrixField, VectorField,
};
use crate::scheduler::{Mode, Schedule, StageParams};
use crate::verify::{deficit, Shift};

/// The rescaled target `Ā = δ₁τ⁻¹A` and the factors undoing it.
#[derive(Debug, Clone)]
pub struct InteriorScaling {
    pub a_bar: SymMatrixField,
    /// `δ₁^{−1/2} τ^{1/2}`, applied to `V`.
    pub v_factor: f64,
    /// `δ₁⁻¹ τ`, applied to `W`.
    pub w_factor: f64,
}

/// `Ā = δ₁τ⁻¹A`, `V₀ = δ₁^{1/2}τ^{−1/2}v^b`, `W₀ = 0`, with the q = 0
/// assumptions measured.
pub fn init_interior(
    bg: &Background,
    init: &InitParams,
    sched: &Schedule,
) -> Result<(InteriorScaling, State, DeficitReport)> {
    if !(bg.tau > 0.0) {
        return Err(Error::Precondition(
            "interior background needs τ > 0".into(),
        ));
    }
    let delta1 = init.delta1;
    let ratio = delta1 / bg.tau;
    let a_bar = bg.a.scale(ratio);
    let v = bg.vb.scale(ratio.sqrt());
    let w = VectorField::zeros(&bg.vb.grid);
    let (d, norm) = deficit(&a_bar, &v, &w, Shift::Constant(delta1))?;

    let mut report = DeficitReport::new(0, Mode::Interior);
    report.deficit_norm = norm;
    report.deficit_bound = sched.sigma * delta1;
    let c1 = pair_norm(&v, &w, 1);
    let c2 = pair_norm(&v, &w, 2);
    let c2_bound = sched.k * init.delta0.sqrt() * init.lambda0;
    report.checks = vec![
        Check::new("c1_norm", c1, sched.k.sqrt(), 0.0),
        Check::new("c2_norm", c2, c2_bound, 0.0),
        Check::new("deficit", norm, report.deficit_bound, 0.0),
    ];
    report.norms = vec![
        ("deficit".into(), norm),
        ("c1".into(), c1),
        ("c2".into(), c2),
        ("tau".into(), bg.tau),
    ];
    let scaling = InteriorScaling {
        a_bar,
        v_factor: (bg.tau / delta1).sqrt(),
        w_factor: bg.tau / delta1,
    };
    Ok((
        scaling,
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

/// One interior stage `(V_q, W_q) → (V_{q+1}, W_{q+1})`.
pub fn interior_stage(
    scaling: &InteriorScaling,
    st: &State,
    frame: &Frame,
    sp: &StageParams,
    sched: &Schedule,
    cfg: &StageConfig,
) -> Result<(State, DeficitReport)> {
    let q = st.q;
    let grid = st.v.grid.clone();
    let mut report = DeficitReport::new(q + 1, Mode::Interior);
    report.eps_h = cfg.c_h * grid.h * grid.h * sp.lambda_q1 * sp.lambda_q1;

    let t = Instant::now();
    let v_m = mollify_scalar(&st.v, sp.l)?;
    let w_m = mollify_vector(&st.w, sp.l)?;
    let a_m = mollify_sym(&scaling.a_bar, sp.l)?;
    report.timings.mollify_s = seconds(t);

    let t = Instant::now();
    let (d_tilde, _) = deficit(&a_m, &v_m, &w_m, Shift::Constant(sp.delta_q2))?;
    let cut: Vec<f64> = (0..grid.len()).map(|p| collar_cutoff(&grid, p)).collect();
    let clamp = cfg.policy == super::AssertionPolicy::Record;
    let dec = decompose_field(frame, &d_tilde, |_| sp.delta_q1, |p| cut[p] > 0.0, clamp)?;
    let amplitudes: Vec<_> = dec
        .amplitudes
        .into_iter()
        .map(|a| {
            let values = a.values.iter().zip(&cut).map(|(x, c)| x * c).collect();
            crate::field::ScalarField {
                grid: grid.clone(),
                values,
            }
        })
        .collect();
    report.clamped_points = dec.clamped;
    report.timings.decompose_s = seconds(t);

    let t = Instant::now();
    let ph = phases(cfg.seed, q, frame.n_star);
    let (v, w) = run_steps(
        v_m.clone(),
        w_m,
        amplitudes,
        frame,
        &sp.mus[1..],
        &ph,
        cfg.points_per_period,
    )?;
    report.timings.steps_s = seconds(t);

    let t = Instant::now();
    let (d, norm) = deficit(&scaling.a_bar, &v, &w, Shift::Constant(sp.delta_q2))?;
    let root = sp.delta_q1.sqrt();
    let c1_inc = pair_increment_norm(&v, &w, &st.v, &st.w, 1)?;
    let c0_inc = pair_increment_norm(&v, &w, &st.v, &st.w, 0)?;
    let c2 = pair_norm(&v, &w, 2);
    let dv = v.sub(&st.v)?;
    let holder_inc = holder_norm(&dv, 1, sched.alpha, Region::Interior);
    let c2_prev = pair_norm(&st.v, &st.w, 2);
    let locality = c_norm(&v_m.sub(&st.v)?, 1, Region::Interior);
    report.deficit_norm = norm;
    report.deficit_bound = sched.sigma * sp.delta_q2;
    let eps = report.eps_h;
    report.checks = vec![
        Check::new(
            "decomposition_range",
            dec.max_distance,
            frame.sigma_star,
            0.0,
        ),
        Check::new("deficit", norm, report.deficit_bound, eps),
        Check::new("c1_increment", c1_inc, sched.k * root, eps),
        Check::new("c2_norm", c2, sched.k * root * sp.lambda_q1, eps),
        Check::new(
            "holder_increment",
            holder_inc,
            sched.k * root * sp.lambda_q1.powf(sched.alpha),
            eps,
        ),
    ];
    report.norms = vec![
        ("deficit".into(), norm),
        ("deficit_over_delta_q1".into(), norm / sp.delta_q1),
        ("c0_increment".into(), c0_inc),
        ("c1_increment".into(), c1_inc),
        ("c2".into(), c2),
        ("holder_increment".into(), holder_inc),
        ("normalised_distance".into(), dec.max_distance),
        ("mollify_locality".into(), locality),
        ("mollify_locality_bound".into(), c2_prev * sp.l),
        ("l".into(), sp.l),
        ("mu0".into(), sp.mu0),
        ("lambda_q1".into(), sp.lambda_q1),
    ];
    if dec.clamped > 0 {
        report.warnings.push(format!(
            "{} points clamped onto the sigma* ball",
            dec.clamped
        ));
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
