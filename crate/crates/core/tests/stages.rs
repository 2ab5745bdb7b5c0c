use corrugate::config::RunConfig;
use corrugate::decomp::build_frame;
use corrugate::elliptic::Background;
use corrugate::experiment::{stage_config, Setup};
use corrugate::field::{
    gradient, outer_half, Domain, Grid, ScalarField, SymMatrixField, VectorField,
};
use corrugate::problem::Preset;
use corrugate::scheduler::{Mode, Schedule, StageParams};
use corrugate::stages::{
    boundary_amplitudes, boundary_stage, interior_stage, run, run_plan, AssertionPolicy,
    CutoffData, InitParams, InteriorScaling, Plan, StageConfig, State,
};
use corrugate::Error;

fn small_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.resolution = 128;
    cfg.seed = seed;
    cfg.residual_tests = 4;
    cfg.vb = Preset::Trig {
        amplitude: 0.1,
        freq: vec![1.0, 1.0],
        phase: 0.0,
    };
    cfg.policy = AssertionPolicy::Record;
    cfg
}

fn ladder_plan(sigma: f64, stages: usize) -> Plan {
    let mus = vec![1.0, 2.0, 4.0, 8.0];
    Plan {
        init: InitParams {
            delta0: 0.1,
            delta1: 0.05,
            lambda0: 1.0,
            hat_mus: Vec::new(),
        },
        stages: (0..stages)
            .map(|q| StageParams {
                q,
                delta_q: 0.1,
                delta_q1: 0.05,
                delta_q2: sigma * 0.05,
                lambda_q: 1.0,
                lambda_q1: 8.0,
                mu0: 1.0,
                l: 0.03,
                mus: mus.clone(),
            })
            .collect(),
    }
}

fn planned_run(seed: u64, stages: usize) -> corrugate::stages::Solution {
    let cfg = small_config(seed);
    let setup = Setup::new(&cfg).unwrap();
    let sched = setup.schedule().unwrap().clone();
    let plan = ladder_plan(sched.sigma, stages);
    run_plan(
        &setup.background,
        &setup.frame,
        &sched,
        &plan,
        &stage_config(&cfg),
        &mut |_| {},
    )
    .unwrap()
}

#[test]
fn zero_stages_returns_the_background() {
    let sol = planned_run(0, 0);
    assert_eq!(sol.reports.len(), 1);
    assert_eq!(sol.norm_table.len(), 1);
    assert!(
        sol.distance_from_background < 1e-14,
        "{}",
        sol.distance_from_background
    );
    assert!(sol.residual.is_some());
}

#[test]
fn runs_are_deterministic_for_a_seed() {
    let a = planned_run(5, 1);
    let b = planned_run(5, 1);
    let bits = |f: &ScalarField| f.values.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.v), bits(&b.v));
    for k in 0..2 {
        assert_eq!(
            a.w.comps[k].iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.w.comps[k].iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
    let c = planned_run(6, 1);
    assert_ne!(bits(&a.v), bits(&c.v));
}

#[test]
fn strict_policy_rejects_an_infeasible_schedule() {
    let mut cfg = small_config(0);
    cfg.resolution = 64;
    cfg.policy = AssertionPolicy::Strict;
    cfg.schedule.a = Some(20.0);
    cfg.schedule.b = Some(1.2);
    cfg.schedule.c = Some(0.5);
    cfg.schedule.q_max = 2;
    let setup = Setup::new(&cfg).unwrap();
    let sched = setup.schedule().unwrap();
    let err = run(
        &setup.background,
        &setup.frame,
        sched,
        &stage_config(&cfg),
        &mut |_| {},
    )
    .unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)), "{err}");
}

fn schedule(mode: Mode, sigma_star: f64, n_star: usize) -> Schedule {
    Schedule {
        ln_a: 3.0,
        b: 1.2,
        c: 4.0,
        alpha: 0.05,
        sigma: sigma_star / 3.0,
        k: 4.0,
        c_universal: 2.0,
        q_max: 1,
        n: 2,
        n_star,
        sigma_star,
        mode,
        psi_norm: 0.0,
        hat_mu_base: None,
    }
}

/// With all cut-offs equal to 1 and the same inputs, a boundary stage is an
/// interior stage.
#[test]
fn boundary_stage_matches_interior_stage_away_from_the_cutoffs() {
    let grid = Grid::new(Domain::Square, 2, 128, 0.1).unwrap();
    let frame = build_frame(2, 0).unwrap();
    let (d1, d2) = (0.02, 0.001);
    let vb = ScalarField::from_fn(&grid, |x| 0.05 * (2.0 * x[0] + x[1]).sin());
    let wb = VectorField::zeros(&grid);
    let psi = ScalarField::from_fn(&grid, |x| {
        (0.2 - 0.5 * ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2))).max(0.0)
    });
    let mut a = outer_half(&gradient(&vb));
    for i in 0..2 {
        let k = corrugate::field::sym_index(2, i, i);
        a.comps[k].iter_mut().for_each(|x| *x += d1);
    }
    let bg = Background {
        f: ScalarField::zeros(&grid),
        vb: vb.clone(),
        wb: wb.clone(),
        a: a.clone(),
        u: None,
        psi: Some(psi.clone()),
        tau: 0.0,
        g: None,
        selected_c: None,
        solves: Vec::new(),
    };
    let cut = CutoffData::new(&psi);
    let sp = StageParams {
        q: 0,
        delta_q: 0.04,
        delta_q1: d1,
        delta_q2: d2,
        lambda_q: 1.0,
        lambda_q1: 8.0,
        mu0: 1.0,
        l: 0.02,
        mus: vec![1.0, 2.0, 4.0, 8.0],
    };
    let cfg = StageConfig {
        policy: AssertionPolicy::Record,
        seed: 3,
        residual_tests: 0,
        ..StageConfig::default()
    };
    let state = State {
        q: 0,
        v: vb,
        w: wb,
        d: SymMatrixField::zeros(&grid),
        deficit_norm: 0.0,
    };
    let scaling = InteriorScaling {
        a_bar: a,
        v_factor: 1.0,
        w_factor: 1.0,
    };
    let sched_i = schedule(Mode::Interior, frame.sigma_star, frame.n_star);
    let sched_b = schedule(Mode::Dirichlet, frame.sigma_star, frame.n_star);
    let (si, ri) = interior_stage(&scaling, &state, &frame, &sp, &sched_i, &cfg).unwrap();
    let (sb, _) = boundary_stage(&bg, &cut, &state, &frame, &sp, &sched_b, &cfg).unwrap();
    assert_eq!(ri.clamped_points, 0);

    let mut compared = 0;
    let mut worst = 0.0f64;
    for p in grid.interior_points() {
        let x = grid.coords(p);
        if (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) < 0.35f64.powi(2) {
            worst = worst.max((si.v.values[p] - sb.v.values[p]).abs());
            for k in 0..2 {
                worst = worst.max((si.w.comps[k][p] - sb.w.comps[k][p]).abs());
            }
            compared += 1;
        }
    }
    assert!(compared > 1000);
    assert!(
        worst <= 1e-12,
        "interior and boundary stages differ by {worst}"
    );
}

#[test]
fn glued_amplitudes_are_continuous_across_the_case_interface() {
    let mut cfg = RunConfig::default();
    cfg.mode = Mode::Dirichlet;
    cfg.domain = Domain::Disc;
    cfg.resolution = 256;
    cfg.g = Some(Preset::Constant { value: 0.0 });
    cfg.policy = AssertionPolicy::Record;
    cfg.schedule.a = Some(20.0);
    cfg.schedule.b = Some(1.2);
    cfg.schedule.c = Some(0.5);
    cfg.schedule.hat_mu_base = Some(2.0);
    cfg.schedule.q_max = 1;
    let setup = Setup::new(&cfg).unwrap();
    let bg = &setup.background;
    let grid = setup.grid.clone();
    let psi = bg.psi.as_ref().unwrap();
    let cut = CutoffData::new(psi);
    let psi_max = psi.values.iter().cloned().fold(0.0, f64::max);
    let d1 = 0.3 * psi_max;
    let sp = StageParams {
        q: 0,
        delta_q: 2.0 * d1,
        delta_q1: d1,
        delta_q2: 0.1 * d1,
        lambda_q: 1.0,
        lambda_q1: 8.0,
        mu0: 1.0,
        l: 0.01,
        mus: vec![1.0, 2.0, 4.0, 8.0],
    };
    let state = State {
        q: 0,
        v: bg.vb.clone(),
        w: bg.wb.clone(),
        d: SymMatrixField::zeros(&grid),
        deficit_norm: 0.0,
    };
    let amps =
        boundary_amplitudes(bg, &cut, &state, &setup.frame, &sp, &stage_config(&cfg)).unwrap();

    // the horizontal line through the centre, left to right
    let mut line: Vec<usize> = grid
        .interior_points()
        .filter(|&p| grid.coords(p)[1].abs() < 0.5 * grid.h)
        .collect();
    line.sort_by(|&p, &q| grid.coords(p)[0].total_cmp(&grid.coords(q)[0]));
    let crossings: Vec<usize> = (2..line.len() - 2)
        .filter(|&k| (psi.values[line[k]] < d1) != (psi.values[line[k + 1]] < d1))
        .collect();
    assert_eq!(
        crossings.len(),
        2,
        "the transect crosses the interface twice"
    );
    for k in crossings {
        for a in &amps {
            let v = |j: usize| a.values[line[j]];
            let jump = (v(k + 1) - v(k)).abs();
            let around = (v(k) - v(k - 1)).abs().max((v(k + 2) - v(k + 1)).abs());
            assert!(
                jump <= 2.0 * around + 1e-12,
                "jump {jump} against neighbouring increments {around}"
            );
        }
    }
}
