use std::fs;
use std::path::{Path, PathBuf};

use corrugate::config::RunConfig;
use corrugate::experiment::{stage_config, Setup};
use corrugate::field::io::{save, FieldData};
use corrugate::field::{c_norm, Domain, Grid, Region, ScalarField};
use corrugate::scheduler::{alpha_threshold, check_ledger, Feasibility};
use corrugate::stages::Snapshot;
use serde_json::{json, Value};

use crate::Failure;

pub fn feasible(path: &Path, as_json: bool) -> Result<(), Failure> {
    let cfg = RunConfig::load(path)?;
    // the background is needed for ‖ψ‖₁ in Dirichlet mode
    let setup = Setup::new(&cfg)?;
    let threshold = alpha_threshold(cfg.n);
    let ledger = setup.schedule.as_ref().map(check_ledger);
    let ok = setup.feasibility.is_feasible();
    if as_json {
        let mut out = json!({
            "feasible": ok,
            "n": cfg.n,
            "alpha": cfg.schedule.alpha,
            "alpha_threshold": threshold,
            "frame": setup.frame,
            "schedule": setup.schedule,
            "ledger": ledger,
        });
        match &setup.feasibility {
            Feasibility::Feasible {
                candidates_tried, ..
            } => out["candidates_tried"] = json!(candidates_tried),
            Feasibility::Infeasible { reason, violated } => {
                out["reason"] = json!(reason);
                out["violated"] = json!(violated);
            }
        }
        println!(
            "{}",
            serde_json::to_string_pretty(&out).expect("serialisable")
        );
    } else {
        println!(
            "n = {}, alpha = {}, threshold 1/(1+n+n^2) = {:.6}",
            cfg.n, cfg.schedule.alpha, threshold
        );
        println!("{}", setup.frame);
        if let Some(s) = &setup.schedule {
            println!(
                "schedule: a = {:.6e}, b = {}, c = {}, sigma = {:.4e}, K = {}, q_max = {}",
                s.a(),
                s.b,
                s.c,
                s.sigma,
                s.k,
                s.q_max
            );
            println!("max frequency: exp({:.4})", s.ln_max_frequency());
        }
        if let Some(l) = &ledger {
            print!("{l}");
        }
        match &setup.feasibility {
            Feasibility::Feasible {
                candidates_tried, ..
            } => println!("feasible ({candidates_tried} candidates tried)"),
            Feasibility::Infeasible { reason, violated } => {
                println!("infeasible: {reason}");
                if !violated.is_empty() {
                    println!("violated: {}", violated.join(", "));
                }
            }
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::new(2, "schedule ledger is infeasible"))
    }
}

pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dump_stages: bool,
    pub emit_plot_data: bool,
}

/// Points of the line through the centre of Ω along the first axis.
fn transect(grid: &Grid) -> Vec<usize> {
    let centre = match grid.domain {
        Domain::Square => 0.5,
        Domain::Disc => 0.0,
    };
    let mut idx: Vec<usize> = (0..grid.n)
        .map(|k| ((centre / grid.h).round() as usize + grid.zero[k]).min(grid.shape[k] - 1))
        .collect();
    (0..grid.shape[0])
        .map(|i| {
            idx[0] = i;
            grid.ravel(&idx)
        })
        .filter(|&p| grid.is_interior(p))
        .collect()
}

fn write_transect(
    path: &Path,
    line: &[usize],
    v: &ScalarField,
    vb: &ScalarField,
) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(csv_failure)?;
    w.write_record(["x", "v", "vb", "v_minus_vb"])
        .map_err(csv_failure)?;
    for &p in line {
        let x = v.grid.coord(p, 0);
        let (a, b) = (v.values[p], vb.values[p]);
        w.write_record([x, a, b, a - b].map(|t| t.to_string()))
            .map_err(csv_failure)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::new(4, format!("csv: {e}"))
}

/// The report without wall-clock timings, so output files are reproducible.
fn stage_record(snap: &Snapshot<'_>) -> Value {
    let mut v = serde_json::to_value(snap.report).expect("report serialises");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timings");
    }
    v
}

pub fn run(path: &Path, ov: Overrides) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = ov.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    cfg.dump_stages |= ov.dump_stages;
    cfg.emit_plot_data |= ov.emit_plot_data;

    let setup = Setup::new(&cfg)?;
    let Some(sched) = setup.schedule.clone() else {
        let reason = match &setup.feasibility {
            Feasibility::Infeasible { reason, .. } => reason.clone(),
            Feasibility::Feasible { .. } => "no schedule".into(),
        };
        return Err(Failure::new(2, format!("no feasible schedule: {reason}")));
    };
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    let bg = &setup.background;
    let line = transect(&setup.grid);

    let mut records = Vec::new();
    let mut failure: Option<Failure> = None;
    let mut observer = |snap: &Snapshot<'_>| {
        println!("{}", snap.report.log_line());
        eprint!("{}", snap.report);
        records.push(stage_record(snap));
        if failure.is_some() {
            return;
        }
        let q = snap.state.q;
        let write = || -> Result<(), Failure> {
            if cfg.dump_stages {
                save(
                    out.join(format!("stage_{q:02}_v.cigrid")),
                    &FieldData::Scalar(snap.v.clone()),
                )?;
                save(
                    out.join(format!("stage_{q:02}_w.cigrid")),
                    &FieldData::Vector(snap.w.clone()),
                )?;
            }
            if cfg.emit_plot_data {
                write_transect(
                    &out.join(format!("transect_{q:02}.csv")),
                    &line,
                    snap.v,
                    &bg.vb,
                )?;
            }
            Ok(())
        };
        failure = write().err();
    };
    let result =
        corrugate::stages::run(bg, &setup.frame, &sched, &stage_config(&cfg), &mut observer);
    if let Some(f) = failure {
        return Err(f);
    }

    let mut config = serde_json::to_value(&cfg).expect("config serialises");
    if let Some(obj) = config.as_object_mut() {
        obj.remove("output_dir");
    }
    let ledger = check_ledger(&sched);
    let mut provenance = json!({
        "tool": "corrugate",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "grid": {
            "n": setup.grid.n,
            "h": setup.grid.h,
            "shape": setup.grid.shape,
            "bbox": setup.grid.bbox(),
            "domain": setup.grid.domain,
        },
        "frame": setup.frame,
        "schedule": sched,
        "ledger_feasible": ledger.feasible(),
        "ledger": ledger,
        "background": {
            "tau": bg.tau,
            "psi_c1": bg.psi.as_ref().map(|p| c_norm(p, 1, Region::Interior)),
            "selected_c": bg.selected_c,
            "solves": bg.solves,
        },
        "stages": records,
    });

    let sol = match result {
        Ok(sol) => sol,
        Err(e) => {
            provenance["outcome"] = json!(e.to_string());
            write_json(&out.join("provenance.json"), &provenance)?;
            return Err(e.into());
        }
    };
    save(out.join("v.cigrid"), &FieldData::Scalar(sol.v.clone()))?;
    save(out.join("w.cigrid"), &FieldData::Vector(sol.w.clone()))?;
    save(out.join("vb.cigrid"), &FieldData::Scalar(bg.vb.clone()))?;
    save(out.join("f.cigrid"), &FieldData::Scalar(bg.f.clone()))?;
    if cfg.emit_plot_data {
        let mut w = csv::Writer::from_path(out.join("norms.csv")).map_err(csv_failure)?;
        for row in &sol.norm_table {
            w.serialize(row).map_err(csv_failure)?;
        }
        w.flush()?;
    }
    let failed = sol.reports.iter().filter(|r| !r.passed()).count();
    provenance["outcome"] = json!(if failed == 0 {
        "passed"
    } else {
        "recorded failures"
    });
    provenance["measured"] = json!({
        "distance_from_background": sol.distance_from_background,
        "trace_error": sol.trace_error,
        "modified_points": sol.modified_points,
        "v_factor": sol.v_factor,
        "w_factor": sol.w_factor,
        "residual": sol.residual,
        "norm_table": sol.norm_table,
    });
    write_json(&out.join("provenance.json"), &provenance)?;
    if failed > 0 {
        eprintln!("{failed} stage(s) with failed checks, recorded");
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("serialisable");
    fs::write(path, text + "\n")?;
    Ok(())
}
