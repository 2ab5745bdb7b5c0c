use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use corrugate::config::RunConfig;
use corrugate::field::io::{load, read_header, FieldData, Kind};
use corrugate::field::{sym_index, Domain};
use corrugate::problem::resample;
use corrugate::verify::{weak_residual, TestFunction};

use crate::Failure;

/// Header domain, or the square when the header has none.
fn open(path: &Path) -> Result<(FieldData, bool), Failure> {
    let header = read_header(&mut BufReader::new(File::open(path)?))?;
    let assumed = header.domain.is_none();
    Ok((load(path, Some(Domain::Square))?, assumed))
}

fn columns(field: &FieldData) -> (Vec<String>, Vec<&[f64]>) {
    match field {
        FieldData::Scalar(f) => (vec!["value".into()], vec![&f.values]),
        FieldData::Vector(f) => (
            (0..f.comps.len()).map(|k| format!("c{k}")).collect(),
            f.comps.iter().map(|c| c.as_slice()).collect(),
        ),
        FieldData::SymMat(f) => {
            let n = f.grid.n;
            let mut names = vec![String::new(); f.comps.len()];
            for i in 0..n {
                for j in i..n {
                    names[sym_index(n, i, j)] = format!("m{i}{j}");
                }
            }
            (names, f.comps.iter().map(|c| c.as_slice()).collect())
        }
    }
}

pub fn dump(path: &Path, limit: Option<usize>) -> Result<(), Failure> {
    let (field, _) = open(path)?;
    let grid = field.grid().clone();
    let (names, comps) = columns(&field);
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "{}", field.header())?;
    let axes: Vec<String> = (0..grid.n).map(|k| format!("x{k}")).collect();
    writeln!(out, "{} {}", axes.join(" "), names.join(" "))?;
    for p in 0..limit.unwrap_or(usize::MAX).min(grid.len()) {
        let mut row: Vec<String> = grid.coords(p).iter().map(|x| x.to_string()).collect();
        row.extend(comps.iter().map(|c| c[p].to_string()));
        writeln!(out, "{}", row.join(" "))?;
    }
    out.flush()?;
    Ok(())
}

pub fn info(path: &Path) -> Result<(), Failure> {
    let (field, assumed) = open(path)?;
    let grid = field.grid().clone();
    let header = field.header();
    println!("{header}");
    println!("kind:      {}", header.kind);
    println!("n:         {}", grid.n);
    println!(
        "shape:     {}",
        grid.shape
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" x ")
    );
    println!("h:         {}", grid.h);
    println!(
        "domain:    {:?}{}",
        grid.domain,
        if assumed { " (assumed)" } else { "" }
    );
    let interior: Vec<usize> = grid.interior_points().collect();
    println!("points:    {} ({} interior)", grid.len(), interior.len());
    let (names, comps) = columns(&field);
    println!(
        "{:<8} {:>14} {:>14} {:>14} {:>14} {:>8}",
        "comp", "min", "max", "mean", "sup(omega)", "nonfin"
    );
    for (name, c) in names.iter().zip(&comps) {
        let finite: Vec<f64> = c.iter().copied().filter(|x| x.is_finite()).collect();
        let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        let sup = interior.iter().map(|&p| c[p].abs()).fold(0.0, f64::max);
        println!(
            "{:<8} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>8}",
            name,
            min,
            max,
            mean,
            sup,
            c.len() - finite.len()
        );
    }
    Ok(())
}

pub fn verify(
    v_path: &Path,
    f_path: &Path,
    config: Option<&Path>,
    tests: usize,
    seed: u64,
    as_json: bool,
) -> Result<(), Failure> {
    let fallback = match config {
        Some(c) => Some(RunConfig::load(c)?.domain),
        None => None,
    };
    let v = load(v_path, fallback)?;
    if v.kind() != Kind::Scalar {
        return Err(Failure::new(
            4,
            format!("{} is not a scalar field", v_path.display()),
        ));
    }
    let v = v.into_scalar()?;
    let f = load(f_path, fallback.or(Some(v.grid.domain)))?.into_scalar()?;
    let f = resample(&f, &v.grid)?;
    let phis = TestFunction::family(v.grid.domain, v.grid.n, tests, seed);
    let report = weak_residual(&v, &f, &phis)?;
    if as_json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("serialisable")
        );
        return Ok(());
    }
    println!(
        "{:<28} {:>8} {:>14} {:>14} {:>12} {:>12}",
        "centre", "radius", "lhs", "rhs", "abs", "rel"
    );
    for e in &report.entries {
        let centre: Vec<String> = e.center.iter().map(|x| format!("{x:.4}")).collect();
        println!(
            "{:<28} {:>8.4} {:>14.6e} {:>14.6e} {:>12.4e} {:>12.4e}",
            centre.join(","),
            e.radius,
            e.lhs,
            e.rhs,
            e.abs,
            e.rel
        );
    }
    println!(
        "max abs {:.4e}  max rel {:.4e}  mean rel {:.4e}",
        report.max_abs, report.max_rel, report.mean_rel
    );
    Ok(())
}
