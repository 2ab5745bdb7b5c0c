use rayon::prelude::*;

use super::ops::axis_derivative;
use super::{Grid, PointClass, ScalarField};

/// Where a norm is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Interior points of Ω only.
    Interior,
    /// Ω together with the collar band.
    Collar,
    /// Every sampled point.
    All,
}

impl Region {
    pub fn contains(self, grid: &Grid, p: usize) -> bool {
        match self {
            Region::Interior => grid.mask[p] == PointClass::Interior,
            Region::Collar => grid.mask[p] != PointClass::Exterior,
            Region::All => true,
        }
    }
}

/// max |f| over `region`.
pub fn sup_norm(values: &[f64], grid: &Grid, region: Region) -> f64 {
    sup_norm_where(values, |p| region.contains(grid, p))
}

pub fn sup_norm_where(values: &[f64], keep: impl Fn(usize) -> bool + Sync) -> f64 {
    values
        .par_iter()
        .enumerate()
        .filter(|(p, _)| keep(*p))
        .map(|(_, v)| v.abs())
        .reduce(|| 0.0, f64::max)
}

/// Derivatives of order exactly `k` (k ≤ 2), one array per multi-index.
fn derivatives(f: &ScalarField, k: usize) -> Vec<Vec<f64>> {
    let grid = &f.grid;
    match k {
        0 => vec![f.values.clone()],
        1 => (0..grid.n)
            .map(|i| axis_derivative(&f.values, grid, i))
            .collect(),
        2 => {
            let first = derivatives(f, 1);
            let mut out = Vec::new();
            for i in 0..grid.n {
                for j in i..grid.n {
                    out.push(axis_derivative(&first[j], grid, i));
                }
            }
            out
        }
        _ => panic!("derivative order {k} not supported"),
    }
}

/// ‖f‖_k = Σ_{j≤k} ‖∇ʲf‖₀, each term the max over derivative components.
pub fn c_norm(f: &ScalarField, k: usize, region: Region) -> f64 {
    (0..=k)
        .map(|j| {
            derivatives(f, j)
                .iter()
                .map(|d| sup_norm(d, &f.grid, region))
                .fold(0.0, f64::max)
        })
        .sum()
}

/// Estimate of [∇ᵏf]_β from axis-aligned pairs at separations 2ʲh.
pub fn holder_seminorm(f: &ScalarField, k: usize, beta: f64, region: Region) -> f64 {
    assert!(
        beta > 0.0 && beta <= 1.0,
        "Hölder exponent must lie in (0, 1]"
    );
    let grid = &f.grid;
    derivatives(f, k)
        .iter()
        .map(|d| pair_quotient_max(d, grid, beta, region))
        .fold(0.0, f64::max)
}

fn pair_quotient_max(values: &[f64], grid: &Grid, beta: f64, region: Region) -> f64 {
    let mut seps = Vec::new();
    let mut s = 1usize;
    while s < *grid.shape.iter().min().unwrap() {
        seps.push(s);
        s *= 2;
    }
    (0..values.len())
        .into_par_iter()
        .filter(|&p| region.contains(grid, p))
        .map(|p| {
            let mut best = 0.0f64;
            for axis in 0..grid.n {
                let i = grid.axis_index(p, axis);
                for &s in &seps {
                    if i + s >= grid.shape[axis] {
                        break;
                    }
                    let q = p + s * grid.strides[axis];
                    if !region.contains(grid, q) {
                        continue;
                    }
                    let dist = (s as f64 * grid.h).powf(beta);
                    best = best.max((values[p] - values[q]).abs() / dist);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// ‖f‖_{k,β} = ‖f‖_k + [∇ᵏf]_β.
pub fn holder_norm(f: &ScalarField, k: usize, beta: f64, region: Region) -> f64 {
    c_norm(f, k, region) + holder_seminorm(f, k, beta, region)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::field::Domain;

    #[test]
    fn constant_field_norms() {
        let g = Grid::new(Domain::Square, 2, 32, 0.1).unwrap();
        let f = ScalarField::constant(&g, -1.5);
        assert_eq!(sup_norm(&f.values, &g, Region::Interior), 1.5);
        assert!(holder_seminorm(&f, 0, 0.5, Region::Interior) == 0.0);
        assert!((c_norm(&f, 2, Region::Interior) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn smoothed_kink_has_lipschitz_constant_near_one() {
        let g = Grid::new(Domain::Square, 2, 256, 0.05).unwrap();
        let mut last = 0.0;
        for s in [1e-1, 1e-2, 1e-3] {
            let f = ScalarField::from_fn(&g, |x| ((x[0] - 0.5).powi(2) + s * s).sqrt());
            let lip = holder_seminorm(&f, 0, 1.0, Region::Interior);
            assert!(lip <= 1.0 + 1e-12);
            assert!(lip >= last);
            last = lip;
        }
        assert!(last > 0.99, "measured {last}");
    }

    #[test]
    fn sine_family_matches_dense_constant() {
        // c_β = sup_u 2 sin(u/2) / u^β over u ∈ (0, π], evaluated densely
        let c_beta = |beta: f64| {
            (1..=200_000)
                .map(|i| {
                    let u = PI * i as f64 / 200_000.0;
                    2.0 * (u / 2.0).sin() / u.powf(beta)
                })
                .fold(0.0, f64::max)
        };
        let g = Grid::new(Domain::Square, 2, 512, 0.05).unwrap();
        for (amp, lambda) in [(1.0, 2.0), (0.3, 5.0)] {
            let k = 2.0 * PI * lambda;
            let f = ScalarField::from_fn(&g, |x| amp * (k * x[0]).sin());
            for beta in [0.5, 1.0] {
                let measured = holder_seminorm(&f, 1, beta, Region::Interior);
                let expected = amp * k.powf(1.0 + beta) * c_beta(beta);
                let ratio = measured / expected;
                assert!(
                    (0.85..=1.02).contains(&ratio),
                    "λ={lambda} β={beta} ratio {ratio}"
                );
            }
        }
    }
}
