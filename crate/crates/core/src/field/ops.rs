use rayon::prelude::*;

use super::{sym_index, sym_len, Grid, ScalarField, SymMatrixField, VectorField};

/// Second-order first derivative along `axis`: central in the bulk, one-sided
/// three-point at the two faces of the sampled box.
pub(crate) fn axis_derivative(values: &[f64], grid: &Grid, axis: usize) -> Vec<f64> {
    let s = grid.strides[axis];
    let d = grid.shape[axis];
    let inv = 1.0 / (2.0 * grid.h);
    (0..values.len())
        .into_par_iter()
        .map(|p| {
            let i = grid.axis_index(p, axis);
            if i == 0 {
                (-3.0 * values[p] + 4.0 * values[p + s] - values[p + 2 * s]) * inv
            } else if i == d - 1 {
                (3.0 * values[p] - 4.0 * values[p - s] + values[p - 2 * s]) * inv
            } else {
                (values[p + s] - values[p - s]) * inv
            }
        })
        .collect()
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let grid = &f.grid;
    VectorField {
        grid: grid.clone(),
        comps: (0..grid.n)
            .map(|k| axis_derivative(&f.values, grid, k))
            .collect(),
    }
}

/// Hessian as the symmetrised gradient of the gradient.
pub fn hessian(f: &ScalarField) -> SymMatrixField {
    let grid = &f.grid;
    let n = grid.n;
    let g = gradient(f);
    let mut comps = vec![Vec::new(); sym_len(n)];
    for i in 0..n {
        for j in i..n {
            let k = sym_index(n, i, j);
            comps[k] = if i == j {
                axis_derivative(&g.comps[i], grid, i)
            } else {
                let a = axis_derivative(&g.comps[j], grid, i);
                let b = axis_derivative(&g.comps[i], grid, j);
                a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
            };
        }
    }
    SymMatrixField {
        grid: grid.clone(),
        comps,
    }
}

/// sym∇w = ½(∇w + ∇wᵀ).
pub fn sym_grad(w: &VectorField) -> SymMatrixField {
    let grid = &w.grid;
    let n = grid.n;
    let mut comps = vec![Vec::new(); sym_len(n)];
    for i in 0..n {
        for j in i..n {
            let k = sym_index(n, i, j);
            comps[k] = if i == j {
                axis_derivative(&w.comps[i], grid, i)
            } else {
                let a = axis_derivative(&w.comps[j], grid, i);
                let b = axis_derivative(&w.comps[i], grid, j);
                a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect()
            };
        }
    }
    SymMatrixField {
        grid: grid.clone(),
        comps,
    }
}

/// ½ g⊗g for a vector field g (typically ∇v).
pub fn outer_half(g: &VectorField) -> SymMatrixField {
    let grid = &g.grid;
    let n = grid.n;
    let mut comps = vec![Vec::new(); sym_len(n)];
    for i in 0..n {
        for j in i..n {
            comps[sym_index(n, i, j)] = g.comps[i]
                .par_iter()
                .zip(&g.comps[j])
                .map(|(a, b)| 0.5 * a * b)
                .collect();
        }
    }
    SymMatrixField {
        grid: grid.clone(),
        comps,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::field::{Domain, Grid};

    fn grid(res: usize) -> Arc<Grid> {
        Grid::new(Domain::Square, 2, res, 0.05).unwrap()
    }

    fn max_interior<F: Fn(usize) -> f64>(g: &Grid, f: F) -> f64 {
        g.interior_points().map(f).fold(0.0, f64::max)
    }

    #[test]
    fn gradient_of_linear_and_constant() {
        let g = grid(32);
        let f = ScalarField::from_fn(&g, |x| x[0]);
        let gr = gradient(&f);
        for p in 0..g.len() {
            assert!((gr.comps[0][p] - 1.0).abs() < 1e-12);
            assert!(gr.comps[1][p].abs() < 1e-12);
        }
        let c = ScalarField::constant(&g, 3.5);
        let gc = gradient(&c);
        assert!(gc.comps.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gradient_of_sine_is_second_order() {
        // analytic derivative 2π cos(2πx); error constant (2π)³/6
        let g = grid(256);
        let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let gr = gradient(&f);
        let err = max_interior(&g, |p| {
            let x = g.coord(p, 0);
            (gr.comps[0][p] - 2.0 * PI * (2.0 * PI * x).cos()).abs()
        });
        let bound = (2.0 * PI).powi(3) / 6.0 * g.h * g.h;
        assert!(err <= 1.01 * bound, "err {err} bound {bound}");
        assert!(err >= 0.9 * bound);
    }

    #[test]
    fn hessian_of_quadratics() {
        let g = grid(16);
        let f = ScalarField::from_fn(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let h = hessian(&f);
        let f2 = ScalarField::from_fn(&g, |x| x[0] * x[1]);
        let h2 = hessian(&f2);
        for p in g.interior_points() {
            assert!((h.get(p, 0, 0) - 1.0).abs() < 1e-10);
            assert!((h.get(p, 1, 1) - 1.0).abs() < 1e-10);
            assert!(h.get(p, 0, 1).abs() < 1e-10);
            assert!((h2.get(p, 0, 1) - 1.0).abs() < 1e-10);
            assert!(h2.get(p, 0, 0).abs() < 1e-10);
        }
    }

    #[test]
    fn hessian_of_trig_product_converges() {
        let exact = |x: &[f64]| {
            let (s0, c0) = (2.0 * PI * x[0]).sin_cos();
            let (s1, c1) = (2.0 * PI * x[1]).sin_cos();
            let k2 = 4.0 * PI * PI;
            [-k2 * s0 * s1, k2 * c0 * c1, -k2 * s0 * s1]
        };
        let err = |res: usize| {
            let g = grid(res);
            let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin());
            let h = hessian(&f);
            max_interior(&g, |p| {
                let e = exact(&g.coords(p));
                (h.get(p, 0, 0) - e[0])
                    .abs()
                    .max((h.get(p, 0, 1) - e[1]).abs())
                    .max((h.get(p, 1, 1) - e[2]).abs())
            })
        };
        let (e1, e2) = (err(64), err(128));
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn sym_grad_of_linear_maps() {
        let g = grid(16);
        let m = [[1.0, 0.3], [0.3, -2.0]];
        let w = VectorField::from_fn(&g, |x, out| {
            out[0] = m[0][0] * x[0] + m[0][1] * x[1];
            out[1] = m[1][0] * x[0] + m[1][1] * x[1];
        });
        let s = sym_grad(&w);
        let rot = VectorField::from_fn(&g, |x, out| {
            out[0] = -x[1];
            out[1] = x[0];
        });
        let sr = sym_grad(&rot);
        for p in 0..g.len() {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((s.get(p, i, j) - m[i][j]).abs() < 1e-10);
                    assert!(sr.get(p, i, j).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sym_grad_matches_symmetrised_jacobian() {
        let g = grid(40);
        let w = VectorField::from_fn(&g, |x, out| {
            out[0] = (3.0 * x[0] + x[1]).sin();
            out[1] = (x[0] * x[1]).exp();
        });
        let s = sym_grad(&w);
        let j0 = gradient(&w.component(0));
        let j1 = gradient(&w.component(1));
        for p in 0..g.len() {
            let off = 0.5 * (j0.comps[1][p] + j1.comps[0][p]);
            assert!((s.get(p, 0, 1) - off).abs() < 1e-14);
            assert!((s.get(p, 0, 0) - j0.comps[0][p]).abs() < 1e-14);
            assert!((s.get(p, 1, 1) - j1.comps[1][p]).abs() < 1e-14);
        }
    }
}
