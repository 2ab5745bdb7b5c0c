use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Computational domain Ω. `Square` is the open unit cube (0,1)^n, `Disc` the
/// open unit ball centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Square,
    Disc,
}

impl Domain {
    /// Side length (square) or diameter (disc) of the bounding box of Ω.
    pub fn extent(self) -> f64 {
        match self {
            Domain::Square => 1.0,
            Domain::Disc => 2.0,
        }
    }

    /// Signed distance to ∂Ω, negative inside.
    pub fn signed_distance(self, x: &[f64]) -> f64 {
        match self {
            Domain::Disc => x.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0,
            Domain::Square => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for &v in x {
                    let d = (v - 0.5).abs() - 0.5;
                    if d > 0.0 {
                        outside += d * d;
                    }
                    inside = inside.max(d);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
        }
    }

    /// Distance from `x` (inside Ω) to ∂Ω along `dir * e_axis`, if ∂Ω is hit
    /// within `reach`.
    pub fn boundary_hit(self, x: &[f64], axis: usize, dir: f64, reach: f64) -> Option<f64> {
        let t = match self {
            Domain::Square => {
                if dir > 0.0 {
                    1.0 - x[axis]
                } else {
                    x[axis]
                }
            }
            Domain::Disc => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let xa = x[axis];
                let disc = xa * xa - (r2 - 1.0);
                -dir * xa + disc.max(0.0).sqrt()
            }
        };
        (t <= reach * (1.0 + 1e-12)).then_some(t.clamp(0.0, reach))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    /// Strictly inside Ω.
    Interior,
    /// On ∂Ω or in the extension band within half the pad.
    Collar,
    /// Outer half of the pad.
    Exterior,
}

/// Uniform padded grid over the bounding box of Ω.
///
/// Points are stored row-major with axis 0 slowest. The coordinate of index
/// `i` along axis `k` is `(i - zero[k]) * h`, which keeps grid lines aligned
/// with the square's boundary and the disc's centre exactly.
#[derive(Debug, Clone)]
pub struct Grid {
    pub n: usize,
    pub domain: Domain,
    pub shape: Vec<usize>,
    pub strides: Vec<usize>,
    pub h: f64,
    pub zero: Vec<usize>,
    pub pad: f64,
    /// Number of intervals across the bounding box of Ω.
    pub resolution: usize,
    pub mask: Vec<PointClass>,
}

impl Grid {
    /// Grid with `resolution` intervals across Ω and at least `pad` of
    /// extension on every side.
    pub fn new(domain: Domain, n: usize, resolution: usize, pad: f64) -> Result<Arc<Grid>> {
        if !(2..=4).contains(&n) {
            return Err(Error::Grid(format!("dimension {n} not supported")));
        }
        if resolution < 2 {
            return Err(Error::Grid("resolution must be at least 2".into()));
        }
        if domain == Domain::Disc && resolution % 2 != 0 {
            return Err(Error::Grid("disc resolution must be even".into()));
        }
        let h = domain.extent() / resolution as f64;
        let pad_points = ((pad / h).ceil() as usize).max(2);
        let len = resolution + 1 + 2 * pad_points;
        let zero_index = match domain {
            Domain::Square => pad_points,
            Domain::Disc => pad_points + resolution / 2,
        };
        Self::with_layout(domain, n, h, vec![zero_index; n], vec![len; n])
    }

    /// Grid from an explicit layout, e.g. when reading a CIGRID header.
    pub fn with_layout(
        domain: Domain,
        n: usize,
        h: f64,
        zero: Vec<usize>,
        shape: Vec<usize>,
    ) -> Result<Arc<Grid>> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Grid(format!("spacing must be positive, got {h}")));
        }
        if shape.len() != n || zero.len() != n || shape.iter().any(|&d| d < 3) {
            return Err(Error::Grid(format!("bad shape {shape:?} for n = {n}")));
        }
        let mut strides = vec![1usize; n];
        for k in (0..n - 1).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let resolution = (domain.extent() / h).round() as usize;
        let pad = (0..n)
            .map(|k| {
                let lo = zero[k] as f64 * h;
                let hi = (shape[k] - 1 - zero[k]) as f64 * h;
                match domain {
                    Domain::Square => lo.min(hi - 1.0),
                    Domain::Disc => (lo - 1.0).min(hi - 1.0),
                }
            })
            .fold(f64::INFINITY, f64::min);
        if pad < 0.0 {
            return Err(Error::Grid("grid does not cover the domain".into()));
        }
        let mut grid = Grid {
            n,
            domain,
            shape,
            strides,
            h,
            zero,
            pad,
            resolution,
            mask: Vec::new(),
        };
        grid.mask = grid.classify();
        if !grid.mask.contains(&PointClass::Interior) {
            return Err(Error::Grid("no interior points".into()));
        }
        Ok(Arc::new(grid))
    }

    fn classify(&self) -> Vec<PointClass> {
        let mut idx = vec![0usize; self.n];
        let mut x = vec![0.0; self.n];
        (0..self.len())
            .map(|p| {
                self.unravel(p, &mut idx);
                let interior = match self.domain {
                    Domain::Square => (0..self.n)
                        .all(|k| idx[k] > self.zero[k] && idx[k] < self.zero[k] + self.resolution),
                    Domain::Disc => {
                        self.coords_into(p, &mut x);
                        self.domain.signed_distance(&x) < 0.0
                    }
                };
                if interior {
                    PointClass::Interior
                } else {
                    self.coords_into(p, &mut x);
                    if self.domain.signed_distance(&x).max(0.0) <= 0.5 * self.pad {
                        PointClass::Collar
                    } else {
                        PointClass::Exterior
                    }
                }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unravel(&self, mut p: usize, idx: &mut [usize]) {
        for k in 0..self.n {
            idx[k] = p / self.strides[k];
            p %= self.strides[k];
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Index along `axis` of flat point `p`.
    #[inline]
    pub fn axis_index(&self, p: usize, axis: usize) -> usize {
        (p / self.strides[axis]) % self.shape[axis]
    }

    #[inline]
    pub fn coord(&self, p: usize, axis: usize) -> f64 {
        (self.axis_index(p, axis) as f64 - self.zero[axis] as f64) * self.h
    }

    pub fn coords_into(&self, p: usize, x: &mut [f64]) {
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = self.coord(p, k);
        }
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.coords_into(p, &mut x);
        x
    }

    /// Lower and upper corner of the sampled box.
    pub fn bbox(&self) -> Vec<(f64, f64)> {
        (0..self.n)
            .map(|k| {
                let lo = -(self.zero[k] as f64) * self.h;
                (lo, lo + (self.shape[k] - 1) as f64 * self.h)
            })
            .collect()
    }

    pub fn is_interior(&self, p: usize) -> bool {
        self.mask[p] == PointClass::Interior
    }

    pub fn interior_points(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&p| self.is_interior(p))
    }

    /// Distance from point `p` to the nearest face of the sampled box.
    pub fn edge_distance(&self, p: usize) -> f64 {
        (0..self.n)
            .map(|k| {
                let i = self.axis_index(p, k);
                i.min(self.shape[k] - 1 - i) as f64 * self.h
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn same_layout(&self, other: &Grid) -> bool {
        self.domain == other.domain
            && self.shape == other.shape
            && self.zero == other.zero
            && self.h == other.h
    }
}

/// C^∞ step: 0 for x ≤ 0, 1 for x ≥ 1.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Collar cut-off: 1 on Ω̄, decaying to 0 at half the pad.
pub fn collar_cutoff(grid: &Grid, p: usize) -> f64 {
    let x = grid.coords(p);
    let d = grid.domain.signed_distance(&x);
    if d <= 0.0 || grid.pad <= 0.0 {
        return if d <= 0.0 { 1.0 } else { 0.0 };
    }
    smooth_step(1.0 - d / (0.5 * grid.pad))
}
