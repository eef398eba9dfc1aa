use crate::error::{Error, Result};

use super::expr::PotentialExpr;

/// Tensor lattice of `[-L, L]^n` with `points_per_axis` nodes per axis,
/// boundary included. Dirichlet conditions pin the boundary nodes to zero, so
/// only the `(points_per_axis - 2)^n` interior nodes carry unknowns; every
/// per-node array in this crate is indexed over interior nodes, first
/// coordinate fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dimension: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl Grid {
    pub fn new(dimension: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::invalid(format!(
                "grid dimension must be 1 or 2, got {dimension}"
            )));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid("grid half-width must be positive"));
        }
        if points_per_axis < 3 {
            return Err(Error::invalid("a grid needs at least 3 points per axis"));
        }
        Ok(Self {
            dimension,
            half_width,
            points_per_axis,
        })
    }

    /// Grid with spacing exactly `h` and `half_cells` cells on each side of the
    /// origin, so that the origin and every multiple of `h` are nodes.
    pub fn centered(dimension: usize, half_cells: usize, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        Self::new(dimension, half_cells as f64 * h, 2 * half_cells + 1)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points_per_axis - 1) as f64
    }

    /// Quadrature weight `h^n` of every node.
    pub fn weight(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn interior_per_axis(&self) -> usize {
        self.points_per_axis - 2
    }

    pub fn len(&self) -> usize {
        self.interior_per_axis().pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of the interior node with axis index `i` (0-based).
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + (i + 1) as f64 * self.spacing()
    }

    /// Axis indices of a flat interior index.
    pub fn axis_indices(&self, idx: usize) -> [usize; 2] {
        let m = self.interior_per_axis();
        if self.dimension == 1 {
            [idx, 0]
        } else {
            [idx % m, idx / m]
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let ij = self.axis_indices(idx);
        (0..self.dimension).map(|d| self.axis_coord(ij[d])).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Samples `f` at every interior node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        let mut buf = vec![0.0; self.dimension];
        (0..self.len())
            .map(|idx| {
                let ij = self.axis_indices(idx);
                for d in 0..self.dimension {
                    buf[d] = self.axis_coord(ij[d]);
                }
                f(&buf)
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension && x.iter().all(|c| c.abs() <= self.half_width * (1.0 + 1e-12))
    }

    /// Interpolation stencil for a point of the box: pairs of (interior index,
    /// weight). Boundary nodes carry the Dirichlet value zero and are dropped.
    pub fn stencil(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        if !self.contains(x) {
            return Err(Error::ProbeOutsideBox {
                point: x.to_vec(),
                half_width: self.half_width,
            });
        }
        let h = self.spacing();
        let last = self.points_per_axis - 1;
        // Per axis: (full-grid index, weight) pairs.
        let axis = |c: f64| -> [(usize, f64); 2] {
            let t = (c + self.half_width) / h;
            let nearest = t.round();
            if (t - nearest).abs() < 1e-9 {
                let j = (nearest as usize).min(last);
                return [(j, 1.0), (j, 0.0)];
            }
            let j = (t.floor() as usize).min(last - 1);
            let frac = t - j as f64;
            [(j, 1.0 - frac), (j + 1, frac)]
        };
        let m = self.interior_per_axis();
        let interior = |j: usize| (j >= 1 && j <= m).then(|| j - 1);
        let mut out = Vec::with_capacity(4);
        if self.dimension == 1 {
            for (j, w) in axis(x[0]) {
                if let Some(i) = interior(j) {
                    if w != 0.0 {
                        out.push((i, w));
                    }
                }
            }
        } else {
            let ax = axis(x[0]);
            let ay = axis(x[1]);
            for (jx, wx) in ax {
                for (jy, wy) in ay {
                    if let (Some(ix), Some(iy)) = (interior(jx), interior(jy)) {
                        let w = wx * wy;
                        if w != 0.0 {
                            out.push((ix + m * iy, w));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Smallest half-width `L` on the lattice `step, 2 step, ...` such that
/// `V >= level + margin` on the whole boundary of `[-L, L]^n`.
pub fn choose_box(
    v: &PotentialExpr,
    level: f64,
    margin: f64,
    dimension: usize,
    step: f64,
    cap: f64,
) -> Result<f64> {
    v.check_dimension(dimension)?;
    if !(step > 0.0) || !(cap >= step) {
        return Err(Error::invalid("box search needs 0 < step <= cap"));
    }
    let threshold = level + margin;
    let mut k = 1usize;
    loop {
        let half = k as f64 * step;
        if half > cap * (1.0 + 1e-12) {
            return Err(Error::Unconfined {
                cap,
                level: threshold,
            });
        }
        if boundary_min(v, dimension, half) >= threshold {
            return Ok(half);
        }
        k += 1;
    }
}

fn boundary_min(v: &PotentialExpr, dimension: usize, half: f64) -> f64 {
    if dimension == 1 {
        return v.eval(&[-half]).min(v.eval(&[half]));
    }
    let samples = 400;
    let mut min = f64::INFINITY;
    for s in 0..=samples {
        let t = -half + 2.0 * half * s as f64 / samples as f64;
        for p in [[t, -half], [t, half], [-half, t], [half, t]] {
            let value = v.eval(&p);
            min = min.min(if value.is_nan() { f64::NEG_INFINITY } else { value });
        }
    }
    min
}
