use rayon::prelude::*;

use crate::error::{Error, Result};

use super::expr::PotentialExpr;
use super::grid::Grid;

/// Finite-difference discretization of `-ħ²Δ + V` on the interior nodes of a
/// [`Grid`], Dirichlet boundary. The matrix is `diag + coupling * A` where `A`
/// is the nearest-neighbour adjacency of the interior lattice.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    grid: Grid,
    hbar: f64,
    diag: Vec<f64>,
    coupling: f64,
}

pub fn assemble_hamiltonian(v: &PotentialExpr, hbar: f64, grid: &Grid) -> Result<Hamiltonian> {
    if !(hbar > 0.0) || !hbar.is_finite() {
        return Err(Error::invalid("hbar must be positive"));
    }
    v.check_dimension(grid.dimension())?;
    let h = grid.spacing();
    let kinetic = hbar * hbar / (h * h);
    let n = grid.dimension() as f64;
    let potential = grid.sample(|x| v.eval(x));
    if let Some(bad) = potential.iter().position(|p| !p.is_finite()) {
        return Err(Error::Numerical(format!(
            "potential is not finite at {:?}",
            grid.point(bad)
        )));
    }
    let diag = potential.into_iter().map(|p| 2.0 * n * kinetic + p).collect();
    Ok(Hamiltonian {
        grid: grid.clone(),
        hbar,
        diag,
        coupling: -kinetic,
    })
}

impl Hamiltonian {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// The constant off-diagonal entry `-ħ²/h²`.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// y = H x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.grid.interior_per_axis();
        let c = self.coupling;
        match self.grid.dimension() {
            1 => {
                for i in 0..m {
                    let mut acc = self.diag[i] * x[i];
                    if i > 0 {
                        acc += c * x[i - 1];
                    }
                    if i + 1 < m {
                        acc += c * x[i + 1];
                    }
                    y[i] = acc;
                }
            }
            _ => {
                y.par_chunks_mut(m).enumerate().for_each(|(row, out)| {
                    let base = row * m;
                    for i in 0..m {
                        let k = base + i;
                        let mut acc = self.diag[k] * x[k];
                        if i > 0 {
                            acc += c * x[k - 1];
                        }
                        if i + 1 < m {
                            acc += c * x[k + 1];
                        }
                        if row > 0 {
                            acc += c * x[k - m];
                        }
                        if row + 1 < m {
                            acc += c * x[k + m];
                        }
                        out[i] = acc;
                    }
                });
            }
        }
    }

    /// Gershgorin bounds on the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let reach = 2.0 * self.grid.dimension() as f64 * self.coupling.abs();
        let lo = self.diag.iter().copied().fold(f64::INFINITY, f64::min) - reach;
        let hi = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + reach;
        (lo, hi)
    }

    /// Dense copy, row-major. Intended for small grids and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        let mut out = vec![vec![0.0; n]; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                out[i][j] = col[i];
            }
            e[j] = 0.0;
        }
        out
    }
}
