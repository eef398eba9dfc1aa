//! Numerical experiments on free-fermion processes: Weyl counting, kernel
//! convergence, laws of large numbers, tails, variances and CLTs.

mod monte_carlo;
mod semiclassical;
mod stats;
mod testfn;
mod variance;

use std::time::Duration;

pub use monte_carlo::{clt_monte_carlo, gaussian_tail_check, lln_wasserstein, DensityCdf};
pub use semiclassical::{bulk_convergence, edge_convergence, weyl_check, ProbeWindow};
pub use stats::{ks_normal, skewness, KsResult};
pub use testfn::{Spectrum, TestFunction, TestKind};
pub use variance::{
    ball_difference_volume, free_variance_bruteforce, free_variance_exact, mesoscopic_variance_scan, sigma_fourier,
    sigma_slobodeckij, sigma_sq,
};

use crate::error::{Error, Result};
use crate::schrodinger::{assemble_hamiltonian, choose_box, eigensolve_with, EigenOptions, EigenSystem, Grid, PotentialExpr};

/// Discretization used whenever an experiment solves for eigenfunctions.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Grid spacing in units of ħ.
    pub resolution: f64,
    /// The box is the smallest one with V ≥ μ + margin on its boundary.
    pub margin: f64,
    /// Lattice step of the box search.
    pub box_step: f64,
    /// Largest admissible box half-width.
    pub box_cap: f64,
    pub eigen: EigenOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            resolution: 0.1,
            margin: 1.0,
            box_step: 0.05,
            box_cap: 100.0,
            eigen: EigenOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) || !(self.margin >= 0.0) || !(self.box_step > 0.0) || !(self.box_cap > 0.0) {
            return Err(Error::invalid(
                "solver settings need resolution > 0, margin >= 0, box step > 0 and box cap > 0",
            ));
        }
        Ok(())
    }

    /// Grid for (V, μ, ħ) in dimension n: spacing `resolution · ħ`, origin on a node.
    pub fn grid(&self, v: &PotentialExpr, mu: f64, hbar: f64, n: usize) -> Result<Grid> {
        self.validate()?;
        if !(hbar > 0.0) {
            return Err(Error::invalid("hbar must be positive"));
        }
        let half = choose_box(v, mu, self.margin, n, self.box_step, self.box_cap)?;
        let h = self.resolution * hbar;
        Grid::centered(n, (half / h).ceil() as usize, h)
    }

    /// Eigenpairs of -ħ²Δ + V below `cap` on the grid for level μ.
    pub fn solve(&self, v: &PotentialExpr, mu: f64, hbar: f64, n: usize, cap: f64) -> Result<EigenSystem> {
        let grid = self.grid(v, mu, hbar, n)?;
        let h = assemble_hamiltonian(v, hbar, &grid)?;
        eigensolve_with(&h, cap, &self.eigen)
    }
}

/// Table of results with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    /// Header parameters, in insertion order.
    pub params: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Scalar outcomes, in insertion order.
    pub summary: Vec<(String, f64)>,
    /// Measured, never serialized.
    pub wall_time: Duration,
}

impl ExperimentReport {
    pub fn new(experiment: &str, columns: &[&str]) -> Self {
        Self {
            experiment: experiment.to_string(),
            params: Vec::new(),
            seed: None,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
            wall_time: Duration::ZERO,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn set_summary(&mut self, key: &str, value: f64) {
        self.summary.push((key.to_string(), value));
    }

    pub fn summary_value(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// `#`-prefixed header (experiment, seed, parameters, summary), then the
    /// column names and one line per row. Wall time is left out so that the
    /// output is a pure function of the inputs.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# experiment={}\n# version={}\n",
            self.experiment,
            env!("CARGO_PKG_VERSION")
        );
        if let Some(seed) = self.seed {
            out.push_str(&format!("# rng={}\n# seed={seed}\n", crate::dpp::RngState::ALGORITHM));
        }
        for (k, v) in &self.params {
            out.push_str(&format!("# {k}={v}\n"));
        }
        for (k, v) in &self.summary {
            out.push_str(&format!("# result.{k}={v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

pub(crate) fn join_list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}
