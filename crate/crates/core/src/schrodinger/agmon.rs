use rayon::prelude::*;

use crate::error::{Error, Result};

use super::eigen::EigenSystem;
use super::expr::PotentialExpr;

#[derive(Debug, Clone, PartialEq)]
pub struct AgmonRow {
    pub k: usize,
    pub eigenvalue: f64,
    /// ‖e^{f_δ/ħ} v_k‖ in the weighted grid norm.
    pub weighted_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgmonReport {
    pub mu: f64,
    pub delta: f64,
    /// 1 + 2μ/δ.
    pub bound: f64,
    pub rows: Vec<AgmonRow>,
}

impl AgmonReport {
    pub fn max_norm(&self) -> f64 {
        self.rows.iter().map(|r| r.weighted_norm).fold(0.0, f64::max)
    }

    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.weighted_norm <= self.bound)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# mu={}\n# delta={}\n# bound={}\nk,lambda,norm,bound\n", self.mu, self.delta, self.bound);
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.k, r.eigenvalue, r.weighted_norm, self.bound));
        }
        out
    }
}

/// Weighted norms of e^{f_δ/ħ} v_k for every eigenfunction with λ_k ≤ μ, where
/// f_δ(x) = δ · dist(x, {V ≤ μ + δ}) and the distance is taken to the nearest
/// grid node of that set.
pub fn agmon_check(eigs: &EigenSystem, v: &PotentialExpr, mu: f64, delta: f64) -> Result<AgmonReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1]"));
    }
    if mu + delta > eigs.mu_cap() + 1e-12 {
        return Err(Error::invalid(format!(
            "mu + delta = {} exceeds the eigensolver cap {}",
            mu + delta,
            eigs.mu_cap()
        )));
    }
    let grid = eigs.grid();
    v.check_dimension(grid.dimension())?;
    let points = grid.points();
    let droplet: Vec<&Vec<f64>> = points.iter().filter(|p| v.eval(p) <= mu + delta).collect();
    if droplet.is_empty() {
        return Err(Error::invalid("the set {V <= mu + delta} contains no grid node"));
    }
    let weight: Vec<f64> = points
        .par_iter()
        .map(|p| {
            let d2 = droplet
                .iter()
                .map(|q| p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            (2.0 * delta * d2.sqrt() / eigs.hbar()).exp()
        })
        .collect();
    let w = grid.weight();
    let rows = (0..eigs.count_below(mu))
        .map(|k| {
            let norm2: f64 = eigs
                .vector(k)
                .iter()
                .zip(&weight)
                .map(|(x, e)| x * x * e)
                .sum::<f64>()
                * w;
            AgmonRow {
                k,
                eigenvalue: eigs.eigenvalues()[k],
                weighted_norm: norm2.sqrt(),
            }
        })
        .collect();
    Ok(AgmonReport {
        mu,
        delta,
        bound: 1.0 + 2.0 * mu / delta,
        rows,
    })
}
