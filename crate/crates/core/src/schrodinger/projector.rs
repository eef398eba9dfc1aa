use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{KernelEvaluation, KernelKind};

use super::eigen::EigenSystem;

/// Eigenvalues closer than this to the Fermi level trigger the nudge.
const DEGENERACY_GAP: f64 = 1e-9;

/// Kernel of the spectral projector `1_{(-∞, μ]}(H)` on the grid.
#[derive(Debug, Clone)]
pub struct ProjectorKernel {
    eigs: EigenSystem,
    mu: f64,
    effective_mu: f64,
    rank: usize,
}

pub fn projector_kernel(eigs: EigenSystem, mu: f64) -> Result<ProjectorKernel> {
    let (effective_mu, rank) = fermi_level(&eigs, mu)?;
    Ok(ProjectorKernel {
        eigs,
        mu,
        effective_mu,
        rank,
    })
}

/// Fermi level after the degeneracy nudge, and the number of occupied states.
pub fn fermi_level(eigs: &EigenSystem, mu: f64) -> Result<(f64, usize)> {
    if !(mu <= eigs.mu_cap()) {
        return Err(Error::invalid(format!(
            "Fermi level {mu} exceeds the eigensolver cap {}",
            eigs.mu_cap()
        )));
    }
    let values = eigs.eigenvalues();
    let mut effective_mu = mu;
    if let Some(k) = values.iter().rposition(|&l| (l - mu).abs() <= DEGENERACY_GAP) {
        // Move to the middle of the gap above the offending eigenvalue.
        let upper = values.get(k + 1).copied().unwrap_or(eigs.mu_cap());
        effective_mu = (0.5 * (values[k] + upper.max(values[k]))).min(eigs.mu_cap());
    }
    Ok((effective_mu, eigs.count_below(effective_mu)))
}

impl ProjectorKernel {
    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eigs
    }

    /// The requested Fermi level.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// The Fermi level actually used after the degeneracy nudge.
    pub fn effective_mu(&self) -> f64 {
        self.effective_mu
    }

    /// N = rank Π = #{λ_k ≤ μ}.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Π(x_i, x_j) for interior node indices.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        (0..self.rank)
            .map(|k| {
                let v = self.eigs.vector(k);
                v[i] * v[j]
            })
            .sum()
    }

    /// Dense `G × G` kernel matrix of point values.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let g = self.eigs.grid().len();
        (0..g)
            .into_par_iter()
            .map(|i| (0..g).map(|j| self.entry(i, j)).collect())
            .collect()
    }

    /// The occupied eigenvectors scaled by √weight, row k = √w · v_k. These
    /// rows are Euclidean-orthonormal.
    pub fn features(&self) -> Vec<Vec<f64>> {
        let s = self.eigs.grid().weight().sqrt();
        (0..self.rank)
            .map(|k| self.eigs.vector(k).iter().map(|x| x * s).collect())
            .collect()
    }

    /// Occupied eigenvectors interpolated at `x`.
    pub fn orbitals_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let stencil = self.eigs.grid().stencil(x)?;
        Ok((0..self.rank)
            .map(|k| {
                let v = self.eigs.vector(k);
                stencil.iter().map(|&(i, w)| w * v[i]).sum()
            })
            .collect())
    }

    /// Π at arbitrary box points, by bilinear interpolation.
    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let a = self.orbitals_at(x)?;
        let b = self.orbitals_at(y)?;
        Ok(a.iter().zip(&b).map(|(p, q)| p * q).sum())
    }

    /// Σ_i Π(x_i, x_i) h^n.
    pub fn trace(&self) -> f64 {
        let w = self.eigs.grid().weight();
        (0..self.eigs.grid().len()).map(|i| self.entry(i, i)).sum::<f64>() * w
    }
}

/// ε^n Π(x0 + ε Uᵀx, x0 + ε Uᵀy) on the probe lists.
pub fn rescaled_kernel(
    pk: &ProjectorKernel,
    x0: &[f64],
    eps: f64,
    u: &[Vec<f64>],
    x_list: &[Vec<f64>],
    y_list: &[Vec<f64>],
) -> Result<KernelEvaluation> {
    let n = pk.eigs.grid().dimension();
    if x0.len() != n || u.len() != n || u.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("rescaling data does not match the grid dimension"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("zoom scale must be positive"));
    }
    let map = |z: &[f64]| -> Result<Vec<f64>> {
        if z.len() != n {
            return Err(Error::invalid("probe dimension does not match the grid"));
        }
        Ok((0..n)
            .map(|i| x0[i] + eps * (0..n).map(|j| u[j][i] * z[j]).sum::<f64>())
            .collect())
    };
    let orbitals = |list: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        list.par_iter()
            .map(|z| pk.orbitals_at(&map(z)?))
            .collect()
    };
    let ox = orbitals(x_list)?;
    let oy = if x_list == y_list { ox.clone() } else { orbitals(y_list)? };
    let scale = eps.powi(n as i32);
    let values = ox
        .par_iter()
        .map(|a| {
            oy.iter()
                .map(|b| scale * a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>())
                .collect()
        })
        .collect();
    let mut params = BTreeMap::new();
    params.insert("hbar".to_string(), pk.eigs.hbar());
    params.insert("mu".to_string(), pk.effective_mu);
    params.insert("eps".to_string(), eps);
    for (i, c) in x0.iter().enumerate() {
        params.insert(format!("x0_{}", i + 1), *c);
    }
    Ok(KernelEvaluation {
        kind: KernelKind::Projector,
        dimension: n,
        params,
        x_points: x_list.to_vec(),
        y_points: y_list.to_vec(),
        values,
    })
}

/// Rotation U with U ∇V/|∇V| = e₁: a Householder reflection followed by a
/// reflection of the last coordinate, so that det U = +1 when n ≥ 2.
pub fn edge_rotation(grad: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = grad.len();
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if n == 0 || !(norm > 0.0) {
        return Err(Error::invalid("edge rotation needs a non-zero gradient"));
    }
    if n == 1 {
        return Ok(vec![vec![grad[0].signum()]]);
    }
    let g: Vec<f64> = grad.iter().map(|x| x / norm).collect();
    let mut u = g.clone();
    u[0] -= 1.0;
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    if uu < 1e-30 {
        return Ok(h);
    }
    for i in 0..n {
        for j in 0..n {
            h[i][j] -= 2.0 * u[i] * u[j] / uu;
        }
    }
    for j in 0..n {
        h[n - 1][j] = -h[n - 1][j];
    }
    Ok(h)
}
