//! Eigenpairs of the discretized Hamiltonian below an energy cap.
//!
//! One-dimensional operators are tridiagonal and are handled by Sturm-sequence
//! bisection followed by inverse iteration. Two-dimensional operators use
//! Chebyshev-filtered block subspace iteration, which resolves the clustered
//! and degenerate levels typical of separable potentials.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::grid::Grid;
use super::hamiltonian::Hamiltonian;

/// Sorted eigenvalues `<= mu_cap` and grid samples of the eigenfunctions,
/// normalized so that `Σ_i v_k(x_i)² h^n = 1`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    hbar: f64,
    mu_cap: f64,
    grid: Grid,
    eigenvalues: Vec<f64>,
    /// Row `k` (length `grid.len()`) holds `v_k`.
    vectors: Vec<f64>,
}

impl EigenSystem {
    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mu_cap(&self) -> f64 {
        self.mu_cap
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        let g = self.grid.len();
        &self.vectors[k * g..(k + 1) * g]
    }

    /// Number of eigenvalues `<= mu`.
    pub fn count_below(&self, mu: f64) -> usize {
        self.eigenvalues.partition_point(|&l| l <= mu)
    }

    /// max |⟨v_j, v_k⟩ - δ_jk| in the weighted inner product.
    pub fn orthogonality_residual(&self) -> f64 {
        let w = self.grid.weight();
        let n = self.len();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..=j {
                let dot: f64 = self
                    .vector(j)
                    .iter()
                    .zip(self.vector(k))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    * w;
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// CSV rows `k,lambda_k`.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# hbar={}\n# mu_cap={}\n# points_per_axis={}\n# half_width={}\nk,lambda\n",
            self.hbar,
            self.mu_cap,
            self.grid.points_per_axis(),
            self.grid.half_width()
        );
        for (k, l) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{k},{l}\n"));
        }
        out
    }

    /// Assembles an eigensystem from Euclidean-orthonormal vectors.
    fn from_unit_vectors(
        h: &Hamiltonian,
        cap: f64,
        mut pairs: Vec<(f64, Vec<f64>)>,
    ) -> Self {
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scale = 1.0 / h.grid().weight().sqrt();
        let g = h.grid().len();
        let mut eigenvalues = Vec::with_capacity(pairs.len());
        let mut vectors = Vec::with_capacity(pairs.len() * g);
        for (lambda, mut v) in pairs {
            fix_sign(&mut v);
            eigenvalues.push(lambda);
            vectors.extend(v.iter().map(|x| x * scale));
        }
        EigenSystem {
            hbar: h.hbar(),
            mu_cap: cap,
            grid: h.grid().clone(),
            eigenvalues,
            vectors,
        }
    }
}

/// Makes the largest-magnitude component positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Controls for the two-dimensional solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Residual, relative to the Gershgorin norm, at which Ritz pairs count as
    /// converged.
    pub tolerance: f64,
    /// Cap on filter sweeps.
    pub max_iterations: usize,
    /// Degree of the Chebyshev filter applied per sweep.
    pub filter_degree: usize,
    /// Below this many unknowns a dense solver is used.
    pub dense_cutoff: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            max_iterations: 2000,
            filter_degree: 12,
            dense_cutoff: 400,
        }
    }
}

pub fn eigensolve(h: &Hamiltonian, cap: f64) -> Result<EigenSystem> {
    eigensolve_with(h, cap, &EigenOptions::default())
}

pub fn eigensolve_with(h: &Hamiltonian, cap: f64, opts: &EigenOptions) -> Result<EigenSystem> {
    if !cap.is_finite() {
        return Err(Error::invalid("energy cap must be finite"));
    }
    let pairs = if h.grid().dimension() == 1 {
        tridiagonal_eigenpairs(h.diagonal(), h.coupling(), cap)?
    } else if h.dim() <= opts.dense_cutoff {
        dense_eigenpairs(h, cap)
    } else {
        subspace_eigenpairs(h, cap, opts)?
    };
    Ok(EigenSystem::from_unit_vectors(h, cap, pairs))
}

fn dense_eigenpairs(h: &Hamiltonian, cap: f64) -> Vec<(f64, Vec<f64>)> {
    let rows = h.to_dense();
    let n = rows.len();
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .filter(|&k| eig.eigenvalues[k] <= cap)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).iter().copied().collect()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below `x`.
fn sturm_count(diag: &[f64], off: f64, x: f64, pivmin: f64) -> usize {
    let off2 = off * off;
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for &d in &diag[1..] {
        q = d - x - off2 / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_eigenpairs(diag: &[f64], off: f64, cap: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = diag.len();
    let reach = 2.0 * off.abs();
    let lo = diag.iter().copied().fold(f64::INFINITY, f64::min) - reach;
    let hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + reach;
    let norm = lo.abs().max(hi.abs());
    let pivmin = f64::MIN_POSITIVE.max(1e-300) * (1.0 + off * off);
    let count = sturm_count(diag, off, cap, pivmin).min(n);
    if count == 0 {
        return Ok(Vec::new());
    }
    let tol = 4.0 * f64::EPSILON * norm;
    let values: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|k| {
            // k-th smallest eigenvalue: count(x) <= k below, > k above.
            let (mut a, mut b) = (lo, hi.min(cap.max(lo) + norm * 1e-12 + tol));
            if sturm_count(diag, off, b, pivmin) <= k {
                b = hi;
            }
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if b - a <= tol || mid <= a || mid >= b {
                    break;
                }
                if sturm_count(diag, off, mid, pivmin) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect();

    // Group near-degenerate eigenvalues; vectors inside a group are
    // orthogonalized against each other.
    let cluster_gap = 1e-8 * norm;
    let mut groups: Vec<std::ops::Range<usize>> = Vec::new();
    let mut start = 0;
    for k in 1..=count {
        if k == count || values[k] - values[k - 1] > cluster_gap {
            groups.push(start..k);
            start = k;
        }
    }
    let vectors: Vec<Vec<(f64, Vec<f64>)>> = groups
        .into_par_iter()
        .map(|range| {
            let mut found: Vec<(f64, Vec<f64>)> = Vec::with_capacity(range.len());
            for (slot, k) in range.enumerate() {
                let mut lambda = values[k];
                if slot > 0 {
                    // Separate shifts inside a cluster.
                    lambda += slot as f64 * 4.0 * f64::EPSILON * norm;
                }
                let v = inverse_iteration(diag, off, lambda, norm, k, &found)?;
                found.push((values[k], v));
            }
            Ok(found)
        })
        .collect::<Result<_>>()?;
    Ok(vectors.into_iter().flatten().collect())
}

/// Inverse iteration with a partially pivoted tridiagonal LU.
fn inverse_iteration(
    diag: &[f64],
    off: f64,
    lambda: f64,
    norm: f64,
    seed: usize,
    previous: &[(f64, Vec<f64>)],
) -> Result<Vec<f64>> {
    let n = diag.len();
    let lu = TridiagonalLu::factor(diag, off, lambda, norm);
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0000 + seed as u64);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..8 {
        for (_, p) in previous {
            project_out(&mut x, p);
        }
        normalize(&mut x);
        let mut y = x.clone();
        lu.solve(&mut y);
        for (_, p) in previous {
            project_out(&mut y, p);
        }
        let growth = normalize(&mut y);
        x = y;
        // ‖(T - λ)x‖ ≤ 1/growth for the normalized iterate.
        residual = 1.0 / growth;
        if residual <= 1e-13 * norm.max(1.0) {
            break;
        }
    }
    for (_, p) in previous {
        project_out(&mut x, p);
    }
    normalize(&mut x);
    let resid = tridiagonal_residual(diag, off, lambda, &x);
    if !resid.is_finite() || resid > 1e-8 * norm.max(1.0) {
        return Err(Error::NonConvergence {
            iterations: 8,
            residual: resid.max(residual),
        });
    }
    Ok(x)
}

fn tridiagonal_residual(diag: &[f64], off: f64, lambda: f64, x: &[f64]) -> f64 {
    let n = diag.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut r = (diag[i] - lambda) * x[i];
        if i > 0 {
            r += off * x[i - 1];
        }
        if i + 1 < n {
            r += off * x[i + 1];
        }
        s += r * r;
    }
    s.sqrt()
}

struct TridiagonalLu {
    // Row i of U: u0[i] on the diagonal, u1[i], u2[i] to the right.
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: f64, lambda: f64, norm: f64) -> Self {
        let n = diag.len();
        let tiny = f64::EPSILON * norm.max(f64::MIN_POSITIVE);
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swapped = vec![false; n];
        // Current row being eliminated: (a, b, c) at columns (i, i+1, i+2).
        let mut a = diag[0] - lambda;
        let mut b = if n > 1 { off } else { 0.0 };
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a.abs() < tiny { tiny } else { a };
                break;
            }
            // Next row: (off, diag[i+1] - λ, off) at columns (i, i+1, i+2).
            let na = off;
            let nb = diag[i + 1] - lambda;
            let nc = if i + 2 < n { off } else { 0.0 };
            if na.abs() > a.abs() {
                swapped[i] = true;
                u0[i] = na;
                u1[i] = nb;
                u2[i] = nc;
                let m = a / na;
                l[i] = m;
                a = b - m * nb;
                b = -m * nc;
            } else {
                let piv = if a.abs() < tiny { tiny } else { a };
                u0[i] = piv;
                u1[i] = b;
                u2[i] = 0.0;
                let m = na / piv;
                l[i] = m;
                a = nb - m * b;
                b = nc;
            }
        }
        Self {
            u0,
            u1,
            u2,
            l,
            swapped,
        }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = x.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.l[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

fn project_out(x: &mut [f64], p: &[f64]) {
    let c = dot(x, p);
    x.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
}

/// Orthonormalizes the block in place (modified Gram-Schmidt, two passes).
/// Columns that collapse are replaced by fresh random directions.
fn orthonormalize_block(block: &mut [Vec<f64>], rng: &mut ChaCha20Rng) {
    for j in 0..block.len() {
        for attempt in 0..3 {
            for _ in 0..2 {
                let (done, rest) = block.split_at_mut(j);
                let col = &mut rest[0];
                for b in done.iter() {
                    project_out(col, b);
                }
            }
            if normalize(&mut block[j]) > 1e-8 || attempt == 2 {
                break;
            }
            block[j] = random_vector(block[j].len(), rng);
        }
    }
}

fn random_vector(n: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}

fn apply_block(h: &Hamiltonian, block: &[Vec<f64>]) -> Vec<Vec<f64>> {
    block
        .par_iter()
        .map(|x| {
            let mut y = vec![0.0; x.len()];
            h.apply(x, &mut y);
            y
        })
        .collect()
}

/// Rayleigh-Ritz on an orthonormal block: rotates `block` and `images` onto
/// Ritz vectors (ascending) and returns Ritz values with residual norms.
fn rayleigh_ritz(block: &mut Vec<Vec<f64>>, images: &mut Vec<Vec<f64>>) -> Vec<(f64, f64)> {
    let p = block.len();
    let t = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&block[i], &images[j]) + dot(&block[j], &images[i])));
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let combine = |vs: &[Vec<f64>], col: usize| -> Vec<f64> {
        let mut out = vec![0.0; vs[0].len()];
        for (j, v) in vs.iter().enumerate() {
            let c = eig.eigenvectors[(j, col)];
            out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
        }
        out
    };
    let new_block: Vec<Vec<f64>> = order.par_iter().map(|&c| combine(block, c)).collect();
    let new_images: Vec<Vec<f64>> = order.par_iter().map(|&c| combine(images, c)).collect();
    let out = order
        .iter()
        .zip(new_block.iter().zip(&new_images))
        .map(|(&c, (y, ay))| {
            let theta = eig.eigenvalues[c];
            let r = ay.iter().zip(y).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
            (theta, r)
        })
        .collect();
    *block = new_block;
    *images = new_images;
    out
}

/// Chebyshev-filtered subspace iteration for all eigenpairs below `cap`.
///
/// The block grows until it holds a guard band of Ritz values above the cap.
/// Each sweep applies a scaled Chebyshev polynomial that damps the interval
/// between the largest Ritz value and the Gershgorin upper bound.
fn subspace_eigenpairs(h: &Hamiltonian, cap: f64, opts: &EigenOptions) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = h.dim();
    let (lo, hi) = h.spectral_bounds();
    let anorm = lo.abs().max(hi.abs());
    let tol = opts.tolerance * anorm;
    let mut rng = ChaCha20Rng::seed_from_u64(0x01a9_c205);
    let mut p = 16.min(n);
    let mut block: Vec<Vec<f64>> = (0..p).map(|_| random_vector(n, &mut rng)).collect();
    orthonormalize_block(&mut block, &mut rng);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let mut images = apply_block(h, &block);
        let ritz = rayleigh_ritz(&mut block, &mut images);
        let below = ritz.iter().filter(|r| r.0 <= cap).count();
        let guard = (below / 5).max(4);
        if below + guard > p && p < n {
            // Grow the block with random directions and start over the sweep.
            let extra = (below + 2 * guard).min(n) - p.min(below + 2 * guard);
            let extra = extra.max(1).min(n - p);
            for _ in 0..extra {
                block.push(random_vector(n, &mut rng));
            }
            p = block.len();
            orthonormalize_block(&mut block, &mut rng);
            continue;
        }
        // Converged when every wanted pair and the first guard pair are.
        let checked = (below + 1).min(p);
        worst = ritz[..checked].iter().map(|r| r.1).fold(0.0, f64::max);
        if worst <= tol {
            return Ok(ritz
                .iter()
                .zip(block)
                .take(below)
                .map(|(r, v)| (r.0, v))
                .collect());
        }
        let cut = ritz[p - 1].0;
        if !(cut < hi) {
            return Err(Error::NonConvergence {
                iterations: 0,
                residual: worst,
            });
        }
        block = chebyshev_filter(h, block, images, opts.filter_degree, ritz[0].0.min(lo), cut, hi);
        orthonormalize_block(&mut block, &mut rng);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: worst,
    })
}

/// Scaled Chebyshev filter damping [cut, hi], normalized at `low`.
fn chebyshev_filter(
    h: &Hamiltonian,
    x: Vec<Vec<f64>>,
    ax: Vec<Vec<f64>>,
    degree: usize,
    low: f64,
    cut: f64,
    hi: f64,
) -> Vec<Vec<f64>> {
    let e = 0.5 * (hi - cut);
    let c = 0.5 * (hi + cut);
    let sigma1 = e / (low - c);
    let mut sigma = sigma1;
    let mut prev = x;
    let mut cur: Vec<Vec<f64>> = prev
        .iter()
        .zip(&ax)
        .map(|(v, av)| av.iter().zip(v).map(|(a, b)| (a - c * b) * sigma1 / e).collect())
        .collect();
    for _ in 1..degree {
        let sigma2 = 1.0 / (2.0 / sigma1 - sigma);
        let acur = apply_block(h, &cur);
        let next: Vec<Vec<f64>> = cur
            .par_iter()
            .zip(acur.par_iter().zip(prev.par_iter()))
            .map(|(y, (ay, x))| {
                ay.iter()
                    .zip(y)
                    .zip(x)
                    .map(|((a, b), old)| 2.0 * sigma2 / e * (a - c * b) - sigma * sigma2 * old)
                    .collect()
            })
            .collect();
        prev = cur;
        cur = next;
        sigma = sigma2;
    }
    cur
}
