//! Finite determinantal point processes on grid nodes.
//!
//! A process is described by an orthonormal family φ_k ∈ ℝ^G (Euclidean
//! inner product over the G nodes) and intensities q_k ∈ [0, 1]; the
//! correlation operator is A = Σ_k q_k φ_k φ_kᵀ. With grid weight w the point
//! kernel is K(x_i, x_j) = A_ij / w. Linear statistics are Ξ(f) = Σ_{x ∈ Ξ} f(x)
//! for f sampled at the nodes.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::KernelEvaluation;
use crate::schrodinger::eigen::EigenSystem;
use crate::schrodinger::projector::fermi_level;

/// Eigenvalues of a kernel this far outside [0, 1] are clipped.
const CLIP_TOLERANCE: f64 = 1e-8;
/// Eigenvalues further outside [0, 1] are rejected.
const REJECT_TOLERANCE: f64 = 1e-6;

/// Seed and stream of a ChaCha20 generator. Trial `t` of a Monte-Carlo loop
/// uses stream `t`, so results do not depend on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
}

impl RngState {
    pub const ALGORITHM: &'static str = "chacha20";

    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    pub fn header(&self) -> String {
        format!("# rng={}\n# seed={}\n", Self::ALGORITHM, self.seed)
    }
}

/// One sample: node indices (ascending) and their coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    pub nodes: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub rng: RngState,
}

impl PointConfiguration {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Ξ(f) for f sampled at the nodes.
    pub fn linear_statistic(&self, f: &[f64]) -> f64 {
        self.nodes.iter().map(|&i| f[i]).sum()
    }
}

/// CSV with one row per point: `sample_id,x1[,x2]`.
pub fn configurations_to_csv(samples: &[PointConfiguration], dimension: usize) -> String {
    let coords = (1..=dimension).map(|d| format!("x{d}")).collect::<Vec<_>>().join(",");
    let mut out = format!("sample_id,{coords}\n");
    for (id, s) in samples.iter().enumerate() {
        for p in &s.points {
            let row = p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
            out.push_str(&format!("{id},{row}\n"));
        }
    }
    out
}

/// Shared interface of projection and general processes.
pub trait Determinantal: Sync {
    /// Node coordinates.
    fn points(&self) -> &[Vec<f64>];
    /// Quadrature weight of a node.
    fn weight(&self) -> f64;
    /// Spectral data: orthonormal φ_k (each of length G) and q_k.
    fn spectrum(&self) -> (&[Vec<f64>], &[f64]);
    /// Draws the spectral components that make up one sample.
    fn select_components(&self, rng: &mut ChaCha20Rng) -> Vec<usize>;

    fn ground_size(&self) -> usize {
        self.points().len()
    }

    /// A = Σ q_k φ_k φ_kᵀ as a dense G × G matrix.
    fn operator(&self) -> DMatrix<f64> {
        let (phi, q) = self.spectrum();
        let g = self.ground_size();
        let mut a = DMatrix::zeros(g, g);
        for (v, &qk) in phi.iter().zip(q) {
            let col = nalgebra::DVector::from_column_slice(v);
            a.ger(qk, &col, &col, 1.0);
        }
        a
    }

    /// Diagonal of A.
    fn operator_diagonal(&self) -> Vec<f64> {
        let (phi, q) = self.spectrum();
        let mut d = vec![0.0; self.ground_size()];
        for (v, &qk) in phi.iter().zip(q) {
            d.iter_mut().zip(v).for_each(|(a, x)| *a += qk * x * x);
        }
        d
    }

    /// Point kernel K(x_i, x_j) = A_ij / w.
    fn kernel_entry(&self, i: usize, j: usize) -> f64 {
        let (phi, q) = self.spectrum();
        phi.iter().zip(q).map(|(v, &qk)| qk * v[i] * v[j]).sum::<f64>() / self.weight()
    }

    fn expected_count(&self) -> f64 {
        self.spectrum().1.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionDPP {
    features: Vec<Vec<f64>>,
    ones: Vec<f64>,
    points: Vec<Vec<f64>>,
    weight: f64,
}

impl ProjectionDPP {
    /// The process of the occupied states λ_k ≤ μ (after the degeneracy nudge).
    pub fn from_eigensystem(eigs: &EigenSystem, mu: f64) -> Result<Self> {
        let (_, rank) = fermi_level(eigs, mu)?;
        let grid = eigs.grid();
        let s = grid.weight().sqrt();
        let features = (0..rank)
            .map(|k| eigs.vector(k).iter().map(|x| x * s).collect())
            .collect();
        Self::from_features(features, grid.points(), grid.weight())
    }

    /// Rows must be Euclidean-orthonormal to 1e-8.
    pub fn from_features(features: Vec<Vec<f64>>, points: Vec<Vec<f64>>, weight: f64) -> Result<Self> {
        let g = points.len();
        if features.iter().any(|f| f.len() != g) {
            return Err(Error::invalid("feature rows must have one entry per node"));
        }
        if !(weight > 0.0) {
            return Err(Error::invalid("node weight must be positive"));
        }
        let residual = orthonormality_residual(&features);
        if residual > 1e-8 {
            return Err(Error::NotADppKernel { eigenvalue: 1.0 + residual });
        }
        Ok(Self {
            ones: vec![1.0; features.len()],
            features,
            points,
            weight,
        })
    }

    pub fn rank(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    /// max |⟨φ_j, φ_k⟩ - δ_jk|.
    pub fn orthonormality_residual(&self) -> f64 {
        orthonormality_residual(&self.features)
    }
}

fn orthonormality_residual(features: &[Vec<f64>]) -> f64 {
    let n = features.len();
    (0..n)
        .into_par_iter()
        .map(|j| {
            (0..=j)
                .map(|k| {
                    let d: f64 = features[j].iter().zip(&features[k]).map(|(a, b)| a * b).sum();
                    (d - if j == k { 1.0 } else { 0.0 }).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

impl Determinantal for ProjectionDPP {
    fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn weight(&self) -> f64 {
        self.weight
    }

    fn spectrum(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.features, &self.ones)
    }

    fn select_components(&self, _rng: &mut ChaCha20Rng) -> Vec<usize> {
        (0..self.features.len()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct GeneralDPP {
    vectors: Vec<Vec<f64>>,
    q: Vec<f64>,
    points: Vec<Vec<f64>>,
    weight: f64,
}

impl GeneralDPP {
    /// Builds the process with operator A_ij = K(x_i, x_j) · cell_volume from a
    /// square kernel table. Eigenvalues within 1e-8 of [0, 1] are clipped;
    /// beyond 1e-6 the kernel is rejected.
    pub fn from_kernel(eval: &KernelEvaluation, cell_volume: f64) -> Result<Self> {
        if eval.x_points != eval.y_points {
            return Err(Error::invalid("a DPP kernel must be tabulated on a square point set"));
        }
        if !(cell_volume > 0.0) {
            return Err(Error::invalid("cell volume must be positive"));
        }
        let g = eval.x_points.len();
        let scale = eval.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        if eval.asymmetry().unwrap_or(0.0) > 1e-10 * scale {
            return Err(Error::invalid("kernel table is not symmetric"));
        }
        let a = DMatrix::from_fn(g, g, |i, j| 0.5 * (eval.values[i][j] + eval.values[j][i]) * cell_volume);
        let eig = SymmetricEigen::new(a);
        let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
        for k in 0..g {
            let lambda = eig.eigenvalues[k];
            if !(-REJECT_TOLERANCE..=1.0 + REJECT_TOLERANCE).contains(&lambda) {
                return Err(Error::NotADppKernel { eigenvalue: lambda });
            }
            let q = if (-CLIP_TOLERANCE..0.0).contains(&lambda) {
                0.0
            } else if lambda > 1.0 && lambda <= 1.0 + CLIP_TOLERANCE {
                1.0
            } else {
                lambda.clamp(0.0, 1.0)
            };
            if q > 0.0 {
                pairs.push((q, eig.eigenvectors.column(k).iter().copied().collect()));
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (q, vectors) = pairs.into_iter().unzip();
        Ok(Self {
            vectors,
            q,
            points: eval.x_points.clone(),
            weight: cell_volume,
        })
    }

    /// Intensities q_k, descending.
    pub fn intensities(&self) -> &[f64] {
        &self.q
    }
}

impl Determinantal for GeneralDPP {
    fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    fn weight(&self) -> f64 {
        self.weight
    }

    fn spectrum(&self) -> (&[Vec<f64>], &[f64]) {
        (&self.vectors, &self.q)
    }

    fn select_components(&self, rng: &mut ChaCha20Rng) -> Vec<usize> {
        self.q
            .iter()
            .enumerate()
            .filter(|&(_, &q)| rng.random::<f64>() < q)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Exact sample by the chain rule for the projection onto the selected
/// components: each node is drawn with probability proportional to the squared
/// norm of its feature vector projected off the span of earlier picks.
pub fn sample<D: Determinantal + ?Sized>(dpp: &D, rng_state: RngState) -> Result<PointConfiguration> {
    let mut rng = rng_state.rng();
    let chosen = dpp.select_components(&mut rng);
    let (phi, _) = dpp.spectrum();
    let g = dpp.ground_size();
    let n = chosen.len();
    // Node-major features: column x is φ(x) ∈ ℝ^n.
    let mut columns = vec![0.0; g * n];
    for (r, &k) in chosen.iter().enumerate() {
        for (x, v) in phi[k].iter().enumerate() {
            columns[x * n + r] = *v;
        }
    }
    let mut p: Vec<f64> = columns.chunks(n.max(1)).map(|c| c.iter().map(|v| v * v).sum()).collect();
    if n == 0 {
        p.clear();
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let total: f64 = p.iter().map(|v| v.max(0.0)).sum();
        if !(total > 0.0) {
            return Err(Error::Numerical("conditional intensity vanished during sampling".into()));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = g - 1;
        for (x, &v) in p.iter().enumerate() {
            if v < -1e-10 {
                return Err(Error::NotADppKernel { eigenvalue: v });
            }
            acc += v.max(0.0);
            if acc > target {
                pick = x;
                break;
            }
        }
        // Guard against rounding at the end of the scan.
        while p[pick] <= 0.0 && pick > 0 {
            pick -= 1;
        }
        nodes.push(pick);
        let mut u: Vec<f64> = columns[pick * n..(pick + 1) * n].to_vec();
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = u.iter().zip(b).map(|(a, b)| a * b).sum();
                u.iter_mut().zip(b).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numerical("degenerate direction during sampling".into()));
        }
        u.iter_mut().for_each(|v| *v /= norm);
        p.par_iter_mut().enumerate().for_each(|(x, px)| {
            let c: f64 = columns[x * n..(x + 1) * n].iter().zip(&u).map(|(a, b)| a * b).sum();
            *px -= c * c;
        });
        p[pick] = 0.0;
        basis.push(u);
    }
    nodes.sort_unstable();
    let points = nodes.iter().map(|&i| dpp.points()[i].clone()).collect();
    Ok(PointConfiguration {
        nodes,
        points,
        rng: rng_state,
    })
}

/// Runs `trials` independent samples on streams `base.stream + t` and maps each
/// through `stat`, preserving trial order.
pub fn monte_carlo<D, T, F>(dpp: &D, base: RngState, trials: usize, stat: F) -> Result<Vec<T>>
where
    D: Determinantal + ?Sized,
    T: Send,
    F: Fn(&PointConfiguration) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|t| sample(dpp, base.with_stream(base.stream + t as u64)).map(|c| stat(&c)))
        .collect()
}

/// R_k(z_1, ..., z_k) = det[K(z_i, z_j)].
pub fn correlation<D: Determinantal + ?Sized>(dpp: &D, nodes: &[usize]) -> f64 {
    let k = nodes.len();
    if k == 0 {
        return 1.0;
    }
    let m = DMatrix::from_fn(k, k, |i, j| dpp.kernel_entry(nodes[i], nodes[j]));
    m.determinant()
}

/// ψ(f) = E[e^{-Ξ(f)}] = det(I - (1 - e^{-f}) K) for f ≥ 0 (f = +∞ allowed).
pub fn laplace_functional<D: Determinantal + ?Sized>(dpp: &D, f: &[f64]) -> Result<f64> {
    if f.len() != dpp.ground_size() {
        return Err(Error::invalid("test function must have one value per node"));
    }
    if f.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::invalid("Laplace functional needs f >= 0"));
    }
    let d: Vec<f64> = f.iter().map(|v| 1.0 - (-v).exp()).collect();
    Ok(spectral_determinant(dpp, &d).determinant())
}

/// log ψ(-f) = log E[e^{Ξ(f)}] = log det(I + (e^f - 1) K).
pub fn log_laplace_negative<D: Determinantal + ?Sized>(dpp: &D, f: &[f64]) -> Result<f64> {
    if f.len() != dpp.ground_size() {
        return Err(Error::invalid("test function must have one value per node"));
    }
    let d: Vec<f64> = f.iter().map(|v| 1.0 - v.exp()).collect();
    let m = spectral_determinant(dpp, &d);
    let lu = m.lu();
    let det = lu.determinant();
    if !(det > 0.0) {
        return Err(Error::Numerical("Fredholm determinant is not positive".into()));
    }
    Ok(det.ln())
}

/// I - Q^{1/2} Φ D Φᵀ Q^{1/2}, whose determinant equals det(I - D A).
fn spectral_determinant<D: Determinantal + ?Sized>(dpp: &D, d: &[f64]) -> DMatrix<f64> {
    let (phi, q) = dpp.spectrum();
    let k = phi.len();
    let mut m = DMatrix::identity(k, k);
    let entries: Vec<(usize, usize, f64)> = (0..k)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..=i).map(move |j| {
                let s: f64 = phi[i].iter().zip(&phi[j]).zip(d).map(|((a, b), w)| a * b * w).sum();
                (i, j, s * (q[i] * q[j]).sqrt())
            })
        })
        .collect();
    for (i, j, v) in entries {
        m[(i, j)] -= v;
        if i != j {
            m[(j, i)] -= v;
        }
    }
    m
}

/// E Ξ(f) = tr(f A).
pub fn mean_linear_stat<D: Determinantal + ?Sized>(dpp: &D, f: &[f64]) -> f64 {
    dpp.operator_diagonal().iter().zip(f).map(|(a, v)| a * v).sum()
}

/// Φ diag(f) Φᵀ with q-weights: the k × k matrix M_{ij} = √(q_i q_j) ⟨φ_i, f φ_j⟩.
fn compressed<D: Determinantal + ?Sized>(dpp: &D, f: &[f64]) -> DMatrix<f64> {
    let (phi, q) = dpp.spectrum();
    let k = phi.len();
    let mut m = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            let s: f64 = phi[i].iter().zip(&phi[j]).zip(f).map(|((a, b), w)| a * b * w).sum();
            let v = s * (q[i] * q[j]).sqrt();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// cov(Ξ(f), Ξ(g)) = tr(g (I - A) f A) = tr(f g A) - tr(g A f A).
pub fn cov_linear_stats<D: Determinantal + ?Sized>(dpp: &D, f: &[f64], g: &[f64]) -> f64 {
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    let first = mean_linear_stat(dpp, &fg);
    // tr(g A f A) = tr(M_g M_f) in the spectral basis with √q weights.
    let mf = compressed(dpp, f);
    let mg = compressed(dpp, g);
    first - mf.component_mul(&mg).sum()
}

/// var Ξ(f) by the covariance trace.
pub fn var_linear_stat<D: Determinantal + ?Sized>(dpp: &D, f: &[f64]) -> f64 {
    cov_linear_stats(dpp, f, f)
}

/// var Ξ(f) = ½ ‖[f, A]‖²_HS + ‖f √(A(I - A))‖²_HS.
pub fn var_commutator<D: Determinantal + ?Sized>(dpp: &D, f: &[f64]) -> f64 {
    let a = dpp.operator();
    let g = a.nrows();
    let comm: f64 = (0..g)
        .into_par_iter()
        .map(|i| (0..g).map(|j| ((f[i] - f[j]) * a[(i, j)]).powi(2)).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let (phi, q) = dpp.spectrum();
    let mut s = DMatrix::zeros(g, g);
    for (v, &qk) in phi.iter().zip(q) {
        let c = (qk * (1.0 - qk)).max(0.0).sqrt();
        if c > 0.0 {
            let col = nalgebra::DVector::from_column_slice(v);
            s.ger(c, &col, &col, 1.0);
        }
    }
    let residual: f64 = (0..g)
        .map(|i| f[i] * f[i] * (0..g).map(|j| s[(i, j)] * s[(i, j)]).sum::<f64>())
        .sum();
    0.5 * comm + residual
}

/// var Ξ(f) = ½ Σ_ij (f_i - f_j)² K_ij² w² + Σ_i f_i² (A - A²)_ii.
pub fn var_double_sum<D: Determinantal + ?Sized>(dpp: &D, f: &[f64]) -> f64 {
    let g = dpp.ground_size();
    let w = dpp.weight();
    let rows: Vec<Vec<f64>> = (0..g)
        .into_par_iter()
        .map(|i| (0..g).map(|j| dpp.kernel_entry(i, j)).collect())
        .collect();
    let pair: f64 = (0..g)
        .map(|i| (0..g).map(|j| ((f[i] - f[j]) * rows[i][j] * w).powi(2)).sum::<f64>())
        .sum();
    let diag: f64 = (0..g)
        .map(|i| {
            let a_ii = rows[i][i] * w;
            let a2_ii: f64 = (0..g).map(|j| (rows[i][j] * w).powi(2)).sum();
            f[i] * f[i] * (a_ii - a2_ii)
        })
        .sum();
    0.5 * pair + diag
}

/// Δ = |log ψ(-f) - E Ξ(f) - ½ var Ξ(e^f - 1)| together with the controlling
/// quantity ‖f₊‖_∞ · var Ξ(e^f - 1).
pub fn soshnikov_remainder<D: Determinantal + ?Sized>(dpp: &D, f: &[f64]) -> Result<(f64, f64)> {
    let max = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > 0.69 {
        return Err(Error::invalid(format!("Laplace expansion needs max f <= 0.69, got {max}")));
    }
    let log_psi = log_laplace_negative(dpp, f)?;
    let mean = mean_linear_stat(dpp, f);
    let g: Vec<f64> = f.iter().map(|v| v.exp_m1()).collect();
    let var = var_linear_stat(dpp, &g);
    let delta = (log_psi - mean - 0.5 * var).abs();
    Ok((delta, max.max(0.0) * var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{sine_kernel, KernelKind};
    use crate::schrodinger::{assemble_hamiltonian, eigensolve, parse_potential, Grid};
    use std::collections::BTreeMap;

    fn harmonic_dpp(hbar: f64, points: usize) -> ProjectionDPP {
        let v = parse_potential("x1^2").unwrap();
        let grid = Grid::new(1, 2.5, points).unwrap();
        let eigs = eigensolve(&assemble_hamiltonian(&v, hbar, &grid).unwrap(), 1.2).unwrap();
        ProjectionDPP::from_eigensystem(&eigs, 1.0).unwrap()
    }

    fn bump(dpp: &dyn Determinantal, c: f64, s: f64, amp: f64) -> Vec<f64> {
        dpp.points().iter().map(|p| amp * (-(p[0] - c).powi(2) / (2.0 * s * s)).exp()).collect()
    }

    fn sine_window(points: usize, width: f64) -> GeneralDPP {
        let h = width / points as f64;
        let pts: Vec<Vec<f64>> = (0..points).map(|i| vec![(i as f64 + 0.5) * h]).collect();
        let eval = KernelEvaluation::tabulate(KernelKind::Sine1D, 1, BTreeMap::new(), pts.clone(), pts, |x, y| {
            Ok(sine_kernel(x[0], y[0]))
        })
        .unwrap();
        GeneralDPP::from_kernel(&eval, h).unwrap()
    }

    #[test]
    fn projection_from_harmonic_spectrum() {
        let dpp = harmonic_dpp(0.05, 201);
        assert_eq!(dpp.rank(), 10);
        assert!(dpp.orthonormality_residual() < 1e-8);
        let trace: f64 = dpp.operator_diagonal().iter().sum();
        assert!((trace - 10.0).abs() < 1e-8);
    }

    #[test]
    fn samples_have_exactly_n_points() {
        let dpp = harmonic_dpp(0.05, 201);
        for t in 0..50 {
            let s = sample(&dpp, RngState::new(11).with_stream(t)).unwrap();
            assert_eq!(s.len(), 10);
            let mut uniq = s.nodes.clone();
            uniq.dedup();
            assert_eq!(uniq.len(), 10);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let dpp = harmonic_dpp(0.1, 121);
        let a = sample(&dpp, RngState::new(5).with_stream(3)).unwrap();
        let b = sample(&dpp, RngState::new(5).with_stream(3)).unwrap();
        let c = sample(&dpp, RngState::new(5).with_stream(4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.nodes, c.nodes);
    }

    #[test]
    fn rank_one_process_follows_the_intensity() {
        let g = 5;
        let v = [0.1f64, 0.3, 0.5, 0.7, 0.4];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let phi: Vec<f64> = v.iter().map(|x| x / norm).collect();
        let points: Vec<Vec<f64>> = (0..g).map(|i| vec![i as f64]).collect();
        let dpp = ProjectionDPP::from_features(vec![phi.clone()], points, 1.0).unwrap();
        let trials = 20_000;
        let hits = monte_carlo(&dpp, RngState::new(9), trials, |c| c.nodes[0]).unwrap();
        for i in 0..g {
            let p = phi[i] * phi[i];
            let freq = hits.iter().filter(|&&h| h == i).count() as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se + 1e-12, "node {i}: {freq} vs {p}");
        }
    }

    #[test]
    fn empirical_intensity_matches_kernel_diagonal() {
        let dpp = harmonic_dpp(0.1, 81);
        let trials = 10_000;
        let counts = monte_carlo(&dpp, RngState::new(21), trials, |c| c.nodes.clone()).unwrap();
        let g = dpp.ground_size();
        let mut hist = vec![0usize; g];
        for c in &counts {
            for &i in c {
                hist[i] += 1;
            }
        }
        let diag = dpp.operator_diagonal();
        // Bins of 8 nodes.
        for start in (0..g).step_by(8) {
            let end = (start + 8).min(g);
            let expected: f64 = diag[start..end].iter().sum();
            let observed = hist[start..end].iter().sum::<usize>() as f64 / trials as f64;
            // Per-sample count variance is at most its mean.
            let se = (expected.max(1e-12) / trials as f64).sqrt();
            assert!((observed - expected).abs() <= 4.0 * se + 1e-9, "bin {start}");
        }
    }

    #[test]
    fn correlation_examples() {
        let dpp = harmonic_dpp(0.1, 81);
        let (a, b) = (30, 37);
        assert!((correlation(&dpp, &[a]) - dpp.kernel_entry(a, a)).abs() < 1e-12);
        assert!(correlation(&dpp, &[a, a]).abs() < 1e-9);
        let r2 = dpp.kernel_entry(a, a) * dpp.kernel_entry(b, b) - dpp.kernel_entry(a, b).powi(2);
        assert!((correlation(&dpp, &[a, b]) - r2).abs() < 1e-9);
        // Pair correlation is symmetric.
        assert!((correlation(&dpp, &[a, b]) - correlation(&dpp, &[b, a])).abs() < 1e-12);
    }

    #[test]
    fn laplace_functional_limits() {
        let dpp = harmonic_dpp(0.1, 81);
        let g = dpp.ground_size();
        assert!((laplace_functional(&dpp, &vec![0.0; g]).unwrap() - 1.0).abs() < 1e-12);
        assert!(laplace_functional(&dpp, &vec![f64::INFINITY; g]).unwrap().abs() < 1e-10);
        assert!(laplace_functional(&dpp, &vec![-1.0; g]).is_err());
    }

    #[test]
    fn particle_number_is_deterministic() {
        let dpp = harmonic_dpp(0.05, 201);
        let ones = vec![1.0; dpp.ground_size()];
        assert!((mean_linear_stat(&dpp, &ones) - 10.0).abs() < 1e-8);
        assert!(var_linear_stat(&dpp, &ones).abs() < 1e-8);
    }

    #[test]
    fn variance_formulas_agree() {
        let dpp = harmonic_dpp(0.05, 161);
        let f = bump(&dpp, 0.2, 0.3, 1.0);
        let half: Vec<f64> = dpp.points().iter().map(|p| if p[0] < 0.0 { 1.0 } else { 0.0 }).collect();
        for h in [&f, &half] {
            let a = var_linear_stat(&dpp, h);
            let b = var_commutator(&dpp, h);
            let c = var_double_sum(&dpp, h);
            assert!(a > 0.0);
            assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10, "{a} {b} {c}");
        }
        let window = sine_window(60, 6.0);
        let f = bump(&window, 3.0, 1.0, 1.0);
        let a = var_linear_stat(&window, &f);
        let b = var_commutator(&window, &f);
        let c = var_double_sum(&window, &f);
        assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10, "{a} {b} {c}");
    }

    #[test]
    fn covariance_is_bilinear_and_symmetric() {
        let dpp = harmonic_dpp(0.1, 81);
        let f = bump(&dpp, 0.0, 0.3, 1.0);
        let g = bump(&dpp, 0.4, 0.2, 2.0);
        let fg = cov_linear_stats(&dpp, &f, &g);
        assert!((fg - cov_linear_stats(&dpp, &g, &f)).abs() < 1e-12);
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let lhs = var_linear_stat(&dpp, &sum);
        let rhs = var_linear_stat(&dpp, &f) + var_linear_stat(&dpp, &g) + 2.0 * fg;
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn windowed_sine_kernel_is_a_dpp() {
        let dpp = sine_window(80, 8.0);
        let q = dpp.intensities();
        assert!(q.iter().all(|&x| (0.0..=1.0).contains(&x)));
        // Profile: descending, mostly near 0 or 1.
        assert!(q.windows(2).all(|w| w[0] >= w[1]));
        let middle = q.iter().filter(|&&x| x > 0.05 && x < 0.95).count();
        assert!(middle <= 6, "{middle}");
        assert!((dpp.expected_count() - 8.0).abs() < 1e-6);
        let s = sample(&dpp, RngState::new(1)).unwrap();
        assert!(s.len() <= q.len());
    }

    #[test]
    fn zero_kernel_is_empty() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let eval =
            KernelEvaluation::tabulate(KernelKind::Sine1D, 1, BTreeMap::new(), pts.clone(), pts, |_, _| Ok(0.0)).unwrap();
        let dpp = GeneralDPP::from_kernel(&eval, 1.0).unwrap();
        assert!(dpp.intensities().is_empty());
        assert!(sample(&dpp, RngState::new(3)).unwrap().is_empty());
    }

    #[test]
    fn kernel_above_identity_is_rejected() {
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let eval = KernelEvaluation::tabulate(KernelKind::Sine1D, 1, BTreeMap::new(), pts.clone(), pts, |x, y| {
            Ok(if x == y { 1.5 } else { 0.0 })
        })
        .unwrap();
        assert!(matches!(
            GeneralDPP::from_kernel(&eval, 1.0),
            Err(Error::NotADppKernel { .. })
        ));
    }

    #[test]
    fn soshnikov_remainder_scales_linearly() {
        let dpp = harmonic_dpp(0.05, 161);
        let zero = vec![0.0; dpp.ground_size()];
        assert!(soshnikov_remainder(&dpp, &zero).unwrap().0.abs() < 1e-12);
        let f = bump(&dpp, 0.0, 0.3, 0.1);
        let (delta, control) = soshnikov_remainder(&dpp, &f).unwrap();
        assert!(delta <= 2.0 * control, "{delta} vs {control}");
        let half: Vec<f64> = f.iter().map(|v| 0.5 * v).collect();
        let (delta_half, _) = soshnikov_remainder(&dpp, &half).unwrap();
        let g: Vec<f64> = f.iter().map(|v| v.exp_m1()).collect();
        let gh: Vec<f64> = half.iter().map(|v| v.exp_m1()).collect();
        let r = (delta / var_linear_stat(&dpp, &g)) / (delta_half / var_linear_stat(&dpp, &gh));
        assert!((1.6..2.4).contains(&r), "ratio {r}");
        assert!(soshnikov_remainder(&dpp, &bump(&dpp, 0.0, 0.3, 0.8)).is_err());
    }
}
