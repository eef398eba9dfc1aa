use std::time::Instant;

use rayon::prelude::*;

use super::stats::{ks_normal, skewness};
use super::{join_list, ExperimentReport, SolverConfig, TestFunction};
use crate::dpp::{mean_linear_stat, monte_carlo, var_linear_stat, Determinantal, ProjectionDPP, RngState};
use crate::error::{Error, Result};
use crate::quad;
use crate::schrodinger::PotentialExpr;

/// Tabulated distribution function of the density of states ϱ ∝ (μ - V)_+^{1/2}
/// on an interval (n = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCdf {
    x: Vec<f64>,
    f: Vec<f64>,
}

impl DensityCdf {
    pub fn from_potential(v: &PotentialExpr, mu: f64, a: f64, b: f64, cells: usize) -> Result<Self> {
        v.check_dimension(1)?;
        if !(a < b) || cells == 0 {
            return Err(Error::invalid("density table needs a < b and at least one cell"));
        }
        let step = (b - a) / cells as f64;
        let x: Vec<f64> = (0..=cells).map(|i| a + step * i as f64).collect();
        let masses: Vec<f64> = x
            .par_windows(2)
            .map(|w| quad::integrate_simple(|t| (mu - v.eval(&[t])).max(0.0).sqrt(), w[0], w[1], 1e-14))
            .collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("empty droplet: the density of states vanishes"));
        }
        let mut f = Vec::with_capacity(x.len());
        let mut acc = 0.0;
        f.push(0.0);
        for m in masses {
            acc += m;
            f.push(acc / total);
        }
        Ok(Self { x, f })
    }

    /// Quantile F^{-1}(p) by linear interpolation.
    pub fn quantile(&self, p: f64) -> f64 {
        let k = self.f.partition_point(|&v| v < p).clamp(1, self.f.len() - 1);
        let (f0, f1) = (self.f[k - 1], self.f[k]);
        let t = if f1 > f0 { (p - f0) / (f1 - f0) } else { 0.0 };
        self.x[k - 1] + t * (self.x[k] - self.x[k - 1])
    }

    fn value(&self, t: f64) -> f64 {
        if t <= self.x[0] {
            return 0.0;
        }
        if t >= self.x[self.x.len() - 1] {
            return 1.0;
        }
        let k = self.x.partition_point(|&v| v <= t).clamp(1, self.x.len() - 1);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        self.f[k - 1] + (t - x0) / (x1 - x0) * (self.f[k] - self.f[k - 1])
    }

    /// W₁ between the uniform empirical measure on `points` and ϱ, computed as
    /// ∫ |F_emp - F_ϱ| with F_ϱ piecewise linear.
    pub fn wasserstein(&self, points: &[f64]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::invalid("Wasserstein distance needs at least one point"));
        }
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut breaks: Vec<f64> = self.x.iter().chain(&sorted).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let n = sorted.len() as f64;
        let mut below = 0usize;
        let mut total = 0.0;
        for w in breaks.windows(2) {
            let (s, t) = (w[0], w[1]);
            while below < sorted.len() && sorted[below] <= s {
                below += 1;
            }
            let c = below as f64 / n;
            let (p, q) = (self.value(s) - c, self.value(t) - c);
            total += if p * q >= 0.0 {
                (t - s) * 0.5 * (p + q).abs()
            } else {
                (t - s) * (p * p + q * q) / (2.0 * (q - p).abs())
            };
        }
        Ok(total)
    }
}

/// Mean and quantiles of W₁(N⁻¹Ξ, ϱ) over `trials` samples of the fermion
/// process, one row per ħ. Cell k uses streams k·2³² + t of `seed`.
pub fn lln_wasserstein(
    v: &PotentialExpr,
    mu: f64,
    hbar_list: &[f64],
    trials: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    v.check_dimension(1)?;
    if trials == 0 || hbar_list.is_empty() {
        return Err(Error::invalid("LLN check needs at least one trial and one hbar"));
    }
    let mut report = ExperimentReport::new(
        "lln",
        &["hbar", "rank", "mean_w1", "q10_w1", "q50_w1", "q90_w1"],
    );
    report.seed = Some(seed);
    report
        .param("potential", v)
        .param("mu", mu)
        .param("hbar_list", join_list(hbar_list))
        .param("trials", trials)
        .param("resolution", cfg.resolution);
    for (k, &hbar) in hbar_list.iter().enumerate() {
        let eigs = cfg.solve(v, mu, hbar, 1, mu)?;
        let dpp = ProjectionDPP::from_eigensystem(&eigs, mu)?;
        if dpp.rank() == 0 {
            return Err(Error::invalid(format!("no eigenvalue below mu at hbar = {hbar}")));
        }
        let half = eigs.grid().half_width();
        let cdf = DensityCdf::from_potential(v, mu, -half, half, 4000)?;
        let base = RngState::new(seed).with_stream((k as u64) << 32);
        let mut w1 = monte_carlo(&dpp, base, trials, |c| {
            let xs: Vec<f64> = c.points.iter().map(|p| p[0]).collect();
            cdf.wasserstein(&xs)
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mean = w1.iter().sum::<f64>() / trials as f64;
        w1.sort_by(f64::total_cmp);
        let q = |p: f64| w1[((p * (trials - 1) as f64).round() as usize).min(trials - 1)];
        report.push_row(vec![hbar, dpp.rank() as f64, mean, q(0.1), q(0.5), q(0.9)]);
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

const TAIL_LEVELS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// Exceedance frequencies of |Ξ(f) - EΞ(f)| / √(ħN) at t ∈ {0.5, 1, 1.5, 2}
/// and the largest c with 2e^{-ct²} above all of them.
pub fn gaussian_tail_check(
    v: &PotentialExpr,
    mu: f64,
    f: &TestFunction,
    hbar: f64,
    trials: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let n = f.dimension();
    if trials == 0 {
        return Err(Error::invalid("tail check needs at least one trial"));
    }
    let eigs = cfg.solve(v, mu, hbar, n, mu)?;
    let dpp = ProjectionDPP::from_eigensystem(&eigs, mu)?;
    let values: Vec<f64> = dpp.points().iter().map(|p| f.eval(p)).collect();
    let mean = mean_linear_stat(&dpp, &values);
    let var = var_linear_stat(&dpp, &values);
    let scale = (hbar * dpp.rank() as f64).sqrt();
    if !(scale > 0.0) {
        return Err(Error::invalid("tail check needs a non-empty process"));
    }
    let deviations = monte_carlo(&dpp, RngState::new(seed), trials, |c| {
        (c.linear_statistic(&values) - mean).abs() / scale
    })?;
    let exceed: Vec<f64> = TAIL_LEVELS
        .iter()
        .map(|&t| deviations.iter().filter(|&&d| d >= t).count() as f64 / trials as f64)
        .collect();
    let c = TAIL_LEVELS
        .iter()
        .zip(&exceed)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&t, &p)| (2.0 / p).ln() / (t * t))
        .fold(f64::INFINITY, f64::min);
    let mut report = ExperimentReport::new("tail", &["t", "exceedance", "envelope"]);
    report.seed = Some(seed);
    report
        .param("potential", v)
        .param("mu", mu)
        .param("hbar", hbar)
        .param("test_function", f)
        .param("trials", trials)
        .param("resolution", cfg.resolution);
    for (&t, &p) in TAIL_LEVELS.iter().zip(&exceed) {
        report.push_row(vec![t, p, 2.0 * (-c * t * t).exp()]);
    }
    report.set_summary("fitted_c", c);
    report.set_summary("rank", dpp.rank() as f64);
    report.set_summary("exact_mean", mean);
    report.set_summary("exact_var", var);
    report.set_summary("var_over_hbar_n", var / (scale * scale));
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Standardizes Ξ(f) with its exact mean and variance over `trials` samples
/// and tests the result against N(0, 1).
pub fn clt_monte_carlo<D: Determinantal>(
    process: &D,
    f: &TestFunction,
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    if trials < 2 {
        return Err(Error::invalid("CLT check needs at least two trials"));
    }
    let values: Vec<f64> = process.points().iter().map(|p| f.eval(p)).collect();
    let mean = mean_linear_stat(process, &values);
    let var = var_linear_stat(process, &values);
    if !(var >= 1e-12) {
        return Err(Error::invalid(format!(
            "linear statistic is degenerate: variance {var:e} below 1e-12"
        )));
    }
    let sd = var.sqrt();
    let raw = monte_carlo(process, RngState::new(seed), trials, |c| c.linear_statistic(&values))?;
    let z: Vec<f64> = raw.iter().map(|x| (x - mean) / sd).collect();
    let ks = ks_normal(&z)?;
    let mut report = ExperimentReport::new("clt", &["trial", "statistic", "standardized"]);
    report.seed = Some(seed);
    report
        .param("test_function", f)
        .param("trials", trials)
        .param("ground_size", process.ground_size());
    for (t, (x, s)) in raw.iter().zip(&z).enumerate() {
        report.push_row(vec![t as f64, *x, *s]);
    }
    report.set_summary("exact_mean", mean);
    report.set_summary("exact_var", var);
    report.set_summary("ks_statistic", ks.statistic);
    report.set_summary("ks_p_value", ks.p_value);
    report.set_summary("skewness", skewness(&z));
    report.wall_time = start.elapsed();
    Ok(report)
}
