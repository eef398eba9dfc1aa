use std::time::Instant;

use rayon::prelude::*;

use super::{join_list, ExperimentReport, SolverConfig};
use crate::error::{Error, Result};
use crate::kernels::{bulk_kernel, bulk_scale, edge_kernel_default, edge_scale, weyl_constant};
use crate::schrodinger::{edge_rotation, grad_potential, projector_kernel, rescaled_kernel, PotentialExpr};
use crate::specfun::unit_ball_volume;

/// Probe lattice `lo, lo + step, ..., hi` on each axis of the rescaled window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeWindow {
    pub lo: f64,
    pub hi: f64,
    pub probes: usize,
}

impl ProbeWindow {
    pub fn new(lo: f64, hi: f64, probes: usize) -> Result<Self> {
        if !(lo < hi) || probes < 2 {
            return Err(Error::invalid("probe window needs lo < hi and at least 2 probes"));
        }
        Ok(Self { lo, hi, probes })
    }

    pub fn axis(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.probes - 1) as f64;
        (0..self.probes).map(|i| self.lo + step * i as f64).collect()
    }

    /// All lattice points of the window in dimension n (first axis fastest).
    pub fn points(&self, n: usize) -> Vec<Vec<f64>> {
        let axis = self.axis();
        match n {
            1 => axis.iter().map(|&a| vec![a]).collect(),
            _ => axis
                .iter()
                .flat_map(|&b| axis.iter().map(move |&a| vec![a, b]))
                .collect(),
        }
    }
}

/// Eigenvalue count N(ħ) = #{λ ≤ μ} against the Weyl prediction
/// (2πħ)^{-n} ω_n ∫ (μ - V)_+^{n/2}.
pub fn weyl_check(
    v: &PotentialExpr,
    mu: f64,
    n: usize,
    hbar_list: &[f64],
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_hbar_list(hbar_list)?;
    let z = weyl_constant(v, mu, n)?;
    let omega = unit_ball_volume(n as u32);
    let counts = hbar_list
        .par_iter()
        .map(|&hbar| {
            let eigs = cfg.solve(v, mu, hbar, n, mu)?;
            Ok(eigs.count_below(mu))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new(
        "weyl",
        &["hbar", "count", "hbar_n_count", "weyl_count", "ratio", "deviation"],
    );
    report
        .param("potential", v)
        .param("mu", mu)
        .param("dimension", n)
        .param("hbar_list", join_list(hbar_list))
        .param("resolution", cfg.resolution)
        .param("weyl_constant", z);
    for (&hbar, &count) in hbar_list.iter().zip(&counts) {
        let scaled = hbar.powi(n as i32) * count as f64;
        let predicted = omega * z / (2.0 * std::f64::consts::PI * hbar).powi(n as i32);
        let ratio = if predicted > 0.0 { count as f64 / predicted } else { f64::NAN };
        report.push_row(vec![hbar, count as f64, scaled, predicted, ratio, ratio - 1.0]);
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Sup-error of ε^n Π(x0 + εx, x0 + εy) against the bulk kernel on the probe
/// lattice, one row per ħ; successive ratios go to the summary.
pub fn bulk_convergence(
    v: &PotentialExpr,
    mu: f64,
    x0: &[f64],
    hbar_list: &[f64],
    window: &ProbeWindow,
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_hbar_list(hbar_list)?;
    let n = x0.len();
    v.check_dimension(n)?;
    let v_x0 = v.eval(x0);
    if !(v_x0 < mu) {
        return Err(Error::invalid(format!("x0 is not in the bulk: V(x0) = {v_x0} >= mu = {mu}")));
    }
    let probes = window.points(n);
    let reference: Vec<Vec<f64>> = probes
        .par_iter()
        .map(|x| probes.iter().map(|y| bulk_kernel(n, x, y)).collect())
        .collect();
    let identity: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    let rows = hbar_list
        .par_iter()
        .map(|&hbar| {
            let eps = bulk_scale(hbar, v_x0, mu, n)?;
            let pk = projector_kernel(cfg.solve(v, mu, hbar, n, mu)?, mu)?;
            let eval = rescaled_kernel(&pk, x0, eps, &identity, &probes, &probes)?;
            let error = sup_error(&eval.values, &reference);
            Ok(vec![hbar, eps, pk.rank() as f64, error])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new("converge-bulk", &["hbar", "eps", "rank", "sup_error"]);
    report
        .param("potential", v)
        .param("mu", mu)
        .param("x0", join_list(x0))
        .param("window", format!("{}:{}", window.lo, window.hi))
        .param("probes", window.probes)
        .param("resolution", cfg.resolution);
    finish_convergence(&mut report, rows);
    report.wall_time = start.elapsed();
    Ok(report)
}

/// As [`bulk_convergence`] at a boundary point of the droplet, with the edge
/// scale, the rotation taking ∇V(x0) to e₁, and the edge kernel as target.
pub fn edge_convergence(
    v: &PotentialExpr,
    mu: f64,
    x0: &[f64],
    hbar_list: &[f64],
    window: &ProbeWindow,
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    check_hbar_list(hbar_list)?;
    let n = x0.len();
    v.check_dimension(n)?;
    let v_x0 = v.eval(x0);
    if (v_x0 - mu).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "x0 is not on the droplet boundary: V(x0) - mu = {}",
            v_x0 - mu
        )));
    }
    let grad = grad_potential(v, x0)?;
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !(grad_norm > 0.0) {
        return Err(Error::invalid("degenerate edge point: grad V(x0) = 0"));
    }
    let u = edge_rotation(&grad)?;
    let probes = window.points(n);
    let reference = probes
        .par_iter()
        .map(|x| probes.iter().map(|y| edge_kernel_default(n, x, y)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let rows = hbar_list
        .par_iter()
        .map(|&hbar| {
            let eps = edge_scale(hbar, grad_norm)?;
            let pk = projector_kernel(cfg.solve(v, mu, hbar, n, mu)?, mu)?;
            let eval = rescaled_kernel(&pk, x0, eps, &u, &probes, &probes)?;
            let error = sup_error(&eval.values, &reference);
            Ok(vec![hbar, eps, pk.rank() as f64, error])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new("converge-edge", &["hbar", "eps", "rank", "sup_error"]);
    report
        .param("potential", v)
        .param("mu", mu)
        .param("x0", join_list(x0))
        .param("window", format!("{}:{}", window.lo, window.hi))
        .param("probes", window.probes)
        .param("resolution", cfg.resolution);
    finish_convergence(&mut report, rows);
    report.wall_time = start.elapsed();
    Ok(report)
}

fn check_hbar_list(hbar_list: &[f64]) -> Result<()> {
    if hbar_list.is_empty() || hbar_list.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::invalid("hbar list must be non-empty and positive"));
    }
    Ok(())
}

fn sup_error(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn finish_convergence(report: &mut ExperimentReport, rows: Vec<Vec<f64>>) {
    for row in rows {
        report.push_row(row);
    }
    let errors = report.column("sup_error").unwrap_or_default();
    for (k, w) in errors.windows(2).enumerate() {
        report.set_summary(&format!("ratio_{}", k + 1), w[1] / w[0]);
    }
}
