use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;

use super::{join_list, ExperimentReport, SolverConfig, TestFunction};
use crate::dpp::{var_linear_stat, Determinantal, ProjectionDPP};
use crate::error::{Error, Result};
use crate::kernels::{free_density, free_laplacian_radial};
use crate::quad;
use crate::schrodinger::{Grid, PotentialExpr};
use crate::specfun::unit_ball_volume;

/// σ_n² = ω_{n-1} / (2π)^n.
pub fn sigma_sq(n: usize) -> f64 {
    unit_ball_volume(n as u32 - 1) / (2.0 * PI).powi(n as i32)
}

/// |B(0,1) \ B(d e₁, 1)| in dimension n ∈ {1, 2}.
pub fn ball_difference_volume(n: usize, d: f64) -> f64 {
    let d = d.abs();
    match n {
        1 => d.min(2.0),
        _ => {
            if d >= 2.0 {
                PI
            } else {
                PI - (2.0 * (0.5 * d).acos() - 0.5 * d * (4.0 - d * d).sqrt())
            }
        }
    }
}

fn check_dimension(n: usize, g: &TestFunction) -> Result<()> {
    if !(1..=2).contains(&n) || g.dimension() != n {
        return Err(Error::invalid(format!(
            "dimension {n} does not match the test function (dimension {})",
            g.dimension()
        )));
    }
    Ok(())
}

/// ∫ w(|ξ|) |ĝ(ξ)|² dξ, in closed form for Gaussian bumps and by FFT otherwise.
fn spectral_integral<W: Fn(f64) -> f64 + Sync>(g: &TestFunction, weight: W, breaks: &[f64]) -> f64 {
    let n = g.dimension();
    match g.radial_spectrum() {
        Some(spec) => {
            let k_max = 10.0 / g.feature_length();
            let mut edges = vec![0.0];
            edges.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < k_max));
            edges.push(k_max);
            let shell = if n == 1 { 2.0 } else { 2.0 * PI };
            edges
                .windows(2)
                .map(|w| {
                    let f = |k: f64| shell * k.powi(n as i32 - 1) * spec(k) * weight(k);
                    quad::integrate(f, w[0], w[1], 1e-300, 1e-13, 4, 20_000).value
                })
                .sum()
        }
        None => g.sampled_spectrum().integrate(weight),
    }
}

/// Variance of Ξ(g) for the free-Laplacian process at Fermi wavenumber μ,
/// μ^n/(2π)^n ∫ |ĝ(ξ)|² |B(0,1) \ B(ξ/μ, 1)| dξ.
pub fn free_variance_exact(n: usize, mu: f64, g: &TestFunction) -> Result<f64> {
    check_dimension(n, g)?;
    if !(mu > 0.0) {
        return Err(Error::invalid("mu must be positive"));
    }
    let integral = spectral_integral(g, |k| ball_difference_volume(n, k / mu), &[2.0 * mu]);
    Ok(mu.powi(n as i32) / (2.0 * PI).powi(n as i32) * integral)
}

/// ½ Σ_{x,y} (g(x) - g(y))² K(x,y)² h^{2n} over the interior grid nodes, with
/// the pairs leaving the grid closed by Σ_x g(x)² (ρ - Σ_y K(x,y)² hⁿ) hⁿ, where
/// ρ = ∫ K(x,y)² dy is the free density. The grid must contain supp g.
pub fn free_variance_bruteforce(n: usize, mu: f64, g: &TestFunction, grid: &Grid) -> Result<f64> {
    check_dimension(n, g)?;
    if grid.dimension() != n || !(mu > 0.0) {
        return Err(Error::invalid("grid dimension must match and mu must be positive"));
    }
    let reach = g.center().iter().map(|c| c.abs()).fold(0.0, f64::max) + g.support_radius();
    if reach > grid.half_width() {
        return Err(Error::invalid("the grid does not cover the support of the test function"));
    }
    let m = grid.interior_per_axis();
    let h = grid.spacing();
    let w = grid.weight();
    let values = grid.sample(|x| g.eval(x));
    // K² depends only on the lattice offset.
    let table: Vec<f64> = if n == 1 {
        (0..m).map(|d| free_laplacian_radial(1, mu, d as f64 * h).powi(2)).collect()
    } else {
        (0..m * m)
            .into_par_iter()
            .map(|idx| {
                let (dx, dy) = ((idx % m) as f64, (idx / m) as f64);
                free_laplacian_radial(2, mu, h * dx.hypot(dy)).powi(2)
            })
            .collect()
    };
    let offset = |i: usize, j: usize| -> usize {
        if n == 1 {
            i.abs_diff(j)
        } else {
            (i % m).abs_diff(j % m) + m * (i / m).abs_diff(j / m)
        }
    };
    let rho = free_density(n, mu);
    let total: f64 = (0..values.len())
        .into_par_iter()
        .map(|i| {
            let gi = values[i];
            let mut pairs = 0.0;
            let mut mass = 0.0;
            for (j, gj) in values.iter().enumerate() {
                let k2 = table[offset(i, j)];
                pairs += (gi - gj) * (gi - gj) * k2;
                mass += k2;
            }
            0.5 * pairs * w * w + gi * gi * (rho - mass * w) * w
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total)
}

/// Σ²(g) = ∫ |ĝ(ξ)|² |ξ| dξ.
pub fn sigma_fourier(g: &TestFunction) -> f64 {
    spectral_integral(g, |k| k, &[])
}

/// ∫∫ |g(x) - g(y)|² / |x - y|^{n+1} dx dy. With D(z) = ∫ |g(x+z) - g(x)|² dx the
/// integral is ∫ D(z)/|z|^{n+1} dz: the ball |z| ≤ h_c uses D(z) ≈ (z·∇)²g
/// integrated analytically, the shell h_c < |z| < 2R is integrated
/// numerically, and beyond 2R the supports separate so D = 2‖g‖².
pub fn sigma_slobodeckij(g: &TestFunction) -> f64 {
    let n = g.dimension();
    let c = g.center().to_vec();
    let r_supp = g.support_radius();
    let per_feature = match g.kind() {
        super::TestKind::GaussianBump { .. } => 3.0,
        _ => 16.0,
    };
    let hx = g.feature_length() / per_feature;
    let cutoff = g.feature_length() / 50.0;
    let z_max = 2.0 * r_supp;
    // Lattice sums over the cube c ± half.
    let lattice_sum = |half: f64, f: &(dyn Fn(&[f64]) -> f64 + Sync)| -> f64 {
        let k = (half / hx).ceil() as i64;
        let axis: Vec<f64> = (-k..=k).map(|i| i as f64 * hx).collect();
        let cell = hx.powi(n as i32);
        if n == 1 {
            axis.iter().map(|a| f(&[c[0] + a])).sum::<f64>() * cell
        } else {
            axis.par_iter()
                .map(|b| axis.iter().map(|a| f(&[c[0] + a, c[1] + b])).sum::<f64>())
                .collect::<Vec<_>>()
                .iter()
                .sum::<f64>()
                * cell
        }
    };
    let norm2 = lattice_sum(r_supp, &|x| g.eval(x).powi(2));
    let grad2 = lattice_sum(r_supp, &|x| g.gradient(x).iter().map(|d| d * d).sum());
    let diff = |z: &[f64]| -> f64 {
        let reach = r_supp + z.iter().map(|v| v.abs()).fold(0.0, f64::max);
        lattice_sum(reach, &|x| {
            let y: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
            (g.eval(&y) - g.eval(x)).powi(2)
        })
    };
    if n == 1 {
        let shell = quad::integrate(|r| diff(&[r]) / (r * r), cutoff, z_max, 1e-300, 1e-9, 8, 5_000).value;
        2.0 * shell + 4.0 * norm2 / z_max + 2.0 * cutoff * grad2
    } else {
        let angles = 32;
        let ring = |r: f64| -> f64 {
            (0..angles)
                .map(|j| {
                    let t = PI * j as f64 / angles as f64;
                    diff(&[r * t.cos(), r * t.sin()])
                })
                .sum::<f64>()
                * 2.0
                * PI
                / angles as f64
        };
        let shell = quad::integrate(|r| ring(r) / (r * r), cutoff, z_max, 1e-300, 1e-8, 8, 2_000).value;
        shell + 4.0 * PI * norm2 / z_max + PI * cutoff * grad2
    }
}

/// Variance of the mesoscopic statistic Ξ(g((· - x0)/ε)) with ε = ħ^β, scaled
/// by δ^{n-1} where δ = ħ/ε, and compared with both normalizations of the
/// limit: σ_n² (μ - V(x0))^{(n-1)/2} Σ²(g) and 2σ_n (μ - V(x0))^{(n-1)/2} Σ²(g).
/// In n = 1 the fermion process is solved on a grid; in n = 2 the flat model at
/// wavenumber √(μ - V(x0))/δ stands in for it.
pub fn mesoscopic_variance_scan(
    v: &PotentialExpr,
    mu: f64,
    x0: &[f64],
    hbar_list: &[f64],
    beta: f64,
    g: &TestFunction,
    cfg: &SolverConfig,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let n = x0.len();
    check_dimension(n, g)?;
    v.check_dimension(n)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta must lie in (0, 1)"));
    }
    if hbar_list.is_empty() || hbar_list.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::invalid("hbar list must be non-empty and positive"));
    }
    let gap = mu - v.eval(x0);
    if !(gap > 0.0) {
        return Err(Error::invalid("x0 must lie in the bulk"));
    }
    let sigma2 = sigma_fourier(g);
    let level = gap.powf(0.5 * (n as f64 - 1.0));
    let ref_sigma_sq = sigma_sq(n) * level * sigma2;
    let ref_prop = 2.0 * sigma_sq(n).sqrt() * level * sigma2;
    let rows = hbar_list
        .par_iter()
        .map(|&hbar| {
            let eps = hbar.powf(beta);
            let delta = hbar / eps;
            let var = if n == 1 {
                let eigs = cfg.solve(v, mu, hbar, 1, mu)?;
                if eps < 4.0 * eigs.grid().spacing() {
                    return Err(Error::invalid(format!(
                        "mesoscopic scale {eps} is below four grid spacings"
                    )));
                }
                let dpp = ProjectionDPP::from_eigensystem(&eigs, mu)?;
                let t = g.rescaled(x0, eps)?;
                let values: Vec<f64> = dpp.points().iter().map(|p| t.eval(p)).collect();
                var_linear_stat(&dpp, &values)
            } else {
                free_variance_exact(n, gap.sqrt() / delta, g)?
            };
            let normalized = delta.powi(n as i32 - 1) * var;
            Ok(vec![hbar, eps, delta, var, normalized, normalized / ref_sigma_sq, normalized / ref_prop])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new(
        "mesoscopic",
        &["hbar", "eps", "delta", "var", "normalized", "ratio_sigma_sq", "ratio_prop"],
    );
    report
        .param("potential", v)
        .param("mu", mu)
        .param("x0", join_list(x0))
        .param("beta", beta)
        .param("test_function", g)
        .param("hbar_list", join_list(hbar_list));
    for row in rows {
        report.push_row(row);
    }
    report.set_summary("sigma_fourier", sigma2);
    report.set_summary("ref_sigma_sq", ref_sigma_sq);
    report.set_summary("ref_prop", ref_prop);
    report.wall_time = start.elapsed();
    Ok(report)
}
