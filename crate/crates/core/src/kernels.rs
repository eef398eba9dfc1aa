//! Limiting kernels, macroscopic densities and microscopic scales.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quad;
use crate::schrodinger::expr::PotentialExpr;
use crate::schrodinger::grid::choose_box;
use crate::specfun::{airy_pair, bessel_j_over_power, bulk_wavenumber, gamma_half, unit_ball_volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    FreeLaplacian,
    Bulk,
    Edge,
    Sine1D,
    Airy1D,
    Projector,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::FreeLaplacian => "free",
            KernelKind::Bulk => "bulk",
            KernelKind::Edge => "edge",
            KernelKind::Sine1D => "sine",
            KernelKind::Airy1D => "airy",
            KernelKind::Projector => "projector",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel values `values[i][j] = K(x_i, y_j)` with the parameters that define K.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEvaluation {
    pub kind: KernelKind,
    pub dimension: usize,
    pub params: BTreeMap<String, f64>,
    pub x_points: Vec<Vec<f64>>,
    pub y_points: Vec<Vec<f64>>,
    pub values: Vec<Vec<f64>>,
}

impl KernelEvaluation {
    /// Tabulates `kernel` on `x_points × y_points`, rows in parallel.
    pub fn tabulate<F>(
        kind: KernelKind,
        dimension: usize,
        params: BTreeMap<String, f64>,
        x_points: Vec<Vec<f64>>,
        y_points: Vec<Vec<f64>>,
        kernel: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
    {
        for p in x_points.iter().chain(&y_points) {
            if p.len() != dimension {
                return Err(Error::invalid(format!(
                    "point {p:?} does not have dimension {dimension}"
                )));
            }
        }
        let values = x_points
            .par_iter()
            .map(|x| y_points.iter().map(|y| kernel(x, y)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind,
            dimension,
            params,
            x_points,
            y_points,
            values,
        })
    }

    /// Largest |K(x_i, x_j) - K(x_j, x_i)|; `None` when the point lists differ.
    pub fn asymmetry(&self) -> Option<f64> {
        if self.x_points != self.y_points {
            return None;
        }
        let n = self.values.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.values[i][j] - self.values[j][i]).abs());
            }
        }
        Some(worst)
    }

    /// Largest entrywise |self - other| over a common point set.
    pub fn max_abs_difference(&self, other: &KernelEvaluation) -> Result<f64> {
        if self.values.len() != other.values.len()
            || self.values.iter().zip(&other.values).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::invalid("kernel tables have different shapes"));
        }
        Ok(self
            .values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# kind={}\n# dimension={}\n", self.kind, self.dimension);
        for (k, v) in &self.params {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let coords = |prefix: &str| {
            (1..=self.dimension)
                .map(|d| format!("{prefix}{d}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        out.push_str(&format!("{},{},value\n", coords("x"), coords("y")));
        for (x, row) in self.x_points.iter().zip(&self.values) {
            for (y, v) in self.y_points.iter().zip(row) {
                let join = |p: &[f64]| p.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
                out.push_str(&format!("{},{},{v}\n", join(x), join(y)));
            }
        }
        out
    }
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Kernel of `1_{[0, μ²]}(-Δ)` in dimension `n` as a function of the distance
/// `r`; `n = 0` gives 1.
pub fn free_laplacian_radial(n: usize, mu: f64, r: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    mu.powi(n as i32) * (4.0 * PI).powf(-0.5 * nf) * bessel_j_over_power(n as u32, mu * r)
}

/// μ^{n/2} J_{n/2}(μ|x-y|) / (2π|x-y|)^{n/2}, the kernel of the spectral
/// projector of -Δ on frequencies |ξ| ≤ μ. The diagonal is μ^n ω_n / (2π)^n.
pub fn free_laplacian_kernel(n: usize, mu: f64, x: &[f64], y: &[f64]) -> f64 {
    free_laplacian_radial(n, mu, distance(x, y))
}

/// Density-one bulk kernel, the free kernel at wavenumber c_n.
pub fn bulk_kernel(n: usize, x: &[f64], y: &[f64]) -> f64 {
    let r = distance(x, y);
    if r == 0.0 {
        return 1.0;
    }
    free_laplacian_radial(n, bulk_wavenumber(n as u32), r)
}

/// sin(π(x-y)) / (π(x-y)).
pub fn sine_kernel(x: f64, y: f64) -> f64 {
    let d = PI * (x - y);
    if d == 0.0 {
        1.0
    } else {
        d.sin() / d
    }
}

/// (Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y), with a Taylor expansion about the
/// midpoint when x and y nearly coincide.
pub fn airy_kernel_1d(x: f64, y: f64) -> f64 {
    let d = x - y;
    if d.abs() < 1e-3 {
        let m = 0.5 * (x + y);
        let e = 0.5 * d;
        let (a, ap) = airy_pair(m);
        let diag = ap * ap - m * a * a;
        return diag + e * e * (a * ap / 3.0 + 2.0 / 3.0 * m * diag);
    }
    let (ax, apx) = airy_pair(x);
    let (ay, apy) = airy_pair(y);
    (ax * apy - apx * ay) / d
}

/// Truncation of the s-integral defining the edge kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeQuadrature {
    pub s_max: f64,
    /// Cap on the number of adaptive subintervals.
    pub nodes: usize,
    pub tail_bound: f64,
}

impl EdgeQuadrature {
    /// Default truncation `s_max = 40 - min(x1, y1)`, certified against
    /// `tolerance`.
    pub fn for_points(n: usize, x1: f64, y1: f64, tolerance: f64) -> Result<Self> {
        let s_max = 40.0 - x1.min(y1);
        let quad = Self::with_s_max(n, x1, y1, s_max, 4000);
        if !(quad.tail_bound <= tolerance) {
            return Err(Error::invalid(format!(
                "edge quadrature tail bound {:e} exceeds tolerance {tolerance:e}",
                quad.tail_bound
            )));
        }
        Ok(quad)
    }

    pub fn with_s_max(n: usize, x1: f64, y1: f64, s_max: f64, nodes: usize) -> Self {
        Self {
            s_max,
            nodes,
            tail_bound: edge_tail_bound(n, x1.min(y1), s_max),
        }
    }
}

/// Bound on ∫_{s_max}^∞ |Ai(a+s)|² |K^{(n-1)}_{√s}| ds for a = min(x1, y1).
///
/// Uses Ai(z) ≤ e^{-ζ}/(2√π z^{1/4}) with ζ = (2/3) z^{3/2}, |J_ν(t)/(t/2)^ν|
/// ≤ 1/Γ(ν+1), convexity of z^{3/2} and concavity of log s. Infinite when the
/// truncation point is not inside the decaying region.
pub fn edge_tail_bound(n: usize, a: f64, s_max: f64) -> f64 {
    let z0 = a + s_max;
    if !(s_max > 0.0) || z0 < 2.0 {
        return f64::INFINITY;
    }
    let p = 0.5 * (n as f64 - 1.0);
    let bessel_cap = if n == 1 {
        1.0
    } else {
        (4.0 * PI).powf(-p) / gamma_half(n as u32 + 1)
    };
    // Integrand ≤ C e^{-(4/3) z^{3/2}} s^p z^{-1/2} / (4π).
    let rate = 2.0 * z0.sqrt() - p / s_max;
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    let lead = (-(4.0 / 3.0) * z0.powf(1.5)).exp() * s_max.powf(p) / z0.sqrt() / (4.0 * PI);
    bessel_cap * lead / rate
}

/// ∫_0^{s_max} Ai(x1+s) Ai(y1+s) K^{(n-1)}_{√s}(x⊥, y⊥) ds.
pub fn edge_kernel(n: usize, x: &[f64], y: &[f64], quad: &EdgeQuadrature) -> Result<f64> {
    if n < 1 || x.len() != n || y.len() != n {
        return Err(Error::invalid("edge kernel points must have dimension n >= 1"));
    }
    let bound = edge_tail_bound(n, x[0].min(y[0]), quad.s_max);
    if !(bound <= quad.tail_bound * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!(
            "edge quadrature with s_max = {} is not certified at these points (tail {bound:e})",
            quad.s_max
        )));
    }
    let r_perp = distance(&x[1..], &y[1..]);
    let integrand = |s: f64| {
        let transverse = free_laplacian_radial(n - 1, s.sqrt(), r_perp);
        airy_pair(x[0] + s).0 * airy_pair(y[0] + s).0 * transverse
    };
    let panels = quad.s_max.ceil().max(1.0) as usize;
    let result = quad::integrate(integrand, 0.0, quad.s_max, 1e-13, 1e-12, panels, quad.nodes.max(panels));
    if !result.value.is_finite() {
        return Err(Error::Numerical("edge kernel quadrature produced a non-finite value".into()));
    }
    Ok(result.value)
}

/// Edge kernel with the default truncation, tail certified below 1e-12.
pub fn edge_kernel_default(n: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("edge kernel points must be non-empty"));
    }
    let quad = EdgeQuadrature::for_points(n, x[0], y[0], 1e-12)?;
    edge_kernel(n, x, y, &quad)
}

/// Z = ∫ (μ - V)_+^{n/2} dx.
pub fn weyl_constant(v: &PotentialExpr, mu: f64, n: usize) -> Result<f64> {
    v.check_dimension(n)?;
    if !(1..=2).contains(&n) {
        return Err(Error::invalid("weyl_constant supports n = 1 and n = 2"));
    }
    let half = choose_box(v, mu, 0.0, n, 0.25, 1e4)?;
    if n == 1 {
        Ok(positive_part_integral(|x| mu - v.eval(&[x]), -half, half, 0.5, 1e-10))
    } else {
        let outer = |x1: f64| positive_part_integral(|x2| mu - v.eval(&[x1, x2]), -half, half, 1.0, 1e-11);
        Ok(quad::integrate(outer, -half, half, 1e-9, 1e-10, 64, 20_000).value)
    }
}

/// ϱ(x) = (μ - V(x))_+^{n/2} / Z.
pub fn density_of_states(v: &PotentialExpr, mu: f64, n: usize, x: &[f64]) -> Result<f64> {
    if x.len() != n {
        return Err(Error::invalid("point dimension does not match n"));
    }
    let z = weyl_constant(v, mu, n)?;
    if !(z > 0.0) {
        return Err(Error::invalid("empty droplet: the Weyl constant vanishes"));
    }
    Ok((mu - v.eval(x)).max(0.0).powf(0.5 * n as f64) / z)
}

/// ∫_a^b g(t)_+^p dt. Sign changes of g are located on a sampling lattice and
/// refined by bisection; each positive interval is integrated after the
/// substitution t = α + (β - α)(1 - cos θ)/2, which smooths the endpoint
/// behaviour of fractional powers.
pub fn positive_part_integral<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, p: f64, tol: f64) -> f64 {
    let samples = 2048;
    let step = (b - a) / samples as f64;
    let t_at = |i: usize| if i == samples { b } else { a + step * i as f64 };
    let mut roots = vec![a];
    let mut prev = g(a) > 0.0;
    for i in 1..=samples {
        let t = t_at(i);
        let now = g(t) > 0.0;
        if now != prev {
            let (mut lo, mut hi) = (t_at(i - 1), t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if (g(mid) > 0.0) == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
            prev = now;
        }
    }
    roots.push(b);
    let mut total = 0.0;
    for w in roots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo || g(0.5 * (lo + hi)) <= 0.0 {
            continue;
        }
        let half = 0.5 * (hi - lo);
        let f = |theta: f64| {
            let t = lo + half * (1.0 - theta.cos());
            g(t).max(0.0).powf(p) * half * theta.sin()
        };
        total += quad::integrate(f, 0.0, PI, tol, 0.0, 8, 10_000).value;
    }
    total
}

/// ε = 2πħ ω_n^{-1/n} / √(μ - V(x0)).
pub fn bulk_scale(hbar: f64, v_x0: f64, mu: f64, n: usize) -> Result<f64> {
    if !(v_x0 < mu) {
        return Err(Error::invalid(format!(
            "bulk scale needs V(x0) < mu, got V(x0) = {v_x0}, mu = {mu}"
        )));
    }
    if n < 1 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    Ok(hbar * bulk_wavenumber(n as u32) / (mu - v_x0).sqrt())
}

/// ε = ħ^{2/3} |∇V(x0)|^{-1/3}.
pub fn edge_scale(hbar: f64, grad_norm: f64) -> Result<f64> {
    if !(grad_norm > 0.0) {
        return Err(Error::invalid("degenerate edge point: the gradient vanishes"));
    }
    Ok(hbar.powf(2.0 / 3.0) * grad_norm.powf(-1.0 / 3.0))
}

/// Diagonal of the free kernel, μ^n ω_n / (2π)^n.
pub fn free_density(n: usize, mu: f64) -> f64 {
    mu.powi(n as i32) * unit_ball_volume(n as u32) / (2.0 * PI).powi(n as i32)
}
