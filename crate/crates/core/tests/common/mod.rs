//! Reference values computed independently of the library.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Smooth cutoff: 1 on [0, 1], 0 beyond 2.
fn taper(u: f64) -> f64 {
    if u <= 1.0 {
        return 1.0;
    }
    if u >= 2.0 {
        return 0.0;
    }
    let s = |t: f64| (-1.0 / t).exp();
    s(2.0 - u) / (s(2.0 - u) + s(u - 1.0))
}

/// Cutoff scale of the truncated integral; the taper acts on t ∈ [8, 16].
const EPS: f64 = 0.125;

/// Ai(x) ≈ (1/π) ∫₀^∞ cos(t³/3 + xt) χ(εt) dt with a C^∞ cutoff χ.
pub fn airy_oracle_ai(x: f64) -> f64 {
    let f = |t: f64| (t.powi(3) / 3.0 + x * t).cos() * taper(EPS * t);
    simpson(f, 0.0, 2.0 / EPS, 1_200_000) / PI
}

/// Ai'(x) by Richardson-extrapolated central differences of the oracle, step 1e-4.
pub fn airy_oracle_ai_prime(x: f64) -> f64 {
    let d = |h: f64| (airy_oracle_ai(x + h) - airy_oracle_ai(x - h)) / (2.0 * h);
    let h = 1e-4;
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

pub fn airy_oracle(x: f64) -> (f64, f64) {
    (airy_oracle_ai(x), airy_oracle_ai_prime(x))
}

/// J₁(z) = (1/π) ∫₀^π cos(τ - z sin τ) dτ; the trapezoid rule is spectrally
/// accurate for this periodic integrand.
pub fn bessel_j1(z: f64) -> f64 {
    let m = 400;
    let h = PI / m as f64;
    let f = |t: f64| (t - z * t.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..m {
        s += f(h * i as f64);
    }
    s * h / PI
}

/// Unit-density bulk kernel in the plane: k J₁(k r) / (2π r), k = 2√π.
pub fn planar_bulk_kernel(r: f64) -> f64 {
    let k = 2.0 * PI.sqrt();
    if r < 1e-12 {
        return 1.0;
    }
    k * bessel_j1(k * r) / (2.0 * PI * r)
}
