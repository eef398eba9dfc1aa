//! Airy function, Bessel functions of half-integer order and the geometric
//! constants of the unit ball.
//!
//! Ai is evaluated by its Maclaurin series inside `switch_radius` (and for all
//! negative arguments), and by the exponentially weighted asymptotic series
//! beyond. The series loses about `exp(2/3 |x|^{3/2})` ulps to cancellation on
//! the negative axis, so accuracy is ~1e-10 at x = -8 and degrades below -10.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Ai(0) = 3^{-2/3} / Γ(2/3).
const AI_ZERO: f64 = 0.355_028_053_887_817_2;
/// -Ai'(0) = 3^{-1/3} / Γ(1/3).
const MINUS_AI_PRIME_ZERO: f64 = 0.258_819_403_792_806_8;

/// Tolerances and crossover point for the series evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyBudget {
    pub abs_tol: f64,
    pub max_terms: usize,
    pub switch_radius: f64,
}

impl Default for AccuracyBudget {
    fn default() -> Self {
        Self {
            abs_tol: 1e-17,
            max_terms: 300,
            switch_radius: 6.0,
        }
    }
}

impl AccuracyBudget {
    pub fn new(abs_tol: f64, max_terms: usize, switch_radius: f64) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::invalid("abs_tol must be positive"));
        }
        if max_terms < 1 {
            return Err(Error::invalid("max_terms must be at least 1"));
        }
        if !(switch_radius > 0.0) {
            return Err(Error::invalid("switch_radius must be positive"));
        }
        Ok(Self {
            abs_tol,
            max_terms,
            switch_radius,
        })
    }
}

/// Ai(x) with the default budget.
pub fn airy_ai(x: f64) -> f64 {
    airy_with(x, &AccuracyBudget::default()).0
}

/// Ai'(x) with the default budget.
pub fn airy_ai_prime(x: f64) -> f64 {
    airy_with(x, &AccuracyBudget::default()).1
}

/// (Ai(x), Ai'(x)) in one pass.
pub fn airy_pair(x: f64) -> (f64, f64) {
    airy_with(x, &AccuracyBudget::default())
}

pub fn airy_with(x: f64, budget: &AccuracyBudget) -> (f64, f64) {
    if x.is_nan() {
        return (f64::NAN, f64::NAN);
    }
    if x == f64::INFINITY {
        return (0.0, 0.0);
    }
    if x > budget.switch_radius {
        airy_asymptotic(x, budget)
    } else {
        airy_series(x, budget)
    }
}

fn airy_series(x: f64, budget: &AccuracyBudget) -> (f64, f64) {
    let x3 = x * x * x;
    // Ai = c1 f - c2 g with f, g the even/odd Maclaurin solutions.
    let mut f = 1.0;
    let mut g = x;
    let mut df = 0.0;
    let mut dg = 1.0;
    let mut f_term = 1.0;
    let mut g_term = x;
    let mut df_term = 0.5 * x * x;
    let mut dg_term = 1.0;
    df += df_term;
    for k in 1..budget.max_terms {
        let kf = k as f64;
        f_term *= x3 / ((3.0 * kf - 1.0) * (3.0 * kf));
        g_term *= x3 / ((3.0 * kf) * (3.0 * kf + 1.0));
        dg_term *= x3 / ((3.0 * kf) * (3.0 * kf - 2.0));
        if k >= 2 {
            df_term *= x3 / ((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            df += df_term;
        }
        f += f_term;
        g += g_term;
        dg += dg_term;
        let largest = f_term.abs().max(g_term.abs()).max(df_term.abs()).max(dg_term.abs());
        if largest < budget.abs_tol || largest < 1e-17 * (f.abs() + g.abs()) {
            break;
        }
    }
    (
        AI_ZERO * f - MINUS_AI_PRIME_ZERO * g,
        AI_ZERO * df - MINUS_AI_PRIME_ZERO * dg,
    )
}

fn airy_asymptotic(x: f64, budget: &AccuracyBudget) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let quarter = x.powf(0.25);
    let decay = (-zeta).exp() / (2.0 * PI.sqrt());
    let mut u = 1.0;
    let mut sum_u = 1.0;
    let mut sum_v = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..budget.max_terms {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        let scale = zeta.powi(k as i32);
        let term_u = u / scale;
        // Asymptotic: stop at the smallest term.
        if term_u.abs() > last {
            break;
        }
        last = term_u.abs();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum_u += sign * term_u;
        sum_v += sign * v / scale;
        if term_u.abs() < 1e-17 {
            break;
        }
    }
    (decay / quarter * sum_u, -decay * quarter * sum_v)
}

/// Γ(m/2) for a positive integer m.
pub fn gamma_half(twice_arg: u32) -> f64 {
    assert!(twice_arg > 0, "Γ has a pole at 0");
    if twice_arg.is_multiple_of(2) {
        (1..twice_arg / 2).map(|k| k as f64).product()
    } else {
        let mut value = PI.sqrt();
        let mut a = 0.5;
        while (2.0 * a) < twice_arg as f64 - 0.5 {
            value *= a;
            a += 1.0;
        }
        value
    }
}

/// Converts a real order to twice its value, rejecting non-half-integers.
fn twice_order(nu: f64) -> Result<u32> {
    let twice = 2.0 * nu;
    if !(nu >= 0.0) || (twice - twice.round()).abs() > 1e-12 || twice > 1e6 {
        return Err(Error::invalid(format!(
            "Bessel order {nu} is not a non-negative half-integer"
        )));
    }
    Ok(twice.round() as u32)
}

/// J_ν(x) for ν ∈ {0, 1/2, 1, 3/2, …} and x ≥ 0.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    let twice = twice_order(nu)?;
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!(
            "Bessel argument must be finite and non-negative, got {x}"
        )));
    }
    Ok(bessel_j_half(twice, x))
}

/// J_{m/2}(x) for x ≥ 0 without argument checks.
pub fn bessel_j_half(twice_nu: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if twice_nu == 0 { 1.0 } else { 0.0 };
    }
    let nu = 0.5 * twice_nu as f64;
    if x <= nu + 12.0 {
        (0.5 * x).powf(nu) * ascending_series(twice_nu, x)
    } else {
        hankel_asymptotic(nu, x)
    }
}

/// J_ν(t) / (t/2)^ν, analytic at t = 0 where it equals 1/Γ(ν+1).
pub fn bessel_j_over_power(twice_nu: u32, t: f64) -> f64 {
    let nu = 0.5 * twice_nu as f64;
    if t <= nu + 12.0 {
        ascending_series(twice_nu, t)
    } else {
        hankel_asymptotic(nu, t) / (0.5 * t).powf(nu)
    }
}

// Σ_k (-t²/4)^k / (k! Γ(ν+k+1))
fn ascending_series(twice_nu: u32, t: f64) -> f64 {
    let nu = 0.5 * twice_nu as f64;
    let q = -0.25 * t * t;
    let mut term = 1.0 / gamma_half(twice_nu + 2);
    let mut sum = term;
    for k in 1..400 {
        let kf = k as f64;
        term *= q / (kf * (nu + kf));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && kf > 0.5 * t {
            break;
        }
    }
    sum
}

fn hankel_asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= (mu - odd * odd) / (kf * 8.0 * x);
        if a == 0.0 {
            break;
        }
        if a.abs() > last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// ω_n = π^{n/2} / Γ(1 + n/2).
pub fn unit_ball_volume(n: u32) -> f64 {
    PI.powf(0.5 * n as f64) / gamma_half(n + 2)
}

/// c_n = 2π ω_n^{-1/n}, the Fermi wavenumber of the density-one bulk process.
pub fn bulk_wavenumber(n: u32) -> f64 {
    assert!(n >= 1, "dimension must be at least 1");
    2.0 * PI * unit_ball_volume(n).powf(-1.0 / n as f64)
}
