#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use fermilab::dpp::{
    laplace_functional, monte_carlo, var_commutator, var_double_sum, var_linear_stat, ProjectionDPP, RngState,
};
use fermilab::experiments::{
    bulk_convergence, clt_monte_carlo, edge_convergence, free_variance_bruteforce, free_variance_exact,
    gaussian_tail_check, lln_wasserstein, sigma_fourier, sigma_slobodeckij, sigma_sq, weyl_check, ProbeWindow,
    SolverConfig, TestFunction,
};
use fermilab::kernels::{airy_kernel_1d, bulk_kernel, edge_kernel_default, sine_kernel};
use fermilab::schrodinger::{agmon_check, parse_potential, Grid, PotentialExpr};
use fermilab::specfun::{airy_ai, airy_pair};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(
        elapsed.as_secs_f64() < limit_s,
        format!("runtime {:.1}s exceeds {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn harmonic() -> PotentialExpr {
    parse_potential("x1^2").unwrap()
}

fn weyl_law() -> Outcome {
    let start = Instant::now();
    let hbars = [0.05, 0.02, 0.01];
    let r = weyl_check(&harmonic(), 1.0, 1, &hbars, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let counts = r.column("count").unwrap();
    let mut worst: f64 = 0.0;
    for (&h, &count) in hbars.iter().zip(&counts) {
        // Eigenvalues ħ(2k + 1) ≤ 1.
        let exact = (0..).take_while(|&k| h * (2 * k + 1) as f64 <= 1.0).count();
        ensure(count == exact as f64, format!("ħ = {h}: count {count} but exact spectrum gives {exact}"))?;
        let dev = (h * count - 0.5).abs();
        ensure(dev <= 2.0 * h, format!("ħ = {h}: |ħN - 1/2| = {dev}"))?;
        worst = worst.max(dev / h);
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("counts {counts:?}, max |ħN - 1/2|/ħ = {worst:.3}"))
}

fn bulk_universality() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig {
        resolution: PI / 64.0,
        ..SolverConfig::default()
    };
    let window = ProbeWindow::new(-2.0, 2.0, 33).unwrap();
    let r = bulk_convergence(&harmonic(), 1.0, &[0.0], &[0.02, 0.01, 0.005], &window, &cfg)
        .map_err(|e| e.to_string())?;
    let err = r.column("sup_error").unwrap();
    for w in err.windows(2) {
        let q = w[1] / w[0];
        ensure((0.3..=0.8).contains(&q), format!("successive ratio {q:.3} outside [0.3, 0.8]; errors {err:?}"))?;
    }
    within(start.elapsed(), 120.0)?;
    Ok(format!("sup errors {err:.3?}"))
}

fn edge_universality() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig {
        resolution: 1.0 / 25.0,
        margin: 0.44,
        ..SolverConfig::default()
    };
    let window = ProbeWindow::new(-2.0, 2.0, 33).unwrap();
    let r = edge_convergence(&harmonic(), 1.0, &[1.0], &[1e-2, 1.25e-3], &window, &cfg)
        .map_err(|e| e.to_string())?;
    let err = r.column("sup_error").unwrap();
    let q = err[1] / err[0];
    ensure(q <= 0.7, format!("error ratio {q:.3} > 0.7; errors {err:?}"))?;
    within(start.elapsed(), 120.0)?;
    Ok(format!("sup errors {err:.3?}, ratio {q:.3}"))
}

fn airy_function() -> Outcome {
    let (a0, d0) = airy_pair(0.0);
    let (oa, od) = common::airy_oracle(0.0);
    ensure((oa - 0.3550280539).abs() < 1e-9 && (od + 0.2588194038).abs() < 1e-9, "oracle disagrees with table")?;
    ensure((a0 - oa).abs() <= 1e-8, format!("Ai(0) = {a0}, oracle {oa}"))?;
    ensure((d0 - od).abs() <= 1e-8, format!("Ai'(0) = {d0}, oracle {od}"))?;
    for x in [-4.5, -2.0, 1.5, 3.0] {
        let (a, d) = airy_pair(x);
        let (oa, od) = common::airy_oracle(x);
        ensure((a - oa).abs() <= 1e-8 && (d - od).abs() <= 1e-8, format!("x = {x}: ({a}, {d}) vs ({oa}, {od})"))?;
    }
    let step = 1e-4;
    let mut residual: f64 = 0.0;
    for i in 0..=200 {
        let x = -5.0 + 0.05 * i as f64;
        let second = (airy_pair(x + step).1 - airy_pair(x - step).1) / (2.0 * step);
        residual = residual.max((second - x * airy_ai(x)).abs());
    }
    ensure(residual <= 1e-6, format!("ODE residual {residual:e}"))?;
    Ok(format!("Ai(0) = {a0:.10}, Ai'(0) = {d0:.10}, ODE residual {residual:.1e}"))
}

fn kernel_identities() -> Outcome {
    let mut diag_ok = true;
    let mut sine_err: f64 = 0.0;
    let mut planar_err: f64 = 0.0;
    for i in 0..40 {
        let a = -3.0 + 0.15 * i as f64;
        diag_ok &= bulk_kernel(1, &[a], &[a]) == 1.0 && bulk_kernel(2, &[a, 0.3 * a], &[a, 0.3 * a]) == 1.0;
        for j in 0..40 {
            let b = -2.7 + 0.14 * j as f64;
            sine_err = sine_err.max((bulk_kernel(1, &[a], &[b]) - sine_kernel(a, b)).abs());
            let (x, y) = ([a, 0.5 * b], [b, -0.2 * a]);
            let r = ((a - b).powi(2) + (0.5 * b + 0.2 * a).powi(2)).sqrt();
            planar_err = planar_err.max((bulk_kernel(2, &x, &y).powi(2) - common::planar_bulk_kernel(r).powi(2)).abs());
        }
    }
    ensure(diag_ok, "bulk kernel diagonal is not exactly 1")?;
    ensure(sine_err <= 1e-10, format!("n = 1 bulk vs sine: {sine_err:e}"))?;
    ensure(planar_err <= 1e-10, format!("n = 2 |K|²: {planar_err:e}"))?;
    let mut edge_err: f64 = 0.0;
    for i in 0..=12 {
        for j in 0..=12 {
            let (x, y) = (-4.0 + 0.5 * i as f64, -4.0 + 0.5 * j as f64);
            let k = edge_kernel_default(1, &[x], &[y]).map_err(|e| e.to_string())?;
            edge_err = edge_err.max((k - airy_kernel_1d(x, y)).abs());
        }
    }
    ensure(edge_err <= 1e-6, format!("edge vs Airy kernel: {edge_err:e}"))?;
    Ok(format!("sine {sine_err:.1e}, planar {planar_err:.1e}, edge {edge_err:.1e}"))
}

fn dpp_identities() -> Outcome {
    let cfg = SolverConfig::default();
    let eigs = cfg.solve(&harmonic(), 1.0, 0.05, 1, 1.0).map_err(|e| e.to_string())?;
    let dpp = ProjectionDPP::from_eigensystem(&eigs, 1.0).map_err(|e| e.to_string())?;
    let n = dpp.rank();
    ensure((1..=30).contains(&n), format!("rank {n} outside 1..=30"))?;
    let g = TestFunction::gaussian(vec![0.2], 0.3).unwrap();
    let f: Vec<f64> = eigs.grid().points().iter().map(|p| 0.7 * g.eval(p)).collect();
    let (a, b, c) = (var_linear_stat(&dpp, &f), var_commutator(&dpp, &f), var_double_sum(&dpp, &f));
    let spread = (a - b).abs().max((a - c).abs()).max((b - c).abs());
    ensure(spread <= 1e-10, format!("variance formulas differ by {spread:e}"))?;
    let exact = laplace_functional(&dpp, &f).map_err(|e| e.to_string())?;
    let trials = 10_000;
    let draws = monte_carlo(&dpp, RngState::new(20_240_501), trials, |c| (c.len(), (-c.linear_statistic(&f)).exp()))
        .map_err(|e| e.to_string())?;
    ensure(draws.iter().all(|(len, _)| *len == n), "a projection sample had the wrong cardinality")?;
    let vals: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let mean = vals.iter().sum::<f64>() / trials as f64;
    let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    let se = sd / (trials as f64).sqrt();
    let z = (mean - exact) / se;
    ensure(z.abs() <= 3.0, format!("Laplace functional {exact} vs Monte-Carlo {mean} ({z:.2} SE)"))?;
    Ok(format!("N = {n}, variance spread {spread:.1e}, Laplace z = {z:.2}"))
}

fn free_variance() -> Outcome {
    let mut worst: f64 = 0.0;
    for (n, step) in [(1, 0.05), (2, 0.1)] {
        let g = TestFunction::gaussian(vec![0.0; n], 0.3).unwrap();
        let half_cells = (g.support_radius() / step).ceil() as usize + 2;
        let grid = Grid::centered(n, half_cells, step).unwrap();
        let exact = free_variance_exact(n, 10.0, &g).map_err(|e| e.to_string())?;
        let brute = free_variance_bruteforce(n, 10.0, &g, &grid).map_err(|e| e.to_string())?;
        let rel = (brute / exact - 1.0).abs();
        ensure(rel <= 1e-4, format!("n = {n}: Plancherel {exact} vs brute force {brute}"))?;
        worst = worst.max(rel);
    }
    let g = TestFunction::gaussian(vec![0.0, 0.0], 0.3).unwrap();
    let sigma2 = sigma_fourier(&g);
    let ratios: Vec<f64> = [20.0, 40.0, 80.0]
        .iter()
        .map(|&mu| free_variance_exact(2, mu, &g).map(|v| v / (sigma_sq(2) * mu * sigma2)))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let monotone = ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs());
    ensure(monotone, format!("ratios not monotone towards 1: {ratios:?}"))?;
    ensure((ratios[2] - 1.0).abs() <= 0.1, format!("ratio at μ = 80 is {}", ratios[2]))?;
    Ok(format!("brute-force rel. error {worst:.1e}, ratios {ratios:.4?}"))
}

fn seminorm_duality() -> Outcome {
    let g = TestFunction::gaussian(vec![0.1], 0.4).unwrap();
    let fourier = sigma_fourier(&g);
    let slob = sigma_slobodeckij(&g) / ((2.0 * PI).powi(2) * sigma_sq(1));
    let rel = (slob / fourier - 1.0).abs();
    ensure(rel <= 0.01, format!("Fourier {fourier} vs Slobodeckij {slob}"))?;
    let mut worst: f64 = 0.0;
    let cases = [
        TestFunction::gaussian(vec![0.1], 0.4).unwrap(),
        TestFunction::gaussian(vec![0.0, 0.2], 0.5).unwrap(),
        TestFunction::smooth_indicator(vec![0.0], 0.5, 0.3).unwrap(),
    ];
    for g in &cases {
        let n = g.dimension() as i32;
        let base = sigma_fourier(g);
        for eps in [0.5, 0.2, 3.0] {
            let shift: Vec<f64> = g.center().iter().map(|c| (1.0 - eps) * c).collect();
            let scaled = sigma_fourier(&g.rescaled(&shift, eps).unwrap());
            let rel = (scaled / (eps.powi(n - 1) * base) - 1.0).abs();
            ensure(rel <= 1e-6, format!("{g} at ε = {eps}: relative error {rel:e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("duality rel. error {rel:.1e}, scaling rel. error {worst:.1e}"))
}

fn clt() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig {
        resolution: 0.25,
        ..SolverConfig::default()
    };
    let eigs = cfg.solve(&harmonic(), 1.0, 0.02, 1, 1.0).map_err(|e| e.to_string())?;
    let dpp = ProjectionDPP::from_eigensystem(&eigs, 1.0).map_err(|e| e.to_string())?;
    let g = TestFunction::gaussian(vec![0.0], 0.3).unwrap();
    let r = clt_monte_carlo(&dpp, &g, 10_000, 12345).map_err(|e| e.to_string())?;
    let p = r.summary_value("ks_p_value").unwrap();
    let skew = r.summary_value("skewness").unwrap();
    ensure(p >= 0.01, format!("KS p-value {p:.4}"))?;
    ensure(skew.abs() <= 0.1, format!("skewness {skew:.4}"))?;
    within(start.elapsed(), 300.0)?;
    Ok(format!("N = {}, KS p = {p:.3}, skewness = {skew:.3}", dpp.rank()))
}

fn lln() -> Outcome {
    let r = lln_wasserstein(&harmonic(), 1.0, &[0.05, 0.02], 200, 7, &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    let w = r.column("mean_w1").unwrap();
    ensure(w[1] < w[0], format!("mean W1 did not decrease: {w:?}"))?;
    Ok(format!("mean W1 {:.4} -> {:.4}", w[0], w[1]))
}

fn agmon() -> Outcome {
    let (mu, delta) = (1.0, 0.2);
    let eigs = SolverConfig::default()
        .solve(&harmonic(), mu, 0.05, 1, mu + delta)
        .map_err(|e| e.to_string())?;
    let r = agmon_check(&eigs, &harmonic(), mu, delta).map_err(|e| e.to_string())?;
    ensure((r.bound - 11.0).abs() < 1e-12, format!("bound {}", r.bound))?;
    ensure(!r.rows.is_empty(), "no eigenfunction below μ")?;
    ensure(r.holds(), format!("largest weighted norm {} exceeds {}", r.max_norm(), r.bound))?;
    Ok(format!("{} eigenfunctions, max weighted norm {:.3} <= {}", r.rows.len(), r.max_norm(), r.bound))
}

fn tail_bound() -> Outcome {
    let cases = [
        (TestFunction::gaussian(vec![0.0], 0.3).unwrap(), 1u64),
        (TestFunction::gaussian(vec![0.4], 0.2).unwrap(), 2),
        (TestFunction::smooth_indicator(vec![-0.2], 0.4, 0.3).unwrap(), 3),
    ];
    let mut cs = Vec::new();
    for (g, seed) in &cases {
        let r = gaussian_tail_check(&harmonic(), 1.0, g, 0.05, 10_000, *seed, &SolverConfig::default())
            .map_err(|e| e.to_string())?;
        let c = r.summary_value("fitted_c").unwrap();
        ensure(c > 0.0, format!("{g}: fitted c = {c}"))?;
        let exceed = r.column("exceedance").unwrap();
        let t = r.column("t").unwrap();
        for (t, p) in t.iter().zip(&exceed) {
            let env = 2.0 * (-c * t * t).exp();
            ensure(*p <= env + 1e-15, format!("{g}: exceedance {p} above envelope {env} at t = {t}"))?;
        }
        cs.push(c);
    }
    Ok(format!("fitted c {cs:.3?}"))
}

const CORPUS: [&str; 50] = [
    "x1^2",
    "x1^2 + x2^2",
    "x1^4 - x1^2",
    "(x1 - 1)^2 * (x1 + 1)^2",
    "0.5 * x1^2 + 2 * x2^2",
    "exp(x1)",
    "exp(-x1^2)",
    "cos(x1) + sin(x2)",
    "sin(x1 * x2)",
    "x1 / (1 + x1^2)",
    "1 / (2 + cos(x1))",
    "-x1",
    "- -x1",
    "-(x1 + x2)^2",
    "x1^-2 + 3",
    "pi * x1^2",
    "2^3 * x1",
    "x1 - x2 - 1",
    "x1 / x2 / 3",
    "x1 * (x2 - 4) / 5",
    "exp(sin(x1))",
    "cos(exp(0.1 * x1))",
    "(x1^2 + x2^2)^2",
    "x1^2 * x2^2 + 0.25",
    "1e-3 * x1^6",
    "2.5E1 * x1",
    "sin(pi * x1) * cos(pi * x2)",
    "x1^3 - 3 * x1 * x2^2",
    "(1 + x1)^-1",
    "exp(x1 - x2) + exp(x2 - x1)",
    "x2",
    "3",
    "pi",
    "-pi / 2 + x1",
    "((x1))",
    "x1^2^2",
    "x1 * x1 * x1",
    "4 - x1^2",
    "0.1 * sin(10 * x1) + x1^2",
    "x1^2 + 0.3 * x1^3",
    "cos(x1)^2 + sin(x1)^2",
    "exp(-(x1 - 0.5)^2 / 0.1)",
    "(x1 - x2)^2 / (1 + x1^2 + x2^2)",
    "sin(x1)/x2^2",
    "x1^2 - 2 * x1 * x2 + x2^2",
    "1 - exp(-x1^2 - x2^2)",
    "x1^5 / 120 - x1^3 / 6 + x1",
    "-(-(-x2))",
    "2 * (3 * (4 * x1))",
    "exp(cos(sin(x1 + x2)))",
];

fn parser() -> Outcome {
    let probes = [[0.3, 0.7], [-1.1, 1.4], [0.9, -0.6]];
    let mut worst_grad: f64 = 0.0;
    for text in CORPUS {
        let v = parse_potential(text).map_err(|e| format!("`{text}`: {e}"))?;
        let printed = v.to_string();
        let again = parse_potential(&printed).map_err(|e| format!("`{printed}` does not reparse: {e}"))?;
        ensure(again.ast() == v.ast(), format!("`{text}` -> `{printed}` changes the tree"))?;
        ensure(again.to_string() == printed, format!("`{printed}` is not a fixed point"))?;
        for x in probes {
            let grad = v.gradient(&x);
            for i in 0..2 {
                let h = 1e-5;
                let (mut a, mut b) = (x, x);
                a[i] += h;
                b[i] -= h;
                let fd = (v.eval(&a) - v.eval(&b)) / (2.0 * h);
                let err = (fd - grad[i]).abs() / fd.abs().max(1.0);
                ensure(err <= 1e-6, format!("`{text}` ∂{} at {x:?}: {} vs {fd}", i + 1, grad[i]))?;
                worst_grad = worst_grad.max(err);
            }
        }
    }
    Ok(format!("{} expressions, max gradient error {worst_grad:.1e}", CORPUS.len()))
}

fn main() {
    // Accept and ignore libtest flags such as --nocapture.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Criterion; 13] = [
        ("weyl law", weyl_law),
        ("bulk universality", bulk_universality),
        ("edge universality", edge_universality),
        ("airy function", airy_function),
        ("kernel identities", kernel_identities),
        ("exact dpp identities", dpp_identities),
        ("free-laplacian variance", free_variance),
        ("h1/2 duality", seminorm_duality),
        ("clt", clt),
        ("lln", lln),
        ("agmon bound", agmon),
        ("tail bound", tail_bound),
        ("parser", parser),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
