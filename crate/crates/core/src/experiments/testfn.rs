use std::f64::consts::PI;
use std::fmt;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::schrodinger::PotentialExpr;

/// Shape of a test function.
#[derive(Debug, Clone, PartialEq)]
pub enum TestKind {
    /// exp(-|x - c|² / (2 w²)).
    GaussianBump { center: Vec<f64>, width: f64 },
    /// 1 on the ball of radius `radius`, 0 outside radius + smoothing, with a
    /// C^∞ transition in between.
    SmoothIndicator {
        center: Vec<f64>,
        radius: f64,
        smoothing: f64,
    },
    /// expr((x - c)/scale) for |x - c| ≤ support_radius · scale, zero beyond.
    Custom {
        expr: PotentialExpr,
        center: Vec<f64>,
        scale: f64,
        support_radius: f64,
    },
}

/// A smooth, effectively compactly supported function on ℝ^n.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    kind: TestKind,
    dimension: usize,
}

impl TestFunction {
    pub fn gaussian(center: Vec<f64>, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::invalid("bump width must be positive"));
        }
        let dimension = check_center(&center)?;
        Ok(Self {
            kind: TestKind::GaussianBump { center, width },
            dimension,
        })
    }

    pub fn smooth_indicator(center: Vec<f64>, radius: f64, smoothing: f64) -> Result<Self> {
        if !(radius >= 0.0) || !(smoothing > 0.0) {
            return Err(Error::invalid("indicator needs radius >= 0 and smoothing > 0"));
        }
        let dimension = check_center(&center)?;
        Ok(Self {
            kind: TestKind::SmoothIndicator {
                center,
                radius,
                smoothing,
            },
            dimension,
        })
    }

    pub fn custom(expr: PotentialExpr, dimension: usize, support_radius: f64) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::invalid("test functions live in dimension 1 or 2"));
        }
        expr.check_dimension(dimension)?;
        if !(support_radius > 0.0) {
            return Err(Error::invalid("support radius must be positive"));
        }
        Ok(Self {
            kind: TestKind::Custom {
                expr,
                center: vec![0.0; dimension],
                scale: 1.0,
                support_radius,
            },
            dimension,
        })
    }

    pub fn kind(&self) -> &TestKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn center(&self) -> &[f64] {
        match &self.kind {
            TestKind::GaussianBump { center, .. }
            | TestKind::SmoothIndicator { center, .. }
            | TestKind::Custom { center, .. } => center,
        }
    }

    /// Radius beyond which |g| ≤ 1e-12.
    pub fn support_radius(&self) -> f64 {
        match &self.kind {
            TestKind::GaussianBump { width, .. } => 7.5 * width,
            TestKind::SmoothIndicator { radius, smoothing, .. } => radius + smoothing,
            TestKind::Custom { scale, support_radius, .. } => scale * support_radius,
        }
    }

    /// Length over which g varies; sets quadrature steps.
    pub fn feature_length(&self) -> f64 {
        match &self.kind {
            TestKind::GaussianBump { width, .. } => *width,
            TestKind::SmoothIndicator { smoothing, .. } => *smoothing,
            TestKind::Custom { scale, support_radius, .. } => scale * support_radius / 10.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let c = self.center();
        let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        match &self.kind {
            TestKind::GaussianBump { width, .. } => (-0.5 * r2 / (width * width)).exp(),
            TestKind::SmoothIndicator { radius, smoothing, .. } => {
                let t = (radius + smoothing - r2.sqrt()) / smoothing;
                smooth_step(t)
            }
            TestKind::Custom {
                expr,
                scale,
                support_radius,
                ..
            } => {
                if r2.sqrt() > scale * support_radius {
                    return 0.0;
                }
                let z: Vec<f64> = x.iter().zip(c).map(|(a, b)| (a - b) / scale).collect();
                expr.eval(&z)
            }
        }
    }

    /// ∇g by a fourth-order central difference.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let step = 1e-3 * self.feature_length();
        (0..x.len())
            .map(|i| {
                let at = |d: f64| {
                    let mut y = x.to_vec();
                    y[i] += d;
                    self.eval(&y)
                };
                (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step)
            })
            .collect()
    }

    /// T g = g((· - x0) / ε).
    pub fn rescaled(&self, x0: &[f64], eps: f64) -> Result<Self> {
        if x0.len() != self.dimension || !(eps > 0.0) {
            return Err(Error::invalid("rescaling needs a point of matching dimension and eps > 0"));
        }
        let shift = |c: &[f64]| -> Vec<f64> { c.iter().zip(x0).map(|(c, x)| x + eps * c).collect() };
        let kind = match &self.kind {
            TestKind::GaussianBump { center, width } => TestKind::GaussianBump {
                center: shift(center),
                width: eps * width,
            },
            TestKind::SmoothIndicator {
                center,
                radius,
                smoothing,
            } => TestKind::SmoothIndicator {
                center: shift(center),
                radius: eps * radius,
                smoothing: eps * smoothing,
            },
            TestKind::Custom {
                expr,
                center,
                scale,
                support_radius,
            } => TestKind::Custom {
                expr: expr.clone(),
                center: shift(center),
                scale: eps * scale,
                support_radius: *support_radius,
            },
        };
        Ok(Self {
            kind,
            dimension: self.dimension,
        })
    }

    /// |ĝ(ξ)|² as a function of |ξ| when known in closed form (unitary
    /// transform, ĝ(ξ) = (2π)^{-n/2} ∫ g(x) e^{-ix·ξ} dx).
    pub fn radial_spectrum(&self) -> Option<impl Fn(f64) -> f64> {
        match &self.kind {
            TestKind::GaussianBump { width, .. } => {
                let w = *width;
                let n = self.dimension as i32;
                Some(move |k: f64| w.powi(2 * n) * (-w * w * k * k).exp())
            }
            _ => None,
        }
    }

    /// Samples of |ĝ|² on an FFT frequency lattice.
    pub fn sampled_spectrum(&self) -> Spectrum {
        // Zero-padded box (half-width 16R in n = 1, 8R in n = 2; the frequency
        // step controls the error at the |ξ| kink of the weights) with at least
        // 6 samples per feature length, 16 for the indicator transition.
        let per_feature = match self.kind {
            TestKind::GaussianBump { .. } => 6.0,
            _ => 16.0,
        };
        let half = if self.dimension == 1 { 16.0 } else { 8.0 } * self.support_radius();
        let m = ((2.0 * half * per_feature / self.feature_length()).ceil() as usize).next_power_of_two();
        let h = 2.0 * half / m as f64;
        let n = self.dimension;
        let c = self.center().to_vec();
        let coord = |i: usize, d: usize| c[d] - half + h * i as f64;
        let mut data: Vec<Complex<f64>> = if n == 1 {
            (0..m).map(|i| Complex::new(self.eval(&[coord(i, 0)]), 0.0)).collect()
        } else {
            (0..m * m)
                .map(|idx| Complex::new(self.eval(&[coord(idx % m, 0), coord(idx / m, 1)]), 0.0))
                .collect()
        };
        let fft = FftPlanner::new().plan_fft_forward(m);
        if n == 1 {
            fft.process(&mut data);
        } else {
            for row in data.chunks_mut(m) {
                fft.process(row);
            }
            let mut column = vec![Complex::new(0.0, 0.0); m];
            for j in 0..m {
                for i in 0..m {
                    column[i] = data[i * m + j];
                }
                fft.process(&mut column);
                for i in 0..m {
                    data[i * m + j] = column[i];
                }
            }
        }
        let dxi = 2.0 * PI / (m as f64 * h);
        let freq = |k: usize| if k < m / 2 { k as f64 } else { k as f64 - m as f64 } * dxi;
        let scale = h.powi(2 * n as i32) / (2.0 * PI).powi(n as i32);
        let samples = data
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let k = if n == 1 {
                    freq(idx).abs()
                } else {
                    freq(idx % m).hypot(freq(idx / m))
                };
                (k, z.norm_sqr() * scale)
            })
            .collect();
        Spectrum {
            dimension: n,
            step: dxi,
            samples,
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |c: &[f64]| c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        match &self.kind {
            TestKind::GaussianBump { center, width } => {
                write!(f, "gaussian(center={}; width={width})", join(center))
            }
            TestKind::SmoothIndicator {
                center,
                radius,
                smoothing,
            } => write!(
                f,
                "indicator(center={}; radius={radius}; smoothing={smoothing})",
                join(center)
            ),
            TestKind::Custom {
                expr,
                center,
                scale,
                support_radius,
            } => write!(
                f,
                "custom({expr}; center={}; scale={scale}; support={support_radius})",
                join(center)
            ),
        }
    }
}

/// |ĝ|² at the nodes of a frequency lattice with spacing `step`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub dimension: usize,
    pub step: f64,
    /// (|ξ|, |ĝ(ξ)|²) per lattice node.
    pub samples: Vec<(f64, f64)>,
}

impl Spectrum {
    /// ∫ F(|ξ|) |ĝ(ξ)|² dξ by the lattice sum.
    pub fn integrate<F: Fn(f64) -> f64>(&self, weight: F) -> f64 {
        self.samples.iter().map(|&(k, p)| weight(k) * p).sum::<f64>() * self.step.powi(self.dimension as i32)
    }
}

fn check_center(center: &[f64]) -> Result<usize> {
    match center.len() {
        1 | 2 => Ok(center.len()),
        d => Err(Error::invalid(format!("test functions live in dimension 1 or 2, got {d}"))),
    }
}

/// 0 for t ≤ 0, 1 for t ≥ 1, C^∞ in between.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}
