//! Command-line front end.
//!
//! Options may also come from a `key=value` file given by `--config`; keys are
//! long flag names without dashes and flags on the command line win. Reports
//! go to `--output` or stdout, diagnostics and wall time to stderr. Exit codes:
//! 0 on success, 1 on invalid input, 2 on numerical failure.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::dpp::{
    configurations_to_csv, mean_linear_stat, sample, var_commutator, var_double_sum, var_linear_stat, ProjectionDPP,
    RngState,
};
use crate::error::{Error, Result};
use crate::experiments::{
    bulk_convergence, clt_monte_carlo, edge_convergence, free_variance_bruteforce, free_variance_exact,
    gaussian_tail_check, lln_wasserstein, mesoscopic_variance_scan, sigma_fourier, sigma_slobodeckij, sigma_sq,
    weyl_check, ExperimentReport, ProbeWindow, SolverConfig, TestFunction,
};
use crate::kernels::{
    airy_kernel_1d, bulk_kernel, bulk_scale, edge_kernel_default, edge_scale, free_laplacian_kernel, sine_kernel,
    KernelEvaluation, KernelKind,
};
use crate::schrodinger::{
    agmon_check, edge_rotation, grad_potential, parse_potential, projector_kernel, rescaled_kernel, EigenOptions, Grid,
    PotentialExpr, GRAMMAR,
};

#[derive(Debug, Parser)]
#[command(name = "fermilab", version, about = "Semiclassical free-fermion experiments")]
pub struct Cli {
    /// Size of the worker pool (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// File of key=value lines supplying defaults for the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalue counts against the Weyl law.
    Weyl {
        #[command(flatten)]
        pot: PotentialArgs,
        /// Comma-separated ħ values.
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.02,0.01")]
        hbar: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Tabulate a kernel on a window lattice.
    Kernel {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Dimension.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Axis lattice lo:hi:step.
        #[arg(long, default_value = "-2:2:0.05", allow_hyphen_values = true)]
        window: String,
        /// Wavenumber of the free kernel, Fermi level of the projector.
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        /// Potential of the projector kernel.
        #[arg(long)]
        potential: Option<String>,
        /// ħ of the projector kernel.
        #[arg(long, default_value_t = 0.05)]
        hbar: f64,
        /// Zoom point of the projector kernel (bulk or edge scaling is chosen
        /// from V(x0)); default is the origin.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Rescaled projector against the bulk kernel, per ħ.
    ConvergeBulk {
        #[command(flatten)]
        pot: PotentialArgs,
        #[arg(long, value_delimiter = ',', default_value = "0", allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.01,0.005")]
        hbar: Vec<f64>,
        #[command(flatten)]
        probes: ProbeArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Rescaled projector against the edge kernel, per ħ.
    ConvergeEdge {
        #[command(flatten)]
        pot: PotentialArgs,
        #[arg(long, value_delimiter = ',', default_value = "1", allow_hyphen_values = true)]
        x0: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.00125")]
        hbar: Vec<f64>,
        #[command(flatten)]
        probes: ProbeArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Exact samples of the fermion process.
    Sample {
        #[command(flatten)]
        pot: PotentialArgs,
        #[arg(long, default_value_t = 0.05)]
        hbar: f64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Variances of linear statistics.
    Variance {
        #[arg(long, value_enum, default_value_t = VarianceMode::Fermion)]
        mode: VarianceMode,
        #[command(flatten)]
        pot: PotentialArgs,
        /// ħ list (fermion mode uses the first value).
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        hbar: Vec<f64>,
        /// Fermi wavenumbers of the free process (free mode).
        #[arg(long, value_delimiter = ',', default_value = "10")]
        wavenumber: Vec<f64>,
        /// Lattice step of the brute-force sum (free mode); 0 skips it.
        #[arg(long, default_value_t = 0.05)]
        grid_step: f64,
        /// Zoom point (mesoscopic mode); default is the origin.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        /// ε = ħ^β (mesoscopic mode).
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[command(flatten)]
        test: TestFunctionArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// H^{1/2} seminorms of a test function and their scaling.
    Seminorm {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Rescaling factors ε.
        #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25")]
        eps: Vec<f64>,
        #[command(flatten)]
        test: TestFunctionArgs,
    },
    /// Monte-Carlo CLT for a linear statistic.
    Clt {
        #[command(flatten)]
        pot: PotentialArgs,
        #[arg(long, default_value_t = 0.02)]
        hbar: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        test: TestFunctionArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Wasserstein distance of the empirical measure to the density of states.
    Lln {
        #[command(flatten)]
        pot: PotentialArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.02")]
        hbar: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Exceedance frequencies of a centred linear statistic.
    Tail {
        #[command(flatten)]
        pot: PotentialArgs,
        #[arg(long, default_value_t = 0.02)]
        hbar: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        test: TestFunctionArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Weighted norms of eigenfunctions in the forbidden region.
    Agmon {
        #[command(flatten)]
        pot: PotentialArgs,
        #[arg(long, default_value_t = 0.05)]
        hbar: f64,
        #[arg(long, default_value_t = 0.2)]
        delta: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Bulk,
    Edge,
    Free,
    Sine,
    Airy,
    Projector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceMode {
    /// Three exact variance formulas for the fermion process.
    Fermion,
    /// Plancherel formula against the brute-force sum for the free process.
    Free,
    /// Mesoscopic scan ε = ħ^β.
    Mesoscopic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestKindArg {
    Gaussian,
    Indicator,
    Custom,
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    /// Potential V, e.g. "x1^2" (see the grammar in the README).
    #[arg(long)]
    potential: Option<String>,
    /// Fermi level μ.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Dimension.
    #[arg(long, default_value_t = 1)]
    dim: usize,
}

impl PotentialArgs {
    fn parse(&self) -> Result<PotentialExpr> {
        let text = self
            .potential
            .as_deref()
            .ok_or_else(|| Error::invalid("--potential is required"))?;
        let v = parse_potential(text)?;
        v.check_dimension(self.dim)?;
        Ok(v)
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Grid spacing in units of ħ.
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    /// Box margin: V ≥ μ + margin on the boundary.
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Lattice step of the box search.
    #[arg(long, default_value_t = 0.05)]
    box_step: f64,
    /// Largest box half-width.
    #[arg(long, default_value_t = 100.0)]
    box_cap: f64,
    /// Relative residual of the 2-D eigensolver.
    #[arg(long, default_value_t = 1e-11)]
    eigen_tolerance: f64,
    /// Sweep limit of the 2-D eigensolver.
    #[arg(long, default_value_t = 2000)]
    max_iterations: usize,
    /// Chebyshev filter degree of the 2-D eigensolver.
    #[arg(long, default_value_t = 12)]
    filter_degree: usize,
    /// Unknown count below which the 2-D eigensolver is dense.
    #[arg(long, default_value_t = 400)]
    dense_cutoff: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        if !(self.eigen_tolerance > 0.0) || self.max_iterations == 0 || self.filter_degree == 0 {
            return Err(Error::invalid(
                "eigensolver settings need tolerance > 0 and positive iteration and degree counts",
            ));
        }
        let cfg = SolverConfig {
            resolution: self.resolution,
            margin: self.margin,
            box_step: self.box_step,
            box_cap: self.box_cap,
            eigen: EigenOptions {
                tolerance: self.eigen_tolerance,
                max_iterations: self.max_iterations,
                filter_degree: self.filter_degree,
                dense_cutoff: self.dense_cutoff,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Rescaled window lo:hi.
    #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
    window: String,
    /// Probes per axis.
    #[arg(long, default_value_t = 33)]
    probes: usize,
}

impl ProbeArgs {
    fn window(&self) -> Result<ProbeWindow> {
        let parts = parse_colon_list(&self.window, 2)?;
        ProbeWindow::new(parts[0], parts[1], self.probes)
    }
}

#[derive(Debug, Args)]
pub struct TestFunctionArgs {
    #[arg(long, value_enum, default_value_t = TestKindArg::Gaussian)]
    test_function: TestKindArg,
    /// Centre (default: origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Vec<f64>,
    /// Gaussian width.
    #[arg(long, default_value_t = 0.3)]
    width: f64,
    /// Indicator radius.
    #[arg(long, default_value_t = 0.5)]
    radius: f64,
    /// Indicator transition length.
    #[arg(long, default_value_t = 0.2)]
    smoothing: f64,
    /// Custom expression in x1, x2 (same grammar as potentials).
    #[arg(long)]
    expr: Option<String>,
    /// Custom support radius.
    #[arg(long, default_value_t = 1.0)]
    support_radius: f64,
}

impl TestFunctionArgs {
    fn build(&self, dim: usize) -> Result<TestFunction> {
        let center = if self.center.is_empty() { vec![0.0; dim] } else { self.center.clone() };
        if center.len() != dim {
            return Err(Error::invalid(format!("--center needs {dim} coordinates")));
        }
        let mut g = match self.test_function {
            TestKindArg::Gaussian => TestFunction::gaussian(center.clone(), self.width)?,
            TestKindArg::Indicator => TestFunction::smooth_indicator(center.clone(), self.radius, self.smoothing)?,
            TestKindArg::Custom => {
                let text = self.expr.as_deref().ok_or_else(|| Error::invalid("--expr is required"))?;
                TestFunction::custom(parse_potential(text)?, dim, self.support_radius)?
            }
        };
        if matches!(self.test_function, TestKindArg::Custom) {
            g = g.rescaled(&center, 1.0)?;
        }
        Ok(g)
    }
}

fn parse_colon_list(text: &str, len: usize) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("cannot parse `{text}` as {len} colon-separated numbers")))?;
    if parts.len() != len {
        return Err(Error::invalid(format!("expected {len} colon-separated numbers, got `{text}`")));
    }
    Ok(parts)
}

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or_else(|| Error::invalid("--seed is required for stochastic subcommands"))
}

fn origin_or(x0: &[f64], dim: usize) -> Result<Vec<f64>> {
    let x = if x0.is_empty() { vec![0.0; dim] } else { x0.to_vec() };
    if x.len() != dim {
        return Err(Error::invalid(format!("--x0 needs {dim} coordinates")));
    }
    Ok(x)
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => return report_error(&e, stderr),
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    let _ = writeln!(stderr, "\npotential grammar:\n{GRAMMAR}");
                    1
                }
            };
        }
    };
    let start = Instant::now();
    let result = match cli.threads {
        Some(0) => Err(Error::invalid("--threads must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Numerical(format!("cannot build the worker pool: {e}")))
            .and_then(|pool| pool.install(|| execute(&cli.command))),
        None => execute(&cli.command),
    };
    let text = match result {
        Ok(t) => t,
        Err(e) => return report_error(&e, stderr),
    };
    let written = match &cli.output {
        Some(path) => fs::write(path, &text).map_err(Error::from),
        None => stdout.write_all(text.as_bytes()).map_err(Error::from),
    };
    if let Err(e) = written {
        return report_error(&e, stderr);
    }
    let _ = writeln!(stderr, "wall_time_s={:.3}", start.elapsed().as_secs_f64());
    0
}

fn report_error(e: &Error, stderr: &mut dyn Write) -> i32 {
    let _ = writeln!(stderr, "error: {e}");
    if matches!(e, Error::Syntax { .. } | Error::UnknownIdentifier { .. }) {
        let _ = writeln!(stderr, "\npotential grammar:\n{GRAMMAR}");
    }
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Splices `--key=value` pairs from the config file directly after the
/// subcommand name, skipping keys already given on the command line.
fn merge_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            path = Some(
                args.get(i + 1)
                    .cloned()
                    .ok_or_else(|| Error::invalid("--config needs a file"))?,
            );
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Error::invalid(format!("cannot read config `{path}`: {e}")))?;
    let command = Cli::command();
    let names: Vec<String> = command.get_subcommands().map(|s| s.get_name().to_string()).collect();
    let Some(pos) = args.iter().position(|a| names.contains(a)) else {
        return Ok(args);
    };
    let sub = command
        .find_subcommand(&args[pos])
        .expect("subcommand listed above");
    let mut allowed: BTreeSet<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    allowed.insert("threads".into());
    allowed.insert("output".into());
    let mut extra = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().trim_start_matches("--");
        let given = args.iter().any(|a| {
            a.strip_prefix("--")
                .map(|f| f == key || f.strip_prefix(key).is_some_and(|r| r.starts_with('=')))
                .unwrap_or(false)
        });
        if !allowed.contains(key) {
            return Err(Error::invalid(format!(
                "config line {}: unknown key `{key}` for `{}`",
                lineno + 1,
                args[pos]
            )));
        }
        if !given {
            extra.push(format!("--{key}={}", value.trim()));
        }
    }
    let mut merged = args[..=pos].to_vec();
    merged.extend(extra);
    merged.extend_from_slice(&args[pos + 1..]);
    Ok(merged)
}

fn execute(command: &Command) -> Result<String> {
    match command {
        Command::Weyl { pot, hbar, solver } => {
            let v = pot.parse()?;
            Ok(weyl_check(&v, pot.mu, pot.dim, hbar, &solver.config()?)?.to_csv())
        }
        Command::Kernel {
            kind,
            n,
            window,
            mu,
            potential,
            hbar,
            x0,
            solver,
        } => kernel_table(*kind, *n, window, *mu, potential.as_deref(), *hbar, x0, solver),
        Command::ConvergeBulk {
            pot,
            x0,
            hbar,
            probes,
            solver,
        } => {
            let v = pot.parse()?;
            let x0 = origin_or(x0, pot.dim)?;
            Ok(bulk_convergence(&v, pot.mu, &x0, hbar, &probes.window()?, &solver.config()?)?.to_csv())
        }
        Command::ConvergeEdge {
            pot,
            x0,
            hbar,
            probes,
            solver,
        } => {
            let v = pot.parse()?;
            let x0 = origin_or(x0, pot.dim)?;
            Ok(edge_convergence(&v, pot.mu, &x0, hbar, &probes.window()?, &solver.config()?)?.to_csv())
        }
        Command::Sample {
            pot,
            hbar,
            trials,
            seed,
            solver,
        } => {
            let seed = require_seed(*seed)?;
            let v = pot.parse()?;
            let eigs = solver.config()?.solve(&v, pot.mu, *hbar, pot.dim, pot.mu)?;
            let dpp = ProjectionDPP::from_eigensystem(&eigs, pot.mu)?;
            let samples = (0..*trials)
                .map(|t| sample(&dpp, RngState::new(seed).with_stream(t as u64)))
                .collect::<Result<Vec<_>>>()?;
            let mut out = format!(
                "# experiment=sample\n# version={}\n{}",
                env!("CARGO_PKG_VERSION"),
                RngState::new(seed).header()
            );
            out.push_str(&format!(
                "# potential={v}\n# mu={}\n# hbar={hbar}\n# trials={trials}\n# rank={}\n",
                pot.mu,
                dpp.rank()
            ));
            out.push_str(&configurations_to_csv(&samples, pot.dim));
            Ok(out)
        }
        Command::Variance {
            mode,
            pot,
            hbar,
            wavenumber,
            grid_step,
            x0,
            beta,
            test,
            solver,
        } => match mode {
            VarianceMode::Fermion => {
                let v = pot.parse()?;
                let g = test.build(pot.dim)?;
                let h = *hbar.first().ok_or_else(|| Error::invalid("--hbar is empty"))?;
                let eigs = solver.config()?.solve(&v, pot.mu, h, pot.dim, pot.mu)?;
                let dpp = ProjectionDPP::from_eigensystem(&eigs, pot.mu)?;
                let values: Vec<f64> = eigs.grid().points().iter().map(|p| g.eval(p)).collect();
                let mut r = ExperimentReport::new(
                    "variance-fermion",
                    &["hbar", "rank", "mean", "var_trace", "var_commutator", "var_double_sum"],
                );
                r.param("potential", &v).param("mu", pot.mu).param("test_function", &g);
                r.push_row(vec![
                    h,
                    dpp.rank() as f64,
                    mean_linear_stat(&dpp, &values),
                    var_linear_stat(&dpp, &values),
                    var_commutator(&dpp, &values),
                    var_double_sum(&dpp, &values),
                ]);
                Ok(r.to_csv())
            }
            VarianceMode::Free => {
                let n = pot.dim;
                let g = test.build(n)?;
                let sigma2 = sigma_fourier(&g);
                let mut r = ExperimentReport::new(
                    "variance-free",
                    &["wavenumber", "exact", "bruteforce", "relative_difference", "asymptotic", "ratio"],
                );
                r.param("dimension", n).param("test_function", &g).param("grid_step", grid_step);
                for &mu in wavenumber {
                    let exact = free_variance_exact(n, mu, &g)?;
                    let brute = if *grid_step > 0.0 {
                        let reach = g.center().iter().map(|c| c.abs()).fold(0.0, f64::max) + g.support_radius();
                        let grid = Grid::centered(n, (reach / grid_step).ceil() as usize + 1, *grid_step)?;
                        free_variance_bruteforce(n, mu, &g, &grid)?
                    } else {
                        f64::NAN
                    };
                    let asymptotic = sigma_sq(n) * mu.powi(n as i32 - 1) * sigma2;
                    r.push_row(vec![mu, exact, brute, (brute - exact).abs() / exact, asymptotic, exact / asymptotic]);
                }
                Ok(r.to_csv())
            }
            VarianceMode::Mesoscopic => {
                let v = pot.parse()?;
                let g = test.build(pot.dim)?;
                let x0 = origin_or(x0, pot.dim)?;
                Ok(mesoscopic_variance_scan(&v, pot.mu, &x0, hbar, *beta, &g, &solver.config()?)?.to_csv())
            }
        },
        Command::Seminorm { dim, eps, test } => {
            let g = test.build(*dim)?;
            let base = sigma_fourier(&g);
            let n = *dim;
            let mut r = ExperimentReport::new(
                "seminorm",
                &["eps", "sigma_fourier", "scaled_reference", "sigma_slobodeckij", "identity_ratio"],
            );
            r.param("dimension", n).param("test_function", &g);
            let constant = (2.0 * std::f64::consts::PI).powi(n as i32 + 1) * sigma_sq(n);
            for &e in eps {
                // g((x - c)/ε + c): same centre, width scaled by ε.
                let shift: Vec<f64> = g.center().iter().map(|c| (1.0 - e) * c).collect();
                let t = g.rescaled(&shift, e)?;
                let fourier = sigma_fourier(&t);
                let slob = sigma_slobodeckij(&t);
                r.push_row(vec![e, fourier, e.powi(n as i32 - 1) * base, slob, constant * fourier / slob]);
            }
            Ok(r.to_csv())
        }
        Command::Clt {
            pot,
            hbar,
            trials,
            seed,
            test,
            solver,
        } => {
            let seed = require_seed(*seed)?;
            let v = pot.parse()?;
            let g = test.build(pot.dim)?;
            let eigs = solver.config()?.solve(&v, pot.mu, *hbar, pot.dim, pot.mu)?;
            let dpp = ProjectionDPP::from_eigensystem(&eigs, pot.mu)?;
            let mut r = clt_monte_carlo(&dpp, &g, *trials, seed)?;
            r.param("potential", &v).param("mu", pot.mu).param("hbar", hbar);
            Ok(r.to_csv())
        }
        Command::Lln {
            pot,
            hbar,
            trials,
            seed,
            solver,
        } => {
            let seed = require_seed(*seed)?;
            let v = pot.parse()?;
            Ok(lln_wasserstein(&v, pot.mu, hbar, *trials, seed, &solver.config()?)?.to_csv())
        }
        Command::Tail {
            pot,
            hbar,
            trials,
            seed,
            test,
            solver,
        } => {
            let seed = require_seed(*seed)?;
            let v = pot.parse()?;
            let g = test.build(pot.dim)?;
            Ok(gaussian_tail_check(&v, pot.mu, &g, *hbar, *trials, seed, &solver.config()?)?.to_csv())
        }
        Command::Agmon {
            pot,
            hbar,
            delta,
            solver,
        } => {
            let v = pot.parse()?;
            let eigs = solver.config()?.solve(&v, pot.mu, *hbar, pot.dim, pot.mu + delta)?;
            let report = agmon_check(&eigs, &v, pot.mu, *delta)?;
            Ok(format!(
                "# experiment=agmon\n# version={}\n# potential={v}\n# hbar={hbar}\n# holds={}\n{}",
                env!("CARGO_PKG_VERSION"),
                report.holds(),
                report.to_csv()
            ))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn kernel_table(
    kind: KindArg,
    n: usize,
    window: &str,
    mu: f64,
    potential: Option<&str>,
    hbar: f64,
    x0: &[f64],
    solver: &SolverArgs,
) -> Result<String> {
    if !(1..=2).contains(&n) {
        return Err(Error::invalid("kernel tables support n = 1 and n = 2"));
    }
    let w = parse_colon_list(window, 3)?;
    if !(w[2] > 0.0) || !(w[0] <= w[1]) {
        return Err(Error::invalid("window needs lo <= hi and step > 0"));
    }
    let count = ((w[1] - w[0]) / w[2] + 1e-9).floor() as usize + 1;
    let axis: Vec<f64> = (0..count).map(|i| w[0] + w[2] * i as f64).collect();
    let points: Vec<Vec<f64>> = if n == 1 {
        axis.iter().map(|&a| vec![a]).collect()
    } else {
        axis.iter().flat_map(|&b| axis.iter().map(move |&a| vec![a, b])).collect()
    };
    let one_dimensional = || -> Result<()> {
        if n != 1 {
            return Err(Error::invalid("this kernel is one-dimensional"));
        }
        Ok(())
    };
    let mut params = std::collections::BTreeMap::new();
    let eval = match kind {
        KindArg::Bulk => KernelEvaluation::tabulate(KernelKind::Bulk, n, params, points.clone(), points, |x, y| {
            Ok(bulk_kernel(n, x, y))
        })?,
        KindArg::Edge => {
            KernelEvaluation::tabulate(KernelKind::Edge, n, params, points.clone(), points, |x, y| {
                edge_kernel_default(n, x, y)
            })?
        }
        KindArg::Free => {
            params.insert("mu".to_string(), mu);
            KernelEvaluation::tabulate(KernelKind::FreeLaplacian, n, params, points.clone(), points, |x, y| {
                Ok(free_laplacian_kernel(n, mu, x, y))
            })?
        }
        KindArg::Sine => {
            one_dimensional()?;
            KernelEvaluation::tabulate(KernelKind::Sine1D, 1, params, points.clone(), points, |x, y| {
                Ok(sine_kernel(x[0], y[0]))
            })?
        }
        KindArg::Airy => {
            one_dimensional()?;
            KernelEvaluation::tabulate(KernelKind::Airy1D, 1, params, points.clone(), points, |x, y| {
                Ok(airy_kernel_1d(x[0], y[0]))
            })?
        }
        KindArg::Projector => {
            let text = potential.ok_or_else(|| Error::invalid("--potential is required for the projector kernel"))?;
            let v = parse_potential(text)?;
            v.check_dimension(n)?;
            let x0 = origin_or(x0, n)?;
            let v_x0 = v.eval(&x0);
            let (eps, u) = if (v_x0 - mu).abs() <= 1e-9 {
                let grad = grad_potential(&v, &x0)?;
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                (edge_scale(hbar, norm)?, edge_rotation(&grad)?)
            } else if v_x0 < mu {
                let identity = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
                (bulk_scale(hbar, v_x0, mu, n)?, identity)
            } else {
                return Err(Error::invalid("x0 lies outside the droplet"));
            };
            let eigs = solver.config()?.solve(&v, mu, hbar, n, mu)?;
            let pk = projector_kernel(eigs, mu)?;
            rescaled_kernel(&pk, &x0, eps, &u, &points, &points)?
        }
    };
    Ok(eval.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["fermilab"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn colon_lists() {
        assert_eq!(parse_colon_list("-2:2:0.05", 3).unwrap(), vec![-2.0, 2.0, 0.05]);
        assert!(parse_colon_list("-2:2", 3).is_err());
        assert!(parse_colon_list("a:b", 2).is_err());
    }

    #[test]
    fn bulk_kernel_table_has_unit_diagonal() {
        let (code, out, _) = run_capture(&["kernel", "--kind", "bulk", "--window", "-1:1:0.5"]);
        assert_eq!(code, 0);
        let rows: Vec<Vec<f64>> = out
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 25);
        for r in rows.iter().filter(|r| r[0] == r[1]) {
            assert_eq!(r[2], 1.0);
        }
    }

    #[test]
    fn missing_seed_is_a_validation_error() {
        let (code, _, err) = run_capture(&["sample", "--potential", "x1^2"]);
        assert_eq!(code, 1);
        assert!(err.contains("--seed"));
    }

    #[test]
    fn bad_potential_prints_grammar() {
        let (code, _, err) = run_capture(&["weyl", "--potential", "x1^", "--hbar", "0.1"]);
        assert_eq!(code, 1);
        assert!(err.contains("expr   :="));
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run_capture(&["weyl", "--bogus"]).0, 1);
        assert_eq!(run_capture(&[]).0, 1);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }

    #[test]
    fn config_file_and_override() {
        let dir = std::env::temp_dir().join(format!("fermilab-cli-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("run.cfg");
        fs::write(&cfg, "# comment\npotential = x1^2\nhbar = 0.1,0.05\n").unwrap();
        let cfg_s = cfg.to_str().unwrap();
        let (code, out, _) = run_capture(&["weyl", "--config", cfg_s]);
        assert_eq!(code, 0, "{out}");
        assert!(out.contains("# hbar_list=0.1 0.05"));
        let (code, out, _) = run_capture(&["--config", cfg_s, "weyl", "--hbar", "0.02"]);
        assert_eq!(code, 0);
        assert!(out.contains("# hbar_list=0.02\n"));
        fs::write(&cfg, "potential = x1^2\nnonsense = 3\n").unwrap();
        let (code, _, err) = run_capture(&["weyl", "--config", cfg_s]);
        assert_eq!(code, 1);
        assert!(err.contains("unknown key `nonsense`"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn unconfined_potential_is_rejected() {
        let (code, _, err) = run_capture(&["weyl", "--potential", "x1", "--hbar", "0.1"]);
        assert_eq!(code, 1, "{err}");
    }
}
