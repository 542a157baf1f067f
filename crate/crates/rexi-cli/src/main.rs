//! Command-line front end for the rational exponential integrator toolkit:
//! coefficient fitting, scalar and matrix error studies, and shallow water
//! scenario runs with CSV output.
//!
//! The environment variable `REXI_COEFF_PATH` points every study and solver
//! command at a coefficient file produced by `rexi fit`; without it the
//! built-in table is used.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use rexi::lrsw_solver::{
    exact_solution, initial_condition, max_norm_error, rexi_step, rexii_step, rk4_integrate,
    MChoice, Method, Scenario, ScenarioConfig,
};
use rexi::matrix_eval::{
    apply_rexi, apply_rexie, apply_rexii, build_test_operator, center_shift, reference_expm_vec,
    CirculantOracle, TestOperator,
};
use rexi::rational_fit::{
    builtin_coefficients, fit_coefficients, format_coefficients, parse_coefficients,
    RationalGaussianCoeffs, CERT_X_MAX,
};
use rexi::rexi_terms::{scalar_error_study, Variant};

#[derive(Parser)]
#[command(
    name = "rexi",
    version,
    about = "Rational approximations of the matrix exponential on the imaginary axis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a rational pole table for the Gaussian kernel and write it to a file.
    Fit(FitArgs),
    /// Sweep the scalar error |R(x) - e^{ix}| over spacings and truncation orders.
    ScalarStudy(ScalarStudyArgs),
    /// Sweep matrix-exponential error for a periodic test operator.
    MatrixStudy(MatrixStudyArgs),
    /// Run one linear rotating shallow water scenario and report its error.
    Lrsw(LrswArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Number of conjugate pole pairs.
    #[arg(long = "L", default_value_t = 24)]
    l: usize,
    /// Shared pole real part; defaults to the built-in table's value.
    #[arg(long)]
    mu: Option<f64>,
    /// Certified sup-norm defect to reach on the fit interval.
    #[arg(long, default_value_t = 2e-14)]
    target: f64,
    /// Coefficient file to write (best-so-far even on failure).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScalarStudyArgs {
    /// Evaluation point of e^{ix}.
    #[arg(long)]
    x: f64,
    /// Comma-separated Gaussian spacings.
    #[arg(long = "h-list", value_delimiter = ',')]
    h_list: Vec<f64>,
    /// Comma-separated truncation orders.
    #[arg(long = "M-list", value_delimiter = ',')]
    m_list: Vec<u32>,
    /// CSV output path (columns h,M,error).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OperatorArg {
    /// Periodic centered advection on 70 points; real, spectrum i[-70, 70].
    Advection,
    /// Periodic free-particle dispersion on 70 points; spectrum i[-4900, 0].
    Schrodinger,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    /// Single solve per term, real reconstruction only.
    Rexi,
    /// Conjugate pole pairs, two solves per term.
    Rexii,
    /// Single solve per term with complex reconstruction (operators iB, B real).
    Rexie,
}

impl SchemeArg {
    fn name(self) -> &'static str {
        match self {
            SchemeArg::Rexi => "rexi",
            SchemeArg::Rexii => "rexii",
            SchemeArg::Rexie => "rexie",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ShiftArg {
    /// Center the spectrum: evaluate e^{A - nu I} and restore the phase e^{nu}.
    Auto,
    /// Use the operator as is.
    None,
}

#[derive(Args)]
struct MatrixStudyArgs {
    #[arg(long)]
    operator: OperatorArg,
    #[arg(long)]
    scheme: SchemeArg,
    /// Gaussian spacing.
    #[arg(long)]
    h: f64,
    /// Comma-separated truncation orders.
    #[arg(long = "M-list", value_delimiter = ',')]
    m_list: Vec<u32>,
    #[arg(long, default_value = "none")]
    shift: ShiftArg,
    /// CSV output path (columns scheme,h,M,error).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Wave1,
    Wave2,
    Gaussian,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Rexi,
    Rexii,
    Rk4,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::Rexi => "rexi",
            MethodArg::Rexii => "rexii",
            MethodArg::Rk4 => "rk4",
        }
    }
}

#[derive(Args)]
struct LrswArgs {
    #[arg(long)]
    scenario: ScenarioArg,
    #[arg(long)]
    method: MethodArg,
    /// Gaussian spacing (one-step methods).
    #[arg(long, default_value_t = 0.5)]
    h: f64,
    /// Truncation order, or "auto" to derive it from the scenario's
    /// effective spectral radius.
    #[arg(long = "M", default_value = "auto")]
    m: String,
    /// Final time, covered in a single step by the one-step methods.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Grid points per dimension.
    #[arg(long = "D", default_value_t = 128)]
    d: usize,
    /// Sequential term-chunk count (default: sized to a 512 MiB working set).
    #[arg(long = "S")]
    s: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Fix the reduction order for bit-reproducible output.
    #[arg(long)]
    deterministic: bool,
    /// RK4 step count.
    #[arg(long = "time-steps", default_value_t = 1000)]
    time_steps: u32,
    /// Optional CSV output with the full run record.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Fit(args) => run_fit(args),
        Command::ScalarStudy(args) => run_scalar_study(args),
        Command::MatrixStudy(args) => run_matrix_study(args),
        Command::Lrsw(args) => run_lrsw(args),
    }
}

/// Coefficients from `REXI_COEFF_PATH` if set, otherwise the built-in table.
fn load_coefficients() -> Result<RationalGaussianCoeffs> {
    match std::env::var_os("REXI_COEFF_PATH") {
        Some(path) if !path.is_empty() => {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading coefficient file {}", path.to_string_lossy()))?;
            parse_coefficients(&text)
                .with_context(|| format!("parsing coefficient file {}", path.to_string_lossy()))
        }
        _ => Ok(builtin_coefficients()),
    }
}

fn write_file(path: &PathBuf, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run_fit(args: FitArgs) -> Result<()> {
    let mu = args.mu.unwrap_or_else(|| builtin_coefficients().mu());
    let outcome = fit_coefficients(mu, args.l, CERT_X_MAX, 200, args.target)?;
    write_file(&args.out, &format_coefficients(&outcome.coeffs))?;
    println!(
        "mu = {}, L = {}, certified defect = {:e}, nodes = {}",
        mu,
        args.l,
        outcome.coeffs.fit_error(),
        outcome.points_used
    );
    if !outcome.converged {
        bail!(
            "fit stalled at {:e} (target {:e}); best table written to {}",
            outcome.coeffs.fit_error(),
            args.target,
            args.out.display()
        );
    }
    Ok(())
}

fn run_scalar_study(args: ScalarStudyArgs) -> Result<()> {
    let coeffs = load_coefficients()?;
    let rows = scalar_error_study(&args.h_list, &args.m_list, args.x, &coeffs, Variant::Rexii)?;
    let mut csv = String::from("h,M,error\n");
    for row in rows {
        csv.push_str(&format!("{},{},{:e}\n", row.h, row.m, row.error));
    }
    write_file(&args.out, &csv)
}

fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn run_matrix_study(args: MatrixStudyArgs) -> Result<()> {
    let coeffs = load_coefficients()?;
    let n = 70;
    let (kind, x0, dx) = match args.operator {
        OperatorArg::Advection => (TestOperator::Advection, 0.0, 1.0 / n as f64),
        OperatorArg::Schrodinger => (TestOperator::Schrodinger, -1.0, 2.0 / n as f64),
    };
    if args.scheme == SchemeArg::Rexie && args.operator == OperatorArg::Advection {
        bail!("the complex-reconstruction scheme needs an operator of the form iB with B real");
    }
    let (a, info) = build_test_operator(kind, n)?;
    let f0: Vec<f64> = (0..n)
        .map(|j| {
            let x = x0 + j as f64 * dx;
            1.0 / (2.0 + (2.0 * std::f64::consts::PI * x).cos())
        })
        .collect();
    let f0c: Vec<Complex64> = f0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let reference = reference_expm_vec(&a, &f0c)?;

    // Optional spectrum centering; the phase e^{nu} restores the shift after
    // evaluation (one step, unit time).
    let (operator, phase) = match args.shift {
        ShiftArg::None => (a.clone(), Complex64::new(1.0, 0.0)),
        ShiftArg::Auto => {
            let (nu, _) = center_shift(info.zeta1, info.zeta2)?;
            let mut shifted = a.clone();
            for j in 0..n {
                shifted[(j, j)] -= nu;
            }
            (shifted, nu.exp())
        }
    };
    let real_operator = operator.iter().all(|z| z.im == 0.0);
    let oracle = CirculantOracle::from_dense(&operator)?;

    let variant = match args.scheme {
        SchemeArg::Rexii => Variant::Rexii,
        SchemeArg::Rexi | SchemeArg::Rexie => Variant::Rexi,
    };
    let mut csv = String::from("scheme,h,M,error\n");
    for &m in &args.m_list {
        let table = rexi::rexi_terms::build_terms(args.h, m, &coeffs, variant)?;
        let approx: Vec<Complex64> = match args.scheme {
            SchemeArg::Rexii => apply_rexii(&table, &oracle, &f0c, real_operator)?,
            SchemeArg::Rexi => apply_rexi(&table, &oracle, &f0)?
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .collect(),
            SchemeArg::Rexie => apply_rexie(&table, &oracle, &f0)?,
        };
        let restored: Vec<Complex64> = approx.into_iter().map(|z| z * phase).collect();
        let error = rel_l2(&restored, &reference);
        csv.push_str(&format!("{},{},{},{:e}\n", args.scheme.name(), args.h, m, error));
    }
    write_file(&args.out, &csv)
}

fn run_lrsw(args: LrswArgs) -> Result<()> {
    let coeffs = load_coefficients()?;
    let scenario = match args.scenario {
        ScenarioArg::Wave1 => Scenario::Wave1,
        ScenarioArg::Wave2 => Scenario::Wave2,
        ScenarioArg::Gaussian => Scenario::Gaussian,
    };
    let method = match args.method {
        MethodArg::Rexi => Method::Rexi,
        MethodArg::Rexii => Method::Rexii,
        MethodArg::Rk4 => Method::Rk4,
    };
    let m = if args.m == "auto" {
        MChoice::Auto
    } else {
        MChoice::Fixed(
            args.m
                .parse::<u32>()
                .with_context(|| format!("--M must be \"auto\" or an integer, got {:?}", args.m))?,
        )
    };
    if scenario == Scenario::Wave2 && args.d < 64 {
        bail!(
            "the high-frequency wave scenario needs at least 64 grid points, got {}",
            args.d
        );
    }
    let config = ScenarioConfig {
        scenario,
        d: args.d,
        tau: args.tau,
        method,
        h: args.h,
        m,
        chunks: args.s,
        time_steps: args.time_steps,
        deterministic: args.deterministic,
    };

    let state0 = initial_condition(scenario, args.d)?;
    let reference = exact_solution(&state0, args.tau);

    let run = || -> Result<_> {
        let start = Instant::now();
        let state = match method {
            Method::Rexii => rexii_step(&config, &coeffs, &state0)?,
            Method::Rexi => rexi_step(&config, &coeffs, &state0)?,
            Method::Rk4 => rk4_integrate(&config, &state0)?,
        };
        Ok((state, start.elapsed().as_millis()))
    };
    let (state, ms) = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .context("building worker pool")?
            .install(run)?,
        None => run()?,
    };
    let error = max_norm_error(&state, &reference)?;

    // Term and solve counts follow from the table geometry.
    let (m_used, m_or_ts, terms, solves) = match method {
        Method::Rk4 => (0, args.time_steps as usize, args.time_steps as usize, 0),
        _ => {
            let m_used = config.resolve_m()?;
            let n_max = m_used as usize + coeffs.l_max();
            match method {
                Method::Rexii => (m_used, m_used as usize, n_max + 1, 2 * (n_max + 1)),
                _ => (m_used, m_used as usize, 2 * n_max + 1, 2 * n_max + 1),
            }
        }
    };

    println!(
        "{},{},{},{:e},{},{}",
        args.method.name(),
        args.h,
        m_or_ts,
        error,
        ms,
        solves
    );

    if let Some(out) = &args.out {
        let mut csv = String::from(
            "command,scenario,method,d,tau,h,m,time_steps,chunks,threads,deterministic,terms,solves,error,ms\n",
        );
        csv.push_str(&format!(
            "lrsw,{:?},{},{},{},{},{},{},{},{},{},{},{},{:e},{}\n",
            scenario,
            args.method.name(),
            args.d,
            args.tau,
            args.h,
            m_used,
            args.time_steps,
            args.s.map_or_else(|| "auto".to_string(), |s| s.to_string()),
            args.threads
                .map_or_else(|| "default".to_string(), |t| t.to_string()),
            args.deterministic,
            terms,
            solves,
            error,
            ms
        ));
        write_file(out, &csv)?;
    }
    Ok(())
}
