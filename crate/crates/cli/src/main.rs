use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use zerogap::gap_inequality::{GapParams, DEFAULT_TOL, SCAN_START};
use zerogap::moment_oracle::Precision;
use zerogap::{CoefficientLabel, SearchConfig};

use zerogap_cli::commands::{self, Failure, OracleArgs, Status};
use zerogap_cli::report::{render, Format, ReportRecord};

#[derive(Parser)]
#[command(name = "zerogap", version, about = "Coefficient oracles, gap-inequality certificates and parameter search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    F64,
    Dd,
}

#[derive(Subcommand)]
enum Command {
    /// Decide A_κ > Φ(u, v, κ) at one point
    Check {
        #[arg(long, allow_negative_numbers = true)]
        u: f64,
        #[arg(long, allow_negative_numbers = true)]
        v: f64,
        #[arg(long, allow_negative_numbers = true)]
        kappa: f64,
        /// Admit u up to 1 instead of 1/11
        #[arg(long)]
        extended_u: bool,
        /// Re-decide the sign in exact rational arithmetic
        #[arg(long)]
        exact: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Compare the swap-sum oracle with the closed forms on a (κ, u) grid
    VerifyOracle {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,8.69", allow_negative_numbers = true)]
        kappa_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.05,0.0909", allow_negative_numbers = true)]
        u_list: Vec<f64>,
        /// Labels to compare (default: all ten)
        #[arg(long, value_delimiter = ',')]
        labels: Vec<CoefficientLabel>,
        /// Bound on |oracle − closed| / max(1, |closed|)
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Bound on the relative imaginary part of the symmetrized integral
        #[arg(long, default_value_t = 1e-10)]
        imag_tol: f64,
        /// λ truncation half-width
        #[arg(long, default_value_t = 16)]
        window: i32,
        #[arg(long, value_enum, default_value = "dd")]
        precision: PrecisionArg,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Reproduction rows for the published scenarios
    Table {
        /// Bisection tolerance for derived κ
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Exact κ-Taylor coefficients of a closed form
    KappaSeries {
        /// A..J, or "all"
        #[arg(long)]
        coeff: String,
        #[arg(long, default_value_t = 6)]
        order: usize,
        /// Evaluate coefficients at this rational u, written p/q
        #[arg(long)]
        u_rational: Option<BigRational>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Grid and pattern search for the largest certified κ
    Optimize {
        /// low,high (default 1e-6,0.0909; 0.4,0.6 with --extended-u)
        #[arg(long, value_parser = parse_pair)]
        u_range: Option<(f64, f64)>,
        /// low,high (default 1.8,2.6; 2.5,2.9 with --extended-u)
        #[arg(long, value_parser = parse_pair)]
        v_range: Option<(f64, f64)>,
        /// NUxNV
        #[arg(long, value_parser = parse_grid, default_value = "16x16")]
        grid: (usize, usize),
        #[arg(long, default_value_t = 30)]
        refine: usize,
        #[arg(long)]
        extended_u: bool,
        /// Extra start point u,v (repeatable)
        #[arg(long, value_parser = parse_pair)]
        seed: Vec<(f64, f64)>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Partial Euler product for a₃ with a tail bound
    A3 {
        #[arg(long, default_value_t = 1_000_000)]
        prime_limit: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected low,high but got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NUxNV but got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_labels(s: &str) -> Result<Vec<CoefficientLabel>, Failure> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(CoefficientLabel::ALL.to_vec());
    }
    s.split(',').map(|t| t.parse().map_err(Failure::invalid)).collect()
}

fn run(command: Command, echo: Vec<String>) -> (Result<(ReportRecord, Status), Failure>, Format) {
    match command {
        Command::Check { u, v, kappa, extended_u, exact, format } => {
            (commands::cmd_check(ReportRecord::new(echo, "f64"), u, v, kappa, extended_u, exact), format)
        }
        Command::VerifyOracle { kappa_list, u_list, labels, tol, imag_tol, window, precision, format } => {
            let precision = match precision {
                PrecisionArg::F64 => Precision::F64,
                PrecisionArg::Dd => Precision::DoubleDouble,
            };
            let labels = if labels.is_empty() { CoefficientLabel::ALL.to_vec() } else { labels };
            let args = OracleArgs { kappas: kappa_list, us: u_list, labels, tol, imag_tol, window, precision };
            (commands::cmd_verify_oracle(ReportRecord::new(echo, precision.name()), args), format)
        }
        Command::Table { tol, format } => (commands::cmd_table(ReportRecord::new(echo, "f64"), tol), format),
        Command::KappaSeries { coeff, order, u_rational, format } => {
            let r = ReportRecord::new(echo, "exact rational");
            let out = parse_labels(&coeff).and_then(|labels| commands::cmd_kappa_series(r, labels, order, u_rational));
            (out, format)
        }
        Command::Optimize { u_range, v_range, grid, refine, extended_u, seed, tol, format } => {
            let base = SearchConfig::default();
            let (du, dv) = if extended_u { ((0.4, 0.6), (2.5, 2.9)) } else { (base.u_range, base.v_range) };
            let config = SearchConfig {
                u_range: u_range.unwrap_or(du),
                v_range: v_range.unwrap_or(dv),
                grid,
                refine_iters: refine,
                extended_u,
                seed_points: seed.iter().map(|&(u, v)| GapParams { u, v, kappa: SCAN_START, extended_u }).collect(),
                tol,
            };
            (commands::cmd_optimize(ReportRecord::new(echo, "f64"), config), format)
        }
        Command::A3 { prime_limit, format } => (commands::cmd_a3(ReportRecord::new(echo, "f64"), prime_limit), format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let echo: Vec<String> =
        std::iter::once("zerogap".to_string()).chain(std::env::args().skip(1)).collect();
    let start = Instant::now();
    let (outcome, format) = run(cli.command, echo);
    match outcome {
        Ok((mut record, status)) => {
            record.elapsed_seconds = start.elapsed().as_secs_f64();
            print!("{}", render(&record, format));
            ExitCode::from(status as u8)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.status as u8)
        }
    }
}
