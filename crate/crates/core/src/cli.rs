//! Command-line front end of the `mwi` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::constants::{figure1_csv, figure1_table, k_rho, DEFAULT_GAMMA_STEP};
use crate::convex_order::check_cx;
use crate::error::{Error, Result};
use crate::examples::{bj_example, scaling_pair, triangle_example, two_atom_pair};
use crate::io::{load_measure, measure_to_csv_string};
use crate::itm::{itm_coupling, QChoice};
use crate::measures::{DiscreteMeasureND, NormSpec};
use crate::mot::m_rho_lp;
use crate::transport::wasserstein;
use crate::verify::{sweep, verify_pair, CaseKind, CaseTag, InequalityReport, SweepConfig, SLACK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "mwi", version, about = "Martingale and classical Wasserstein distances between discrete measures")]
pub struct Cli {
    /// Tolerance for declaring a slack or an order violation.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write results to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    pub format: OutFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Exponent rho >= 1.
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Order r of the L^r norm on R^d (`inf` for the sup norm).
    #[arg(long, default_value = "2")]
    pub norm: NormSpec,
    /// First marginal (CSV or JSON).
    pub mu: PathBuf,
    /// Second marginal (CSV or JSON).
    pub nu: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// W_rho between two measures.
    Wasserstein(PairArgs),
    /// M_rho and an optimal martingale coupling.
    Mot {
        #[command(flatten)]
        pair: PairArgs,
        /// Also write the coupling as CSV `i,j,weight`.
        #[arg(long)]
        coupling: Option<PathBuf>,
    },
    /// Cost of the inverse-transform martingale coupling (measures on the line).
    Itm {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, default_value = "comonotone")]
        q: QChoice,
        #[arg(long)]
        coupling: Option<PathBuf>,
    },
    /// Whether mu <=_cx nu.
    CxCheck {
        mu: PathBuf,
        nu: PathBuf,
    },
    /// K_rho and its bounds, for one rho or a grid `a:b:step`.
    Kappa {
        #[arg(long, conflicts_with = "rho_grid", required_unless_present = "rho_grid")]
        rho: Option<f64>,
        #[arg(long)]
        rho_grid: Option<String>,
        #[arg(long, default_value_t = DEFAULT_GAMMA_STEP)]
        gamma_step: f64,
    },
    /// Worked examples with their inequality report.
    Example {
        #[command(subcommand)]
        which: ExampleCmd,
    },
    /// Random sweep of the inequality.
    Verify {
        /// Case families, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1d")]
        case: Vec<CaseKind>,
        /// Exponents, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        rho: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        atoms: usize,
        #[arg(long, default_value_t = 4)]
        dilations: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value = "2")]
        norm: NormSpec,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExampleCmd {
    /// n atoms on a line, each split along (cos theta, sin theta).
    Bj {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
    },
    /// Three-point measure and its scaling.
    Triangle {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
    },
    /// A measure and its scaling by 1 + lambda about its mean.
    Scaling {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value = "2")]
        norm: NormSpec,
    },
    /// Symmetric two-point measures at +-a and +-b.
    TwoAtom {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
    },
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Outcome of a command: text to emit and whether an invariant failed.
struct Outcome {
    text: String,
    violated: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, violated: false }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho < 1.0 || rho.is_infinite() {
        return Err(Error::Domain(format!("rho must be a finite real >= 1, got {rho}")));
    }
    Ok(())
}

fn load_pair(p: &PairArgs) -> Result<(DiscreteMeasureND, DiscreteMeasureND)> {
    check_rho(p.rho)?;
    let mu = load_measure(&p.mu)?;
    let nu = load_measure(&p.nu)?;
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), found: nu.dim() });
    }
    Ok((mu, nu))
}

fn scalar(name: &str, value: f64, format: OutFormat) -> String {
    match format {
        OutFormat::Csv => format!("{}\n", fmt(value)),
        OutFormat::Json => format!("{}\n", json!({ name: value })),
    }
}

fn report_text(r: &InequalityReport, format: OutFormat) -> String {
    match format {
        OutFormat::Json => format!("{}\n", serde_json::to_string_pretty(r).expect("serialisable")),
        OutFormat::Csv => {
            let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
            format!(
                "case,rho,w_rho,sigma_rho,m_rho,itm_cost,ratio,bound,surrogate,slack\n{},{},{},{},{},{},{},{},{},{}\n",
                r.case,
                fmt(r.rho),
                fmt(r.w_rho),
                fmt(r.sigma_rho),
                fmt(r.m_rho),
                opt(r.itm_cost),
                fmt(r.ratio),
                opt(r.bound),
                r.surrogate,
                opt(r.slack)
            )
        }
    }
}

fn example_text(
    mu: &DiscreteMeasureND,
    nu: &DiscreteMeasureND,
    r: &InequalityReport,
    format: OutFormat,
) -> String {
    match format {
        OutFormat::Json => {
            let v = json!({ "mu": mu, "nu": nu, "report": r });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("serialisable"))
        }
        OutFormat::Csv => format!(
            "# mu\n{}# nu\n{}# report\n{}",
            measure_to_csv_string(mu),
            measure_to_csv_string(nu),
            report_text(r, OutFormat::Csv)
        ),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Parse(format!("rho grid {spec:?} is not of the form a:b:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v = parts
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<f64>>>()?;
    let (a, b, step) = (v[0], v[1], v[2]);
    if !(step > 0.0 && a <= b && a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + k as f64 * step).collect())
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let format = cli.format;
    let slack_tol = cli.tol.unwrap_or(SLACK_TOL);
    match &cli.command {
        Command::Wasserstein(p) => {
            let (mu, nu) = load_pair(p)?;
            Ok(Outcome::ok(scalar("w_rho", wasserstein(&mu, &nu, p.rho, &p.norm)?, format)))
        }
        Command::Mot { pair, coupling } => {
            let (mu, nu) = load_pair(pair)?;
            let (v, c) = m_rho_lp(&mu, &nu, pair.rho, &pair.norm)?;
            if let Some(path) = coupling {
                write_file(path, &c.to_csv_string())?;
            }
            Ok(Outcome::ok(scalar("m_rho", v, format)))
        }
        Command::Itm { pair, q, coupling } => {
            let (mu, nu) = load_pair(pair)?;
            if mu.dim() != 1 {
                return Err(Error::Domain("the inverse-transform coupling needs measures on the line".into()));
            }
            let c = itm_coupling(&mu.to_1d()?, &nu.to_1d()?, *q)?;
            if let Some(path) = coupling {
                write_file(path, &c.to_csv_string())?;
            }
            Ok(Outcome::ok(scalar("itm_cost", c.cost(pair.rho, &pair.norm), format)))
        }
        Command::CxCheck { mu, nu } => {
            let (mu, nu) = (load_measure(mu)?, load_measure(nu)?);
            let mut r = check_cx(&mu, &nu)?;
            if let Some(t) = cli.tol {
                r.ordered = r.mean_gap <= t && r.worst_violation <= t;
            }
            let text = match format {
                OutFormat::Csv => format!(
                    "ordered,mean_gap,worst_violation\n{},{},{}\n",
                    r.ordered,
                    fmt(r.mean_gap),
                    fmt(r.worst_violation)
                ),
                OutFormat::Json => format!("{}\n", serde_json::to_string_pretty(&r).expect("serialisable")),
            };
            Ok(Outcome { text, violated: !r.ordered })
        }
        Command::Kappa { rho, rho_grid, gamma_step } => {
            if let Some(rho) = rho {
                let r = k_rho(*rho, *gamma_step)?;
                return Ok(Outcome::ok(match format {
                    OutFormat::Csv => format!("{}\n", fmt(r.k_est)),
                    OutFormat::Json => format!("{}\n", serde_json::to_string_pretty(&r).expect("serialisable")),
                }));
            }
            let grid = parse_grid(rho_grid.as_deref().expect("clap requires one of rho, rho-grid"))?;
            let rows = figure1_table(&grid, *gamma_step)?;
            Ok(Outcome::ok(match format {
                OutFormat::Csv => figure1_csv(&rows),
                OutFormat::Json => format!("{}\n", serde_json::to_string_pretty(&rows).expect("serialisable")),
            }))
        }
        Command::Example { which } => {
            let (mu, nu, r) = match which {
                ExampleCmd::Bj { n, theta, rho } => {
                    let (mu, nu, _) = bj_example(*n, *theta)?;
                    let r = verify_pair(&mu, &nu, *rho, &NormSpec::euclidean(), CaseTag::Generic)?;
                    (mu, nu, r)
                }
                ExampleCmd::Triangle { n, lambda, rho } => {
                    let (mu, nu, _) = triangle_example(*n, *lambda)?;
                    let r = verify_pair(&mu, &nu, *rho, &NormSpec::euclidean(), CaseTag::Scaling(*lambda))?;
                    (mu, nu, r)
                }
                ExampleCmd::Scaling { input, lambda, rho, norm } => {
                    let mu = load_measure(input)?;
                    let (nu, _) = scaling_pair(&mu, *lambda)?;
                    let r = verify_pair(&mu, &nu, *rho, norm, CaseTag::Scaling(*lambda))?;
                    (mu, nu, r)
                }
                ExampleCmd::TwoAtom { a, b, rho } => {
                    let (mu, nu, _) = two_atom_pair(*a, *b)?;
                    let (mu, nu) = (mu.to_nd(), nu.to_nd());
                    let r = verify_pair(&mu, &nu, *rho, &NormSpec::euclidean(), CaseTag::OneD)?;
                    (mu, nu, r)
                }
            };
            let violated = r.slack.is_some_and(|s| s < -slack_tol);
            Ok(Outcome { text: example_text(&mu, &nu, &r, format), violated })
        }
        Command::Verify { case, rho, seeds, seed, atoms, dilations, dim, lambda, norm } => {
            let cfg = SweepConfig {
                cases: case.clone(),
                rho_grid: rho.clone(),
                seeds: (*seed..seed.saturating_add(*seeds)).collect(),
                n_atoms: *atoms,
                n_dilations: *dilations,
                dim: *dim,
                lambda: *lambda,
                norm: *norm,
            };
            let report = sweep(&cfg)?;
            let violated = report.rows.iter().any(|r| r.report.slack.is_some_and(|s| s < -slack_tol));
            let text = match format {
                OutFormat::Csv => report.to_csv_string(),
                OutFormat::Json => format!("{}\n", serde_json::to_string_pretty(&report).expect("serialisable")),
            };
            Ok(Outcome { text, violated })
        }
    }
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 when an invariant is violated, 2 on usage or input errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match execute(&cli) {
        Ok(outcome) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &outcome.text).map_err(Error::from),
                None => std::io::stdout().write_all(outcome.text.as_bytes()).map_err(Error::from),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return 2;
            }
            i32::from(outcome.violated)
        }
        Err(Error::NotInConvexOrder(msg)) => {
            eprintln!("error: measures are not in the convex order: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
