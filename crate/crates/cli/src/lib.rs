//! Command-line front end of `svi-noarb`: argument definitions and command
//! implementations. Each command returns a human-readable summary and an
//! exit code; machine-readable output only goes to files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod params;
pub mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use svi_noarb::calibration::{calibrate, CalibrationConfig, CalibrationResult};
use svi_noarb::domain::{check_no_arbitrage, sigma_star};
use svi_noarb::fukasawa::{fukasawa_threshold, mu_interval};
use svi_noarb::market_data::{build_vol_slice, infer_forward_discount, load_chain_file, year_fraction, SliceDocument};

use crate::error::{status_exit_code, CliError, CliResult, EXIT_OK};
use crate::params::ParamArgs;
use crate::plot::{default_range, tabulate, Normalized, PlotInput, Series};

#[derive(Debug, Parser)]
#[command(name = "svi-noarb", version, about = "Butterfly-arbitrage diagnostics and arbitrage-free SVI calibration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify SVI parameters: Free or failure type 1-4
    Check {
        #[command(flatten)]
        params: ParamArgs,
        /// Write the full diagnostic as JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fukasawa threshold F(b, rho)
    Threshold {
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
    },
    /// Admissible interval of mu for (alpha, b, rho)
    Interval {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
    },
    /// Minimal sigma for (alpha, b, rho, mu)
    SigmaStar {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu: f64,
    },
    /// Calibrate arbitrage-free SVI parameters to a slice file
    Calibrate {
        /// Slice JSON (k, w_mid, optional w_bid/w_ask, t)
        #[arg(long)]
        slice: PathBuf,
        /// Calibration config JSON; flags override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        alpha_cap: Option<f64>,
        #[arg(long)]
        vega_weighted: bool,
        /// Result JSON
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn an option-quote CSV into one slice file per expiry
    Ingest {
        /// CSV with columns expiry,strike,kind,bid,ask[,spot]
        #[arg(long)]
        input: PathBuf,
        /// Valuation date (YYYY-MM-DD) used to compute maturities
        #[arg(long)]
        valuation_date: Option<NaiveDate>,
        /// Fixed maturity in years, for single-expiry files
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Tabulate a curve as CSV
    PlotData {
        #[arg(long, value_enum)]
        which: Series,
        #[command(flatten)]
        params: ParamArgs,
        /// Normalized level a / sigma; with --b and --rho replaces raw parameters
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        /// Normalized center m / sigma (with --alpha)
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        /// Number of points
        #[arg(long, default_value_t = 201)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Summary for standard output and the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub summary: String,
    pub code: u8,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { summary, code: EXIT_OK }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.6}"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::Check { params, out } => cmd_check(&params, out.as_deref()),
        Command::Threshold { b, rho } => Ok(Outcome::ok(format!("F = {:.10}", fukasawa_threshold(b, rho)?))),
        Command::Interval { alpha, b, rho } => {
            let i = mu_interval(alpha, b, rho)?;
            Ok(Outcome::ok(format!("lower = {:.10}\nupper = {:.10}", i.lower, i.upper)))
        }
        Command::SigmaStar { alpha, b, rho, mu } => {
            Ok(Outcome::ok(format!("sigma* = {:.10}", sigma_star(alpha, b, rho, mu)?)))
        }
        Command::Calibrate { slice, config, seed, starts, r, alpha_cap, vega_weighted, out } => {
            let mut cfg: CalibrationConfig = match &config {
                Some(path) => read_json(path)?,
                None => CalibrationConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.n_starts = starts.unwrap_or(cfg.n_starts);
            cfg.r = r.unwrap_or(cfg.r);
            cfg.alpha_cap = alpha_cap.unwrap_or(cfg.alpha_cap);
            cfg.vega_weighted |= vega_weighted;
            cmd_calibrate(&slice, &cfg, &out)
        }
        Command::Ingest { input, valuation_date, t, out_dir } => cmd_ingest(&input, valuation_date, t, &out_dir),
        Command::PlotData { which, params, alpha, mu, from, to, grid, out } => {
            let input = match alpha {
                Some(alpha) => {
                    let need = |name: &str, v: Option<f64>| {
                        v.ok_or_else(|| CliError::Input(format!("--alpha needs --{name}")))
                    };
                    PlotInput::Normalized(Normalized {
                        alpha,
                        b: need("b", params.b)?,
                        rho: need("rho", params.rho)?,
                        mu: mu.unwrap_or(0.0),
                    })
                }
                None => PlotInput::Raw(params.resolve()?),
            };
            let (lo, hi) = default_range(which, &input)?;
            let table = tabulate(which, &input, from.unwrap_or(lo), to.unwrap_or(hi), grid)?;
            let file = std::fs::File::create(&out)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", out.display())))?;
            table.write_csv(file)?;
            Ok(Outcome::ok(format!("wrote {} rows to {}", table.rows.len(), out.display())))
        }
    }
}

fn cmd_check(params: &ParamArgs, out: Option<&Path>) -> CliResult<Outcome> {
    let p = params.resolve()?;
    let d = check_no_arbitrage(&p)?;
    if let Some(path) = out {
        write_json(path, &d)?;
    }
    let mut s = d.to_string();
    let _ = write!(s, "\nalpha = {}\nmu = {}\nF = {}", fmt_opt(d.alpha), fmt_opt(d.mu), fmt_opt(d.threshold));
    match d.interval {
        Some(i) => {
            let _ = write!(s, "\ninterval = ({:.6}, {:.6})", i.lower, i.upper);
        }
        None => s.push_str("\ninterval = n/a"),
    }
    let _ = write!(s, "\nsigma* = {}\nsigma = {:.6}", fmt_opt(d.sigma_star), p.sigma);
    Ok(Outcome { summary: s, code: status_exit_code(d.status) })
}

fn cmd_calibrate(slice_path: &Path, cfg: &CalibrationConfig, out: &Path) -> CliResult<Outcome> {
    let doc: SliceDocument = read_json(slice_path)?;
    let start = Instant::now();
    let res: CalibrationResult = calibrate(&doc.slice, cfg)?;
    let wall = start.elapsed().as_secs_f64();
    write_json(out, &res)?;
    let p = &res.params;
    let summary = format!(
        "a = {:.10}\nb = {:.10}\nrho = {:.10}\nm = {:.10}\nsigma = {:.10}\ncost = {:.6e}\nrelative error = {:.6e}\n\
         status = {}\nconverged = {}\nwall time = {wall:.2}s",
        p.a, p.b, p.rho, p.m, p.sigma, res.cost, res.rel_error_fro, res.diagnostics, res.converged
    );
    Ok(Outcome::ok(summary))
}

fn cmd_ingest(input: &Path, valuation: Option<NaiveDate>, t: Option<f64>, out_dir: &Path) -> CliResult<Outcome> {
    if valuation.is_none() && t.is_none() {
        return Err(CliError::Input("ingest needs --valuation-date or --t".into()));
    }
    let report = load_chain_file(input)?;
    std::fs::create_dir_all(out_dir)?;
    let mut lines = vec![format!(
        "{} expiries, {} quotes, {} rejected rows",
        report.chains.len(),
        report.quote_count(),
        report.rejects.len()
    )];
    if !report.rejects.is_empty() {
        write_json(&out_dir.join("rejects.json"), &report.rejects)?;
    }
    let mut written = 0;
    for chain in &report.chains {
        let result = (|| -> CliResult<usize> {
            let maturity = match t {
                Some(t) => t,
                None => year_fraction(valuation.unwrap_or_default(), chain.expiry)?,
            };
            let fd = infer_forward_discount(chain)?;
            let vs = build_vol_slice(chain, &fd, maturity)?;
            let doc = SliceDocument {
                expiry: Some(chain.expiry),
                forward: Some(fd.forward),
                discount: Some(fd.discount),
                residual_rmse: Some(fd.residual_rmse),
                slice: vs.slice,
                skipped: vs.skipped,
            };
            write_json(&out_dir.join(format!("slice_{}.json", chain.expiry)), &doc)?;
            lines.push(format!(
                "{}: F = {:.6}, DF = {:.8}, rmse = {:.2e}, {} points, {} skipped",
                chain.expiry,
                fd.forward,
                fd.discount,
                fd.residual_rmse,
                doc.slice.len(),
                doc.skipped.len()
            ));
            Ok(doc.slice.len())
        })();
        match result {
            Ok(_) => written += 1,
            Err(e) => lines.push(format!("{}: skipped ({e})", chain.expiry)),
        }
    }
    if written == 0 {
        return Err(CliError::Input(format!("no slice could be built\n{}", lines.join("\n"))));
    }
    Ok(Outcome::ok(lines.join("\n")))
}
