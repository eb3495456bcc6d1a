//! Tabulated curves for plotting: smiles, Durrleman's `g`, `G2`, `g±`,
//! `L±` and the `sigma*` objective.

use std::io::{Read, Write};

use clap::ValueEnum;
use svi_noarb::calibration::uniform_grid;
use svi_noarb::domain::{g2_zeros, sigma_star_objective};
use svi_noarb::fukasawa::{big_l_minus, big_l_plus, g_pm, Side};
use svi_noarb::svi::{durrleman_g, g_split, svi, NormalizedParams, SviParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Series {
    /// total variance w(k)
    Smile,
    /// Durrleman's g(k)
    G,
    /// G2(l)
    G2,
    /// g-(l) and g+(l)
    Gpm,
    /// L-(l) and L+(l)
    #[value(name = "L")]
    L,
    /// -G2(1/h) / (2 G1(1/h)) against h
    FProfile,
}

/// Normalized inputs `(alpha, b, rho, mu)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub alpha: f64,
    pub b: f64,
    pub rho: f64,
    pub mu: f64,
}

/// What a series is computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlotInput {
    Raw(SviParams),
    Normalized(Normalized),
}

impl PlotInput {
    fn raw(&self, series: Series) -> CliResult<SviParams> {
        match self {
            PlotInput::Raw(p) => Ok(*p),
            PlotInput::Normalized(_) => {
                Err(CliError::Input(format!("{series:?} needs raw parameters a, b, rho, m, sigma")))
            }
        }
    }

    fn normalized(&self) -> CliResult<Normalized> {
        match self {
            PlotInput::Normalized(n) => Ok(*n),
            PlotInput::Raw(p) => {
                let np = svi_noarb::svi::normalize(p)?;
                Ok(Normalized { alpha: np.alpha, b: np.b, rho: np.rho, mu: np.mu })
            }
        }
    }
}

/// Columns of numbers with a header; `NaN` marks points outside the domain
/// of a series and is written as an empty field.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, writer: W) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| CliError::Input(e.to_string());
        w.write_record(&self.headers).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() })).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> CliResult<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let bad = |e: csv::Error| CliError::Input(e.to_string());
        let headers = r.headers().map_err(bad)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(bad)?;
            let row = rec
                .iter()
                .map(|f| if f.is_empty() { Ok(f64::NAN) } else { f.parse::<f64>() })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Input(e.to_string()))?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }
}

/// Default abscissa range of a series.
pub fn default_range(series: Series, input: &PlotInput) -> CliResult<(f64, f64)> {
    Ok(match series {
        Series::Smile | Series::G => {
            let p = input.raw(series)?;
            (p.m - 1.0, p.m + 1.0)
        }
        Series::G2 | Series::Gpm | Series::L => (-10.0, 10.0),
        Series::FProfile => {
            let n = input.normalized()?;
            let z = g2_zeros(n.alpha, n.b, n.rho)?;
            (1.0 / z.l1, 1.0 / z.l2)
        }
    })
}

fn or_nan(v: svi_noarb::Result<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

/// Tabulates `series` on `n` evenly spaced points of `[from, to]`.
pub fn tabulate(series: Series, input: &PlotInput, from: f64, to: f64, n: usize) -> CliResult<Table> {
    if n == 0 || !from.is_finite() || !to.is_finite() || (n > 1 && !(from < to)) {
        return Err(CliError::Input(format!("need from < to and at least one point, got [{from}, {to}] x {n}")));
    }
    let xs = uniform_grid(from, to, n);
    let (headers, rows): (&[&str], Vec<Vec<f64>>) = match series {
        Series::Smile => {
            let p = input.raw(series)?;
            (&["k", "w"], xs.iter().map(|&k| vec![k, svi(&p, k)]).collect())
        }
        Series::G => {
            let p = input.raw(series)?;
            (&["k", "g"], xs.iter().map(|&k| vec![k, or_nan(durrleman_g(&p, k))]).collect())
        }
        Series::G2 => {
            let c = input.normalized()?;
            let np = NormalizedParams { alpha: c.alpha, b: c.b, rho: c.rho, mu: 0.0, sigma: 1.0 };
            (&["l", "g2"], xs.iter().map(|&l| vec![l, g_split(&np, l).map_or(f64::NAN, |s| s.g2)]).collect())
        }
        Series::Gpm => {
            let c = input.normalized()?;
            let rows = xs
                .iter()
                .map(|&l| vec![l, or_nan(g_pm(c.b, c.rho, l, Side::Minus)), or_nan(g_pm(c.b, c.rho, l, Side::Plus))])
                .collect();
            (&["l", "g_minus", "g_plus"], rows)
        }
        Series::L => {
            let c = input.normalized()?;
            let rows = xs
                .iter()
                .map(|&l| {
                    vec![
                        l,
                        or_nan(big_l_minus(l, c.alpha, c.b, c.rho)),
                        or_nan(big_l_plus(l, c.alpha, c.b, c.rho)),
                    ]
                })
                .collect();
            (&["l", "L_minus", "L_plus"], rows)
        }
        Series::FProfile => {
            let c = input.normalized()?;
            let rows = xs
                .iter()
                .map(|&h| {
                    let f = if h == 0.0 { f64::NAN } else { sigma_star_objective(c.alpha, c.b, c.rho, c.mu, h) };
                    vec![h, f]
                })
                .collect();
            (&["h", "f"], rows)
        }
    };
    Ok(Table { headers: headers.iter().map(|s| s.to_string()).collect(), rows })
}
