//! Arbitrage-free SVI calibration on a single slice.
//!
//! The solver works on the box coordinates, rescaled so that every bound is
//! fixed: `x = (rho, b', u', q, v')` with
//!
//! - `u = u' * (alpha_cap - F(b, rho))`
//! - `v = v' * (sigma_max - sigma*)`, `sigma_max` from [`sigma_upper_bound`]
//!
//! Any point of the solver box maps to parameters free of butterfly
//! arbitrage, so the least-squares problem only has simple bounds.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{d1_d2, norm_pdf, MoneyVol};
use crate::domain::{check_no_arbitrage, sigma_star_unchecked, ArbitrageDiagnostic, BoxCoords};
use crate::error::{Error, Result};
use crate::fukasawa::{fukasawa_threshold, mu_interval, MuInterval};
use crate::numerics::{least_squares_bounded, LsqOptions, Termination};
use crate::svi::{svi, SviParams};

/// Margin keeping the open box coordinates away from their boundaries.
pub const INTERIOR_MARGIN: f64 = 1e-6;
/// Number of free SVI parameters; a slice needs at least this many points.
pub const N_PARAMS: usize = 5;

/// One maturity of implied total variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSlice {
    /// Log-forward moneyness, strictly increasing.
    pub k: Vec<f64>,
    pub w_mid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_bid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_ask: Option<Vec<f64>>,
    /// Year fraction; informational only.
    #[serde(default)]
    pub t: f64,
}

impl MarketSlice {
    /// Slice of model total variances `w(k)` on the given strikes.
    pub fn from_params(p: &SviParams, k: &[f64], t: f64) -> Result<Self> {
        let slice = Self { k: k.to_vec(), w_mid: k.iter().map(|&k| svi(p, k)).collect(), w_bid: None, w_ask: None, t };
        slice.validate()?;
        Ok(slice)
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.k.len();
        if self.w_mid.len() != n {
            return Err(Error::InvalidSlice(format!("{} strikes but {} variances", n, self.w_mid.len())));
        }
        if self.k.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidSlice("non-finite log-moneyness".into()));
        }
        if let Some(i) = self.k.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSlice(format!("log-moneyness not increasing at index {}", i + 1)));
        }
        if let Some(i) = self.w_mid.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidSlice(format!("non-positive total variance at index {i}")));
        }
        for (name, side) in [("bid", &self.w_bid), ("ask", &self.w_ask)] {
            if let Some(v) = side {
                if v.len() != n {
                    return Err(Error::InvalidSlice(format!("{name} length {} differs from {n}", v.len())));
                }
            }
        }
        for i in 0..n {
            let bid = self.w_bid.as_ref().map_or(f64::NEG_INFINITY, |v| v[i]);
            let ask = self.w_ask.as_ref().map_or(f64::INFINITY, |v| v[i]);
            if !(bid <= self.w_mid[i] && self.w_mid[i] <= ask) {
                return Err(Error::InvalidSlice(format!("bid <= mid <= ask violated at index {i}")));
            }
        }
        if !(self.t >= 0.0) {
            return Err(Error::InvalidSlice(format!("negative maturity {}", self.t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub n_starts: usize,
    /// Slope used in the `sigma` upper bound `|k| / r`.
    pub r: f64,
    /// Upper bound on `alpha = a / sigma`.
    pub alpha_cap: f64,
    pub vega_weighted: bool,
    pub seed: u64,
    pub lsq: LsqOptions,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { n_starts: 8, r: 0.1, alpha_cap: 1.0, vega_weighted: false, seed: 0, lsq: LsqOptions::default() }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return Err(Error::InvalidConfig("n_starts must be at least 1".into()));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidConfig(format!("r must be positive, got {}", self.r)));
        }
        if !(self.alpha_cap > 0.0 && self.alpha_cap.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha_cap must be positive, got {}", self.alpha_cap)));
        }
        self.lsq.validate()
    }
}

/// Outcome of one multi-start run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartReport {
    pub index: usize,
    /// Start point in solver coordinates `(rho, b', u', q, v')`.
    pub start: [f64; 5],
    pub cost: Option<f64>,
    pub converged: bool,
    pub termination: Option<Termination>,
    pub nfev: usize,
    /// Cost at the start and after every accepted step.
    #[serde(default)]
    pub cost_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: SviParams,
    #[serde(rename = "box")]
    pub box_coords: BoxCoords,
    /// `0.5 * ||residuals||^2` at the optimum.
    pub cost: f64,
    /// `||w_model - w_mid|| / ||w_mid||`
    pub rel_error_fro: f64,
    pub converged: bool,
    pub best_start: usize,
    pub diagnostics: ArbitrageDiagnostic,
    pub per_start: Vec<StartReport>,
}

/// Upper bound on `sigma`: `max(|k_0| / r, |k_N| / r, 1.5 sigma*)`.
///
/// A very large `sigma` makes the smile almost flat over the data and the
/// remaining parameters poorly determined.
pub fn sigma_upper_bound(slice: &MarketSlice, sigma_star: f64, r: f64) -> Result<f64> {
    let (Some(first), Some(last)) = (slice.k.first(), slice.k.last()) else {
        return Err(Error::InvalidSlice("empty slice".into()));
    };
    if !(r > 0.0) {
        return Err(Error::InvalidConfig(format!("r must be positive, got {r}")));
    }
    Ok((first.abs() / r).max(last.abs() / r).max(1.5 * sigma_star))
}

/// Vega weights `phi(d1(k_i, sqrt(w_i)))`, computed once from the data.
pub fn vega_weights(slice: &MarketSlice) -> Result<Vec<f64>> {
    slice
        .k
        .iter()
        .zip(&slice.w_mid)
        .map(|(&k, &w)| Ok(norm_pdf(d1_d2(MoneyVol::new(k, w.sqrt())?)?.0)))
        .collect()
}

/// Residuals `w_model(k_i) - w_mid_i` (times the vega weight when enabled)
/// of the parameters at the given box coordinates.
pub fn residuals(c: &BoxCoords, slice: &MarketSlice, config: &CalibrationConfig) -> Result<Vec<f64>> {
    let p = crate::domain::box_to_params(c)?;
    let weights = if config.vega_weighted { Some(vega_weights(slice)?) } else { None };
    Ok(weighted_residuals(&p, slice, weights.as_deref()))
}

fn weighted_residuals(p: &SviParams, slice: &MarketSlice, weights: Option<&[f64]>) -> Vec<f64> {
    slice
        .k
        .iter()
        .zip(&slice.w_mid)
        .enumerate()
        .map(|(i, (&k, &w))| {
            let r = svi(p, k) - w;
            weights.map_or(r, |wt| wt[i] * r)
        })
        .collect()
}

/// Relative Frobenius error of the model total variances.
pub fn relative_error(p: &SviParams, slice: &MarketSlice) -> f64 {
    let diff: f64 = weighted_residuals(p, slice, None).iter().map(|r| r * r).sum();
    let norm: f64 = slice.w_mid.iter().map(|w| w * w).sum();
    (diff / norm).sqrt()
}

/// Memo for the inner numerical functions, keyed on the exact bits of the
/// inputs. Finite-difference Jacobians move one coordinate at a time, so
/// most evaluations reuse the threshold and the interval.
#[derive(Default)]
struct InnerCache {
    threshold: HashMap<[u64; 2], f64>,
    interval: HashMap<[u64; 3], MuInterval>,
    sigma_star: HashMap<[u64; 4], f64>,
}

fn bits<const N: usize>(xs: [f64; N]) -> [u64; N] {
    xs.map(f64::to_bits)
}

impl InnerCache {
    fn threshold(&mut self, b: f64, rho: f64) -> Result<f64> {
        let key = bits([b, rho]);
        if let Some(v) = self.threshold.get(&key) {
            return Ok(*v);
        }
        let v = fukasawa_threshold(b, rho)?;
        self.threshold.insert(key, v);
        Ok(v)
    }

    fn interval(&mut self, alpha: f64, b: f64, rho: f64) -> Result<MuInterval> {
        let key = bits([alpha, b, rho]);
        if let Some(v) = self.interval.get(&key) {
            return Ok(*v);
        }
        let v = mu_interval(alpha, b, rho)?;
        self.interval.insert(key, v);
        Ok(v)
    }

    fn sigma_star(&mut self, alpha: f64, b: f64, rho: f64, mu: f64) -> Result<f64> {
        let key = bits([alpha, b, rho, mu]);
        if let Some(v) = self.sigma_star.get(&key) {
            return Ok(*v);
        }
        let v = sigma_star_unchecked(alpha, b, rho, mu)?;
        self.sigma_star.insert(key, v);
        Ok(v)
    }
}

/// Maps solver coordinates to box coordinates and parameters.
struct SolverMap<'a> {
    slice: &'a MarketSlice,
    config: &'a CalibrationConfig,
    cache: RefCell<InnerCache>,
}

impl SolverMap<'_> {
    fn lower() -> [f64; 5] {
        [-1.0 + INTERIOR_MARGIN, INTERIOR_MARGIN, INTERIOR_MARGIN, -1.0 + INTERIOR_MARGIN, 0.0]
    }

    fn upper() -> [f64; 5] {
        [1.0 - INTERIOR_MARGIN, 1.0, 1.0, 1.0 - INTERIOR_MARGIN, 1.0]
    }

    fn map(&self, x: &[f64]) -> Result<(BoxCoords, SviParams)> {
        let mut cache = self.cache.borrow_mut();
        let (rho, b_prime, u_scaled, q, v_scaled) = (x[0], x[1], x[2], x[3], x[4]);
        let b = 2.0 * b_prime / (1.0 + rho.abs());
        let threshold = cache.threshold(b, rho)?;
        let u = u_scaled * (self.config.alpha_cap - threshold);
        let alpha = threshold + u;
        let interval = cache.interval(alpha, b, rho)?;
        let mu = 0.5 * (1.0 + q) * interval.upper + 0.5 * (1.0 - q) * interval.lower;
        let s_star = cache.sigma_star(alpha, b, rho, mu)?;
        let sigma_max = sigma_upper_bound(self.slice, s_star, self.config.r)?;
        let v = v_scaled * (sigma_max - s_star);
        let sigma = s_star + v;
        let c = BoxCoords { rho, b_prime, u, q, v };
        Ok((c, SviParams { a: alpha * sigma, b, rho, m: mu * sigma, sigma }))
    }
}

/// Uniform start points in the solver box, reproducible from the seed.
fn sample_starts(config: &CalibrationConfig) -> Vec<[f64; 5]> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = (SolverMap::lower(), SolverMap::upper());
    (0..config.n_starts).map(|_| std::array::from_fn(|i| rng.gen_range(lo[i]..=hi[i]))).collect()
}

struct StartOutcome {
    report: StartReport,
    best: Option<(BoxCoords, SviParams, f64, bool)>,
}

fn run_start(
    index: usize,
    start: [f64; 5],
    slice: &MarketSlice,
    config: &CalibrationConfig,
    weights: Option<&[f64]>,
) -> StartOutcome {
    let map = SolverMap { slice, config, cache: RefCell::new(InnerCache::default()) };
    let f = |x: &[f64]| match map.map(x) {
        Ok((_, p)) => weighted_residuals(&p, slice, weights),
        Err(_) => vec![f64::NAN; slice.len()],
    };
    let mut report =
        StartReport {
        index,
        start,
        cost: None,
        converged: false,
        termination: None,
        nfev: 0,
        cost_history: Vec::new(),
        error: None,
    };
    let outcome = least_squares_bounded(f, &start, &SolverMap::lower(), &SolverMap::upper(), &config.lsq)
        .and_then(|r| map.map(&r.x).map(|(c, p)| (r, c, p)));
    match outcome {
        Ok((r, c, p)) => {
            report.cost = Some(r.cost);
            report.converged = r.converged;
            report.termination = Some(r.termination);
            report.nfev = r.nfev;
            report.cost_history = r.cost_history.clone();
            StartOutcome { report, best: Some((c, p, r.cost, r.converged)) }
        }
        Err(e) => {
            report.error = Some(e.to_string());
            StartOutcome { report, best: None }
        }
    }
}

/// Multi-start least squares over the arbitrage-free box.
///
/// Starts are drawn uniformly in the box independently of the data and run
/// in parallel. The start with the lowest cost wins (lowest index on ties),
/// converged or not; `NoConvergedStart` means every start failed outright.
pub fn calibrate(slice: &MarketSlice, config: &CalibrationConfig) -> Result<CalibrationResult> {
    config.validate()?;
    slice.validate()?;
    if slice.len() < N_PARAMS {
        return Err(Error::InsufficientData { got: slice.len(), need: N_PARAMS });
    }
    let weights = if config.vega_weighted { Some(vega_weights(slice)?) } else { None };
    let starts = sample_starts(config);
    let outcomes: Vec<StartOutcome> = starts
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_start(i, *s, slice, config, weights.as_deref()))
        .collect();

    let mut best: Option<(usize, BoxCoords, SviParams, f64, bool)> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if let Some((c, p, cost, converged)) = o.best {
            if best.as_ref().is_none_or(|b| cost < b.3) {
                best = Some((i, c, p, cost, converged));
            }
        }
    }
    let (best_start, box_coords, params, cost, converged) = best.ok_or(Error::NoConvergedStart)?;
    let diagnostics = check_no_arbitrage(&params)?;
    Ok(CalibrationResult {
        params,
        box_coords,
        cost,
        rel_error_fro: relative_error(&params, slice),
        converged,
        best_start,
        diagnostics,
        per_start: outcomes.into_iter().map(|o| o.report).collect(),
    })
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Thirteen log-moneyness points on `[-0.3, 0.7]`, the grid used for the
/// model-data experiments.
pub fn model_grid() -> Vec<f64> {
    uniform_grid(-0.3, 0.7, 13)
}
