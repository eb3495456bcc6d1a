//! The full no-butterfly-arbitrage domain of SVI.
//!
//! Given `(alpha, b, rho, mu)` satisfying Fukasawa's condition, `G1 > 0` on
//! the whole line and `G = G1 + G2 / (2 sigma)` is non-negative everywhere
//! iff `sigma >= sigma*`, where `sigma*` is the supremum of
//! `-G2 / (2 G1)` over the region where `G2 < 0`, outside its two zeros.
//! The domain is therefore a product of intervals in the box coordinates
//! `(rho, b', u, q, v)`:
//!
//! - `b = 2 b' / (1 + |rho|)`, `b'` in `(0, 1]`
//! - `alpha = F(b, rho) + u`, `u > 0`
//! - `mu = (1 + q) / 2 * upper + (1 - q) / 2 * lower`, `q` in `(-1, 1)`
//! - `sigma = sigma* + v`, `v >= 0`

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::fukasawa::{fukasawa_threshold, l_star, mu_interval, MuInterval, REGIME_TOL};
use crate::numerics::{expand_bracket_with_step, find_root, maximize_scalar_multi, Direction};
use crate::svi::{durrleman_g, g_split, normalize, wing_regime_tol, NormalizedParams, SviParams, WingRegime};

/// Interior grid points per side for the `sigma*` maximization.
pub const SIGMA_STAR_GRID: usize = 64;
/// Number of grid peaks refined per side.
const SIGMA_STAR_PEAKS: usize = 3;
/// Relative slack on `sigma >= sigma*` absorbing the rounding of `a / sigma`
/// and `m / sigma` when parameters are mapped back and forth.
pub const SIGMA_STAR_RTOL: f64 = 1e-9;
const ZERO_TOL: f64 = 1e-15;

/// Zeros of `G2`; `G2 > 0` exactly on `(l1, l2)`. Missing zeros are
/// reported as infinities (at `rho = -1` there is no `l2`, at `rho = 1` no
/// `l1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Zeros {
    pub l1: f64,
    pub l2: f64,
}

/// Coordinates of the arbitrage-free hyperrectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoords {
    pub rho: f64,
    pub b_prime: f64,
    pub u: f64,
    pub q: f64,
    pub v: f64,
}

impl BoxCoords {
    pub fn validate(&self) -> Result<()> {
        let Self { rho, b_prime, u, q, v } = *self;
        let ok = rho.abs() < 1.0 && b_prime > 0.0 && b_prime <= 1.0 && u > 0.0 && u.is_finite() && q.abs() < 1.0
            && v >= 0.0
            && v.is_finite();
        if !ok {
            return Err(Error::Domain(format!(
                "box coordinates out of range: rho={rho}, b'={b_prime}, u={u}, q={q}, v={v}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Free,
    /// A wing slope `b (1 ± rho)` exceeds 2.
    Failure1,
    /// `alpha <= F(b, rho)`: no `mu` satisfies Fukasawa's condition.
    Failure2,
    /// `mu` outside the admissible interval.
    Failure3,
    /// `sigma < sigma*`.
    Failure4,
}

impl Status {
    /// 1 to 4 for failures, `None` when free.
    pub fn failure_type(&self) -> Option<u8> {
        match self {
            Status::Free => None,
            Status::Failure1 => Some(1),
            Status::Failure2 => Some(2),
            Status::Failure3 => Some(3),
            Status::Failure4 => Some(4),
        }
    }
}

/// Outcome of [`check_no_arbitrage`] with every quantity computed on the
/// way. Quantities after the failing step are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageDiagnostic {
    pub status: Status,
    pub params: SviParams,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub regime: Option<WingRegime>,
    pub threshold: Option<f64>,
    pub interval: Option<MuInterval>,
    pub sigma_star: Option<f64>,
}

impl ArbitrageDiagnostic {
    pub fn is_free(&self) -> bool {
        self.status == Status::Free
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.5}"))
}

impl fmt::Display for ArbitrageDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        match self.status {
            Status::Free => write!(f, "Free"),
            Status::Failure1 => write!(
                f,
                "Failure1: wing slopes b(1-rho)={:.5}, b(1+rho)={:.5}, limit 2",
                p.b * (1.0 - p.rho),
                p.b * (1.0 + p.rho)
            ),
            Status::Failure2 => {
                write!(f, "Failure2: alpha={} <= F={}", fmt_opt(self.alpha), fmt_opt(self.threshold))
            }
            Status::Failure3 => {
                let (lo, hi) = self.interval.map_or((f64::NAN, f64::NAN), |i| (i.lower, i.upper));
                write!(f, "Failure3: mu={} not in ({lo:.5}, {hi:.5})", fmt_opt(self.mu))
            }
            Status::Failure4 => {
                write!(f, "Failure4: sigma={:.5} < sigma*={}", p.sigma, fmt_opt(self.sigma_star))
            }
        }
    }
}

fn g2(alpha: f64, b: f64, rho: f64, l: f64) -> f64 {
    let np = NormalizedParams { alpha, b, rho, mu: 0.0, sigma: 1.0 };
    g_split(&np, l).map_or(f64::NAN, |s| s.g2)
}

fn check_alpha(alpha: f64, b: f64, rho: f64) -> Result<()> {
    let ok = if rho.abs() >= 1.0 { alpha >= 0.0 } else { alpha + b * (1.0 - rho * rho).sqrt() > 0.0 };
    if !(b > 0.0) || !(rho.abs() <= 1.0) || !ok {
        return Err(Error::Domain(format!("G2 zeros need a positive smile: alpha={alpha}, b={b}, rho={rho}")));
    }
    Ok(())
}

/// The two zeros of `G2 = N'' - N'^2 / (2N)`, with `l1 < min(l*, 0)` and
/// `l2 > max(l*, 0)`.
pub fn g2_zeros(alpha: f64, b: f64, rho: f64) -> Result<G2Zeros> {
    check_alpha(alpha, b, rho)?;
    let (left_start, right_start) = if rho <= -1.0 {
        (0.0, f64::INFINITY)
    } else if rho >= 1.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        let ls = l_star(rho)?;
        (ls.min(0.0), ls.max(0.0))
    };
    let f = |l: f64| g2(alpha, b, rho, l);
    let l1 = if left_start.is_finite() {
        let br = expand_bracket_with_step(f, left_start, Direction::Down, 1.0, 2.0)?;
        find_root(f, &br, ZERO_TOL)?
    } else {
        f64::NEG_INFINITY
    };
    let l2 = if right_start.is_finite() {
        let br = expand_bracket_with_step(f, right_start, Direction::Up, 1.0, 2.0)?;
        find_root(f, &br, ZERO_TOL)?
    } else {
        f64::INFINITY
    };
    Ok(G2Zeros { l1, l2 })
}

/// `-G2(1/h) / (2 G1(1/h))`, the function maximized to obtain `sigma*`.
pub fn sigma_star_objective(alpha: f64, b: f64, rho: f64, mu: f64, h: f64) -> f64 {
    let np = NormalizedParams { alpha, b, rho, mu, sigma: 1.0 };
    match g_split(&np, 1.0 / h) {
        Ok(s) => -s.g2 / (2.0 * s.g1),
        Err(_) => f64::NAN,
    }
}

/// Fukasawa's condition for `(alpha, b, rho, mu)`: returns the threshold and
/// the interval, or `FukasawaViolated`.
fn fukasawa_data(alpha: f64, b: f64, rho: f64, mu: f64) -> Result<(f64, MuInterval)> {
    if wing_regime_tol(b, rho, REGIME_TOL) == WingRegime::OverLimit {
        return Err(Error::FukasawaViolated(format!("wing slope above 2 (b={b}, rho={rho})")));
    }
    let threshold = fukasawa_threshold(b, rho)?;
    let above = if rho.abs() >= 1.0 { alpha >= 0.0 } else { alpha > threshold };
    if !above {
        return Err(Error::FukasawaViolated(format!("alpha={alpha} <= F={threshold}")));
    }
    let interval = mu_interval(alpha, b, rho)?;
    if !interval.contains(mu) {
        return Err(Error::FukasawaViolated(format!(
            "mu={mu} not in ({}, {})",
            interval.lower, interval.upper
        )));
    }
    Ok((threshold, interval))
}

/// Smallest `sigma` making the smile free of butterfly arbitrage, for
/// `(alpha, b, rho, mu)` satisfying Fukasawa's condition.
///
/// The supremum of `-G2 / (2 G1)` over `l < l1` and `l > l2` is taken in
/// the variable `h = 1/l`, which maps each side to a bounded interval.
pub fn sigma_star(alpha: f64, b: f64, rho: f64, mu: f64) -> Result<f64> {
    fukasawa_data(alpha, b, rho, mu)?;
    sigma_star_unchecked(alpha, b, rho, mu)
}

pub(crate) fn sigma_star_unchecked(alpha: f64, b: f64, rho: f64, mu: f64) -> Result<f64> {
    let zeros = g2_zeros(alpha, b, rho)?;
    let f = |h: f64| sigma_star_objective(alpha, b, rho, mu, h);
    let mut best = 0.0f64;
    for (lo, hi) in [(1.0 / zeros.l1, 0.0), (0.0, 1.0 / zeros.l2)] {
        // an infinite zero maps to h = 0: that side is empty
        if lo < hi {
            let (_, value) = maximize_scalar_multi(f, lo, hi, SIGMA_STAR_GRID, SIGMA_STAR_PEAKS)?;
            best = best.max(value);
        }
    }
    Ok(best)
}

/// Runs the four checks in order: wing slopes, `alpha > F`, `mu` in the
/// interval, `sigma >= sigma*`.
///
/// `b = 0` is the flat (Black-Scholes) smile and is free without further
/// checks. `sigma = 0` is rejected with `DegenerateSigma`.
pub fn check_no_arbitrage(params: &SviParams) -> Result<ArbitrageDiagnostic> {
    params.validate()?;
    let mut d = ArbitrageDiagnostic {
        status: Status::Free,
        params: *params,
        alpha: None,
        mu: None,
        regime: None,
        threshold: None,
        interval: None,
        sigma_star: None,
    };
    if params.b == 0.0 {
        return Ok(d);
    }
    let np = normalize(params)?;
    let (alpha, b, rho, mu) = (np.alpha, np.b, np.rho, np.mu);
    d.alpha = Some(alpha);
    d.mu = Some(mu);

    let regime = wing_regime_tol(b, rho, REGIME_TOL);
    d.regime = Some(regime);
    if regime == WingRegime::OverLimit {
        d.status = Status::Failure1;
        return Ok(d);
    }

    let threshold = fukasawa_threshold(b, rho)?;
    d.threshold = Some(threshold);
    let fails_threshold = if rho.abs() >= 1.0 { alpha < 0.0 } else { alpha <= threshold };
    if fails_threshold {
        d.status = Status::Failure2;
        return Ok(d);
    }

    let interval = mu_interval(alpha, b, rho)?;
    d.interval = Some(interval);
    if !interval.contains(mu) {
        d.status = Status::Failure3;
        return Ok(d);
    }

    let s_star = sigma_star_unchecked(alpha, b, rho, mu)?;
    d.sigma_star = Some(s_star);
    if np.sigma < s_star * (1.0 - SIGMA_STAR_RTOL) {
        d.status = Status::Failure4;
    }
    Ok(d)
}

/// Maps box coordinates to SVI parameters; the result is always free of
/// butterfly arbitrage.
pub fn box_to_params(c: &BoxCoords) -> Result<SviParams> {
    c.validate()?;
    let b = 2.0 * c.b_prime / (1.0 + c.rho.abs());
    let threshold = fukasawa_threshold(b, c.rho)?;
    let alpha = threshold + c.u;
    let interval = mu_interval(alpha, b, c.rho)?;
    let mu = 0.5 * (1.0 + c.q) * interval.upper + 0.5 * (1.0 - c.q) * interval.lower;
    let sigma = sigma_star_unchecked(alpha, b, c.rho, mu)? + c.v;
    Ok(SviParams { a: alpha * sigma, b, rho: c.rho, m: mu * sigma, sigma })
}

/// Inverse of [`box_to_params`], defined for free parameters with
/// `|rho| < 1` and `b > 0`.
pub fn params_to_box(p: &SviParams) -> Result<BoxCoords> {
    let d = check_no_arbitrage(p)?;
    if !d.is_free() || p.b == 0.0 || p.rho.abs() >= 1.0 {
        return Err(Error::NotInDomain(d.to_string()));
    }
    let (alpha, mu) = (d.alpha.unwrap_or_default(), d.mu.unwrap_or_default());
    let threshold = d.threshold.unwrap_or_default();
    let interval = d.interval.ok_or_else(|| Error::NotInDomain("missing interval".into()))?;
    let s_star = d.sigma_star.unwrap_or_default();
    Ok(BoxCoords {
        rho: p.rho,
        b_prime: (p.b * (1.0 + p.rho.abs()) / 2.0).min(1.0),
        u: alpha - threshold,
        q: 2.0 * (mu - interval.lower) / (interval.upper - interval.lower) - 1.0,
        v: (p.sigma - s_star).max(0.0),
    })
}

/// Minimum of Durrleman's `g` over `n` evenly spaced points of `[lo, hi]`.
pub fn min_durrleman_g(p: &SviParams, lo: f64, hi: f64, n: usize) -> Result<f64> {
    let mut min = f64::INFINITY;
    for i in 0..n {
        let k = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        min = min.min(durrleman_g(p, k)?);
    }
    Ok(min)
}

/// Minimum of `g` on the verification grid: 2001 points over
/// `[m - 20 sigma, m + 20 sigma]`.
pub fn min_g_on_verification_grid(p: &SviParams) -> Result<f64> {
    min_durrleman_g(p, p.m - 20.0 * p.sigma, p.m + 20.0 * p.sigma, 2001)
}
