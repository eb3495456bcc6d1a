//! Black-Scholes in normalized units: spot and forward equal to 1, prices
//! expressed in the maturity numéraire, strikes as log-forward moneyness `k`
//! and volatility as total volatility `theta = sigma_implied * sqrt(t)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Lower end of the total-volatility search interval used by inversion.
pub const THETA_MIN: f64 = 1e-9;
/// Upper end of the total-volatility search interval used by inversion.
pub const THETA_MAX: f64 = 50.0;

const INVERSION_MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// A point `(k, theta)`: log-forward moneyness and total volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoneyVol {
    pub k: f64,
    pub theta: f64,
}

impl MoneyVol {
    pub fn new(k: f64, theta: f64) -> Result<Self> {
        if !k.is_finite() || !theta.is_finite() || theta < 0.0 {
            return Err(Error::Domain(format!("invalid (k, theta) = ({k}, {theta})")));
        }
        Ok(Self { k, theta })
    }
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function, `0.5 * erfc(-x / sqrt(2))`.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Mills ratio `(1 - Phi(x)) / phi(x)` for large positive `x`, by the
/// classical continued fraction.
fn mills_ratio(x: f64) -> f64 {
    // backward evaluation of x + 1/(x + 2/(x + 3/(x + ...)))
    let mut tail = x;
    for n in (1..=60).rev() {
        tail = x + n as f64 / tail;
    }
    1.0 / tail
}

/// `e^k * Phi(d2)`, computed through `phi(d1) * mills(-d2)` once `Phi(d2)`
/// would underflow.
fn discounted_strike_term(k: f64, d1: f64, d2: f64) -> f64 {
    if d2 < -30.0 {
        norm_pdf(d1) * mills_ratio(-d2)
    } else {
        k.exp() * norm_cdf(d2)
    }
}

pub fn d1_d2(mv: MoneyVol) -> Result<(f64, f64)> {
    if !(mv.theta > 0.0) {
        return Err(Error::Domain(format!("d1/d2 need theta > 0, got {}", mv.theta)));
    }
    let d1 = -mv.k / mv.theta + 0.5 * mv.theta;
    Ok((d1, d1 - mv.theta))
}

/// Undiscounted call on a unit forward, `Phi(d1) - e^k Phi(d2)`.
/// At `theta = 0` this is the intrinsic value `(1 - e^k)^+`.
pub fn call_price(mv: MoneyVol) -> f64 {
    match d1_d2(mv) {
        Ok((d1, d2)) => {
            let c = norm_cdf(d1) - discounted_strike_term(mv.k, d1, d2);
            c.max((1.0 - mv.k.exp()).max(0.0))
        }
        Err(_) => (1.0 - mv.k.exp()).max(0.0),
    }
}

/// Undiscounted put on a unit forward. At `theta = 0` this is `(e^k - 1)^+`.
pub fn put_price(mv: MoneyVol) -> f64 {
    match d1_d2(mv) {
        Ok((d1, d2)) => {
            let p = mv.k.exp() * norm_cdf(-d2) - norm_cdf(-d1);
            p.max((mv.k.exp() - 1.0).max(0.0))
        }
        Err(_) => (mv.k.exp() - 1.0).max(0.0),
    }
}

pub fn price(mv: MoneyVol, kind: OptionKind) -> f64 {
    match kind {
        OptionKind::Call => call_price(mv),
        OptionKind::Put => put_price(mv),
    }
}

/// Sensitivity of either price to `theta`: `phi(d1)`.
pub fn vega_total(mv: MoneyVol) -> Result<f64> {
    let (d1, _) = d1_d2(mv)?;
    Ok(norm_pdf(d1))
}

/// Open interval of arbitrage-free prices for the given strike and kind.
pub fn price_bounds(k: f64, kind: OptionKind) -> (f64, f64) {
    let ek = k.exp();
    match kind {
        OptionKind::Call => ((1.0 - ek).max(0.0), 1.0),
        OptionKind::Put => ((ek - 1.0).max(0.0), ek),
    }
}

/// Total implied volatility reproducing `price` for an option of the given
/// kind at log-moneyness `k`.
///
/// The quote is first converted to the out-of-the-money side by put-call
/// parity, then solved by Newton steps kept inside a shrinking bisection
/// bracket on `[THETA_MIN, THETA_MAX]`.
pub fn implied_total_vol(k: f64, price: f64, kind: OptionKind) -> Result<f64> {
    let (lower, upper) = price_bounds(k, kind);
    if !k.is_finite() || !price.is_finite() || price <= lower || price >= upper {
        return Err(Error::PriceOutOfRange { k, price, lower, upper });
    }
    let ek = k.exp();
    let (otm_kind, target) = match (kind, k >= 0.0) {
        (OptionKind::Call, true) => (OptionKind::Call, price),
        (OptionKind::Call, false) => (OptionKind::Put, price - (1.0 - ek)),
        (OptionKind::Put, false) => (OptionKind::Put, price),
        (OptionKind::Put, true) => (OptionKind::Call, price - (ek - 1.0)),
    };
    let out_of_range = || Error::PriceOutOfRange { k, price, lower, upper };
    let f = |theta: f64| self::price(MoneyVol { k, theta }, otm_kind) - target;

    let (mut lo, mut hi) = (THETA_MIN, THETA_MAX);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(out_of_range());
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }

    let mut theta = (2.0 * k.abs()).sqrt().max(0.1).min(hi);
    let mut widths = [hi - lo; 2];
    for _ in 0..INVERSION_MAX_ITERATIONS {
        let fx = f(theta);
        if fx == 0.0 {
            return Ok(theta);
        }
        if fx < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let vega = norm_pdf(-k / theta + 0.5 * theta);
        // Newton on log-price: out-of-the-money prices behave like
        // exp(-c / theta^2), where plain Newton crawls from above
        let p = fx + target;
        let newton = if p > 0.0 { theta - (p.ln() - target.ln()) * p / vega } else { theta - fx / vega };
        let stalled = hi - lo > 0.5 * widths[0];
        widths = [widths[1], hi - lo];
        let next =
            if vega > 0.0 && newton > lo && newton < hi && !stalled { newton } else { 0.5 * (lo + hi) };
        if (next - theta).abs() <= 4.0 * f64::EPSILON * theta || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        theta = next;
    }
    Err(Error::MaxIterations(INVERSION_MAX_ITERATIONS))
}
