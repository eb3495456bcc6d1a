//! The SVI total variance smile, its normalized form, the Durrleman
//! function `g` and the split `G = G1 + G2 / (2 sigma)` used by the
//! arbitrage analysis.
//!
//! Raw SVI: `w(k) = a + b (rho (k - m) + sqrt((k - m)^2 + sigma^2))`.
//! Normalized SVI: `N(l) = alpha + b (rho l + sqrt(l^2 + 1))` with
//! `alpha = a / sigma`, `mu = m / sigma`, `l = k / sigma - mu`, so that
//! `w(k) = sigma N(k / sigma - mu)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Raw SVI parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviParams {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub m: f64,
    pub sigma: f64,
}

impl SviParams {
    /// Builds and validates a parameter set.
    pub fn new(a: f64, b: f64, rho: f64, m: f64, sigma: f64) -> Result<Self> {
        let p = Self { a, b, rho, m, sigma };
        p.validate()?;
        Ok(p)
    }

    /// Checks finiteness, `b >= 0`, `|rho| <= 1`, `sigma >= 0` and a
    /// non-negative smile minimum `a + b sigma sqrt(1 - rho^2)`.
    pub fn validate(&self) -> Result<()> {
        let Self { a, b, rho, m, sigma } = *self;
        if ![a, b, rho, m, sigma].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if b < 0.0 {
            return Err(Error::InvalidParams(format!("b must be non-negative, got {b}")));
        }
        if rho.abs() > 1.0 {
            return Err(Error::InvalidParams(format!("rho must lie in [-1, 1], got {rho}")));
        }
        if sigma < 0.0 {
            return Err(Error::InvalidParams(format!("sigma must be non-negative, got {sigma}")));
        }
        let min = self.min_variance();
        if min < 0.0 {
            return Err(Error::InvalidParams(format!(
                "negative minimum total variance a + b sigma sqrt(1 - rho^2) = {min}"
            )));
        }
        Ok(())
    }

    /// Minimum of the smile over `k`.
    pub fn min_variance(&self) -> f64 {
        self.a + self.b * self.sigma * (1.0 - self.rho * self.rho).max(0.0).sqrt()
    }
}

/// Normalized parameters `(alpha, b, rho, mu, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    pub alpha: f64,
    pub b: f64,
    pub rho: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl NormalizedParams {
    pub fn n_funcs(&self, l: f64) -> NFuncs {
        n_funcs(self.alpha, self.b, self.rho, l)
    }
}

/// `N` and its first three derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NFuncs {
    pub n: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

/// The two factors of `G1`, their product and `G2` at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GSplit {
    pub g1_plus: f64,
    pub g1_minus: f64,
    pub g1: f64,
    pub g2: f64,
}

impl GSplit {
    /// `G = G1 + G2 / (2 sigma)`.
    pub fn g(&self, sigma: f64) -> f64 {
        self.g1 + self.g2 / (2.0 * sigma)
    }
}

/// Classification of the wing slopes `b (1 - rho)` (left) and `b (1 + rho)`
/// (right) against the maximal slope 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WingRegime {
    /// Both slopes strictly below 2.
    B1,
    /// Left slope equal to 2, right slope below.
    B2,
    /// Right slope equal to 2, left slope below.
    B3,
    /// Both slopes equal to 2, i.e. `b = 2, rho = 0`.
    B4,
    /// Some slope above 2.
    OverLimit,
}

pub fn svi(p: &SviParams, k: f64) -> f64 {
    let x = k - p.m;
    p.a + p.b * (p.rho * x + x.hypot(p.sigma))
}

/// First derivative of the smile in `k`.
pub fn svi_d1(p: &SviParams, k: f64) -> f64 {
    let x = k - p.m;
    let r = x.hypot(p.sigma);
    if r == 0.0 {
        // sigma = 0 kink: use the right derivative
        return p.b * (p.rho + 1.0);
    }
    p.b * (p.rho + x / r)
}

/// Second derivative of the smile in `k`.
pub fn svi_d2(p: &SviParams, k: f64) -> f64 {
    let x = k - p.m;
    let r = x.hypot(p.sigma);
    if r == 0.0 {
        return f64::INFINITY;
    }
    p.b * p.sigma * p.sigma / (r * r * r)
}

pub fn normalize(p: &SviParams) -> Result<NormalizedParams> {
    if p.sigma == 0.0 {
        return Err(Error::DegenerateSigma);
    }
    Ok(NormalizedParams { alpha: p.a / p.sigma, b: p.b, rho: p.rho, mu: p.m / p.sigma, sigma: p.sigma })
}

pub fn denormalize(np: &NormalizedParams) -> SviParams {
    SviParams { a: np.alpha * np.sigma, b: np.b, rho: np.rho, m: np.mu * np.sigma, sigma: np.sigma }
}

/// `N(l)` and derivatives:
/// `N' = b (rho + l / sqrt(l^2 + 1))`, `N'' = b / (l^2 + 1)^{3/2}`,
/// `N''' = -3 b l / (l^2 + 1)^{5/2}`.
pub fn n_funcs(alpha: f64, b: f64, rho: f64, l: f64) -> NFuncs {
    let r = l.hypot(1.0);
    let n = alpha + b * (rho * l + r);
    let n1 = b * (rho + l / r);
    let n2 = b / (r * r * r);
    let n3 = -3.0 * b * l / (r * r * r * r * r);
    NFuncs { n, n1, n2, n3 }
}

/// Durrleman's function
/// `g(k) = (1 - k w' / (2w))^2 - w'^2 / 4 (1/w + 1/4) + w'' / 2`,
/// non-negative everywhere exactly when the smile is free of butterfly
/// arbitrage.
pub fn durrleman_g(p: &SviParams, k: f64) -> Result<f64> {
    let w = svi(p, k);
    if !(w > 0.0) {
        return Err(Error::NonPositiveVariance { k, w });
    }
    let w1 = svi_d1(p, k);
    let w2 = svi_d2(p, k);
    let t = 1.0 - k * w1 / (2.0 * w);
    Ok(t * t - 0.25 * w1 * w1 * (1.0 / w + 0.25) + 0.5 * w2)
}

/// `G1+ = 1 - N' ((l + mu) / (2N) + 1/4)`, `G1- = 1 - N' ((l + mu) / (2N) - 1/4)`
/// and `G2 = N'' - N'^2 / (2N)`, so that `g(sigma (l + mu)) = G1 + G2 / (2 sigma)`.
pub fn g_split(np: &NormalizedParams, l: f64) -> Result<GSplit> {
    let NFuncs { n, n1, n2, .. } = np.n_funcs(l);
    if !(n > 0.0) {
        return Err(Error::NonPositiveVariance { k: np.sigma * (l + np.mu), w: np.sigma * n });
    }
    let x = (l + np.mu) / (2.0 * n);
    let g1_plus = 1.0 - n1 * (x + 0.25);
    let g1_minus = 1.0 - n1 * (x - 0.25);
    Ok(GSplit { g1_plus, g1_minus, g1: g1_plus * g1_minus, g2: n2 - n1 * n1 / (2.0 * n) })
}

/// Risk-neutral density of the terminal price at strike `K = e^k` (unit
/// forward), `g(k) exp(-d2^2 / 2) / (K sqrt(2 pi w))`.
pub fn density(p: &SviParams, k: f64) -> Result<f64> {
    let g = durrleman_g(p, k)?;
    let w = svi(p, k);
    let theta = w.sqrt();
    let d2 = -k / theta - 0.5 * theta;
    Ok(g * (-0.5 * d2 * d2 - k).exp() / (2.0 * PI * w).sqrt())
}

/// Exact classification (no tolerance).
pub fn wing_regime(b: f64, rho: f64) -> WingRegime {
    wing_regime_tol(b, rho, 0.0)
}

/// Classification where slopes within `tol` of 2 count as equal to 2.
pub fn wing_regime_tol(b: f64, rho: f64, tol: f64) -> WingRegime {
    let left = b * (1.0 - rho) - 2.0;
    let right = b * (1.0 + rho) - 2.0;
    if left > tol || right > tol {
        return WingRegime::OverLimit;
    }
    match (left.abs() <= tol, right.abs() <= tol) {
        (true, true) => WingRegime::B4,
        (true, false) => WingRegime::B2,
        (false, true) => WingRegime::B3,
        (false, false) => WingRegime::B1,
    }
}
