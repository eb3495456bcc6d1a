//! Fukasawa's necessary condition in normalized coordinates.
//!
//! Both factors `G1+` and `G1-` are positive on the whole line exactly when
//! `sup_{l<l*} L-(l) < mu < inf_{l>l*} L+(l)` with
//! `L±(l) = 2 N(l) (1/N'(l) ∓ 1/4) - l`. The extrema are located through the
//! auxiliary functions `g±(b, rho, l)`, which do not depend on `alpha`:
//! `L-` is stationary where `alpha = b g-(l)`. The smallest `alpha` for
//! which the interval is non-empty is the threshold `F(b, rho)`.
//!
//! Plus-side quantities are derived from minus-side ones through the
//! symmetry `L+(l; alpha, b, rho) = -L-(-l; alpha, b, -rho)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{expand_bracket_with_step, find_root, Bracket, Direction};
use crate::svi::{n_funcs, wing_regime_tol, WingRegime};

/// Tolerance under which a wing slope `b (1 ± rho)` counts as equal to 2.
pub const REGIME_TOL: f64 = 1e-12;
/// Absolute tolerance for the inner root finds on `l`.
const L_TOL: f64 = 1e-15;
/// Absolute tolerance for the threshold root find on `alpha`.
const ALPHA_TOL: f64 = 1e-14;
/// Offset above `-b sqrt(1 - rho^2)` where the threshold search starts.
const ALPHA_FLOOR_OFFSET: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

/// Shape of `g-` (or `g+`): either monotone on its half-line, or with a
/// single minimum at `m_threshold`. `s` is the abscissa where the function
/// returns to its value at `l*`, or `l*` itself when monotone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GShape {
    pub monotone: bool,
    pub m_threshold: Option<f64>,
    pub s: f64,
}

/// Admissible interval for `mu`, open at both ends. Infinite ends are
/// represented by `f64::INFINITY` / `f64::NEG_INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuInterval {
    pub lower: f64,
    pub upper: f64,
    pub regime: WingRegime,
}

impl MuInterval {
    pub fn is_empty(&self) -> bool {
        !(self.lower < self.upper)
    }

    /// Strict membership: the end points are excluded.
    pub fn contains(&self, mu: f64) -> bool {
        self.lower < mu && mu < self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Minimizer of `N`, `-rho / sqrt(1 - rho^2)`.
pub fn l_star(rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("l* is finite only for |rho| < 1, got {rho}")));
    }
    Ok(-rho / (1.0 - rho * rho).sqrt())
}

/// `l*` with the conventions `+inf` at `rho = -1` and `-inf` at `rho = 1`.
fn l_star_extended(rho: f64) -> f64 {
    if rho <= -1.0 {
        f64::INFINITY
    } else if rho >= 1.0 {
        f64::NEG_INFINITY
    } else {
        -rho / (1.0 - rho * rho).sqrt()
    }
}

fn check_b_rho(b: f64, rho: f64) -> Result<()> {
    if !(b > 0.0) || !b.is_finite() || !(rho.abs() <= 1.0) {
        return Err(Error::Domain(format!("need b > 0 and |rho| <= 1, got b={b}, rho={rho}")));
    }
    Ok(())
}

/// `L-(l) = 2 N(l) (1/N'(l) + 1/4) - l`, defined for `l < l*`.
pub fn big_l_minus(l: f64, alpha: f64, b: f64, rho: f64) -> Result<f64> {
    check_b_rho(b, rho)?;
    if !(l < l_star_extended(rho)) {
        return Err(Error::Domain(format!("L- is defined for l < l*, got l={l}")));
    }
    let f = n_funcs(alpha, b, rho, l);
    if !(f.n > 0.0) || !(f.n1 < 0.0) {
        return Err(Error::Domain(format!("L- needs N > 0 and N' < 0 at l={l}")));
    }
    Ok(2.0 * f.n * (1.0 / f.n1 + 0.25) - l)
}

/// `L+(l) = 2 N(l) (1/N'(l) - 1/4) - l`, defined for `l > l*`.
pub fn big_l_plus(l: f64, alpha: f64, b: f64, rho: f64) -> Result<f64> {
    check_b_rho(b, rho)?;
    if !(l > l_star_extended(rho)) {
        return Err(Error::Domain(format!("L+ is defined for l > l*, got l={l}")));
    }
    let f = n_funcs(alpha, b, rho, l);
    if !(f.n > 0.0) || !(f.n1 > 0.0) {
        return Err(Error::Domain(format!("L+ needs N > 0 and N' > 0 at l={l}")));
    }
    Ok(2.0 * f.n * (1.0 / f.n1 - 0.25) - l)
}

fn g_minus_unchecked(b: f64, rho: f64, l: f64) -> f64 {
    let r = l.hypot(1.0);
    let t = rho * r + l;
    t * t * (r * (0.5 + 0.25 * b * rho) + 0.25 * b * l) - (rho * l + r)
}

/// `g-(b, rho, l) = (rho r + l)^2 (r (1/2 + b rho / 4) + b l / 4) - (rho l + r)`
/// with `r = sqrt(l^2 + 1)`, for `l <= l*`; `g+(b, rho, l) = g-(b, -rho, -l)`
/// for `l >= l*`. Both equal `-sqrt(1 - rho^2)` at `l*`.
pub fn g_pm(b: f64, rho: f64, l: f64, side: Side) -> Result<f64> {
    check_b_rho(b, rho)?;
    match side {
        Side::Minus => {
            if !(l <= l_star_extended(rho)) || l.is_nan() {
                return Err(Error::Domain(format!("g- is defined for l <= l*, got l={l}")));
            }
            Ok(g_minus_unchecked(b, rho, l))
        }
        Side::Plus => g_pm(b, -rho, -l, Side::Minus),
    }
}

/// Abscissa of the minimum of `g-`,
/// `m- = -b / sqrt(b^2 (rho^2 - 1) + 4 b rho + 4)`; `-inf` when the left
/// wing slope equals 2.
fn m_minus(b: f64, rho: f64) -> f64 {
    let disc = b * b * (rho * rho - 1.0) + 4.0 * b * rho + 4.0;
    if disc <= 0.0 {
        f64::NEG_INFINITY
    } else {
        -b / disc.sqrt()
    }
}

fn left_slope_is_critical(b: f64, rho: f64) -> bool {
    (b * (1.0 - rho) - 2.0).abs() <= REGIME_TOL
}

fn check_not_over_limit(b: f64, rho: f64) -> Result<WingRegime> {
    let regime = wing_regime_tol(b, rho, REGIME_TOL);
    if regime == WingRegime::OverLimit {
        return Err(Error::Domain(format!("wing slope above 2: b={b}, rho={rho}")));
    }
    Ok(regime)
}

/// Monotonicity of `g-` (or `g+`) and the boundary abscissa `s`.
pub fn g_shape(b: f64, rho: f64, side: Side) -> Result<GShape> {
    check_b_rho(b, rho)?;
    check_not_over_limit(b, rho)?;
    if side == Side::Plus {
        let s = g_shape(b, -rho, Side::Minus)?;
        return Ok(GShape { monotone: s.monotone, m_threshold: s.m_threshold.map(|m| -m), s: -s.s });
    }
    if rho >= 1.0 {
        return Err(Error::Domain("g- has an empty domain at rho = 1".into()));
    }
    let l_star = l_star_extended(rho);
    if left_slope_is_critical(b, rho) {
        // increasing on the whole half-line
        return Ok(GShape { monotone: true, m_threshold: None, s: l_star });
    }
    if rho > 0.0 && b <= 2.0 * rho / (1.0 - rho * rho) {
        return Ok(GShape { monotone: true, m_threshold: Some(m_minus(b, rho)), s: l_star });
    }
    let m = m_minus(b, rho);
    let level = -(1.0 - rho * rho).max(0.0).sqrt();
    let h = |l: f64| g_minus_unchecked(b, rho, l) - level;
    let bracket = expand_bracket_with_step(h, m, Direction::Down, 1.0, 2.0)?;
    let s = find_root(h, &bracket, L_TOL)?;
    Ok(GShape { monotone: false, m_threshold: Some(m), s })
}

/// The abscissa `l-` (resp. `l+`) where `L-` (resp. `L+`) reaches its
/// supremum (resp. infimum): the unique solution of `b g±(l) = alpha` beyond
/// `s±`.
///
/// Returns `NoFiniteOptimum` when the wing slope on that side equals 2: the
/// extremum is then attained at infinity with value `∓alpha / 2`.
pub fn l_pm_of_alpha(alpha: f64, b: f64, rho: f64, side: Side) -> Result<f64> {
    check_b_rho(b, rho)?;
    check_not_over_limit(b, rho)?;
    if side == Side::Plus {
        return Ok(-l_pm_of_alpha(alpha, b, -rho, Side::Minus)?);
    }
    if rho >= 1.0 {
        return Err(Error::Domain("l- does not exist at rho = 1".into()));
    }
    if left_slope_is_critical(b, rho) {
        return Err(Error::NoFiniteOptimum);
    }
    let level = -(1.0 - rho * rho).max(0.0).sqrt();
    let target = alpha / b;
    let admissible = if rho <= -1.0 { alpha >= 0.0 } else { target > level };
    if !admissible || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha={alpha} is below -b sqrt(1 - rho^2)")));
    }
    if rho <= -1.0 && alpha == 0.0 {
        return Ok(g_shape(b, rho, Side::Minus)?.s);
    }
    let shape = g_shape(b, rho, Side::Minus)?;
    let hi = if shape.monotone { l_star_extended(rho) } else { shape.m_threshold.unwrap_or(shape.s) };
    let h = |l: f64| g_minus_unchecked(b, rho, l) - target;
    let bracket = expand_bracket_with_step(h, hi, Direction::Down, 1.0, 2.0)?;
    find_root(h, &bracket, L_TOL)
}

/// Lower end of the `mu` interval: `sup_{l<l*} L-(l)`.
fn lower_bound(alpha: f64, b: f64, rho: f64) -> Result<f64> {
    if rho >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if left_slope_is_critical(b, rho) {
        return Ok(-0.5 * alpha);
    }
    let l = l_pm_of_alpha(alpha, b, rho, Side::Minus)?;
    big_l_minus(l, alpha, b, rho)
}

/// Interval of `mu` values for which both factors of `G1` stay positive.
pub fn mu_interval(alpha: f64, b: f64, rho: f64) -> Result<MuInterval> {
    check_b_rho(b, rho)?;
    let regime = check_not_over_limit(b, rho)?;
    let lower = lower_bound(alpha, b, rho)?;
    let upper = -lower_bound(alpha, b, -rho)?;
    Ok(MuInterval { lower, upper, regime })
}

/// Fukasawa threshold `F(b, rho)`: the infimum of the `alpha` values with a
/// non-empty `mu` interval, floored at `-b sqrt(1 - rho^2)`.
///
/// Set to 0 at `b = 2, rho = 0` and at `|rho| = 1`.
pub fn fukasawa_threshold(b: f64, rho: f64) -> Result<f64> {
    check_b_rho(b, rho)?;
    let regime = check_not_over_limit(b, rho)?;
    if regime == WingRegime::B4 || rho.abs() >= 1.0 {
        return Ok(0.0);
    }
    let floor = -b * (1.0 - rho * rho).sqrt();
    let width = |alpha: f64| -> Result<f64> {
        let i = mu_interval(alpha, b, rho)?;
        Ok(i.upper - i.lower)
    };
    let start = floor + ALPHA_FLOOR_OFFSET;
    let d_start = width(start)?;
    if d_start > 0.0 {
        return Ok(floor);
    }
    let mut hi = 1.0f64.max(b);
    let mut d_hi = width(hi)?;
    let mut expansions = 0;
    while d_hi <= 0.0 {
        expansions += 1;
        if expansions > 60 {
            return Err(Error::BracketFailure(format!("interval still empty at alpha={hi}")));
        }
        hi = floor + 2.0 * (hi - floor);
        d_hi = width(hi)?;
    }
    // the width is increasing in alpha, so errors inside are not expected;
    // a failed evaluation is reported as NaN and aborts the search
    let f = |alpha: f64| width(alpha).unwrap_or(f64::NAN);
    let bracket = Bracket::from_values(start, hi, d_start, d_hi)?;
    find_root(f, &bracket, ALPHA_TOL).map_err(|e| Error::BracketFailure(e.to_string()))
}

/// Closed form of the threshold at `rho = 0`:
/// `F(b, 0) = b g-(b, 0, -6b / sqrt(b^4 - 20 b^2 + 64))` for `0 < b < 2`.
pub fn f_b0_closed_form(b: f64) -> Result<f64> {
    if !(b > 0.0 && b < 2.0) {
        return Err(Error::Domain(format!("closed form needs 0 < b < 2, got {b}")));
    }
    let l = -6.0 * b / (b.powi(4) - 20.0 * b * b + 64.0).sqrt();
    Ok(b * g_minus_unchecked(b, 0.0, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const VOGT_B: f64 = 0.1331;
    const VOGT_RHO: f64 = 0.3060;
    const VOGT_ALPHA: f64 = -0.041 / 0.4153;

    /// `g-` through the stationarity condition of `L-`, with `N` taken free
    /// of `alpha`.
    fn g_minus_implicit(b: f64, rho: f64, l: f64) -> f64 {
        let f = n_funcs(0.0, b, rho, l);
        (f.n1 * f.n1 / (2.0 * f.n2) * (1.0 + 0.5 * f.n1) - l * f.n1 - f.n2 * (l * l + 1.0)) / b
    }

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn l_star_examples() {
        assert_eq!(l_star(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(l_star(0.6).unwrap(), -0.75, epsilon = 1e-15);
        assert!(l_star(1.0).is_err());
        for rho in linspace(-0.95, 0.95, 39) {
            assert_abs_diff_eq!(n_funcs(0.1, 0.8, rho, l_star(rho).unwrap()).n1, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn g_minus_explicit_matches_implicit() {
        for (b, rho) in [(0.5, 0.2), (1.2, -0.5), (0.1331, 0.306), (1.9, 0.0)] {
            let ls = l_star(rho).unwrap();
            for l in linspace(ls - 20.0, ls - 1e-3, 200) {
                let explicit = g_pm(b, rho, l, Side::Minus).unwrap();
                assert_abs_diff_eq!(explicit, g_minus_implicit(b, rho, l), epsilon = 1e-11 * (1.0 + explicit.abs()));
            }
        }
    }

    #[test]
    fn g_pm_anchor_and_rho_zero_form() {
        for (b, rho) in [(0.5, 0.2), (1.2, -0.5), (0.3, 0.9)] {
            let ls = l_star(rho).unwrap();
            let level = -(1.0 - rho * rho).sqrt();
            assert_abs_diff_eq!(g_pm(b, rho, ls, Side::Minus).unwrap(), level, epsilon = 1e-14);
            assert_abs_diff_eq!(g_pm(b, rho, ls, Side::Plus).unwrap(), level, epsilon = 1e-14);
        }
        let l = -1.0f64;
        let r = 2.0f64.sqrt();
        let expected = 0.25 * (2.0 * r - 1.0) - r;
        assert_abs_diff_eq!(g_pm(1.0, 0.0, l, Side::Minus).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, -0.95710678, epsilon = 1e-8);
        assert!(g_pm(1.0, 0.0, 0.5, Side::Minus).is_err());
    }

    #[test]
    fn shape_for_decreasing_smile() {
        for b in [0.1, 0.5, 0.9] {
            let s = g_shape(b, -1.0, Side::Minus).unwrap();
            assert!(!s.monotone);
            let expected = -(b + 2.0) / (2.0 * (3.0 * (1.0 - b)).sqrt());
            assert_abs_diff_eq!(s.s, expected, epsilon = 1e-10);
        }
        let s = g_shape(1.0, -1.0, Side::Minus).unwrap();
        assert_eq!(s.s, f64::INFINITY);
    }

    #[test]
    fn shape_with_single_minimum() {
        // g- is monotone here while g+ dips below the level line once
        let (b, rho) = (2.0 / 3.0, 0.5);
        assert!(g_shape(b, rho, Side::Minus).unwrap().monotone);
        let shape = g_shape(b, rho, Side::Plus).unwrap();
        assert!(!shape.monotone);
        let m = shape.m_threshold.unwrap();
        let ls = l_star(rho).unwrap();
        let level = -(1.0 - rho * rho).sqrt();
        assert!(ls < m && m < shape.s);
        let g = |l| g_pm(b, rho, l, Side::Plus).unwrap();
        assert!(g(m) < level);
        assert_abs_diff_eq!(g(shape.s), level, epsilon = 1e-12);
        assert!((shape.s - ls).abs() > 1e-10);
        // decreasing before m, increasing after
        assert!(g(m - 0.05) > g(m) && g(m + 0.1) > g(m));
        assert!(g(ls + 1e-3) < g(ls));
    }

    #[test]
    fn monotone_shape() {
        // rho > 0 and b <= 2 rho / (1 - rho^2)
        let shape = g_shape(0.5, 0.5, Side::Minus).unwrap();
        assert!(shape.monotone);
        assert_eq!(shape.s, l_star(0.5).unwrap());
        // left slope equal to 2
        let shape = g_shape(1.5, -1.0 / 3.0, Side::Minus).unwrap();
        assert!(shape.monotone && shape.m_threshold.is_none());
    }

    #[test]
    fn vogt_threshold_and_interval() {
        let f = fukasawa_threshold(VOGT_B, VOGT_RHO).unwrap();
        assert_abs_diff_eq!(f, -0.12663, epsilon = 1e-4);
        let i = mu_interval(VOGT_ALPHA, VOGT_B, VOGT_RHO).unwrap();
        assert_abs_diff_eq!(i.lower, -0.72407, epsilon = 1e-4);
        assert_abs_diff_eq!(i.upper, 0.82939, epsilon = 1e-4);
        assert_eq!(i.regime, WingRegime::B1);
        assert!(!i.contains(0.3586 / 0.4153));
    }

    #[test]
    fn boundary_thresholds() {
        assert_eq!(fukasawa_threshold(2.0, 0.0).unwrap(), 0.0);
        assert_eq!(fukasawa_threshold(0.7, -1.0).unwrap(), 0.0);
        assert_eq!(fukasawa_threshold(0.7, 1.0).unwrap(), 0.0);
        assert!(fukasawa_threshold(3.0, 0.0).is_err());
    }

    #[test]
    fn threshold_matches_closed_form_at_rho_zero() {
        for b in [0.2, 0.5, 1.0, 1.5, 1.9] {
            let f = fukasawa_threshold(b, 0.0).unwrap();
            assert_abs_diff_eq!(f, f_b0_closed_form(b).unwrap(), epsilon = 1e-8);
        }
    }

    #[test]
    fn closed_form_properties() {
        assert!(f_b0_closed_form(1e-4).unwrap().abs() < 1e-3);
        assert!(f_b0_closed_form(1e-4).unwrap() < 0.0);
        let l = -6.0 / 45.0f64.sqrt();
        assert_abs_diff_eq!(f_b0_closed_form(1.0).unwrap(), g_pm(1.0, 0.0, l, Side::Minus).unwrap(), epsilon = 1e-15);
        // regression value for b = 1
        assert_abs_diff_eq!(f_b0_closed_form(1.0).unwrap(), -0.9838699101, epsilon = 1e-9);
        for b in linspace(0.01, 1.99, 100) {
            let f = f_b0_closed_form(b).unwrap();
            assert!(f > -b && f <= 0.0);
        }
        assert!(f_b0_closed_form(2.0).is_err());
    }

    #[test]
    fn decreasing_smile_interval() {
        for b in [0.2, 0.5, 0.8] {
            let i = mu_interval(0.0, b, -1.0).unwrap();
            assert_abs_diff_eq!(i.lower, -(3.0 * (1.0 - b)).sqrt(), epsilon = 1e-9);
            assert_eq!(i.upper, f64::INFINITY);
            let mirrored = mu_interval(0.0, b, 1.0).unwrap();
            assert_eq!(mirrored.lower, f64::NEG_INFINITY);
            assert_abs_diff_eq!(mirrored.upper, -i.lower, epsilon = 0.0);
        }
    }

    #[test]
    fn both_slopes_critical_interval() {
        let i = mu_interval(0.5, 2.0, 0.0).unwrap();
        assert_eq!((i.lower, i.upper), (-0.25, 0.25));
        assert_eq!(i.regime, WingRegime::B4);
    }

    #[test]
    fn one_slope_critical_interval() {
        let (b, rho) = (1.5, 1.0 / 3.0);
        let i = mu_interval(0.2, b, rho).unwrap();
        assert_eq!(i.regime, WingRegime::B3);
        assert_abs_diff_eq!(i.upper, 0.1, epsilon = 1e-16);
        assert!(matches!(l_pm_of_alpha(0.2, b, rho, Side::Plus), Err(Error::NoFiniteOptimum)));
    }

    #[test]
    fn left_wing_limit_of_l_minus() {
        let (alpha, b, rho) = (0.3, 1.5, -1.0 / 3.0);
        assert_abs_diff_eq!(big_l_minus(-1e8, alpha, b, rho).unwrap(), -alpha / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn l_minus_negative_for_nonnegative_alpha() {
        for (alpha, b, rho) in [(0.0, 0.5, 0.3), (0.4, 1.2, -0.4), (1.0, 0.3, 0.8)] {
            let ls = l_star(rho).unwrap();
            for l in linspace(ls - 50.0, ls - 1e-6, 500) {
                assert!(big_l_minus(l, alpha, b, rho).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn l_minus_diverges_at_l_star() {
        let ls = l_star(0.2).unwrap();
        assert!(big_l_minus(ls - 1e-9, 0.1, 0.8, 0.2).unwrap() < -1e6);
        assert!(big_l_plus(ls + 1e-9, 0.1, 0.8, 0.2).unwrap() > 1e6);
        assert!(big_l_minus(ls + 0.1, 0.1, 0.8, 0.2).is_err());
    }

    #[test]
    fn l_minus_moves_left_as_alpha_grows() {
        let (b, rho) = (0.8, 0.2);
        let mut prev_minus = f64::INFINITY;
        let mut prev_plus = f64::NEG_INFINITY;
        for alpha in linspace(-0.7, 2.0, 28) {
            let lm = l_pm_of_alpha(alpha, b, rho, Side::Minus).unwrap();
            let lp = l_pm_of_alpha(alpha, b, rho, Side::Plus).unwrap();
            assert!(lm < prev_minus && lp > prev_plus);
            prev_minus = lm;
            prev_plus = lp;
        }
    }

    #[test]
    fn l_minus_is_the_argmax_of_l_minus_curve() {
        let (alpha, b, rho) = (0.05, 0.9, -0.2);
        let l = l_pm_of_alpha(alpha, b, rho, Side::Minus).unwrap();
        let best = big_l_minus(l, alpha, b, rho).unwrap();
        let ls = l_star(rho).unwrap();
        for x in linspace(ls - 100.0, ls - 1e-4, 5000) {
            assert!(big_l_minus(x, alpha, b, rho).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn nonnegative_alpha_interval_contains_zero() {
        for (alpha, b, rho) in [(0.0, 0.5, 0.3), (0.4, 1.2, -0.4), (1.0, 0.3, 0.8), (0.01, 1.9, 0.02)] {
            assert!(mu_interval(alpha, b, rho).unwrap().contains(0.0));
        }
    }

    #[test]
    fn interval_widens_with_alpha() {
        for (b, rho) in [(0.5, 0.3), (1.2, -0.4), (1.9, 0.02)] {
            let f = fukasawa_threshold(b, rho).unwrap();
            let widths: Vec<f64> = linspace(f + 1e-3, f + 3.0, 30)
                .into_iter()
                .map(|a| {
                    let i = mu_interval(a, b, rho).unwrap();
                    i.upper - i.lower
                })
                .collect();
            assert!(widths.windows(2).all(|w| w[1] > w[0]));
            assert!(widths[0] > 0.0);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// (b, rho) strictly inside the B1 regime.
        fn b1() -> impl Strategy<Value = (f64, f64)> {
            (-0.95f64..0.95, 0.05f64..0.98).prop_map(|(rho, frac)| (frac * 2.0 / (1.0 + rho.abs()), rho))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(128))]

            #[test]
            fn l_symmetry((b, rho) in b1(), alpha in -0.5f64..2.0, dl in 0.01f64..20.0) {
                let ls = l_star(rho).unwrap();
                let alpha = alpha.max(-b * (1.0 - rho * rho).sqrt() + 0.05);
                let l = ls - dl;
                if let Ok(lm) = big_l_minus(l, alpha, b, rho) {
                    let lp = big_l_plus(-l, alpha, b, -rho).unwrap();
                    prop_assert!((lm + lp).abs() <= 1e-12 * (1.0 + lm.abs()));
                }
            }

            #[test]
            fn g_symmetry((b, rho) in b1(), dl in 0.0f64..30.0) {
                let l = l_star(rho).unwrap() + dl;
                let gp = g_pm(b, rho, l, Side::Plus).unwrap();
                let gm = g_pm(b, -rho, -l, Side::Minus).unwrap();
                prop_assert!((gp - gm).abs() <= 1e-11 * (1.0 + gp.abs()));
            }

            #[test]
            fn l_pm_consistency_and_symmetry((b, rho) in b1(), u in 0.01f64..2.0) {
                let alpha = -b * (1.0 - rho * rho).sqrt() + u;
                let lm = l_pm_of_alpha(alpha, b, rho, Side::Minus).unwrap();
                prop_assert!((b * g_pm(b, rho, lm, Side::Minus).unwrap() - alpha).abs() <= 1e-10);
                prop_assert!(lm < g_shape(b, rho, Side::Minus).unwrap().s);
                let lp = l_pm_of_alpha(alpha, b, rho, Side::Plus).unwrap();
                prop_assert!((lp + l_pm_of_alpha(alpha, b, -rho, Side::Minus).unwrap()).abs() <= 1e-10);
                prop_assert!(lp > g_shape(b, rho, Side::Plus).unwrap().s);
            }

            #[test]
            fn threshold_symmetry((b, rho) in b1()) {
                let f1 = fukasawa_threshold(b, rho).unwrap();
                let f2 = fukasawa_threshold(b, -rho).unwrap();
                prop_assert!((f1 - f2).abs() <= 1e-10);
                // monitored: the threshold stays above -b sqrt(1 - rho^2)
                prop_assert!(f1 >= -b * (1.0 - rho * rho).sqrt());
            }
        }
    }
}
