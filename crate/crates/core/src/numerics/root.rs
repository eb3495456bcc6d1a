//! Bracketed scalar root finding.

use crate::error::{Error, Result};

/// Maximum number of Brent iterations before giving up.
pub const MAX_ROOT_ITERATIONS: usize = 200;
/// Maximum number of geometric steps taken by [`expand_bracket`].
pub const MAX_EXPANSIONS: usize = 100;

/// An interval `[lo, hi]` on which `f` is certified to change sign.
///
/// A zero value at either end counts as a sign change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    /// Evaluates `f` at both ends and certifies the sign change.
    pub fn new(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Self> {
        Self::from_values(lo, hi, f(lo), f(hi))
    }

    /// Builds a bracket from already computed end values.
    pub fn from_values(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        let (lo, hi, f_lo, f_hi) = if lo <= hi {
            (lo, hi, f_lo, f_hi)
        } else {
            (hi, lo, f_hi, f_lo)
        };
        let certified = lo < hi
            && f_lo.is_finite()
            && f_hi.is_finite()
            && (f_lo == 0.0 || f_hi == 0.0 || (f_lo < 0.0) != (f_hi < 0.0));
        if !certified {
            return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
        }
        Ok(Self { lo, hi, f_lo, f_hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Direction used by [`expand_bracket`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Up => 1.0,
            Direction::Down => -1.0,
        }
    }
}

/// Brent's method: inverse quadratic interpolation and secant steps,
/// safeguarded by bisection.
///
/// Stops when the bracket half-width drops below `2ε|x| + tol/2` or when an
/// exact zero is hit. The returned root always lies in `[bracket.lo, bracket.hi]`.
pub fn find_root(f: impl Fn(f64) -> f64, bracket: &Bracket, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (bracket.lo, bracket.hi);
    let (mut fa, mut fb) = (bracket.f_lo, bracket.f_hi);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if (fa < 0.0) == (fb < 0.0) {
        return Err(Error::NoSignChange { lo: a, hi: b, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);

    for _ in 0..MAX_ROOT_ITERATIONS {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b.clamp(bracket.lo, bracket.hi));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::Domain(format!("non-finite function value at x={b}")));
        }
    }
    Err(Error::MaxIterations(MAX_ROOT_ITERATIONS))
}

/// Walks away from `start` with geometrically growing steps until `f`
/// changes sign, then returns the last two points as a bracket.
pub fn expand_bracket(
    f: impl Fn(f64) -> f64,
    start: f64,
    direction: Direction,
    growth: f64,
) -> Result<Bracket> {
    expand_bracket_with_step(f, start, direction, 1.0, growth)
}

/// Same as [`expand_bracket`] with an explicit first step length.
pub fn expand_bracket_with_step(
    f: impl Fn(f64) -> f64,
    start: f64,
    direction: Direction,
    first_step: f64,
    growth: f64,
) -> Result<Bracket> {
    if growth <= 1.0 || first_step <= 0.0 {
        return Err(Error::Domain(format!(
            "bracket expansion needs growth > 1 and a positive step, got {growth} and {first_step}"
        )));
    }
    let f_start = f(start);
    if !f_start.is_finite() {
        return Err(Error::Domain(format!("non-finite f({start})")));
    }
    let mut prev = start;
    let mut f_prev = f_start;
    let mut step = first_step;
    for _ in 0..MAX_EXPANSIONS {
        let x = start + direction.sign() * step;
        let fx = f(x);
        if !fx.is_finite() {
            break;
        }
        if fx == 0.0 || f_prev == 0.0 || (fx < 0.0) != (f_prev < 0.0) {
            return Bracket::from_values(prev, x, f_prev, fx);
        }
        prev = x;
        f_prev = fx;
        step *= growth;
    }
    Err(Error::NoBracketFound { start, expansions: MAX_EXPANSIONS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        let f_lo = f(lo);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if (f(mid) < 0.0) == (f_lo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn finds_square_root() {
        let f = |x: f64| x * x - 4.0;
        let r = find_root(f, &Bracket::new(f, 0.0, 3.0).unwrap(), 1e-12).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_root() {
        let f = |x: f64| x;
        let r = find_root(f, &Bracket::new(f, -1.0, 2.0).unwrap(), 1e-12).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn dottie_number_matches_bisection() {
        let f = |x: f64| x.cos() - x;
        let oracle = bisect(f, 0.0, 1.0, 1e-13);
        let r = find_root(f, &Bracket::new(f, 0.0, 1.0).unwrap(), 1e-12).unwrap();
        assert!((r - oracle).abs() < 1e-12);
        assert!((r - 0.739_085_133_2).abs() < 1e-10);
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        let f = |x: f64| x * x + 1.0;
        assert!(matches!(Bracket::new(f, -1.0, 1.0), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn expands_up_and_down() {
        let b = expand_bracket(|x| x - 10.0, 0.0, Direction::Up, 2.0).unwrap();
        assert!(b.lo <= 10.0 && 10.0 <= b.hi);
        let b = expand_bracket(|x| x + 3.0, 0.0, Direction::Down, 2.0).unwrap();
        assert!(b.lo <= -3.0 && -3.0 <= b.hi);
    }

    #[test]
    fn expansion_without_root_fails() {
        let err = expand_bracket(|x| 1.0 + x * x, 0.0, Direction::Up, 2.0).unwrap_err();
        assert!(matches!(err, Error::NoBracketFound { .. }));
    }

    #[test]
    fn deterministic() {
        let f = |x: f64| x.exp() - 3.0;
        let b = Bracket::new(f, 0.0, 5.0).unwrap();
        assert_eq!(find_root(f, &b, 0.0).unwrap(), find_root(f, &b, 0.0).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn expansion_yields_certified_bracket(root in -50.0f64..50.0, slope in 0.1f64..10.0, up in any::<bool>()) {
                let f = move |x: f64| slope * (x - root) + (x - root).powi(3);
                let dir = if up { Direction::Up } else { Direction::Down };
                if let Ok(b) = expand_bracket(f, 0.0, dir, 2.0) {
                    prop_assert!(b.lo < b.hi);
                    prop_assert!(b.f_lo * b.f_hi <= 0.0);
                    let r = find_root(f, &b, 1e-12).unwrap();
                    prop_assert!(b.lo <= r && r <= b.hi);
                    prop_assert!(f(r).abs() <= f(b.lo).abs() && f(r).abs() <= f(b.hi).abs());
                } else {
                    // only fails when the root lies on the other side of the start
                    prop_assert!((up && root < 0.0) || (!up && root > 0.0));
                }
            }
        }
    }
}
