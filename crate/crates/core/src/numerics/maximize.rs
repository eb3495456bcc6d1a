//! Bounded one-dimensional maximization: dense grid, then golden-section
//! refinement around the most promising grid points.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const GOLDEN_MAX_ITERATIONS: usize = 200;

/// Maximizes `f` on the open interval `(lo, hi)`.
///
/// `f` is sampled on `n_grid` interior points and the best sample is refined
/// by golden-section search between its two neighbours. `f` is never
/// evaluated at `lo` or `hi`, so it may be singular there.
pub fn maximize_scalar(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n_grid: usize) -> Result<(f64, f64)> {
    maximize_scalar_multi(f, lo, hi, n_grid, 1)
}

/// Like [`maximize_scalar`], but refines around the `n_candidates` best local
/// maxima of the grid and keeps the overall winner.
pub fn maximize_scalar_multi(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n_grid: usize,
    n_candidates: usize,
) -> Result<(f64, f64)> {
    if !(lo < hi) || n_grid < 3 || n_candidates == 0 {
        return Err(Error::Domain(format!(
            "maximize_scalar needs lo < hi and n_grid >= 3, got [{lo}, {hi}] and {n_grid}"
        )));
    }
    let step = (hi - lo) / (n_grid + 1) as f64;
    let xs: Vec<f64> = (1..=n_grid).map(|i| lo + step * i as f64).collect();
    let mut ys = Vec::with_capacity(n_grid);
    for &x in &xs {
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::Domain(format!("non-finite objective at x={x}")));
        }
        ys.push(y);
    }

    // grid local maxima, best first
    let mut peaks: Vec<usize> = (0..n_grid)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { ys[i - 1] };
            let right = if i + 1 == n_grid { f64::NEG_INFINITY } else { ys[i + 1] };
            ys[i] >= left && ys[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]).then(a.cmp(&b)));
    peaks.truncate(n_candidates);

    let mut best = (xs[peaks[0]], ys[peaks[0]]);
    for &i in &peaks {
        let a = if i == 0 { lo } else { xs[i - 1] };
        let b = if i + 1 == n_grid { hi } else { xs[i + 1] };
        let (x, y) = golden_section_max(&f, a, b, xs[i], ys[i]);
        if y > best.1 {
            best = (x, y);
        }
    }
    Ok(best)
}

/// Golden-section search for a maximum inside `(a, b)`, evaluating only
/// interior points. The incumbent `(x0, y0)` is returned if nothing better
/// is found.
fn golden_section_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, x0: f64, y0: f64) -> (f64, f64) {
    let mut best = (x0, y0);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_MAX_ITERATIONS {
        for (x, y) in [(c, fc), (d, fd)] {
            if y.is_finite() && y > best.1 {
                best = (x, y);
            }
        }
        if (b - a) <= 1e-13 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if fc >= fd || !fd.is_finite() {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    best
}
