//! Bound-constrained nonlinear least squares.
//!
//! The solver is a "dogbox" trust-region method: the trust region is a box
//! in the infinity norm, intersected with the feasible rectangle, and the
//! step inside it follows a dogleg path from the Cauchy point towards the
//! Gauss-Newton point. Variables sitting on a bound with the gradient
//! pointing outwards are frozen for the iteration. Every residual
//! evaluation, including the finite-difference Jacobian, happens inside the
//! bounds.
//!
//! # References
//! - Voglis, C. & Lagaris, I. E. "A rectangular trust region dogleg approach
//!   for unconstrained and bound constrained nonlinear optimization" (2004)

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solver settings. Tolerances default to machine epsilon and the budget to
/// 1000 residual evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LsqOptions {
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub g_tol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self { max_evals: 1000, f_tol: f64::EPSILON, x_tol: f64::EPSILON, g_tol: f64::EPSILON }
    }
}

impl LsqOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals == 0 {
            return Err(Error::InvalidConfig("max_evals must be at least 1".into()));
        }
        for (name, v) in [("f_tol", self.f_tol), ("x_tol", self.x_tol), ("g_tol", self.g_tol)] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Why the solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    CostTolerance,
    StepTolerance,
    CostAndStepTolerance,
    MaxEvals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsqReport {
    pub x: Vec<f64>,
    /// `0.5 * ||r(x)||^2`
    pub cost: f64,
    pub converged: bool,
    pub termination: Termination,
    /// Residual evaluations at trial points (Jacobian evaluations excluded).
    pub nfev: usize,
    pub njev: usize,
    /// Cost at the start point followed by the cost of every accepted step.
    pub cost_history: Vec<f64>,
}

/// Minimizes `0.5 * ||residuals(x)||^2` subject to `lower <= x <= upper`.
///
/// A non-finite residual vector at a trial point is treated as a failed step
/// and shrinks the trust region. Running out of evaluations is not an error:
/// the best point is returned with `converged = false`.
pub fn least_squares_bounded<F>(
    residuals: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LsqOptions,
) -> Result<LsqReport>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    opts.validate()?;
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::Domain("bounds and start point differ in length".into()));
    }
    let feasible = (0..n).all(|i| lower[i] <= x0[i] && x0[i] <= upper[i]);
    if !feasible {
        return Err(Error::InfeasibleStart);
    }
    let lb = DVector::from_column_slice(lower);
    let ub = DVector::from_column_slice(upper);

    let mut x = DVector::from_column_slice(x0);
    let mut f = eval(&residuals, &x);
    if !all_finite(&f) {
        return Err(Error::Domain("residuals are not finite at the start point".into()));
    }
    let mut nfev = 1;
    let mut cost = 0.5 * f.norm_squared();
    let mut jac = jacobian(&residuals, &x, &f, &lb, &ub);
    let mut njev = 1;
    let mut g = jac.tr_mul(&f);
    let mut history = vec![cost];

    let mut delta = x.amax();
    if delta == 0.0 {
        delta = 1.0;
    }
    // -1: on lower bound, +1: on upper bound
    let mut on_bound: Vec<i8> = (0..n)
        .map(|i| {
            if x[i] == lb[i] {
                -1
            } else if x[i] == ub[i] {
                1
            } else {
                0
            }
        })
        .collect();

    let mut termination = None;
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| f64::from(on_bound[i]) * g[i] >= 0.0).collect();
        let g_norm = free.iter().map(|&i| g[i].abs()).fold(0.0, f64::max);
        if g_norm < opts.g_tol {
            termination = Some(Termination::GradientTolerance);
        }
        if termination.is_some() || nfev >= opts.max_evals {
            break;
        }

        let nf = free.len();
        let j_free = DMatrix::from_fn(jac.nrows(), nf, |r, c| jac[(r, free[c])]);
        let g_free = DVector::from_fn(nf, |i, _| g[free[i]]);
        let x_free = DVector::from_fn(nf, |i, _| x[free[i]]);
        let lb_free = DVector::from_fn(nf, |i, _| lb[free[i]]);
        let ub_free = DVector::from_fn(nf, |i, _| ub[free[i]]);

        let newton = gauss_newton_step(&j_free, &f);
        let sd = -&g_free;
        let jsd = &j_free * &sd;
        let quad_a = 0.5 * jsd.norm_squared();
        let quad_b = g_free.dot(&sd);

        let mut actual_reduction = -1.0;
        let mut x_new = x.clone();
        let mut f_new = f.clone();
        let mut cost_new = cost;
        let mut bound_hits = vec![0i8; nf];
        while actual_reduction <= 0.0 && nfev < opts.max_evals {
            let tr = DVector::from_element(nf, delta);
            let (step_free, hits, tr_hit) =
                dogleg_step(&x_free, &newton, &g_free, quad_a, quad_b, &tr, &lb_free, &ub_free);
            bound_hits = hits;
            let mut step = DVector::zeros(n);
            for (k, &i) in free.iter().enumerate() {
                step[i] = step_free[k];
            }
            let predicted = -(0.5 * (&j_free * &step_free).norm_squared() + g_free.dot(&step_free));

            x_new = (&x + &step).zip_zip_map(&lb, &ub, |v, l, u| v.clamp(l, u));
            f_new = eval(&residuals, &x_new);
            nfev += 1;
            let step_h_norm = step.amax();
            if !all_finite(&f_new) {
                delta = 0.25 * step_h_norm;
                continue;
            }
            cost_new = 0.5 * f_new.norm_squared();
            actual_reduction = cost - cost_new;

            let ratio = if predicted > 0.0 {
                actual_reduction / predicted
            } else if predicted == 0.0 && actual_reduction == 0.0 {
                1.0
            } else {
                0.0
            };
            if ratio < 0.25 {
                delta = 0.25 * step_h_norm;
            } else if ratio > 0.75 && tr_hit {
                delta *= 2.0;
            }

            let step_norm = step.norm();
            let f_ok = actual_reduction < opts.f_tol * cost && ratio > 0.25;
            let x_ok = step_norm < opts.x_tol * (opts.x_tol + x.norm());
            termination = match (f_ok, x_ok) {
                (true, true) => Some(Termination::CostAndStepTolerance),
                (true, false) => Some(Termination::CostTolerance),
                (false, true) => Some(Termination::StepTolerance),
                (false, false) => None,
            };
            if termination.is_some() {
                break;
            }
        }

        if actual_reduction > 0.0 {
            for (k, &i) in free.iter().enumerate() {
                on_bound[i] = bound_hits[k];
            }
            x = x_new.clone();
            for i in 0..n {
                match on_bound[i] {
                    -1 => x[i] = lb[i],
                    1 => x[i] = ub[i],
                    _ => {}
                }
            }
            // snapping to a bound can move x by rounding error; keep the snap
            // only if it does not make the fit worse
            let mut snapped_cost = cost_new;
            if x != x_new {
                let f_snap = eval(&residuals, &x);
                nfev += 1;
                let c = 0.5 * f_snap.norm_squared();
                if all_finite(&f_snap) && c <= cost_new {
                    f_new = f_snap;
                    snapped_cost = c;
                } else {
                    x = x_new;
                }
            }
            f = f_new;
            cost = snapped_cost;
            history.push(cost);
            jac = jacobian(&residuals, &x, &f, &lb, &ub);
            njev += 1;
            g = jac.tr_mul(&f);
        }
    }

    let termination = termination.unwrap_or(Termination::MaxEvals);
    Ok(LsqReport {
        x: x.iter().copied().collect(),
        cost,
        converged: termination != Termination::MaxEvals,
        termination,
        nfev,
        njev,
        cost_history: history,
    })
}

fn eval<F: Fn(&[f64]) -> Vec<f64>>(residuals: &F, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_vec(residuals(x.as_slice()))
}

fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Forward-difference Jacobian with step `sqrt(eps) * (1 + |x_j|)`, flipped
/// to a backward difference when the forward point would leave the box.
fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(
    residuals: &F,
    x: &DVector<f64>,
    f: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> DMatrix<f64> {
    let n = x.len();
    let m = f.len();
    let mut jac = DMatrix::zeros(m, n);
    let base = f64::EPSILON.sqrt();
    for j in 0..n {
        let mut h = base * (1.0 + x[j].abs());
        if x[j] + h > ub[j] {
            if x[j] - h >= lb[j] {
                h = -h;
            } else {
                // box thinner than the step: use the larger side
                h = if ub[j] - x[j] >= x[j] - lb[j] { ub[j] - x[j] } else { lb[j] - x[j] };
            }
        }
        if h == 0.0 {
            continue;
        }
        let mut xp = x.clone();
        xp[j] += h;
        let h_eff = xp[j] - x[j];
        let fp = eval(residuals, &xp);
        if !all_finite(&fp) {
            continue;
        }
        for i in 0..m {
            jac[(i, j)] = (fp[i] - f[i]) / h_eff;
        }
    }
    jac
}

/// Minimum-norm solution of `J p = -f`.
fn gauss_newton_step(j: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let n = j.ncols();
    if n == 0 {
        return DVector::zeros(0);
    }
    let svd = j.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let eps = f64::EPSILON * (j.nrows().max(n) as f64) * s_max;
    match svd.solve(&(-f), eps) {
        Ok(p) if p.iter().all(|v| v.is_finite()) => p,
        _ => DVector::zeros(n),
    }
}

/// Step length along `s` from `x` to the first bound it hits, and which
/// bounds are hit (-1 lower, +1 upper, 0 none).
fn step_size_to_bound(x: &DVector<f64>, s: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>) -> (f64, Vec<i8>) {
    let steps: Vec<f64> = (0..x.len())
        .map(|i| {
            if s[i] != 0.0 {
                ((lb[i] - x[i]) / s[i]).max((ub[i] - x[i]) / s[i])
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let min_step = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let hits = (0..x.len())
        .map(|i| {
            if steps[i] == min_step && s[i] != 0.0 {
                s[i].signum() as i8
            } else {
                0
            }
        })
        .collect();
    (min_step, hits)
}

/// Minimizer of `a t^2 + b t` on `[lo, hi]`.
fn minimize_quadratic_1d(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let mut candidates = vec![lo, hi];
    if a != 0.0 {
        let t = -0.5 * b / a;
        if lo < t && t < hi {
            candidates.push(t);
        }
    }
    candidates
        .into_iter()
        .filter(|t| t.is_finite())
        .map(|t| (t, t * (a * t + b)))
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .map(|p| p.0)
        .unwrap_or(0.0)
}

/// Dogleg step inside the intersection of the trust box and the bounds.
/// Returns the step, the original bounds it lands on, and whether the
/// trust-region boundary was hit.
#[allow(clippy::too_many_arguments)]
fn dogleg_step(
    x: &DVector<f64>,
    newton: &DVector<f64>,
    g: &DVector<f64>,
    a: f64,
    b: f64,
    tr: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> (DVector<f64>, Vec<i8>, bool) {
    let n = x.len();
    let lb_c = lb - x;
    let ub_c = ub - x;
    let lb_total = lb_c.zip_map(tr, |l, t| l.max(-t));
    let ub_total = ub_c.zip_map(tr, |u, t| u.min(t));
    let mut bound_hits = vec![0i8; n];

    let inside = (0..n).all(|i| newton[i] >= lb_total[i] && newton[i] <= ub_total[i]);
    if inside {
        return (newton.clone(), bound_hits, false);
    }

    let zero = DVector::zeros(n);
    let (to_bounds, _) = step_size_to_bound(&zero, &(-g), &lb_total, &ub_total);
    let t = minimize_quadratic_1d(a, b, 0.0, to_bounds);
    let cauchy = -g * t;
    let diff = newton - &cauchy;
    let (step_size, hits) = step_size_to_bound(&cauchy, &diff, &lb_total, &ub_total);
    let step_size = if step_size.is_finite() { step_size.min(1.0) } else { 0.0 };

    let mut tr_hit = false;
    for i in 0..n {
        let orig_l = lb_total[i] == lb_c[i];
        let orig_u = ub_total[i] == ub_c[i];
        let tr_l = lb_total[i] == -tr[i];
        let tr_u = ub_total[i] == tr[i];
        if hits[i] < 0 && orig_l {
            bound_hits[i] = -1;
        }
        if hits[i] > 0 && orig_u {
            bound_hits[i] = 1;
        }
        if (hits[i] < 0 && tr_l) || (hits[i] > 0 && tr_u) {
            tr_hit = true;
        }
    }
    (cauchy + diff * step_size, bound_hits, tr_hit)
}
