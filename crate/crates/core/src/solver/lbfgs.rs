//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    /// Number of correction pairs kept.
    pub memory: usize,
    /// Stop when `||grad||_inf` falls below this.
    pub grad_tol: f64,
    /// Stop when the relative decrease of one step falls below this.
    pub f_rel_tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            grad_tol: 1e-6,
            f_rel_tol: 2.220446049250313e-9,
            max_iter: 1000,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LbfgsStatus {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    /// No acceptable step along the search direction; `x` is the best iterate.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

impl LbfgsOutcome {
    pub fn grad_inf_norm(&self) -> f64 {
        self.grad.amax()
    }
}

struct Point {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

/// Minimizes `f` from `x0`. The objective returns `(value, gradient)`; a
/// non-finite value is treated as "step too long".
pub fn minimize<F>(mut f: F, x0: DVector<f64>, cfg: &LbfgsConfig) -> LbfgsOutcome
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let (f0, g0) = f(&x0);
    let mut evals = 1;
    let mut cur = Point { x: x0, f: f0, g: g0 };
    let mut trace = vec![cur.f];
    let mut hist: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iter = 0;

    let status = loop {
        if cur.g.amax() < cfg.grad_tol {
            break LbfgsStatus::GradientTolerance;
        }
        if iter >= cfg.max_iter {
            break LbfgsStatus::MaxIterations;
        }
        let mut dir = two_loop(&cur.g, &hist);
        let mut slope = dir.dot(&cur.g);
        if !(slope < 0.0) {
            // Lost descent; restart from steepest descent.
            hist.clear();
            dir = -&cur.g;
            slope = dir.dot(&cur.g);
        }
        let step0 = if hist.is_empty() {
            (1.0 / dir.norm()).min(1.0)
        } else {
            1.0
        };
        let Some((next, used)) = line_search(&mut f, &cur, &dir, slope, step0, cfg) else {
            if hist.is_empty() {
                break LbfgsStatus::LineSearchFailed;
            }
            hist.clear();
            continue;
        };
        evals += used;
        iter += 1;

        let s = &next.x - &cur.x;
        let y = &next.g - &cur.g;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let df = cur.f - next.f;
        let scale = cur.f.abs().max(next.f.abs()).max(1.0);
        cur = next;
        trace.push(cur.f);
        if df <= cfg.f_rel_tol * scale {
            break LbfgsStatus::FunctionTolerance;
        }
    };

    LbfgsOutcome {
        x: cur.x,
        f: cur.f,
        grad: cur.g,
        iterations: iter,
        evaluations: evals,
        status,
        trace,
    }
}

/// `-H g` for the implicit inverse-Hessian approximation.
fn two_loop(g: &DVector<f64>, hist: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * s.dot(&q);
        q.axpy(-a, y, 1.0);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        q *= s.dot(y) / y.dot(y);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q.axpy(a - b, s, 1.0);
    }
    -q
}

/// Strong-Wolfe search (bracketing then zoom). Returns the accepted point and
/// the evaluations spent, or `None` if no point with sufficient decrease was
/// found.
fn line_search<F>(
    f: &mut F,
    start: &Point,
    dir: &DVector<f64>,
    slope0: f64,
    step0: f64,
    cfg: &LbfgsConfig,
) -> Option<(Point, usize)>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut evals = 0;
    let mut probe = |t: f64, evals: &mut usize| {
        *evals += 1;
        let x = &start.x + dir * t;
        let (fx, g) = f(&x);
        let slope = if fx.is_finite() { g.dot(dir) } else { f64::NAN };
        (Point { x, f: fx, g }, slope)
    };
    let armijo = |t: f64, ft: f64| ft.is_finite() && ft <= start.f + cfg.c1 * t * slope0;
    let curvature = |s: f64| s.abs() <= -cfg.c2 * slope0;

    // Best point with sufficient decrease seen so far, as a fallback.
    let mut best: Option<Point> = None;
    let keep = |p: &Point, t: f64, best: &mut Option<Point>| {
        if armijo(t, p.f) && best.as_ref().is_none_or(|b| p.f < b.f) {
            *best = Some(Point { x: p.x.clone(), f: p.f, g: p.g.clone() });
        }
    };

    let (mut t_lo, mut f_lo, mut s_lo) = (0.0, start.f, slope0);
    let mut t = step0;
    let mut bracket: Option<(f64, f64, f64)> = None;
    for i in 0..cfg.max_line_search {
        let (p, s) = probe(t, &mut evals);
        keep(&p, t, &mut best);
        if !armijo(t, p.f) || (i > 0 && p.f >= f_lo) {
            bracket = Some((t, p.f, s));
            break;
        }
        if curvature(s) {
            return Some((p, evals));
        }
        if s >= 0.0 {
            bracket = Some((t_lo, f_lo, s_lo));
            (t_lo, f_lo, s_lo) = (t, p.f, s);
            break;
        }
        (t_lo, f_lo, s_lo) = (t, p.f, s);
        t *= 2.0;
    }
    let Some((mut t_hi, mut f_hi, mut s_hi)) = bracket else {
        return best.map(|p| (p, evals));
    };

    for _ in 0..cfg.max_line_search {
        let (a, b) = (t_lo.min(t_hi), t_lo.max(t_hi));
        let width = b - a;
        if width <= 1e-16 * b.max(1.0) {
            break;
        }
        let mut tc = cubic_min(t_lo, f_lo, s_lo, t_hi, f_hi, s_hi).unwrap_or(0.5 * (a + b));
        if !(tc > a + 0.1 * width && tc < b - 0.1 * width) {
            tc = 0.5 * (a + b);
        }
        let (p, s) = probe(tc, &mut evals);
        keep(&p, tc, &mut best);
        if !armijo(tc, p.f) || p.f >= f_lo {
            (t_hi, f_hi, s_hi) = (tc, p.f, s);
        } else {
            if curvature(s) {
                return Some((p, evals));
            }
            if s * (t_hi - t_lo) >= 0.0 {
                (t_hi, f_hi, s_hi) = (t_lo, f_lo, s_lo);
            }
            (t_lo, f_lo, s_lo) = (tc, p.f, s);
        }
    }
    best.map(|p| (p, evals))
}

/// Minimizer of the cubic interpolating values and slopes at two points.
fn cubic_min(t0: f64, f0: f64, s0: f64, t1: f64, f1: f64, s1: f64) -> Option<f64> {
    if !(f0.is_finite() && f1.is_finite() && s0.is_finite() && s1.is_finite()) {
        return None;
    }
    let d1 = s0 + s1 - 3.0 * (f0 - f1) / (t0 - t1);
    let disc = d1 * d1 - s0 * s1;
    if disc < 0.0 {
        return None;
    }
    let d2 = (t1 - t0).signum() * disc.sqrt();
    let t = t1 - (t1 - t0) * (s1 + d2 - d1) / (s1 - s0 + 2.0 * d2);
    t.is_finite().then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(tol: f64) -> LbfgsConfig {
        LbfgsConfig {
            grad_tol: tol,
            f_rel_tol: 0.0,
            max_iter: 10_000,
            ..Default::default()
        }
    }

    #[test]
    fn scalar_quadratic() {
        let out = minimize(
            |x| ((x[0] - 3.0).powi(2), DVector::from_element(1, 2.0 * (x[0] - 3.0))),
            DVector::zeros(1),
            &cfg(1e-10),
        );
        assert!((out.x[0] - 3.0).abs() < 1e-8, "{}", out.x[0]);
    }

    #[test]
    fn rosenbrock() {
        let rosen = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ]);
            (f, g)
        };
        let out = minimize(rosen, DVector::from_vec(vec![-1.2, 1.0]), &cfg(1e-10));
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5, "{:?}", out.x);
        assert_eq!(out.status, LbfgsStatus::GradientTolerance);
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let mut calls = 0;
        let out = minimize(
            |x| {
                calls += 1;
                (x.norm_squared(), x * 2.0)
            },
            DVector::zeros(3),
            &cfg(1e-8),
        );
        assert_eq!(out.iterations, 0);
        assert_eq!(out.x, DVector::zeros(3));
        assert_eq!(calls, 1);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let diag = DVector::from_fn(20, |i, _| 10f64.powi(i as i32 % 6));
        let out = minimize(
            |x| (0.5 * x.dot(&diag.component_mul(x)), diag.component_mul(x)),
            DVector::from_element(20, 1.0),
            &cfg(1e-8),
        );
        assert!(out.x.amax() < 1e-7);
    }

    #[test]
    fn infinite_objective_is_backed_off() {
        // Finite only on (-1, 1); minimum at 0.5.
        let f = |x: &DVector<f64>| {
            let t = x[0];
            if t.abs() >= 1.0 {
                (f64::INFINITY, DVector::zeros(1))
            } else {
                ((t - 0.5).powi(2) - (1.0 - t * t).ln(), DVector::from_element(1, 2.0 * (t - 0.5) + 2.0 * t / (1.0 - t * t)))
            }
        };
        let out = minimize(f, DVector::from_element(1, -0.9), &cfg(1e-9));
        assert!(out.f.is_finite());
        assert!(out.grad_inf_norm() < 1e-9);
    }
}
