//! Scalar optimizers, root finding, quadrature and a conditional-gradient
//! solver over polytopes given by their vertices.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns the best point seen and its value.
pub fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut best = (a, f(a));
    let fb = f(b);
    if fb > best.1 {
        best = (b, fb);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc >= fd {
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
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Maximizes `f` on `[a, b]`: coarse grid of `points` nodes, then golden
/// section on the cell around the best node.
pub fn grid_golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, points: usize, tol: f64) -> (f64, f64) {
    let points = points.max(3);
    let h = (b - a) / (points - 1) as f64;
    let mut best = (a, f(a));
    let mut best_k = 0;
    for k in 1..points {
        let x = if k == points - 1 { b } else { a + h * k as f64 };
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
            best_k = k;
        }
    }
    let lo = if best_k == 0 { a } else { a + h * (best_k - 1) as f64 };
    let hi = if best_k + 1 >= points { b } else { a + h * (best_k + 1) as f64 };
    let refined = golden_max(&f, lo, hi, tol);
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}

/// Maximizes a concave `f` on `[a, inf)` by doubling the bracket until the
/// value drops, capped at `x_max`. Returns `None` if `f` keeps increasing
/// up to the cap.
pub fn golden_max_unbounded(f: impl Fn(f64) -> f64, a: f64, tol: f64, x_max: f64) -> Option<(f64, f64)> {
    let mut step = 1.0_f64.max(a.abs());
    let mut lo = a;
    let mut mid = a;
    let mut f_mid = f(a);
    loop {
        let hi = mid + step;
        if hi > x_max {
            let f_cap = f(x_max);
            if f_cap >= f_mid {
                return None;
            }
            return Some(golden_max(&f, lo, x_max, tol));
        }
        let f_hi = f(hi);
        if f_hi < f_mid {
            return Some(golden_max(&f, lo, hi, tol));
        }
        lo = mid;
        mid = hi;
        f_mid = f_hi;
        step *= 2.0;
    }
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn bisect(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoBracket(format!("f({a}) = {fa}, f({b}) = {fb}")));
    }
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= tol || m == a || m == b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
/// Returns the estimate and the accumulated error estimate.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut err = 0.0;
    let mut failed = false;
    let value = simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut err, &mut failed);
    if failed && err > tol {
        return Err(Error::QuadratureFailure { estimate: err });
    }
    Ok((value, err))
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    err: &mut f64,
    failed: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        *err += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *failed = true;
        *err += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err, failed)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err, failed)
}

/// Pairwise (cascade) summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Outcome of [`maximize_over_polytope`].
#[derive(Debug, Clone)]
pub struct FwOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Pairwise conditional-gradient ascent of a concave function over the
/// convex hull of `vertices`.
///
/// `eval` returns the objective and its gradient at a point. The stopping
/// quantity is the conditional-gradient gap `max_v <grad, v - x>`.
pub fn maximize_over_polytope(
    vertices: &[Vec<f64>],
    eval: impl Fn(&[f64]) -> (f64, Vec<f64>),
    value: impl Fn(&[f64]) -> f64,
    tol: f64,
    max_iter: usize,
) -> FwOutcome {
    let nv = vertices.len();
    let dim = vertices[0].len();
    let mut weights = vec![1.0 / nv as f64; nv];
    let combine = |w: &[f64]| {
        let mut x = vec![0.0; dim];
        for (wk, v) in w.iter().zip(vertices) {
            if *wk > 0.0 {
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi += wk * vi;
                }
            }
        }
        x
    };
    let dot = |g: &[f64], v: &[f64]| -> f64 {
        g.iter().zip(v).filter(|(_, &vi)| vi != 0.0).map(|(gi, vi)| gi * vi).sum()
    };

    let mut x = combine(&weights);
    let mut iterations = 0;
    loop {
        let (fx, grad) = eval(&x);
        let gx = dot(&grad, &x);
        let scores: Vec<f64> = vertices.iter().map(|v| dot(&grad, v)).collect();
        let toward = argmax(&scores, |_| true);
        let away = argmin(&scores, |k| weights[k] > 0.0);
        let gap = (scores[toward] - gx).max(0.0);
        if gap <= tol || iterations >= max_iter || nv == 1 {
            let gap = if gap.is_finite() { gap } else { f64::MAX };
            return FwOutcome { point: x, value: fx, gap, iterations, converged: gap <= tol || nv == 1 };
        }
        iterations += 1;
        if toward == away {
            continue;
        }
        let gamma_max = weights[away];
        let (gamma, f_new) = line_search(&x, &vertices[toward], &vertices[away], gamma_max, &value);
        if f_new > fx {
            weights[toward] += gamma;
            weights[away] -= gamma;
            if weights[away] <= gamma_max * 1e-15 {
                weights[toward] += weights[away];
                weights[away] = 0.0;
            }
        } else {
            // Pairwise step stalled; fall back to a plain step toward the vertex.
            let (gamma, f_new) = line_search(&x, &vertices[toward], &x, 1.0, &value);
            if f_new <= fx {
                let gap = if gap.is_finite() { gap } else { f64::MAX };
                return FwOutcome { point: x, value: fx, gap, iterations, converged: false };
            }
            for w in weights.iter_mut() {
                *w *= 1.0 - gamma;
            }
            weights[toward] += gamma;
        }
        x = combine(&weights);
    }
}

fn line_search(x: &[f64], to: &[f64], from: &[f64], gamma_max: f64, value: &impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let dir: Vec<f64> = to.iter().zip(from).map(|(t, a)| t - a).collect();
    let along = |g: f64| {
        let y: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| (xi + g * di).max(0.0)).collect();
        value(&y)
    };
    golden_max(along, 0.0, gamma_max, 1e-13)
}

fn argmax(xs: &[f64], keep: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for (k, &x) in xs.iter().enumerate() {
        if keep(k) && (best == usize::MAX || x > xs[best] || (xs[best].is_nan() && !x.is_nan())) {
            best = k;
        }
    }
    best
}

fn argmin(xs: &[f64], keep: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for (k, &x) in xs.iter().enumerate() {
        if keep(k) && (best == usize::MAX || x < xs[best]) {
            best = k;
        }
    }
    best
}

/// Vertices of `{x in simplex : cost . x <= budget}`. Edge vertices mix two
/// letters so that the cost is exactly `budget`.
pub fn budget_polytope_vertices(cost: &[f64], budget: f64) -> Vec<Vec<f64>> {
    let k = cost.len();
    let mut out = Vec::new();
    for i in 0..k {
        if cost[i] <= budget {
            let mut v = vec![0.0; k];
            v[i] = 1.0;
            out.push(v);
        }
    }
    for i in 0..k {
        if cost[i] >= budget {
            continue;
        }
        for j in 0..k {
            if cost[j] <= budget {
                continue;
            }
            let lam = (cost[j] - budget) / (cost[j] - cost[i]);
            let mut v = vec![0.0; k];
            v[i] = lam;
            v[j] = 1.0 - lam;
            out.push(v);
        }
    }
    out
}
