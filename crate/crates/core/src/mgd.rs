//! Multiple gradient descent: min-norm points of gradient hulls, dominance
//! and Pareto stationarity.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{combine, dot, norm, solve_dense};

/// Default tolerance on the min-norm direction for calling a point
/// Pareto-stationary.
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-6;

const FW_GAP_TOL: f64 = 1e-10;
const FW_MIN_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct MinNormSolution {
    pub weights: Vec<f64>,
    pub direction: Vec<f64>,
    pub norm: f64,
}

fn validate(gradients: &[Vec<f64>]) -> Result<usize> {
    let d = gradients.first().ok_or(Error::Empty("gradient list"))?.len();
    for g in gradients {
        check_dim(d, g.len())?;
    }
    Ok(d)
}

/// Minimum-norm point of the convex hull of `gradients`.
pub fn min_norm_weights(gradients: &[Vec<f64>]) -> Result<MinNormSolution> {
    let d = validate(gradients)?;
    let weights = match gradients.len() {
        1 => vec![1.0],
        2 => {
            let (g1, g2) = (&gradients[0], &gradients[1]);
            let diff: Vec<f64> = g2.iter().zip(g1).map(|(a, b)| a - b).collect();
            let denom = dot(&diff, &diff);
            let w = if denom > 0.0 {
                (dot(&diff, g2) / denom).clamp(0.0, 1.0)
            } else {
                0.5
            };
            vec![w, 1.0 - w]
        }
        m => frank_wolfe(&gram(gradients), m, (10 * m * d).max(FW_MIN_ITERS)),
    };
    let direction = combine(&weights, gradients);
    let norm = norm(&direction);
    Ok(MinNormSolution {
        weights,
        direction,
        norm,
    })
}

fn gram(gradients: &[Vec<f64>]) -> Vec<f64> {
    let m = gradients.len();
    let mut q = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let v = dot(&gradients[i], &gradients[j]);
            q[i * m + j] = v;
            q[j * m + i] = v;
        }
    }
    q
}

fn quad(q: &[f64], w: &[f64], m: usize) -> (Vec<f64>, f64) {
    let qw: Vec<f64> = (0..m).map(|i| dot(&q[i * m..(i + 1) * m], w)).collect();
    let val = dot(w, &qw);
    (qw, val)
}

/// Away-step Frank-Wolfe on `min w'Qw` over the simplex, followed by an exact
/// solve on the identified support.
fn frank_wolfe(q: &[f64], m: usize, max_iter: usize) -> Vec<f64> {
    let scale = (0..m).map(|i| q[i * m + i]).fold(0.0, f64::max);
    if scale == 0.0 {
        return vec![1.0 / m as f64; m];
    }
    let start = (0..m)
        .min_by(|&a, &b| q[a * m + a].total_cmp(&q[b * m + b]))
        .expect("m >= 1");
    let mut w = vec![0.0; m];
    w[start] = 1.0;

    for _ in 0..max_iter {
        let (qw, val) = quad(q, &w, m);
        let (s, qs) = argmin(&qw, |_| true);
        let gap = val - qs;
        if gap <= FW_GAP_TOL * scale {
            break;
        }
        let (a, qa) = argmax(&qw, |i| w[i] > 0.0);
        // Direction dir = e_s - w (toward) or w - e_a (away).
        let toward = val - qs >= qa - val;
        let (dir, max_step) = if toward {
            let mut dir: Vec<f64> = w.iter().map(|x| -x).collect();
            dir[s] += 1.0;
            (dir, 1.0)
        } else {
            let mut dir = w.clone();
            dir[a] -= 1.0;
            let wa = w[a];
            (dir, if wa < 1.0 { wa / (1.0 - wa) } else { f64::INFINITY })
        };
        // f(w + t dir) = val + 2 t dir'Qw + t^2 dir'Q dir
        let lin = dot(&dir, &qw);
        let (_, curv) = quad(q, &dir, m);
        let mut t = if curv > 0.0 { -lin / curv } else { max_step };
        t = t.clamp(0.0, max_step);
        if t == 0.0 {
            break;
        }
        for (wi, di) in w.iter_mut().zip(&dir) {
            *wi = (*wi + t * di).max(0.0);
        }
        if !toward && t == max_step {
            w[a] = 0.0;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
    }
    polish_on_support(q, m, w)
}

fn argmin(v: &[f64], keep: impl Fn(usize) -> bool) -> (usize, f64) {
    v.iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .fold((0, f64::INFINITY), |acc, (i, x)| if *x < acc.1 { (i, *x) } else { acc })
}

fn argmax(v: &[f64], keep: impl Fn(usize) -> bool) -> (usize, f64) {
    v.iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .fold((0, f64::NEG_INFINITY), |acc, (i, x)| if *x > acc.1 { (i, *x) } else { acc })
}

/// Solves the KKT system `Q_SS w_S = mu 1, sum w_S = 1` on the support of
/// `w`; keeps the exact solution when it is feasible and no better than `w`.
fn polish_on_support(q: &[f64], m: usize, w: Vec<f64>) -> Vec<f64> {
    let support: Vec<usize> = (0..m).filter(|&i| w[i] > 1e-12).collect();
    let k = support.len();
    let n = k + 1;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            a[r * n + c] = q[i * m + j];
        }
        a[r * n + k] = -1.0;
        a[k * n + r] = 1.0;
    }
    b[k] = 1.0;
    let Some(sol) = solve_dense(&a, &b, n, 1e-13) else {
        return w;
    };
    if sol[..k].iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return w;
    }
    let mut exact = vec![0.0; m];
    for (r, &i) in support.iter().enumerate() {
        exact[i] = sol[r];
    }
    let (_, old) = quad(q, &w, m);
    let (qe, new) = quad(q, &exact, m);
    let scale = (0..m).map(|i| q[i * m + i]).fold(0.0, f64::max);
    let optimal = qe.iter().all(|x| *x >= new - 1e-12 * scale.max(1.0));
    if optimal && new <= old + 1e-15 * scale.max(1.0) {
        exact
    } else {
        w
    }
}

/// `y1` dominates `y2`: no worse in every objective and not identical.
pub fn dominates(y1: &[f64], y2: &[f64]) -> Result<bool> {
    check_dim(y1.len(), y2.len())?;
    Ok(dominates_unchecked(y1, y2))
}

#[inline]
pub(crate) fn dominates_unchecked(y1: &[f64], y2: &[f64]) -> bool {
    y1.iter().zip(y2).all(|(a, b)| a <= b) && y1 != y2
}

/// Indices (ascending) of points not dominated by any other point.
pub fn pareto_filter(points: &[Vec<f64>]) -> Result<Vec<usize>> {
    let m = points.first().ok_or(Error::Empty("point set"))?.len();
    for p in points {
        check_dim(m, p.len())?;
    }
    if m == 2 {
        return Ok(pareto_filter_2d(points));
    }
    Ok((0..points.len())
        .filter(|&i| {
            !points
                .iter()
                .any(|other| dominates_unchecked(other, &points[i]))
        })
        .collect())
}

fn pareto_filter_2d(points: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    let mut kept = Vec::new();
    let mut best: Option<&[f64]> = None;
    for i in order {
        let p = points[i].as_slice();
        let keep = match best {
            None => true,
            Some(b) => p[1] < b[1] || p == b,
        };
        if keep {
            kept.push(i);
            best = Some(p);
        }
    }
    kept.sort_unstable();
    kept
}

/// Pareto stationarity test: the min-norm convex combination has norm at
/// most `tol`.
pub fn is_stationary(gradients: &[Vec<f64>], tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(min_norm_weights(gradients)?.norm <= tol)
}
