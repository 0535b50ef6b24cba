//! Differentiable objectives and the anchor-distance benchmarks with known
//! Pareto fronts.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm_sq};

/// A differentiable scalar objective over `R^d` (minimized).
pub trait Objective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;

    fn as_anchor(&self) -> Option<&AnchorObjective> {
        None
    }
}

/// Mean squared deviation from an anchor over a coordinate subset.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorObjective {
    dim: usize,
    anchor: Vec<f64>,
    mask: Vec<usize>,
}

impl AnchorObjective {
    /// `anchor[k]` is the target for coordinate `mask[k]`.
    pub fn new(dim: usize, anchor: Vec<f64>, mask: Vec<usize>) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::Empty("anchor mask"));
        }
        check_dim(mask.len(), anchor.len())?;
        let mut seen = vec![false; dim];
        for &j in &mask {
            if j >= dim {
                return Err(Error::InvalidArgument(format!(
                    "mask index {j} out of bounds for dimension {dim}"
                )));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidArgument(format!("mask index {j} repeated")));
            }
        }
        Ok(Self { dim, anchor, mask })
    }

    /// Anchor over every coordinate.
    pub fn full(anchor: Vec<f64>) -> Result<Self> {
        let d = anchor.len();
        Self::new(d, anchor, (0..d).collect())
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }
}

impl Objective for AnchorObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .mask
            .iter()
            .zip(&self.anchor)
            .map(|(&j, a)| (x[j] - a) * (x[j] - a))
            .sum();
        s / self.mask.len() as f64
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let c = 2.0 / self.mask.len() as f64;
        let mut g = vec![0.0; self.dim];
        for (&j, a) in self.mask.iter().zip(&self.anchor) {
            g[j] = c * (x[j] - a);
        }
        g
    }

    fn as_anchor(&self) -> Option<&AnchorObjective> {
        Some(self)
    }
}

/// Pareto set given as the convex hull of two or three points in input
/// space; the front is its image under the objective map.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticFront {
    Segment([Vec<f64>; 2]),
    Triangle([Vec<f64>; 3]),
}

impl AnalyticFront {
    pub fn vertices(&self) -> &[Vec<f64>] {
        match self {
            AnalyticFront::Segment(v) => v,
            AnalyticFront::Triangle(v) => v,
        }
    }

    /// Input-space point at barycentric-style parameters (`s`, `u`) measured
    /// from the first vertex. `u` is ignored for a segment.
    pub fn point(&self, s: f64, u: f64) -> Vec<f64> {
        let v = self.vertices();
        let mut x = v[0].clone();
        for (j, xj) in x.iter_mut().enumerate() {
            *xj += s * (v[1][j] - v[0][j]);
            if let AnalyticFront::Triangle(_) = self {
                *xj += u * (v[2][j] - v[0][j]);
            }
        }
        x
    }

    /// Approximately uniform parameter grid with exactly `n` points.
    pub fn parameter_grid(&self, n: usize) -> Vec<(f64, f64)> {
        match self {
            AnalyticFront::Segment(_) => match n {
                0 => Vec::new(),
                1 => vec![(0.5, 0.0)],
                _ => (0..n).map(|i| (i as f64 / (n - 1) as f64, 0.0)).collect(),
            },
            AnalyticFront::Triangle(_) => {
                if n == 0 {
                    return Vec::new();
                }
                let mut k = 1usize;
                while k * (k + 1) / 2 < n {
                    k += 1;
                }
                let step = if k > 1 { 1.0 / (k - 1) as f64 } else { 0.0 };
                let mut lattice = Vec::with_capacity(k * (k + 1) / 2);
                for i in 0..k {
                    for j in 0..k - i {
                        lattice.push((i as f64 * step, j as f64 * step));
                    }
                }
                if k == 1 {
                    lattice[0] = (1.0 / 3.0, 1.0 / 3.0);
                }
                even_subsample(&lattice, n)
            }
        }
    }
}

/// `n` entries of `items` at evenly spaced indices (all of them when
/// `n >= items.len()`).
pub fn even_subsample<T: Clone>(items: &[T], n: usize) -> Vec<T> {
    let len = items.len();
    if n >= len {
        return items.to_vec();
    }
    if n == 1 {
        return vec![items[len / 2].clone()];
    }
    (0..n)
        .map(|i| items[(i as u128 * (len - 1) as u128 / (n - 1) as u128) as usize].clone())
        .collect()
}

/// Ordered list of objectives `F = [f_1, ..., f_m]` with an optional
/// analytic Pareto front.
#[derive(Debug, Clone)]
pub struct ObjectiveSet {
    objectives: Vec<Arc<dyn Objective>>,
    front: Option<AnalyticFront>,
    dim: usize,
}

impl ObjectiveSet {
    pub fn new(objectives: Vec<Arc<dyn Objective>>) -> Result<Self> {
        let first = objectives.first().ok_or(Error::Empty("objective list"))?;
        let dim = first.dim();
        for o in &objectives {
            check_dim(dim, o.dim())?;
        }
        let front = derive_anchor_front(&objectives);
        Ok(Self {
            objectives,
            front,
            dim,
        })
    }

    pub fn from_anchors(anchors: Vec<AnchorObjective>) -> Result<Self> {
        Self::new(
            anchors
                .into_iter()
                .map(|a| Arc::new(a) as Arc<dyn Objective>)
                .collect(),
        )
    }

    /// Two anchors at `1` and `0.5` on every coordinate of `R^d`.
    pub fn two_anchor(d: usize) -> Result<Self> {
        Self::from_anchors(vec![
            AnchorObjective::full(vec![1.0; d])?,
            AnchorObjective::full(vec![0.5; d])?,
        ])
    }

    /// Three anchors at `0`, `0.5` on every third coordinate, and `0.5` on
    /// two of every three coordinates. For `d = 3` these are `(0,0,0)`,
    /// `(0.5,0,0)` and `(0.5,0.5,0)`.
    pub fn three_anchor(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(
                "three-anchor benchmark needs at least two dimensions".into(),
            ));
        }
        let p1 = (0..d).map(|j| if j % 3 == 0 { 0.5 } else { 0.0 }).collect();
        let p2 = (0..d).map(|j| if j % 3 != 2 { 0.5 } else { 0.0 }).collect();
        Self::from_anchors(vec![
            AnchorObjective::full(vec![0.0; d])?,
            AnchorObjective::full(p1)?,
            AnchorObjective::full(p2)?,
        ])
    }

    pub fn with_front(mut self, front: Option<AnalyticFront>) -> Result<Self> {
        if let Some(f) = &front {
            for v in f.vertices() {
                check_dim(self.dim, v.len())?;
            }
        }
        self.front = front;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.objectives.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objectives(&self) -> &[Arc<dyn Objective>] {
        &self.objectives
    }

    pub fn front(&self) -> Option<&AnalyticFront> {
        self.front.as_ref()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub fn grad(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_dim(self.dim, x.len())?;
        Ok(self.grad_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.objectives.iter().map(|o| o.value(x)).collect()
    }

    pub(crate) fn grad_unchecked(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.objectives.iter().map(|o| o.grad(x)).collect()
    }

    /// Euclidean distance in objective space from `y` to the analytic front.
    pub fn front_distance(&self, y: &[f64]) -> Result<f64> {
        check_dim(self.m(), y.len())?;
        let front = self.front.as_ref().ok_or(Error::MissingFront)?;
        Ok(match front {
            AnalyticFront::Segment(_) => self.segment_distance(front, y),
            AnalyticFront::Triangle(_) => self.triangle_distance(front, y),
        })
    }

    /// Objective values of `n` points spread over the analytic front.
    pub fn discretize_front(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        let front = self.front.as_ref().ok_or(Error::MissingFront)?;
        Ok(front
            .parameter_grid(n)
            .into_iter()
            .map(|(s, u)| self.eval_unchecked(&front.point(s, u)))
            .collect())
    }

    fn segment_distance(&self, front: &AnalyticFront, y: &[f64]) -> f64 {
        // Each f_i restricted to the segment is a quadratic a k^2 + b k + c;
        // recover the coefficients from three exact evaluations.
        let f0 = self.eval_unchecked(&front.point(0.0, 0.0));
        let fh = self.eval_unchecked(&front.point(0.5, 0.0));
        let f1 = self.eval_unchecked(&front.point(1.0, 0.0));
        let coeffs: Vec<[f64; 3]> = (0..self.m())
            .map(|i| {
                let c = f0[i];
                let a = 2.0 * (f1[i] + f0[i]) - 4.0 * fh[i];
                let b = f1[i] - f0[i] - a;
                [a, b, c - y[i]]
            })
            .collect();
        // D(k) = sum_i r_i(k)^2; D'(k) = sum_i 2 r_i r_i' is a cubic.
        let mut cubic = [0.0; 4];
        for [a, b, c] in &coeffs {
            // r r' = (a k^2 + b k + c)(2 a k + b)
            cubic[3] += 2.0 * a * a;
            cubic[2] += 3.0 * a * b;
            cubic[1] += b * b + 2.0 * a * c;
            cubic[0] += b * c;
        }
        let dist_sq = |k: f64| -> f64 {
            coeffs
                .iter()
                .map(|[a, b, c]| {
                    let r = (a * k + b) * k + c;
                    r * r
                })
                .sum()
        };
        let mut best = dist_sq(0.0).min(dist_sq(1.0));
        for k in cubic_roots_in_unit_interval(cubic) {
            best = best.min(dist_sq(k));
        }
        best.max(0.0).sqrt()
    }

    fn triangle_distance(&self, front: &AnalyticFront, y: &[f64]) -> f64 {
        let v = front.vertices();
        let e1: Vec<f64> = v[1].iter().zip(&v[0]).map(|(a, b)| a - b).collect();
        let e2: Vec<f64> = v[2].iter().zip(&v[0]).map(|(a, b)| a - b).collect();
        let resid = |s: f64, u: f64| -> Vec<f64> {
            let f = self.eval_unchecked(&front.point(s, u));
            f.iter().zip(y).map(|(a, b)| a - b).collect()
        };

        const LATTICE: usize = 40;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=LATTICE {
            for j in 0..=LATTICE - i {
                let (s, u) = (i as f64 / LATTICE as f64, j as f64 / LATTICE as f64);
                let r = norm_sq(&resid(s, u));
                if r < best.0 {
                    best = (r, s, u);
                }
            }
        }

        // Projected Levenberg-Marquardt on the residual F(x(s,u)) - y.
        let (mut cost, mut s, mut u) = best;
        let mut damping = 1e-9;
        for _ in 0..100 {
            let x = front.point(s, u);
            let r = resid(s, u);
            let grads = self.grad_unchecked(&x);
            let js: Vec<f64> = grads.iter().map(|g| dot(g, &e1)).collect();
            let ju: Vec<f64> = grads.iter().map(|g| dot(g, &e2)).collect();
            let (a11, a12, a22) = (dot(&js, &js), dot(&js, &ju), dot(&ju, &ju));
            let (b1, b2) = (dot(&js, &r), dot(&ju, &r));
            let mut improved = false;
            for _ in 0..30 {
                let (m11, m22) = (a11 + damping * (1.0 + a11), a22 + damping * (1.0 + a22));
                let det = m11 * m22 - a12 * a12;
                if det.abs() < 1e-300 {
                    damping *= 10.0;
                    continue;
                }
                let ds = -(m22 * b1 - a12 * b2) / det;
                let du = -(m11 * b2 - a12 * b1) / det;
                let (ns, nu) = project_unit_triangle(s + ds, u + du);
                let nc = norm_sq(&resid(ns, nu));
                if nc < cost {
                    let moved = (ns - s).abs() + (nu - u).abs();
                    cost = nc;
                    s = ns;
                    u = nu;
                    damping = (damping * 0.1).max(1e-15);
                    improved = moved > 1e-16;
                    break;
                }
                damping *= 10.0;
            }
            if !improved || cost < 1e-32 {
                break;
            }
        }
        cost.max(0.0).sqrt()
    }
}

/// With every objective an anchor objective on a common mask, the Pareto set
/// of two or three anchors is their convex hull (off-mask coordinates free,
/// fixed to zero here).
fn derive_anchor_front(objectives: &[Arc<dyn Objective>]) -> Option<AnalyticFront> {
    let anchors: Vec<&AnchorObjective> = objectives
        .iter()
        .map(|o| o.as_anchor())
        .collect::<Option<_>>()?;
    let mask = anchors.first()?.mask();
    if anchors.iter().any(|a| a.mask() != mask) {
        return None;
    }
    let dim = anchors[0].dim();
    let embed = |a: &AnchorObjective| {
        let mut x = vec![0.0; dim];
        for (&j, v) in a.mask().iter().zip(a.anchor()) {
            x[j] = *v;
        }
        x
    };
    match anchors.as_slice() {
        [a, b] => Some(AnalyticFront::Segment([embed(a), embed(b)])),
        [a, b, c] => Some(AnalyticFront::Triangle([embed(a), embed(b), embed(c)])),
        _ => None,
    }
}

/// Euclidean projection onto `{s >= 0, u >= 0, s + u <= 1}`.
fn project_unit_triangle(s: f64, u: f64) -> (f64, f64) {
    if s >= 0.0 && u >= 0.0 && s + u <= 1.0 {
        return (s, u);
    }
    let candidates = [
        (s.clamp(0.0, 1.0), 0.0),
        (0.0, u.clamp(0.0, 1.0)),
        {
            let t = ((s - u + 1.0) / 2.0).clamp(0.0, 1.0);
            (t, 1.0 - t)
        },
    ];
    candidates
        .into_iter()
        .min_by(|a, b| {
            let da = (a.0 - s).powi(2) + (a.1 - u).powi(2);
            let db = (b.0 - s).powi(2) + (b.1 - u).powi(2);
            da.total_cmp(&db)
        })
        .expect("non-empty candidate list")
}

/// Real roots in `[0, 1]` of `c[3] k^3 + c[2] k^2 + c[1] k + c[0]`, found by
/// bisection on the monotone pieces between the cubic's critical points.
fn cubic_roots_in_unit_interval(c: [f64; 4]) -> Vec<f64> {
    let p = |k: f64| ((c[3] * k + c[2]) * k + c[1]) * k + c[0];
    let mut breaks = vec![0.0];
    // Critical points: 3 c3 k^2 + 2 c2 k + c1 = 0.
    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    if qa.abs() > 0.0 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            let mut roots = Vec::new();
            if q != 0.0 {
                roots.push(q / qa);
                roots.push(qc / q);
            } else {
                roots.push(0.0);
            }
            roots.sort_by(f64::total_cmp);
            breaks.extend(roots.into_iter().filter(|r| *r > 0.0 && *r < 1.0));
        }
    } else if qb != 0.0 {
        let r = -qc / qb;
        if r > 0.0 && r < 1.0 {
            breaks.push(r);
        }
    }
    breaks.push(1.0);

    let mut out = Vec::new();
    for w in breaks.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (plo, phi) = (p(lo), p(hi));
        if plo == 0.0 {
            out.push(lo);
            continue;
        }
        if plo.signum() == phi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if p(mid).signum() == plo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out
}
