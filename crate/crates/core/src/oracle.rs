//! Brute-force cross-checks of the solvers and metrics on random instances.
//! Each check reports its worst observed discrepancy against a tolerance.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::guidance::solve_dual;
use crate::linalg::{combine, dot, norm, norm_sq};
use crate::metrics::{hypervolume_exact, hypervolume_monte_carlo, solve_assignment};
use crate::mgd::{dominates, min_norm_weights, pareto_filter};
use crate::objectives::{AnchorObjective, ObjectiveSet};
use crate::sampler::{diversity_gradient, Population};

pub const DEFAULT_ORACLE_SEED: u64 = 20_240_531;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

impl fmt::Display for OracleCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<28} instances={:<4} worst={:.3e} tol={:.1e} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.worst,
            self.tolerance,
            self.seconds
        )
    }
}

fn check(
    name: &'static str,
    tolerance: f64,
    body: impl FnOnce() -> Result<(usize, f64)>,
) -> Result<OracleCheck> {
    let start = Instant::now();
    let (instances, worst) = body()?;
    Ok(OracleCheck {
        name,
        instances,
        worst,
        tolerance,
        passed: worst <= tolerance,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn random_vec(rng: &mut impl Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Runs every check with generators seeded from `seed`.
pub fn run_all(seed: u64) -> Result<Vec<OracleCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        check("min_norm_vs_simplex_grid", 1e-6, || min_norm_vs_grid(&mut rng, 200))?,
        check("dual_kkt_residual", 1e-6, || dual_kkt(&mut rng, 500))?,
        check("dual_vs_grid_search", 1e-4, || dual_vs_grid(&mut rng, 200))?,
        check("objective_grad_vs_fd", 1e-5, || objective_grad_fd(&mut rng, 100))?,
        check("diversity_grad_vs_fd", 1e-5, || diversity_grad_fd(&mut rng, 50))?,
        check("hv3_exact_vs_monte_carlo", 3.0, || hv3_vs_mc(&mut rng, 50))?,
        check("assignment_vs_permutations", 0.0, || assignment_vs_perms(&mut rng, 50))?,
        check("pareto_filter_vs_pairwise", 0.0, || pareto_vs_pairwise(&mut rng, 50))?,
    ])
}

fn gram(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    g.iter().map(|a| g.iter().map(|b| dot(a, b)).collect()).collect()
}

fn quad(q: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, wi) in w.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            s += wi * wj * q[i][j];
        }
    }
    s
}

/// Smallest `w^T Q w` over the simplex by a coarse grid and two zooms.
fn simplex_grid_min(q: &[Vec<f64>]) -> f64 {
    match q.len() {
        1 => q[0][0],
        2 => {
            let n = 10_000;
            (0..=n)
                .map(|i| {
                    let a = i as f64 / n as f64;
                    quad(q, &[a, 1.0 - a])
                })
                .fold(f64::INFINITY, f64::min)
        }
        _ => {
            let eval = |a: f64, b: f64| {
                if a < 0.0 || b < 0.0 || a + b > 1.0 {
                    f64::INFINITY
                } else {
                    quad(q, &[a, b, 1.0 - a - b])
                }
            };
            let (mut ca, mut cb, mut h) = (1.0 / 3.0, 1.0 / 3.0, 0.01);
            let mut best = f64::INFINITY;
            let mut radius = 100i64;
            for _ in 0..3 {
                let (sa, sb) = (ca, cb);
                for i in -radius..=radius {
                    for j in -radius..=radius {
                        let (a, b) = (sa + i as f64 * h, sb + j as f64 * h);
                        let v = eval(a, b);
                        if v < best {
                            best = v;
                            ca = a;
                            cb = b;
                        }
                    }
                }
                // Vertices and edges are where constrained minima sit.
                for k in 0..=1000 {
                    let t = k as f64 / 1000.0;
                    for (a, b) in [(t, 0.0), (0.0, t), (t, 1.0 - t)] {
                        let v = eval(a, b);
                        if v < best {
                            best = v;
                            ca = a;
                            cb = b;
                        }
                    }
                }
                h /= 20.0;
                radius = 40;
            }
            best
        }
    }
}

fn min_norm_vs_grid(rng: &mut ChaCha8Rng, n: usize) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let m = rng.random_range(1..=3);
        let d = rng.random_range(2..=5);
        let g: Vec<Vec<f64>> = (0..m).map(|_| random_vec(rng, d, 1.0)).collect();
        let sol = min_norm_weights(&g)?;
        let w_sum: f64 = sol.weights.iter().sum();
        let on_simplex = sol.weights.iter().all(|w| *w >= 0.0) && (w_sum - 1.0).abs() < 1e-12;
        let solver = norm_sq(&combine(&sol.weights, &g));
        let grid = simplex_grid_min(&gram(&g));
        let gap = if on_simplex {
            (solver - grid).abs()
        } else {
            f64::INFINITY
        };
        worst = worst.max(gap);
    }
    Ok((n, worst))
}

/// A random PROUD dual instance with a strictly feasible primal.
fn dual_instance(rng: &mut ChaCha8Rng, m: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>, f64)> {
    loop {
        let d = rng.random_range(m.max(2)..=m.max(2) + 3);
        let g: Vec<Vec<f64>> = (0..m).map(|_| random_vec(rng, d, 1.0)).collect();
        let v = min_norm_weights(&g)?.norm;
        if v < 0.05 {
            continue;
        }
        let eps = random_vec(rng, d, 2.0);
        let phi = rng.random_range(0.05..1.5) * v;
        return Ok((eps, g, phi));
    }
}

fn dual_gradient(eps: &[f64], g: &[Vec<f64>], lambda: &[f64], phi: f64) -> Vec<f64> {
    let mut u = eps.to_vec();
    for (l, gi) in lambda.iter().zip(g) {
        u.iter_mut().zip(gi).for_each(|(a, b)| *a += l * b);
    }
    g.iter().map(|gi| phi - dot(gi, &u)).collect()
}

fn dual_value(eps: &[f64], g: &[Vec<f64>], lambda: &[f64], phi: f64) -> f64 {
    let mut u = eps.to_vec();
    for (l, gi) in lambda.iter().zip(g) {
        u.iter_mut().zip(gi).for_each(|(a, b)| *a += l * b);
    }
    -0.5 * norm_sq(&u) + phi * lambda.iter().sum::<f64>()
}

fn dual_kkt(rng: &mut ChaCha8Rng, n: usize) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    for k in 0..n {
        let m = 1 + k % 5;
        let (eps, g, phi) = dual_instance(rng, m)?;
        let lambda = solve_dual(&eps, &g, phi)?;
        let grad = dual_gradient(&eps, &g, &lambda, phi);
        for (l, gr) in lambda.iter().zip(&grad) {
            // Natural residual of the complementarity system l >= 0, -grad >= 0.
            worst = worst.max(l.min(-gr).abs());
        }
    }
    Ok((n, worst))
}

fn dual_vs_grid(rng: &mut ChaCha8Rng, n: usize) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    for k in 0..n {
        let m = 1 + k % 2;
        let (eps, g, phi) = dual_instance(rng, m)?;
        let lambda = solve_dual(&eps, &g, phi)?;
        let solver = dual_value(&eps, &g, &lambda, phi);
        let upper = 2.0 * lambda.iter().cloned().fold(1.0, f64::max);

        let mut center = vec![upper / 2.0; m];
        let mut half = upper / 2.0;
        let mut best = f64::NEG_INFINITY;
        let steps = if m == 1 { 2000 } else { 200 };
        for _ in 0..4 {
            let h = 2.0 * half / steps as f64;
            let axis = |c: f64| -> Vec<f64> {
                (0..=steps)
                    .map(|i| c - half + i as f64 * h)
                    .filter(|v| *v >= 0.0)
                    .collect()
            };
            let a0 = axis(center[0]);
            let a1 = if m == 2 { axis(center[1]) } else { vec![0.0] };
            let mut arg = center.clone();
            for &x in &a0 {
                for &y in &a1 {
                    let l = if m == 2 { vec![x, y] } else { vec![x] };
                    let v = dual_value(&eps, &g, &l, phi);
                    if v > best {
                        best = v;
                        arg = l;
                    }
                }
            }
            center = arg;
            half = 4.0 * h;
        }
        // The solver must match the grid and never lose to it.
        worst = worst.max((solver - best).abs());
    }
    Ok((n, worst))
}

fn fd_rel_err(f: impl Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64], h: f64) -> f64 {
    let mut xp = x.to_vec();
    let fd: Vec<f64> = (0..x.len())
        .map(|j| {
            xp[j] = x[j] + h;
            let up = f(&xp);
            xp[j] = x[j] - h;
            let down = f(&xp);
            xp[j] = x[j];
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff: Vec<f64> = fd.iter().zip(analytic).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(analytic).max(1e-12)
}

fn random_set(rng: &mut ChaCha8Rng, d: usize) -> Result<ObjectiveSet> {
    match rng.random_range(0..3) {
        0 => ObjectiveSet::two_anchor(d),
        1 => ObjectiveSet::three_anchor(d),
        _ => {
            let m = rng.random_range(1..=4);
            let anchors = (0..m)
                .map(|_| {
                    let mut idx: Vec<usize> = (0..d).collect();
                    idx.shuffle(rng);
                    idx.truncate(rng.random_range(1..=d));
                    idx.sort_unstable();
                    AnchorObjective::new(d, random_vec(rng, idx.len(), 1.0), idx)
                })
                .collect::<Result<Vec<_>>>()?;
            ObjectiveSet::from_anchors(anchors)
        }
    }
}

fn objective_grad_fd(rng: &mut ChaCha8Rng, n: usize) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let d = rng.random_range(2..=6);
        let set = random_set(rng, d)?;
        let x = random_vec(rng, d, 2.0);
        let grads = set.grad(&x)?;
        for (k, g) in grads.iter().enumerate() {
            if norm(g) < 1e-8 {
                continue;
            }
            let f = |y: &[f64]| set.eval(y).expect("dimension checked")[k];
            worst = worst.max(fd_rel_err(f, &x, g, 1e-5));
        }
    }
    Ok((n, worst))
}

fn diversity_objective(values: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (i, a) in values.iter().enumerate() {
        for (j, b) in values.iter().enumerate() {
            if i != j {
                let r2: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
                s += 1.0 / r2;
            }
        }
    }
    s
}

fn diversity_grad_fd(rng: &mut ChaCha8Rng, n: usize) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let d = rng.random_range(2..=4);
        let set = random_set(rng, d)?;
        let count = rng.random_range(2..=4);
        let positions: Vec<Vec<f64>> = (0..count).map(|_| random_vec(rng, d, 1.5)).collect();
        let pop = Population::new(positions.clone(), 0, &set)?;
        let i = rng.random_range(0..count);
        let analytic = diversity_gradient(&pop, &set, i)?;
        let f = |y: &[f64]| {
            let values: Vec<Vec<f64>> = positions
                .iter()
                .enumerate()
                .map(|(j, p)| set.eval(if j == i { y } else { p }).expect("dimension checked"))
                .collect();
            diversity_objective(&values)
        };
        worst = worst.max(fd_rel_err(f, &positions[i], &analytic, 1e-6));
    }
    Ok((n, worst))
}

fn hv3_vs_mc(rng: &mut ChaCha8Rng, n: usize) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    let reference = [1.0, 1.0, 1.0];
    for k in 0..n {
        let count = rng.random_range(1..=12);
        let pts: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..3).map(|_| rng.random_range(0.0..1.2)).collect())
            .collect();
        let exact = hypervolume_exact(&pts, &reference)?;
        let mc = hypervolume_monte_carlo(&pts, &reference, 1_000_000, k as u64)?;
        let z = if mc.std_error > 0.0 {
            (exact - mc.value).abs() / mc.std_error
        } else if (exact - mc.value).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    Ok((n, worst))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    heap_permute(n, &mut p, &mut out);
    out
}

fn heap_permute(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(p.clone());
        return;
    }
    for i in 0..k - 1 {
        heap_permute(k - 1, p, out);
        if k.is_multiple_of(2) {
            p.swap(i, k - 1);
        } else {
            p.swap(0, k - 1);
        }
    }
    heap_permute(k - 1, p, out);
}

fn assignment_vs_perms(rng: &mut ChaCha8Rng, n: usize) -> Result<(usize, f64)> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let size = rng.random_range(1..=7);
        let a: Vec<Vec<f64>> = (0..size).map(|_| random_vec(rng, 2, 1.0)).collect();
        let b: Vec<Vec<f64>> = (0..size).map(|_| random_vec(rng, 2, 1.0)).collect();
        let cost: Vec<f64> = a
            .iter()
            .flat_map(|p| b.iter().map(move |q| crate::linalg::dist(p, q)))
            .collect();
        let (_, total) = solve_assignment(&cost, size)?;
        let brute = permutations(size)
            .iter()
            .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost[i * size + j]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((total - brute).abs());
    }
    Ok((n, worst))
}

fn pareto_vs_pairwise(rng: &mut ChaCha8Rng, n: usize) -> Result<(usize, f64)> {
    let mut mismatches = 0usize;
    for _ in 0..n {
        let m = rng.random_range(2..=4);
        let count = rng.random_range(1..=200);
        // Coarse values so that ties and duplicates occur.
        let pts: Vec<Vec<f64>> = (0..count)
            .map(|_| (0..m).map(|_| rng.random_range(0..20) as f64 / 10.0).collect())
            .collect();
        let fast = pareto_filter(&pts)?;
        let mut brute = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            let mut dominated = false;
            for q in &pts {
                if dominates(q, p)? {
                    dominated = true;
                    break;
                }
            }
            if !dominated {
                brute.push(i);
            }
        }
        if fast != brute {
            mismatches += 1;
        }
    }
    Ok((n, mismatches as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
        let mut all = permutations(3);
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 6);
    }

    #[test]
    fn grid_minimum_of_orthogonal_pair() {
        let q = gram(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((simplex_grid_min(&q) - 0.5).abs() < 1e-12);
        let q3 = gram(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert!((simplex_grid_min(&q3) - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn diversity_objective_of_unit_pair() {
        assert_eq!(diversity_objective(&[vec![0.0], vec![1.0]]), 2.0);
    }
}
