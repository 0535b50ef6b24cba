//! Hypervolume of a point set under minimization, bounded by a reference
//! point: exact sweeps for two and three objectives, Monte Carlo beyond.

use std::collections::BTreeMap;
use std::ops::Bound;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::mgd::pareto_filter;

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
pub const DEFAULT_MC_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HvEstimate {
    pub value: f64,
    /// Zero for exact computations.
    pub std_error: f64,
}

/// Points strictly inside the reference box; any other point dominates an
/// empty box.
fn inside(points: &[Vec<f64>], reference: &[f64]) -> Result<Vec<Vec<f64>>> {
    for p in points {
        check_dim(reference.len(), p.len())?;
    }
    Ok(points
        .iter()
        .filter(|p| p.iter().zip(reference).all(|(a, r)| a < r))
        .cloned()
        .collect())
}

/// Exact for up to three objectives; Monte Carlo with the default sample
/// count and seed otherwise.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    if reference.len() <= 3 {
        hypervolume_exact(points, reference)
    } else {
        Ok(hypervolume_monte_carlo(points, reference, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED)?.value)
    }
}

/// Exact hypervolume for one, two or three objectives.
pub fn hypervolume_exact(points: &[Vec<f64>], reference: &[f64]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Empty("reference point"));
    }
    let pts = inside(points, reference)?;
    Ok(match reference.len() {
        1 => pts
            .iter()
            .map(|p| reference[0] - p[0])
            .fold(0.0, f64::max),
        2 => hv2(pts.iter().map(|p| (p[0], p[1])).collect(), reference[0], reference[1]),
        3 => hv3(&pts, reference),
        m => {
            return Err(Error::InvalidArgument(format!(
                "exact hypervolume supports at most 3 objectives, got {m}"
            )))
        }
    })
}

fn hv2(mut pts: Vec<(f64, f64)>, rx: f64, ry: f64) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut best_y = ry;
    let mut area = 0.0;
    for (x, y) in pts {
        if y < best_y {
            area += (rx - x) * (best_y - y);
            best_y = y;
        }
    }
    area
}

/// Order-preserving map from `f64` to `u64` for use as a map key.
fn key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Non-dominated staircase in the plane with its dominated area kept up to
/// date under insertion.
struct Staircase {
    steps: BTreeMap<u64, (f64, f64)>,
    area: f64,
    rx: f64,
    ry: f64,
}

impl Staircase {
    fn new(rx: f64, ry: f64) -> Self {
        Self {
            steps: BTreeMap::new(),
            area: 0.0,
            rx,
            ry,
        }
    }

    fn insert(&mut self, x: f64, y: f64) {
        let k = key(x);
        if let Some((_, &(_, py))) = self.steps.range(..=k).next_back() {
            if py <= y {
                return;
            }
        }
        let upper = self
            .steps
            .range(..k)
            .next_back()
            .map_or(self.ry, |(_, &(_, py))| py);

        let mut cur_x = x;
        let mut cur_top = upper;
        let mut gain = 0.0;
        let mut removed = Vec::new();
        let mut closed = false;
        for (&sk, &(sx, sy)) in self.steps.range((Bound::Included(k), Bound::Unbounded)) {
            gain += (sx - cur_x) * (cur_top - y);
            if sy >= y {
                removed.push(sk);
                cur_x = sx;
                cur_top = sy;
            } else {
                closed = true;
                break;
            }
        }
        if !closed {
            gain += (self.rx - cur_x) * (cur_top - y);
        }
        for sk in removed {
            self.steps.remove(&sk);
        }
        self.steps.insert(k, (x, y));
        self.area += gain;
    }
}

fn hv3(pts: &[Vec<f64>], reference: &[f64]) -> f64 {
    let mut order: Vec<&Vec<f64>> = pts.iter().collect();
    order.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut stairs = Staircase::new(reference[0], reference[1]);
    let mut volume = 0.0;
    for (i, p) in order.iter().enumerate() {
        stairs.insert(p[0], p[1]);
        let next_z = order.get(i + 1).map_or(reference[2], |q| q[2]);
        volume += stairs.area * (next_z - p[2]);
    }
    volume
}

const MC_CHUNKS: u64 = 64;

/// Monte Carlo estimate over the bounding box of the non-dominated points,
/// with its binomial standard error. The result does not depend on the
/// number of worker threads.
pub fn hypervolume_monte_carlo(
    points: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    seed: u64,
) -> Result<HvEstimate> {
    if reference.is_empty() {
        return Err(Error::Empty("reference point"));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    let pts = inside(points, reference)?;
    if pts.is_empty() {
        return Ok(HvEstimate {
            value: 0.0,
            std_error: 0.0,
        });
    }
    let front: Vec<Vec<f64>> = pareto_filter(&pts)?
        .into_iter()
        .map(|i| pts[i].clone())
        .collect();
    let m = reference.len();
    let lower: Vec<f64> = (0..m)
        .map(|k| front.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let box_volume: f64 = lower.iter().zip(reference).map(|(l, r)| r - l).product();

    let per_chunk = samples.div_ceil(MC_CHUNKS as usize);
    let hits: usize = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk as usize * per_chunk;
            let count = per_chunk.min(samples.saturating_sub(start));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let mut u = vec![0.0; m];
            let mut hits = 0usize;
            for _ in 0..count {
                for k in 0..m {
                    u[k] = lower[k] + (reference[k] - lower[k]) * rng.random::<f64>();
                }
                if front.iter().any(|p| p.iter().zip(&u).all(|(a, b)| a <= b)) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(HvEstimate {
        value: box_volume * p,
        std_error: box_volume * (p * (1.0 - p) / samples as f64).sqrt(),
    })
}
