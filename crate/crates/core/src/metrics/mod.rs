//! Evaluation of a finished population: hypervolume, distance to the
//! analytic front, likelihood under the data manifold and stationarity.

mod assignment;
mod hypervolume;

pub use assignment::{emd, solve_assignment, MAX_ASSIGNMENT};
pub use hypervolume::{
    hypervolume, hypervolume_exact, hypervolume_monte_carlo, HvEstimate, DEFAULT_MC_SAMPLES,
    DEFAULT_MC_SEED,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::dist;
use crate::manifold::GaussianMixtureManifold;
use crate::mgd::{min_norm_weights, pareto_filter};
use crate::objectives::{even_subsample, ObjectiveSet};

/// Number of analytic-front points used as the EMD reference.
pub const FRONT_POINTS: usize = 2000;

/// Mean and per-sample log density of `positions` under `model`.
pub fn quality_scores(
    positions: &[Vec<f64>],
    model: &GaussianMixtureManifold,
) -> Result<(f64, Vec<f64>)> {
    if positions.is_empty() {
        return Err(Error::Empty("positions"));
    }
    let per_sample = positions
        .par_iter()
        .map(|x| model.log_density(x))
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok((mean, per_sample))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Hypervolume reference point, one entry per objective.
    pub reference: Vec<f64>,
    #[serde(default = "MetricsConfig::default_emd")]
    pub emd: bool,
    /// Threshold on the MGD norm for counting a particle as stationary.
    pub stationary_tol: f64,
    #[serde(default = "MetricsConfig::default_front_points")]
    pub front_points: usize,
    #[serde(default = "MetricsConfig::default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "MetricsConfig::default_mc_seed")]
    pub mc_seed: u64,
}

impl MetricsConfig {
    fn default_emd() -> bool {
        true
    }
    fn default_front_points() -> usize {
        FRONT_POINTS
    }
    fn default_mc_samples() -> usize {
        DEFAULT_MC_SAMPLES
    }
    fn default_mc_seed() -> u64 {
        DEFAULT_MC_SEED
    }

    pub fn new(reference: Vec<f64>, stationary_tol: f64) -> Self {
        Self {
            reference,
            emd: true,
            stationary_tol,
            front_points: FRONT_POINTS,
            mc_samples: DEFAULT_MC_SAMPLES,
            mc_seed: DEFAULT_MC_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub hv: f64,
    /// Standard error of a Monte Carlo hypervolume; zero when exact.
    pub hv_std_error: f64,
    pub hv_reference: Vec<f64>,
    /// Absent when disabled or when the objectives have no analytic front.
    pub emd: Option<f64>,
    pub mean_front_distance: Option<f64>,
    pub mean_log_likelihood: f64,
    pub pct_stationary: f64,
    pub n_points: usize,
    pub n_nondominated: usize,
    pub spread: f64,
    pub mean_objectives: Vec<f64>,
}

/// Largest pairwise Euclidean distance within `points`.
pub fn max_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            points[i + 1..]
                .iter()
                .map(|q| dist(&points[i], q))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Assembles every metric for final `positions` with objective values
/// `values`.
pub fn report(
    positions: &[Vec<f64>],
    values: &[Vec<f64>],
    set: &ObjectiveSet,
    model: &GaussianMixtureManifold,
    cfg: &MetricsConfig,
) -> Result<MetricReport> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::Empty("population"));
    }
    check_dim(n, values.len())?;
    let m = set.m();
    check_dim(m, cfg.reference.len())?;

    let nd_idx = pareto_filter(values)?;
    let nondominated: Vec<Vec<f64>> = nd_idx.iter().map(|&i| values[i].clone()).collect();
    let hv = if m <= 3 {
        HvEstimate {
            value: hypervolume_exact(&nondominated, &cfg.reference)?,
            std_error: 0.0,
        }
    } else {
        hypervolume_monte_carlo(&nondominated, &cfg.reference, cfg.mc_samples, cfg.mc_seed)?
    };

    let (mean_front_distance, emd_value) = match set.front() {
        None => (None, None),
        Some(_) => {
            let dists = values
                .par_iter()
                .map(|y| set.front_distance(y))
                .collect::<Result<Vec<f64>>>()?;
            let mean = dists.iter().sum::<f64>() / n as f64;
            let emd_value = if cfg.emd {
                let front = set.discretize_front(cfg.front_points)?;
                let k = n.min(front.len()).min(MAX_ASSIGNMENT);
                Some(emd(&even_subsample(values, k), &even_subsample(&front, k))?)
            } else {
                None
            };
            (Some(mean), emd_value)
        }
    };

    let (mean_log_likelihood, _) = quality_scores(positions, model)?;
    let stationary = positions
        .par_iter()
        .map(|x| -> Result<bool> {
            let g = set.grad(x)?;
            Ok(min_norm_weights(&g)?.norm <= cfg.stationary_tol)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|s| *s)
        .count();

    let mean_objectives = (0..m)
        .map(|k| values.iter().map(|v| v[k]).sum::<f64>() / n as f64)
        .collect();

    Ok(MetricReport {
        hv: hv.value,
        hv_std_error: hv.std_error,
        hv_reference: cfg.reference.clone(),
        emd: emd_value,
        mean_front_distance,
        mean_log_likelihood,
        pct_stationary: stationary as f64 / n as f64,
        n_points: n,
        n_nondominated: nondominated.len(),
        spread: max_pairwise_distance(&nondominated),
        mean_objectives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::AnchorObjective;

    fn line_model() -> GaussianMixtureManifold {
        GaussianMixtureManifold::uniform(vec![vec![0.5, 0.5], vec![1.0, 1.0]], 0.05).unwrap()
    }

    #[test]
    fn quality_at_mode_and_far_away() {
        let model = GaussianMixtureManifold::new(vec![1.0], vec![vec![0.0, 0.0]], vec![0.1]).unwrap();
        let at_mode = vec![vec![0.0, 0.0]; 5];
        let (mean, per) = quality_scores(&at_mode, &model).unwrap();
        assert_eq!(mean, model.log_density(&[0.0, 0.0]).unwrap());
        assert_eq!(per.len(), 5);
        let far = vec![vec![10.0, 0.0]; 3];
        assert!(quality_scores(&far, &model).unwrap().0 < -4000.0);
    }

    #[test]
    fn report_on_front_points() {
        let set = ObjectiveSet::two_anchor(2).unwrap();
        let positions: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![0.5 + 0.5 * i as f64 / 49.0; 2])
            .collect();
        let values: Vec<Vec<f64>> = positions.iter().map(|x| set.eval(x).unwrap()).collect();
        let cfg = MetricsConfig::new(vec![0.25, 0.25], 0.06);
        let r = report(&positions, &values, &set, &line_model(), &cfg).unwrap();
        assert!(r.hv <= 5.0 / 96.0 + 1e-6);
        assert_eq!(r.pct_stationary, 1.0);
        assert_eq!(r.n_nondominated, 50);
        assert!(r.mean_front_distance.unwrap() < 1e-12);
        assert!(r.emd.unwrap() < 0.01);
        assert!((r.spread - (0.25f64 * 0.25 * 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn report_single_particle_and_missing_front() {
        let set = ObjectiveSet::from_anchors(vec![
            AnchorObjective::new(2, vec![1.0], vec![0]).unwrap(),
            AnchorObjective::new(2, vec![1.0], vec![1]).unwrap(),
        ])
        .unwrap();
        let positions = vec![vec![0.8, 0.9]];
        let values = vec![set.eval(&positions[0]).unwrap()];
        let cfg = MetricsConfig::new(vec![1.0, 1.0], 1e-6);
        let r = report(&positions, &values, &set, &line_model(), &cfg).unwrap();
        assert_eq!(r.spread, 0.0);
        assert!(r.emd.is_none() && r.mean_front_distance.is_none());
    }

    #[test]
    fn analytic_front_hypervolume() {
        let set = ObjectiveSet::two_anchor(2).unwrap();
        let front = set.discretize_front(10_000).unwrap();
        let hv = hypervolume(&front, &[0.25, 0.25]).unwrap();
        assert!((hv - 5.0 / 96.0).abs() < 1e-4, "hv {hv}");
    }
}
