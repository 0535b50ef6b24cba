//! Closed-form Gaussian-mixture data manifolds and their exact noised scores.
//!
//! Under the forward process `x_t = sqrt(abar) x_0 + sqrt(1 - abar) z`, an
//! isotropic component `N(mu, s^2 I)` stays Gaussian with mean `sqrt(abar) mu`
//! and variance `(1 - abar) + abar s^2`, so the noised mixture and its score
//! are available exactly at every step.

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::log_sum_exp;
use crate::schedule::NoiseSchedule;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureManifold {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    stdevs: Vec<f64>,
    dim: usize,
}

impl GaussianMixtureManifold {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, stdevs: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::Empty("mixture components"));
        }
        if means.len() != k || stdevs.len() != k {
            return Err(Error::InvalidArgument(format!(
                "mixture has {k} weights but {} means and {} stdevs",
                means.len(),
                stdevs.len()
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("mixture weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        if stdevs.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("mixture stdevs must be positive".into()));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::Empty("mixture mean"));
        }
        for m in &means {
            check_dim(dim, m.len())?;
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("mixture means must be finite".into()));
            }
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            weights,
            log_weights,
            means,
            stdevs,
            dim,
        })
    }

    /// Equal-weight mixture with a shared standard deviation.
    pub fn uniform(means: Vec<Vec<f64>>, stdev: f64) -> Result<Self> {
        let k = means.len();
        if k == 0 {
            return Err(Error::Empty("mixture components"));
        }
        let weights = vec![1.0 / k as f64; k];
        let total: f64 = weights.iter().sum();
        // Renormalize the last weight so the sum is exact for any k.
        let mut weights = weights;
        weights[k - 1] += 1.0 - total;
        Self::new(weights, means, vec![stdev; k])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn stdevs(&self) -> &[f64] {
        &self.stdevs
    }

    /// Per-component log joint `log w_k + log N(x; sqrt(abar) mu_k, v_k I)`,
    /// with the squared residuals left in `resid` for the score.
    fn component_terms(&self, x: &[f64], alpha_bar: f64, resid: &mut [Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let sa = alpha_bar.sqrt();
        let d = self.dim as f64;
        let mut log_terms = Vec::with_capacity(self.n_components());
        let mut vars = Vec::with_capacity(self.n_components());
        for (k, mu) in self.means.iter().enumerate() {
            let s = self.stdevs[k];
            let var = (1.0 - alpha_bar) + alpha_bar * s * s;
            let r = &mut resid[k];
            let mut sq = 0.0;
            for j in 0..self.dim {
                r[j] = x[j] - sa * mu[j];
                sq += r[j] * r[j];
            }
            log_terms.push(self.log_weights[k] - 0.5 * sq / var - 0.5 * d * (LN_2PI + var.ln()));
            vars.push(var);
        }
        (log_terms, vars)
    }

    fn score_at(&self, x: &[f64], alpha_bar: f64) -> Vec<f64> {
        let mut resid = vec![vec![0.0; self.dim]; self.n_components()];
        let (log_terms, vars) = self.component_terms(x, alpha_bar, &mut resid);
        let lse = log_sum_exp(&log_terms);
        let mut score = vec![0.0; self.dim];
        for (k, r) in resid.iter().enumerate() {
            let p = (log_terms[k] - lse).exp();
            if p == 0.0 {
                continue;
            }
            let c = p / vars[k];
            for (s, ri) in score.iter_mut().zip(r) {
                *s -= c * ri;
            }
        }
        score
    }

    fn log_density_at(&self, x: &[f64], alpha_bar: f64) -> f64 {
        let mut resid = vec![vec![0.0; self.dim]; self.n_components()];
        let (log_terms, _) = self.component_terms(x, alpha_bar, &mut resid);
        log_sum_exp(&log_terms)
    }

    /// `grad log q_t(x)` for the forward-noised mixture at step `t`.
    pub fn noised_score(&self, x: &[f64], t: usize, sched: &NoiseSchedule) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let ab = sched.alpha_bar(t)?;
        Ok(self.score_at(x, ab))
    }

    /// Optimal noise prediction, `-sqrt(1 - abar_t) * score`.
    pub fn eps_star(&self, x: &[f64], t: usize, sched: &NoiseSchedule) -> Result<Vec<f64>> {
        let sigma = sched.sigma(t)?;
        let mut s = self.noised_score(x, t, sched)?;
        for v in &mut s {
            *v *= -sigma;
        }
        Ok(s)
    }

    /// Log density of the noised mixture at step `t`.
    pub fn noised_log_density(&self, x: &[f64], t: usize, sched: &NoiseSchedule) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.log_density_at(x, sched.alpha_bar(t)?))
    }

    /// Log density of the clean data distribution.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.log_density_at(x, 1.0))
    }

    /// Draws `n` exact samples from the clean mixture.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let pick = WeightedIndex::new(&self.weights).expect("weights validated at construction");
        (0..n)
            .map(|_| {
                let k = pick.sample(rng);
                self.means[k]
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + self.stdevs[k] * z
                    })
                    .collect()
            })
            .collect()
    }
}
