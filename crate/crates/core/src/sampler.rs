//! Population Langevin sampler with PROUD or baseline guidance.

use log::{debug, warn};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::guidance::{guidance_direction, phi_switch, GuidanceConfig, GuidanceOutcome, Method, Phi};
use crate::linalg::{axpy, dot, norm};
use crate::manifold::GaussianMixtureManifold;
use crate::mgd::min_norm_weights;
use crate::objectives::ObjectiveSet;
use crate::schedule::NoiseSchedule;

/// Units in which the guidance direction enters the Langevin update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DirectionScale {
    /// `x - (eta_t / sigma_t) g + sqrt(2 eta_t) z`. The direction is in
    /// noise-prediction units, so dividing by `sigma_t = sqrt(1 - abar_t)`
    /// turns `eps*` back into the score and the chain targets `q_t`.
    #[default]
    Score,
    /// `x - eta_t g + sqrt(2 eta_t) z` with no rescaling.
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerOptions {
    #[serde(default)]
    pub direction_scale: DirectionScale,
    /// Average the pairwise diversity force over the `N - 1` partners.
    #[serde(default = "SamplerOptions::default_normalize")]
    pub diversity_normalize: bool,
    /// Upper bound on the norm of each particle's diversity gradient before
    /// it is scaled by gamma.
    #[serde(default = "SamplerOptions::default_clip")]
    pub diversity_clip: Option<f64>,
}

impl SamplerOptions {
    fn default_normalize() -> bool {
        true
    }
    fn default_clip() -> Option<f64> {
        Some(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.diversity_clip {
            if !(c > 0.0) {
                return Err(Error::config("sampler.diversity_clip", "must be positive"));
            }
        }
        Ok(())
    }
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            direction_scale: DirectionScale::default(),
            diversity_normalize: Self::default_normalize(),
            diversity_clip: Self::default_clip(),
        }
    }
}

/// Particles at step `t` together with their objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    positions: Vec<Vec<f64>>,
    objective_values: Vec<Vec<f64>>,
    step: usize,
}

impl Population {
    pub fn new(positions: Vec<Vec<f64>>, step: usize, set: &ObjectiveSet) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty("population"));
        }
        for p in &positions {
            check_dim(set.dim(), p.len())?;
        }
        let objective_values = positions.par_iter().map(|x| set.eval_unchecked(x)).collect();
        Ok(Self {
            positions,
            objective_values,
            step,
        })
    }

    /// `n` standard-normal particles in `R^d`, drawn particle-major.
    pub fn standard_normal<R: Rng + ?Sized>(
        n: usize,
        step: usize,
        set: &ObjectiveSet,
        rng: &mut R,
    ) -> Result<Self> {
        let d = set.dim();
        let positions = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        Self::new(positions, step, set)
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn objective_values(&self) -> &[Vec<f64>] {
        &self.objective_values
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn into_positions(self) -> Vec<Vec<f64>> {
        self.positions
    }
}

/// Per particle, per step record of the guidance decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub particle: usize,
    pub mgd_norm: f64,
    /// `"active"`, `"neg_inf"` or `"none"` for baselines.
    pub branch: &'static str,
    pub phi: Option<f64>,
    pub lambda: Vec<f64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub step: usize,
    pub neg_inf_count: usize,
    pub active_count: usize,
    pub fallbacks: usize,
    pub mean_mgd_norm: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub population: Population,
    pub summaries: Vec<StepSummary>,
    pub trace: Option<Vec<TraceRecord>>,
}

impl RunOutput {
    pub fn total_fallbacks(&self) -> usize {
        self.summaries.iter().map(|s| s.fallbacks).sum()
    }
}

/// Gradient of `sum_{i != j} 1 / |F(x_i) - F(x_j)|^2` with respect to
/// particle `i`, using the cached objective values of `pop`.
pub fn diversity_gradient(pop: &Population, set: &ObjectiveSet, i: usize) -> Result<Vec<f64>> {
    if pop.len() < 2 {
        return Err(Error::InvalidArgument(
            "diversity needs at least two particles".into(),
        ));
    }
    if i >= pop.len() {
        return Err(Error::InvalidArgument(format!(
            "particle {i} out of range for population of {}",
            pop.len()
        )));
    }
    let s = objective_space_force(pop.objective_values(), i);
    let grads = set.grad_unchecked(&pop.positions()[i]);
    Ok(jacobian_transpose(&grads, &s, set.dim()))
}

const COINCIDENT: f64 = 1e-8;

/// `sum_{j != i} -4 / |dF|^4 * dF` with `dF = F_i - F_j`; near-coincident
/// pairs contribute nothing.
fn objective_space_force(values: &[Vec<f64>], i: usize) -> Vec<f64> {
    let fi = &values[i];
    let mut s = vec![0.0; fi.len()];
    for (j, fj) in values.iter().enumerate() {
        if j == i {
            continue;
        }
        let diff: Vec<f64> = fi.iter().zip(fj).map(|(a, b)| a - b).collect();
        let r2 = dot(&diff, &diff);
        if r2.sqrt() < COINCIDENT {
            continue;
        }
        axpy(-4.0 / (r2 * r2), &diff, &mut s);
    }
    s
}

fn jacobian_transpose(grads: &[Vec<f64>], s: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (g, si) in grads.iter().zip(s) {
        axpy(*si, g, &mut out);
    }
    out
}

/// One Langevin move: `x - eta * dir + sqrt(2 eta) * z`.
pub fn langevin_update(x: &[f64], dir: &[f64], eta: f64, z: &[f64]) -> Vec<f64> {
    drift_and_diffuse(x, dir, eta, eta, z)
}

/// `x - drift * dir + sqrt(2 eta) * z`.
fn drift_and_diffuse(x: &[f64], dir: &[f64], drift: f64, eta: f64, z: &[f64]) -> Vec<f64> {
    let noise = (2.0 * eta).sqrt();
    x.iter()
        .zip(dir)
        .zip(z)
        .map(|((xi, di), zi)| xi - drift * di + noise * zi)
        .collect()
}

pub struct Sampler<'a> {
    pub model: &'a GaussianMixtureManifold,
    pub schedule: &'a NoiseSchedule,
    pub objectives: &'a ObjectiveSet,
    pub guidance: &'a GuidanceConfig,
    pub options: &'a SamplerOptions,
}

struct ParticleResult {
    position: Vec<f64>,
    outcome: GuidanceOutcome,
    fallback: bool,
}

impl<'a> Sampler<'a> {
    pub fn new(
        model: &'a GaussianMixtureManifold,
        schedule: &'a NoiseSchedule,
        objectives: &'a ObjectiveSet,
        guidance: &'a GuidanceConfig,
        options: &'a SamplerOptions,
    ) -> Result<Self> {
        check_dim(objectives.dim(), model.dim())?;
        guidance.validate(objectives.m())?;
        options.validate()?;
        Ok(Self {
            model,
            schedule,
            objectives,
            guidance,
            options,
        })
    }

    fn uses_diversity(&self, n: usize) -> bool {
        self.guidance.gamma > 0.0 && self.guidance.method != Method::MPlus1Mgd && n >= 2
    }

    /// Diversity gradients for every particle from the start-of-step
    /// snapshot, already normalized and clipped but not scaled by gamma.
    fn diversity_snapshot(&self, pop: &Population, grads: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
        let n = pop.len();
        let d = self.objectives.dim();
        let values = pop.objective_values();
        let norm_factor = if self.options.diversity_normalize {
            1.0 / (n - 1) as f64
        } else {
            1.0
        };
        (0..n)
            .into_par_iter()
            .map(|i| {
                let s = objective_space_force(values, i);
                let mut v = jacobian_transpose(&grads[i], &s, d);
                v.iter_mut().for_each(|x| *x *= norm_factor);
                if let Some(clip) = self.options.diversity_clip {
                    let nv = norm(&v);
                    if nv > clip {
                        v.iter_mut().for_each(|x| *x *= clip / nv);
                    }
                }
                v
            })
            .collect()
    }

    /// Advances `pop` from step `t` to `t - 1`. Noise is drawn from `rng`
    /// for all particles before any per-particle work, particle-major.
    pub fn step<R: Rng + ?Sized>(
        &self,
        pop: &mut Population,
        rng: &mut R,
        trace: Option<&mut Vec<TraceRecord>>,
    ) -> Result<StepSummary> {
        let t = pop.step;
        if t == 0 {
            return Err(Error::StepOutOfRange {
                t,
                max: self.schedule.len(),
            });
        }
        let eta = self.schedule.step_size(t)?;
        let sigma = self.schedule.sigma(t)?;
        let d = self.objectives.dim();
        let n = pop.len();

        let noise: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();

        let grads: Vec<Vec<Vec<f64>>> = pop
            .positions
            .par_iter()
            .map(|x| self.objectives.grad_unchecked(x))
            .collect();
        let diversity = if self.uses_diversity(n) {
            Some(self.diversity_snapshot(pop, &grads))
        } else {
            None
        };

        let step_coef = match self.options.direction_scale {
            DirectionScale::Score => eta / sigma,
            DirectionScale::Noise => eta,
        };
        let gamma = self.guidance.gamma;
        let method = self.guidance.method;

        let results: Vec<Result<ParticleResult>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = &pop.positions[i];
                let eps = if method.uses_eps() {
                    self.model.eps_star(x, t, self.schedule)?
                } else {
                    Vec::new()
                };
                let (mut outcome, fallback) = match guidance_direction(&eps, &grads[i], self.guidance) {
                    Ok(o) => (o, false),
                    Err(Error::DualUnbounded { .. }) => {
                        let mn = min_norm_weights(&grads[i])?;
                        debug!("step {t} particle {i}: dual unbounded, using MGD direction");
                        (
                            GuidanceOutcome {
                                direction: mn.direction,
                                multipliers: vec![0.0; grads[i].len()],
                                phi: Some(phi_switch(mn.norm, self.guidance)),
                                mgd_norm: mn.norm,
                            },
                            true,
                        )
                    }
                    Err(e) => return Err(e),
                };
                if let Some(div) = &diversity {
                    axpy(gamma, &div[i], &mut outcome.direction);
                }
                let position = drift_and_diffuse(x, &outcome.direction, step_coef, eta, &noise[i]);
                Ok(ParticleResult {
                    position,
                    outcome,
                    fallback,
                })
            })
            .collect();

        let mut summary = StepSummary {
            step: t,
            neg_inf_count: 0,
            active_count: 0,
            fallbacks: 0,
            mean_mgd_norm: 0.0,
        };
        let mut new_positions = Vec::with_capacity(n);
        let mut records = trace;
        for (i, r) in results.into_iter().enumerate() {
            let r = r?;
            match r.outcome.phi {
                Some(Phi::Active(_)) => summary.active_count += 1,
                Some(Phi::NegInfinity) => summary.neg_inf_count += 1,
                None => {}
            }
            summary.fallbacks += usize::from(r.fallback);
            summary.mean_mgd_norm += r.outcome.mgd_norm / n as f64;
            if let Some(rec) = records.as_deref_mut() {
                rec.push(TraceRecord {
                    step: t,
                    particle: i,
                    mgd_norm: r.outcome.mgd_norm,
                    branch: match r.outcome.phi {
                        Some(Phi::Active(_)) => "active",
                        Some(Phi::NegInfinity) => "neg_inf",
                        None => "none",
                    },
                    phi: r.outcome.phi.map(Phi::value).filter(|v| v.is_finite()),
                    lambda: r.outcome.multipliers,
                    fallback: r.fallback,
                });
            }
            new_positions.push(r.position);
        }
        if new_positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "particles diverged at step {t}; reduce schedule.step_scale"
            )));
        }
        if summary.fallbacks > 0 {
            warn!("step {t}: {} particle(s) fell back to the MGD direction", summary.fallbacks);
        }
        pop.objective_values = new_positions
            .par_iter()
            .map(|x| self.objectives.eval_unchecked(x))
            .collect();
        pop.positions = new_positions;
        pop.step = t - 1;
        Ok(summary)
    }

    /// Runs from `pop.step()` down to zero.
    pub fn run<R: Rng + ?Sized>(
        &self,
        mut pop: Population,
        rng: &mut R,
        record_trace: bool,
    ) -> Result<RunOutput> {
        if pop.step > self.schedule.len() {
            return Err(Error::StepOutOfRange {
                t: pop.step,
                max: self.schedule.len(),
            });
        }
        let mut trace = record_trace.then(Vec::new);
        let mut summaries = Vec::with_capacity(pop.step);
        while pop.step > 0 {
            summaries.push(self.step(&mut pop, rng, trace.as_mut())?);
        }
        Ok(RunOutput {
            population: pop,
            summaries,
            trace,
        })
    }
}



#[cfg(test)]
mod settle_tests {
    use super::*;
    use crate::guidance::{GuidanceConfig, Method};
    use crate::manifold::GaussianMixtureManifold;
    use crate::objectives::ObjectiveSet;
    use crate::schedule::NoiseSchedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn segment_model() -> GaussianMixtureManifold {
        let means = (0..5).map(|k| vec![0.5 + 0.125 * k as f64; 2]).collect();
        GaussianMixtureManifold::uniform(means, 0.02).unwrap()
    }

    #[test]
    fn proud_without_threshold_steps_like_pure_diffusion() {
        let model = segment_model();
        let sched = NoiseSchedule::linear(200, 1e-4, 0.02, 1.0).unwrap();
        let set = ObjectiveSet::two_anchor(2).unwrap();
        let opts = SamplerOptions::default();
        let run = |g: &GuidanceConfig| {
            let s = Sampler::new(&model, &sched, &set, g, &opts).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            let pop = Population::standard_normal(32, 200, &set, &mut rng).unwrap();
            s.run(pop, &mut rng, false).unwrap().population
        };
        let mut proud = GuidanceConfig::new(Method::Proud);
        proud.e_threshold = f64::INFINITY;
        proud.gamma = 0.0;
        let mut plain = GuidanceConfig::new(Method::DmMmgd);
        plain.fixed_lambda = 0.0;
        plain.gamma = 0.0;
        assert_eq!(run(&proud), run(&plain));
    }

    #[test]
    fn stationary_branch_share_grows_at_the_end() {
        let model = segment_model();
        let sched = NoiseSchedule::linear(1000, 1e-4, 0.02, 1.0).unwrap();
        let set = ObjectiveSet::two_anchor(2).unwrap();
        let g = GuidanceConfig::new(Method::Proud);
        let opts = SamplerOptions::default();
        let s = Sampler::new(&model, &sched, &set, &g, &opts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pop = Population::standard_normal(128, 1000, &set, &mut rng).unwrap();
        let out = s.run(pop, &mut rng, false).unwrap();
        let blocks: Vec<usize> = out.summaries[900..]
            .chunks(10)
            .map(|c| c.iter().map(|s| s.neg_inf_count).sum())
            .collect();
        assert!(blocks.windows(2).all(|w| w[1] >= w[0]), "{blocks:?}");
    }
}
