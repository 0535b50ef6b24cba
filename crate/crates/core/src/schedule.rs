//! Diffusion noise schedule and per-step Langevin step sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forward-process noise schedule over steps `t = 1..=T`.
///
/// All accessors take the 1-based step index used throughout the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas_bar: Vec<f64>,
    step_sizes: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from an explicit beta sequence.
    ///
    /// Step sizes are annealed with the noise level:
    /// `eta_t = step_scale * (1 - alpha_bar_t)`.
    pub fn from_betas(betas: Vec<f64>, step_scale: f64) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::Empty("betas"));
        }
        if !(step_scale > 0.0 && step_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step_scale must be positive, got {step_scale}"
            )));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::InvalidArgument(format!("beta {b} outside (0, 1)")));
        }
        if betas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "betas must be strictly increasing".into(),
            ));
        }
        let alphas_bar: Vec<f64> = betas
            .iter()
            .scan(1.0, |acc, b| {
                *acc *= 1.0 - b;
                Some(*acc)
            })
            .collect();
        let step_sizes = alphas_bar.iter().map(|a| step_scale * (1.0 - a)).collect();
        Ok(Self {
            betas,
            alphas_bar,
            step_sizes,
        })
    }

    /// Linear beta schedule from `beta_min` to `beta_max` over `t_steps` steps.
    pub fn linear(t_steps: usize, beta_min: f64, beta_max: f64, step_scale: f64) -> Result<Self> {
        if t_steps == 0 {
            return Err(Error::InvalidArgument("T must be at least 1".into()));
        }
        let ordered = if t_steps == 1 {
            beta_min <= beta_max
        } else {
            beta_min < beta_max
        };
        if !(beta_min > 0.0 && beta_max < 1.0 && ordered) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < beta_min < beta_max < 1, got [{beta_min}, {beta_max}]"
            )));
        }
        let betas = if t_steps == 1 {
            vec![beta_min]
        } else {
            let span = (beta_max - beta_min) / (t_steps - 1) as f64;
            (0..t_steps).map(|i| beta_min + span * i as f64).collect()
        };
        Self::from_betas(betas, step_scale)
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.len() {
            Err(Error::StepOutOfRange { t, max: self.len() })
        } else {
            Ok(t - 1)
        }
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        Ok(self.betas[self.index(t)?])
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        Ok(self.alphas_bar[self.index(t)?])
    }

    /// Noise standard deviation of `q(x_t | x_0)`, i.e. `sqrt(1 - alpha_bar_t)`.
    pub fn sigma(&self, t: usize) -> Result<f64> {
        Ok((1.0 - self.alpha_bar(t)?).sqrt())
    }

    pub fn step_size(&self, t: usize) -> Result<f64> {
        Ok(self.step_sizes[self.index(t)?])
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas_bar(&self) -> &[f64] {
        &self.alphas_bar
    }

    pub fn step_sizes(&self) -> &[f64] {
        &self.step_sizes
    }
}

/// Parameters of a linear schedule as they appear in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default = "ScheduleSpec::default_beta_min")]
    pub beta_min: f64,
    #[serde(default = "ScheduleSpec::default_beta_max")]
    pub beta_max: f64,
    #[serde(default = "ScheduleSpec::default_step_scale")]
    pub step_scale: f64,
}

impl ScheduleSpec {
    fn default_beta_min() -> f64 {
        1e-4
    }
    fn default_beta_max() -> f64 {
        0.02
    }
    fn default_step_scale() -> f64 {
        1.0
    }

    pub fn build(&self, t_steps: usize) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(t_steps, self.beta_min, self.beta_max, self.step_scale)
    }
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            beta_min: Self::default_beta_min(),
            beta_max: Self::default_beta_max(),
            step_scale: Self::default_step_scale(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_schedule() {
        let s = NoiseSchedule::linear(1, 0.1, 0.1, 1.0).unwrap();
        assert_eq!(s.betas(), &[0.1]);
        assert!((s.alpha_bar(1).unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn two_step_cumulative_product() {
        let s = NoiseSchedule::from_betas(vec![0.1, 0.2], 1.0).unwrap();
        assert!((s.alpha_bar(1).unwrap() - 0.9).abs() < 1e-15);
        assert!((s.alpha_bar(2).unwrap() - 0.72).abs() < 1e-15);
    }

    #[test]
    fn default_ddpm_schedule_final_alpha_bar() {
        // Oracle: direct product of (1 - beta_i) with betas recomputed from the
        // interpolation formula, independent of the schedule's own storage.
        let t = 1000;
        let mut prod = 1.0;
        for i in 0..t {
            let beta = 1e-4 + (0.02 - 1e-4) * i as f64 / (t - 1) as f64;
            prod *= 1.0 - beta;
        }
        assert!((prod - 4.035829765375676e-5).abs() < 1e-12);

        let s = NoiseSchedule::linear(t, 1e-4, 0.02, 1.0).unwrap();
        let got = s.alpha_bar(t).unwrap();
        assert!(((got - prod) / prod).abs() < 1e-9, "got {got}, oracle {prod}");
    }

    #[test]
    fn invariants_hold() {
        let s = NoiseSchedule::linear(1000, 1e-4, 0.02, 0.5).unwrap();
        assert!(s.alphas_bar().windows(2).all(|w| w[1] < w[0]));
        assert!(s.alphas_bar().iter().all(|a| *a > 0.0 && *a < 1.0));
        assert!(s.step_sizes().iter().all(|e| *e > 0.0));
        let t = 500;
        let expected = 0.5 * (1.0 - s.alpha_bar(t).unwrap());
        assert_eq!(s.step_size(t).unwrap(), expected);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(NoiseSchedule::linear(0, 1e-4, 0.02, 1.0).is_err());
        assert!(NoiseSchedule::linear(10, 0.02, 1e-4, 1.0).is_err());
        assert!(NoiseSchedule::linear(10, 0.01, 0.01, 1.0).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.02, 1.0).is_err());
        assert!(NoiseSchedule::linear(10, 1e-4, 1.0, 1.0).is_err());
        assert!(NoiseSchedule::linear(10, 1e-4, 0.02, 0.0).is_err());
        assert!(NoiseSchedule::from_betas(vec![0.2, 0.1], 1.0).is_err());
        let s = NoiseSchedule::linear(3, 0.1, 0.3, 1.0).unwrap();
        assert!(matches!(s.alpha_bar(0), Err(Error::StepOutOfRange { .. })));
        assert!(matches!(s.alpha_bar(4), Err(Error::StepOutOfRange { .. })));
    }
}
