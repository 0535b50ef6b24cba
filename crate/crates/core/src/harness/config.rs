//! TOML run configuration and its translation into sampler components.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::guidance::{GuidanceConfig, Method};
use crate::manifold::GaussianMixtureManifold;
use crate::metrics::{MetricsConfig, DEFAULT_MC_SAMPLES, FRONT_POINTS};
use crate::objectives::{AnchorObjective, ObjectiveSet};
use crate::sampler::SamplerOptions;
use crate::schedule::{NoiseSchedule, ScheduleSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_particles: usize,
    pub dims: usize,
    pub t_steps: usize,
    /// Groups runs in `compare`; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub trace: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub manifold: ManifoldSpec,
    pub objectives: ObjectivesSpec,
    pub guidance: GuidanceSpec,
    #[serde(default)]
    pub sampler: SamplerOptions,
    #[serde(default)]
    pub metrics: MetricsSpec,
    /// Dotted config paths mapped to the values to sweep over.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<toml::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    /// Components listed one by one; weights default to uniform.
    Explicit {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
        means: Vec<Vec<f64>>,
        stdevs: Vec<f64>,
    },
    /// Equal-weight components on an evenly spaced lattice over a segment
    /// (two vertices) or triangle (three vertices), shifted by `offset`.
    Lattice {
        vertices: Vec<Vec<f64>>,
        per_edge: usize,
        stdev: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    TwoAnchor,
    ThreeAnchor,
}

impl Benchmark {
    pub fn reference(self) -> Vec<f64> {
        match self {
            Benchmark::TwoAnchor => vec![0.25, 0.25],
            Benchmark::ThreeAnchor => vec![0.2, 0.1, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSpec {
    pub anchor: Vec<f64>,
    /// Coordinates the anchor applies to; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectivesSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<Benchmark>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<AnchorSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceSpec {
    pub method: Method,
    #[serde(default = "GuidanceSpec::default_alpha")]
    pub alpha: f64,
    #[serde(default = "GuidanceSpec::default_e")]
    pub e_threshold: f64,
    #[serde(default = "GuidanceSpec::default_gamma")]
    pub gamma: f64,
    #[serde(default = "GuidanceSpec::default_lambda")]
    pub fixed_lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_weights: Option<Vec<f64>>,
    /// Two-objective shorthand for `single_weights = [w, 1 - w]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<f64>,
}

impl GuidanceSpec {
    fn default_alpha() -> f64 {
        0.5
    }
    fn default_e() -> f64 {
        0.03
    }
    fn default_gamma() -> f64 {
        0.2
    }
    fn default_lambda() -> f64 {
        1.0
    }

    pub fn new(method: Method) -> Self {
        Self {
            method,
            alpha: Self::default_alpha(),
            e_threshold: Self::default_e(),
            gamma: Self::default_gamma(),
            fixed_lambda: Self::default_lambda(),
            single_weights: None,
            w: None,
        }
    }

    fn resolve(&self, m: usize) -> Result<GuidanceConfig> {
        let single_weights = match (self.w, &self.single_weights) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "guidance.w",
                    "give either `w` or `single_weights`, not both",
                ))
            }
            (Some(w), None) => {
                if m != 2 {
                    return Err(Error::config("guidance.w", "only valid with two objectives"));
                }
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::config("guidance.w", "must lie in [0, 1]"));
                }
                Some(vec![w, 1.0 - w])
            }
            (None, sw) => sw.clone(),
        };
        let cfg = GuidanceConfig {
            method: self.method,
            alpha: self.alpha,
            e_threshold: self.e_threshold,
            gamma: self.gamma,
            fixed_lambda: self.fixed_lambda,
            single_weights,
        };
        cfg.validate(m)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    /// Defaults to the benchmark's reference point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emd: Option<bool>,
    /// Defaults to twice the guidance threshold `e`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    /// Defaults to the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_seed: Option<u64>,
}

/// Everything a run needs, built and validated from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: GaussianMixtureManifold,
    pub schedule: NoiseSchedule,
    pub objectives: ObjectiveSet,
    pub guidance: GuidanceConfig,
    pub sampler: SamplerOptions,
    pub metrics: MetricsConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<root>", e.to_string()))
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.guidance.method.name().to_string())
    }

    pub fn build(&self) -> Result<Experiment> {
        if self.n_particles == 0 {
            return Err(Error::config("n_particles", "must be at least 1"));
        }
        if self.dims == 0 {
            return Err(Error::config("dims", "must be at least 1"));
        }
        if self.t_steps == 0 {
            return Err(Error::config("t_steps", "must be at least 1"));
        }
        let schedule = self
            .schedule
            .build(self.t_steps)
            .map_err(|e| Error::config("schedule", e.to_string()))?;
        let objectives = self.build_objectives()?;
        let model = self.build_manifold()?;
        let m = objectives.m();
        let guidance = self.guidance.resolve(m)?;
        self.sampler.validate()?;

        let reference = match (&self.metrics.reference, self.objectives.benchmark) {
            (Some(r), _) => r.clone(),
            (None, Some(b)) => b.reference(),
            (None, None) => {
                return Err(Error::config(
                    "metrics.reference",
                    "required when objectives are not a named benchmark",
                ))
            }
        };
        if reference.len() != m {
            return Err(Error::config(
                "metrics.reference",
                format!("expected {m} entries, got {}", reference.len()),
            ));
        }
        let stationary_tol = match self.metrics.stationary_tol {
            Some(t) if t > 0.0 => t,
            Some(_) => return Err(Error::config("metrics.stationary_tol", "must be positive")),
            None if guidance.e_threshold.is_finite() => 2.0 * guidance.e_threshold,
            None => crate::mgd::DEFAULT_STATIONARY_TOL,
        };
        let metrics = MetricsConfig {
            reference,
            emd: self.metrics.emd.unwrap_or(true),
            stationary_tol,
            front_points: self.metrics.front_points.unwrap_or(FRONT_POINTS),
            mc_samples: self.metrics.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES),
            mc_seed: self.metrics.mc_seed.unwrap_or(self.seed),
        };
        if metrics.front_points == 0 || metrics.mc_samples == 0 {
            return Err(Error::config(
                "metrics",
                "front_points and mc_samples must be positive",
            ));
        }
        Ok(Experiment {
            model,
            schedule,
            objectives,
            guidance,
            sampler: self.sampler.clone(),
            metrics,
        })
    }

    fn build_objectives(&self) -> Result<ObjectiveSet> {
        let d = self.dims;
        let wrap = |key: &str, e: Error| Error::config(key, e.to_string());
        match (&self.objectives.benchmark, &self.objectives.anchors) {
            (Some(_), Some(_)) => Err(Error::config(
                "objectives",
                "give either `benchmark` or `anchors`, not both",
            )),
            (None, None) => Err(Error::config("objectives", "expected `benchmark` or `anchors`")),
            (Some(Benchmark::TwoAnchor), None) => {
                ObjectiveSet::two_anchor(d).map_err(|e| wrap("objectives.benchmark", e))
            }
            (Some(Benchmark::ThreeAnchor), None) => {
                ObjectiveSet::three_anchor(d).map_err(|e| wrap("objectives.benchmark", e))
            }
            (None, Some(specs)) => {
                let anchors = specs
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let mask = s.mask.clone().unwrap_or_else(|| (0..d).collect());
                        AnchorObjective::new(d, s.anchor.clone(), mask)
                            .map_err(|e| wrap(&format!("objectives.anchors[{i}]"), e))
                    })
                    .collect::<Result<Vec<_>>>()?;
                ObjectiveSet::from_anchors(anchors).map_err(|e| wrap("objectives.anchors", e))
            }
        }
    }

    fn build_manifold(&self) -> Result<GaussianMixtureManifold> {
        let wrap = |e: Error| Error::config("manifold", e.to_string());
        let model = match &self.manifold {
            ManifoldSpec::Explicit {
                weights,
                means,
                stdevs,
            } => match weights {
                Some(w) => GaussianMixtureManifold::new(w.clone(), means.clone(), stdevs.clone()),
                None => {
                    let k = means.len().max(1);
                    let mut w = vec![1.0 / k as f64; means.len()];
                    let total: f64 = w.iter().sum();
                    if let Some(last) = w.last_mut() {
                        *last += 1.0 - total;
                    }
                    GaussianMixtureManifold::new(w, means.clone(), stdevs.clone())
                }
            }
            .map_err(wrap)?,
            ManifoldSpec::Lattice {
                vertices,
                per_edge,
                stdev,
                offset,
            } => {
                for v in vertices {
                    check_dim(self.dims, v.len()).map_err(|e| Error::config("manifold.vertices", e.to_string()))?;
                }
                if let Some(o) = offset {
                    check_dim(self.dims, o.len()).map_err(|e| Error::config("manifold.offset", e.to_string()))?;
                }
                let means = lattice_points(vertices, *per_edge)?
                    .into_iter()
                    .map(|mut p| {
                        if let Some(o) = offset {
                            p.iter_mut().zip(o).for_each(|(a, b)| *a += b);
                        }
                        p
                    })
                    .collect();
                GaussianMixtureManifold::uniform(means, *stdev).map_err(wrap)?
            }
        };
        check_dim(self.dims, model.dim()).map_err(|e| Error::config("manifold", e.to_string()))?;
        Ok(model)
    }
}

/// Evenly spaced points on a segment or triangle with `per_edge` points
/// along each edge.
pub fn lattice_points(vertices: &[Vec<f64>], per_edge: usize) -> Result<Vec<Vec<f64>>> {
    if per_edge == 0 {
        return Err(Error::config("manifold.per_edge", "must be at least 1"));
    }
    let k = per_edge;
    let frac = |i: usize| if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
    let lerp3 = |a: f64, b: f64| -> Vec<f64> {
        let v0 = &vertices[0];
        (0..v0.len())
            .map(|j| {
                let mut x = v0[j] + a * (vertices[1][j] - v0[j]);
                if vertices.len() == 3 {
                    x += b * (vertices[2][j] - v0[j]);
                }
                x
            })
            .collect()
    };
    match vertices.len() {
        2 => Ok((0..k).map(|i| lerp3(frac(i), 0.0)).collect()),
        3 if k == 1 => Ok(vec![lerp3(1.0 / 3.0, 1.0 / 3.0)]),
        3 => Ok((0..k)
            .flat_map(|i| (0..k - i).map(move |j| (i, j)))
            .map(|(i, j)| lerp3(frac(i), frac(j)))
            .collect()),
        n => Err(Error::config(
            "manifold.vertices",
            format!("expected 2 or 3 vertices, got {n}"),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
seed = 7
n_particles = 16
dims = 2
t_steps = 20

[manifold]
kind = "lattice"
vertices = [[0.5, 0.5], [1.0, 1.0]]
per_edge = 5
stdev = 0.025

[objectives]
benchmark = "two_anchor"

[guidance]
method = "PROUD"
"#;

    #[test]
    fn parses_and_builds_defaults() {
        let cfg = RunConfig::from_toml_str(BASE).unwrap();
        let exp = cfg.build().unwrap();
        assert_eq!(exp.model.n_components(), 5);
        assert_eq!(exp.model.means()[1], vec![0.625, 0.625]);
        assert_eq!(exp.metrics.reference, vec![0.25, 0.25]);
        assert_eq!(exp.metrics.stationary_tol, 0.06);
        assert_eq!(exp.guidance.alpha, 0.5);
        assert_eq!(exp.guidance.gamma, 0.2);
        assert_eq!(exp.schedule.len(), 20);
        assert_eq!(cfg.label(), "PROUD");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::from_toml_str(BASE).unwrap();
        cfg.guidance.e_threshold = f64::INFINITY;
        let text = cfg.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_seed_is_named() {
        let text = BASE.replace("seed = 7\n", "");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("method = \"PROUD\"", "method = \"PROUD\"\nalhpa = 0.1");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("alhpa"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_key() {
        let bad_w = BASE.replace("method = \"PROUD\"", "method = \"DM_SINGLE\"\nw = 1.5");
        let err = RunConfig::from_toml_str(&bad_w).unwrap().build().unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "guidance.w"), "{err}");

        let bad_dim = BASE.replace("dims = 2", "dims = 3");
        let err = RunConfig::from_toml_str(&bad_dim).unwrap().build().unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "manifold.vertices"), "{err}");

        let bad_alpha = BASE.replace("method = \"PROUD\"", "method = \"PROUD\"\nalpha = -1.0");
        let err = RunConfig::from_toml_str(&bad_alpha).unwrap().build().unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "guidance.alpha"), "{err}");
    }

    #[test]
    fn w_maps_to_weight_pair() {
        let text = BASE.replace("method = \"PROUD\"", "method = \"DM_SINGLE\"\nw = 0.25");
        let exp = RunConfig::from_toml_str(&text).unwrap().build().unwrap();
        assert_eq!(exp.guidance.single_weights, Some(vec![0.25, 0.75]));
    }

    #[test]
    fn triangle_lattice() {
        let v = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let pts = lattice_points(&v, 3).unwrap();
        assert_eq!(pts.len(), 6);
        assert!(pts.contains(&vec![0.5, 0.5]));
        assert!(lattice_points(&v[..1], 3).is_err());
    }

    #[test]
    fn explicit_manifold_with_offset_free_means() {
        let text = BASE.replace(
            "kind = \"lattice\"\nvertices = [[0.5, 0.5], [1.0, 1.0]]\nper_edge = 5\nstdev = 0.025",
            "kind = \"explicit\"\nmeans = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]\nstdevs = [0.1, 0.2, 0.3]",
        );
        let exp = RunConfig::from_toml_str(&text).unwrap().build().unwrap();
        assert_eq!(exp.model.n_components(), 3);
        assert!((exp.model.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
