//! Single runs and parameter sweeps driven by a [`RunConfig`].

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Experiment, RunConfig};
use super::output::{
    metrics_csv, samples_csv, steps_csv, trace_jsonl, write_atomic, RunHeader, CONFIG_FILE,
    METRICS_FILE, SAMPLES_FILE, STEPS_FILE, TRACE_FILE,
};
use crate::error::{Error, Result};
use crate::metrics::{self, quality_scores, MetricReport};
use crate::sampler::{Population, RunOutput, Sampler};

#[derive(Debug, Clone)]
pub struct RunResult {
    pub experiment: Experiment,
    pub output: RunOutput,
    pub report: MetricReport,
    pub log_likelihoods: Vec<f64>,
}

impl RunResult {
    pub fn positions(&self) -> &[Vec<f64>] {
        self.output.population.positions()
    }

    pub fn objective_values(&self) -> &[Vec<f64>] {
        self.output.population.objective_values()
    }
}

/// Samples and scores one configuration in memory.
pub fn execute(cfg: &RunConfig) -> Result<RunResult> {
    let experiment = cfg.build()?;
    let sampler = Sampler::new(
        &experiment.model,
        &experiment.schedule,
        &experiment.objectives,
        &experiment.guidance,
        &experiment.sampler,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pop = Population::standard_normal(cfg.n_particles, cfg.t_steps, &experiment.objectives, &mut rng)?;
    let output = sampler.run(pop, &mut rng, cfg.trace)?;
    let population = &output.population;
    let report = metrics::report(
        population.positions(),
        population.objective_values(),
        &experiment.objectives,
        &experiment.model,
        &experiment.metrics,
    )?;
    let (_, log_likelihoods) = quality_scores(population.positions(), &experiment.model)?;
    Ok(RunResult {
        experiment,
        output,
        report,
        log_likelihoods,
    })
}

/// Runs `cfg` and writes its artifacts into `out_dir`, creating it if needed.
pub fn run_experiment(cfg: &RunConfig, out_dir: &Path) -> Result<RunResult> {
    let result = execute(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let pop = &result.output.population;
    write_atomic(
        &out_dir.join(SAMPLES_FILE),
        samples_csv(pop.positions(), pop.objective_values(), &result.log_likelihoods).as_bytes(),
    )?;
    let label = cfg.label();
    let header = RunHeader {
        label: &label,
        method: cfg.guidance.method.name(),
        seed: cfg.seed,
        fallbacks: result.output.total_fallbacks(),
    };
    write_atomic(&out_dir.join(METRICS_FILE), metrics_csv(&header, &result.report).as_bytes())?;
    if let Some(trace) = &result.output.trace {
        write_atomic(&out_dir.join(TRACE_FILE), trace_jsonl(trace)?.as_bytes())?;
        write_atomic(&out_dir.join(STEPS_FILE), steps_csv(&result.output.summaries).as_bytes())?;
    }
    let mut echo = cfg.clone();
    echo.output_dir = None;
    write_atomic(&out_dir.join(CONFIG_FILE), echo.to_toml_string()?.as_bytes())?;
    log::info!(
        "{label}: hv {:.6} stationary {:.3} -> {}",
        result.report.hv,
        result.report.pct_stationary,
        out_dir.display()
    );
    Ok(result)
}

/// SplitMix64 finalizer applied to the base seed offset by the run index.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Directory name, e.g. `003_alpha=0.5`.
    pub name: String,
    pub config: RunConfig,
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Array(items) => {
            let inner: Vec<String> = items.iter().map(value_text).collect();
            format!("[{}]", inner.join(";"))
        }
        other => other.to_string(),
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._=-+".contains(c) { c } else { '_' })
        .collect()
}

fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(path, "malformed sweep key"));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = root;
    for p in parents {
        node = node
            .as_table_mut()
            .and_then(|t| t.get_mut(*p))
            .ok_or_else(|| Error::config(path, format!("no table `{p}` to sweep into")))?;
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| Error::config(path, "parent is not a table"))?;
    table.insert((*last).to_string(), value);
    Ok(())
}

/// Cartesian product of the `sweep` table over keys in sorted order, the
/// last key varying fastest. Unless `seed` itself is swept, each point gets
/// a seed derived from the base seed and its index.
pub fn expand_sweep(cfg: &RunConfig) -> Result<Vec<SweepPoint>> {
    let mut base = cfg.clone();
    let sweep = std::mem::take(&mut base.sweep);
    if sweep.is_empty() {
        return Ok(vec![SweepPoint {
            name: "000".into(),
            config: base,
        }]);
    }
    for (k, vals) in &sweep {
        if vals.is_empty() {
            return Err(Error::config(format!("sweep.{k}"), "needs at least one value"));
        }
    }
    let base_value =
        toml::Value::try_from(&base).map_err(|e| Error::config("sweep", e.to_string()))?;
    let keys: Vec<&String> = sweep.keys().collect();
    let total: usize = sweep.values().map(Vec::len).product();
    let seed_swept = sweep.contains_key("seed");

    let mut points = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let mut choice = vec![0; keys.len()];
        for (slot, k) in keys.iter().enumerate().rev() {
            let len = sweep[*k].len();
            choice[slot] = rem % len;
            rem /= len;
        }
        let mut value = base_value.clone();
        let mut name = format!("{index:03}");
        let mut label_parts = Vec::new();
        for (k, &c) in keys.iter().zip(&choice) {
            let v = &sweep[*k][c];
            set_path(&mut value, k, v.clone())?;
            let short = k.rsplit('.').next().unwrap_or(k);
            name.push('_');
            name.push_str(&sanitize(&format!("{short}={}", value_text(v))));
            let method_in_name = cfg.label.is_none() && k.as_str() == "guidance.method";
            if k.as_str() != "seed" && !method_in_name {
                label_parts.push(format!("{k}={}", value_text(v)));
            }
        }
        let mut config: RunConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("sweep point {name}"), e.to_string()))?;
        if !seed_swept {
            config.seed = child_seed(cfg.seed, index as u64);
        }
        let base_label = cfg.label.clone().unwrap_or_else(|| config.guidance.method.name().to_string());
        config.label = Some(if label_parts.is_empty() {
            base_label
        } else {
            format!("{base_label} {}", label_parts.join(" "))
        });
        points.push(SweepPoint { name, config });
    }
    Ok(points)
}

/// Runs every sweep point into its own subdirectory of `out_dir` and returns
/// those directories in sweep order.
pub fn sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    expand_sweep(cfg)?
        .par_iter()
        .map(|p| {
            let dir = out_dir.join(&p.name);
            run_experiment(&p.config, &dir)?;
            Ok(dir)
        })
        .collect()
}
