//! Denoising directions: the PROUD constrained gradient and the baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, combine, dot, norm, solve_dense};
use crate::mgd::min_norm_weights;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PROUD")]
    Proud,
    #[serde(rename = "DM_MMGD")]
    DmMmgd,
    #[serde(rename = "DM_SINGLE")]
    DmSingle,
    #[serde(rename = "MPLUS1_MGD")]
    MPlus1Mgd,
    #[serde(rename = "M_MGD")]
    MMgd,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proud,
        Method::DmMmgd,
        Method::DmSingle,
        Method::MPlus1Mgd,
        Method::MMgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Proud => "PROUD",
            Method::DmMmgd => "DM_MMGD",
            Method::DmSingle => "DM_SINGLE",
            Method::MPlus1Mgd => "MPLUS1_MGD",
            Method::MMgd => "M_MGD",
        }
    }

    /// Whether the method's direction depends on the noise prediction.
    pub fn uses_eps(self) -> bool {
        self != Method::MMgd
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceConfig {
    pub method: Method,
    #[serde(default = "GuidanceConfig::default_alpha")]
    pub alpha: f64,
    #[serde(default = "GuidanceConfig::default_e")]
    pub e_threshold: f64,
    #[serde(default = "GuidanceConfig::default_gamma")]
    pub gamma: f64,
    #[serde(default = "GuidanceConfig::default_lambda")]
    pub fixed_lambda: f64,
    /// Scalarization weights for `DM_SINGLE`; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_weights: Option<Vec<f64>>,
}

impl GuidanceConfig {
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
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("guidance.alpha", "must be a positive finite number"));
        }
        if !(self.e_threshold > 0.0) {
            return Err(Error::config("guidance.e_threshold", "must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("guidance.gamma", "must be nonnegative"));
        }
        if !(self.fixed_lambda >= 0.0 && self.fixed_lambda.is_finite()) {
            return Err(Error::config("guidance.fixed_lambda", "must be nonnegative"));
        }
        if let Some(w) = &self.single_weights {
            if w.len() != m {
                return Err(Error::config(
                    "guidance.single_weights",
                    format!("expected {m} weights, got {}", w.len()),
                ));
            }
            if w.iter().any(|v| !(*v >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::config(
                    "guidance.single_weights",
                    "must be nonnegative and sum to 1",
                ));
            }
        }
        Ok(())
    }

    pub fn scalarization_weights(&self, m: usize) -> Vec<f64> {
        self.single_weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / m as f64; m])
    }
}

/// The φ switch: a required improvement rate, or switched off near
/// Pareto stationarity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phi {
    Active(f64),
    NegInfinity,
}

impl Phi {
    pub fn value(self) -> f64 {
        match self {
            Phi::Active(v) => v,
            Phi::NegInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn is_active(self) -> bool {
        matches!(self, Phi::Active(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceOutcome {
    pub direction: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// `None` for baselines, which have no switch.
    pub phi: Option<Phi>,
    pub mgd_norm: f64,
}

pub fn phi_switch(mgd_norm: f64, cfg: &GuidanceConfig) -> Phi {
    if mgd_norm > cfg.e_threshold {
        Phi::Active(cfg.alpha * mgd_norm)
    } else {
        Phi::NegInfinity
    }
}

const UNBOUNDED_LIMIT: f64 = 1e8;
const PGA_TOL: f64 = 1e-9;
const PGA_MAX_ITERS: usize = 1_000_000;

fn validate_inputs(eps: &[f64], gradients: &[Vec<f64>]) -> Result<()> {
    for g in gradients {
        check_dim(eps.len(), g.len())?;
    }
    Ok(())
}

fn dual_value(eps: &[f64], gradients: &[Vec<f64>], lambda: &[f64], phi: f64) -> f64 {
    let g = blend(eps, gradients, lambda);
    -0.5 * dot(&g, &g) + phi * lambda.iter().sum::<f64>()
}

fn blend(eps: &[f64], gradients: &[Vec<f64>], lambda: &[f64]) -> Vec<f64> {
    let mut g = eps.to_vec();
    for (l, gi) in lambda.iter().zip(gradients) {
        if *l != 0.0 {
            axpy(*l, gi, &mut g);
        }
    }
    g
}

/// Maximizes `-1/2 |eps + sum_i l_i g_i|^2 + phi sum_i l_i` over `l >= 0`.
pub fn solve_dual(eps: &[f64], gradients: &[Vec<f64>], phi: f64) -> Result<Vec<f64>> {
    validate_inputs(eps, gradients)?;
    if !phi.is_finite() {
        return Err(Error::InvalidArgument(format!("phi must be finite, got {phi}")));
    }
    let m = gradients.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let q = gram(gradients);
    let c: Vec<f64> = gradients.iter().map(|g| dot(g, eps)).collect();
    if m <= 3 {
        active_set(&q, &c, eps, gradients, phi)
    } else {
        projected_ascent(&q, &c, eps, gradients, phi)
    }
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

fn kkt_tol(q: &[f64], c: &[f64], phi: f64) -> f64 {
    let scale = q.iter().chain(c).fold(phi.abs(), |s, v| s.max(v.abs()));
    1e-10 * scale.max(1.0)
}

/// Exact solution on support `s`: `Q_SS l_S = phi 1 - c_S`.
fn solve_on_support(q: &[f64], c: &[f64], m: usize, s: &[usize], phi: f64) -> Option<Vec<f64>> {
    let k = s.len();
    let mut a = vec![0.0; k * k];
    let mut b = vec![0.0; k];
    for (r, &i) in s.iter().enumerate() {
        for (col, &j) in s.iter().enumerate() {
            a[r * k + col] = q[i * m + j];
        }
        b[r] = phi - c[i];
    }
    let sol = solve_dense(&a, &b, k, 1e-12)?;
    let mut lambda = vec![0.0; m];
    for (r, &i) in s.iter().enumerate() {
        lambda[i] = sol[r];
    }
    Some(lambda)
}

/// `l >= 0` and every constraint `c_i + (Q l)_i >= phi` holds.
fn is_kkt_point(q: &[f64], c: &[f64], lambda: &[f64], phi: f64, tol: f64) -> bool {
    let m = c.len();
    lambda.iter().all(|l| *l >= -tol && l.is_finite())
        && (0..m).all(|i| c[i] + dot(&q[i * m..(i + 1) * m], lambda) >= phi - tol)
}

fn active_set(
    q: &[f64],
    c: &[f64],
    eps: &[f64],
    gradients: &[Vec<f64>],
    phi: f64,
) -> Result<Vec<f64>> {
    let m = c.len();
    let tol = kkt_tol(q, c, phi);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let candidate = if support.is_empty() {
            Some(vec![0.0; m])
        } else {
            solve_on_support(q, c, m, &support, phi)
        };
        let Some(mut lambda) = candidate else { continue };
        if !is_kkt_point(q, c, &lambda, phi, tol) {
            continue;
        }
        lambda.iter_mut().for_each(|l| *l = l.max(0.0));
        let val = dual_value(eps, gradients, &lambda, phi);
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, lambda));
        }
    }
    best.map(|(_, l)| l)
        .ok_or(Error::DualUnbounded { limit: UNBOUNDED_LIMIT })
}

fn projected_ascent(
    q: &[f64],
    c: &[f64],
    eps: &[f64],
    gradients: &[Vec<f64>],
    phi: f64,
) -> Result<Vec<f64>> {
    let m = c.len();
    let trace: f64 = (0..m).map(|i| q[i * m + i]).sum();
    if trace == 0.0 {
        // Every gradient is zero: the constraints read 0 >= phi.
        return if phi <= 0.0 {
            Ok(vec![0.0; m])
        } else {
            Err(Error::DualUnbounded { limit: UNBOUNDED_LIMIT })
        };
    }
    let step = 1.0 / trace;
    let grad_at = |l: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| phi - c[i] - dot(&q[i * m..(i + 1) * m], l))
            .collect()
    };
    let ascend = |l: &[f64]| -> Vec<f64> {
        l.iter()
            .zip(grad_at(l))
            .map(|(li, g)| (li + step * g).max(0.0))
            .collect()
    };
    // Accelerated projected gradient ascent with function-value restarts.
    let mut lambda = vec![0.0; m];
    let mut prev = lambda.clone();
    let mut momentum = 1.0_f64;
    let mut value = dual_value(eps, gradients, &lambda, phi);
    for _ in 0..PGA_MAX_ITERS {
        let grad = grad_at(&lambda);
        let pg_norm = grad
            .iter()
            .zip(&lambda)
            .map(|(g, l)| if *l > 0.0 { *g } else { g.max(0.0) })
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        if pg_norm < PGA_TOL {
            break;
        }
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let y: Vec<f64> = lambda
            .iter()
            .zip(&prev)
            .map(|(l, p)| l + beta * (l - p))
            .collect();
        let mut candidate = ascend(&y);
        let mut next = dual_value(eps, gradients, &candidate, phi);
        if next < value {
            candidate = ascend(&lambda);
            next = dual_value(eps, gradients, &candidate, phi);
            momentum = 1.0;
        } else {
            momentum = next_momentum;
        }
        prev = std::mem::replace(&mut lambda, candidate);
        if norm(&lambda) > UNBOUNDED_LIMIT && next > value {
            return Err(Error::DualUnbounded { limit: UNBOUNDED_LIMIT });
        }
        value = next;
    }
    // Snap to the exact optimum on the identified support when it checks out.
    let support: Vec<usize> = (0..m).filter(|&i| lambda[i] > 0.0).collect();
    if !support.is_empty() {
        if let Some(exact) = solve_on_support(q, c, m, &support, phi) {
            let tol = kkt_tol(q, c, phi);
            if is_kkt_point(q, c, &exact, phi, tol)
                && dual_value(eps, gradients, &exact.iter().map(|l| l.max(0.0)).collect::<Vec<_>>(), phi)
                    >= value
            {
                return Ok(exact.into_iter().map(|l| l.max(0.0)).collect());
            }
        }
    }
    Ok(lambda)
}

/// The PROUD direction `eps + sum_i l_i grad f_i`, with `l` from the dual
/// when the MGD norm exceeds the threshold and zero otherwise.
pub fn proud_direction(
    eps: &[f64],
    gradients: &[Vec<f64>],
    cfg: &GuidanceConfig,
) -> Result<GuidanceOutcome> {
    validate_inputs(eps, gradients)?;
    let m = gradients.len();
    let mgd_norm = if m == 0 {
        0.0
    } else {
        min_norm_weights(gradients)?.norm
    };
    let phi = phi_switch(mgd_norm, cfg);
    let multipliers = match phi {
        Phi::Active(v) => solve_dual(eps, gradients, v)?,
        Phi::NegInfinity => vec![0.0; m],
    };
    let direction = blend(eps, gradients, &multipliers);
    Ok(GuidanceOutcome {
        direction,
        multipliers,
        phi: Some(phi),
        mgd_norm,
    })
}

/// Direction of one of the baseline methods. `eps` is not read for `M_MGD`.
pub fn baseline_direction(
    eps: &[f64],
    gradients: &[Vec<f64>],
    cfg: &GuidanceConfig,
) -> Result<Vec<f64>> {
    baseline_outcome(eps, gradients, cfg).map(|o| o.direction)
}

/// As [`baseline_direction`], also reporting the effective per-objective
/// multipliers and the MGD norm.
pub fn baseline_outcome(
    eps: &[f64],
    gradients: &[Vec<f64>],
    cfg: &GuidanceConfig,
) -> Result<GuidanceOutcome> {
    let m = gradients.len();
    if cfg.method.uses_eps() {
        validate_inputs(eps, gradients)?;
    } else if m > 1 {
        let d = gradients[0].len();
        for g in gradients {
            check_dim(d, g.len())?;
        }
    }
    match cfg.method {
        Method::Proud => Err(Error::MethodMismatch(
            "PROUD is not a baseline; use proud_direction".into(),
        )),
        Method::DmMmgd => {
            let mut direction = eps.to_vec();
            let (multipliers, mgd_norm) = if m == 0 {
                (Vec::new(), 0.0)
            } else {
                let mn = min_norm_weights(gradients)?;
                axpy(cfg.fixed_lambda, &mn.direction, &mut direction);
                let mult = mn.weights.iter().map(|w| cfg.fixed_lambda * w).collect();
                (mult, mn.norm)
            };
            Ok(GuidanceOutcome {
                direction,
                multipliers,
                phi: None,
                mgd_norm,
            })
        }
        Method::DmSingle => {
            let mut direction = eps.to_vec();
            let mut multipliers = Vec::new();
            let mut mgd_norm = 0.0;
            if m > 0 {
                let w = cfg.scalarization_weights(m);
                check_dim(m, w.len())?;
                axpy(cfg.fixed_lambda, &combine(&w, gradients), &mut direction);
                multipliers = w.iter().map(|v| cfg.fixed_lambda * v).collect();
                mgd_norm = min_norm_weights(gradients)?.norm;
            }
            Ok(GuidanceOutcome {
                direction,
                multipliers,
                phi: None,
                mgd_norm,
            })
        }
        Method::MPlus1Mgd => {
            let mut all = gradients.to_vec();
            all.push(eps.to_vec());
            let mn = min_norm_weights(&all)?;
            let mgd_norm = if m == 0 {
                0.0
            } else {
                min_norm_weights(gradients)?.norm
            };
            Ok(GuidanceOutcome {
                direction: mn.direction,
                multipliers: mn.weights[..m].to_vec(),
                phi: None,
                mgd_norm,
            })
        }
        Method::MMgd => {
            if m == 0 {
                return Err(Error::Empty("gradient list"));
            }
            let mn = min_norm_weights(gradients)?;
            Ok(GuidanceOutcome {
                direction: mn.direction,
                multipliers: mn.weights,
                phi: None,
                mgd_norm: mn.norm,
            })
        }
    }
}

/// Dispatches on `cfg.method`.
pub fn guidance_direction(
    eps: &[f64],
    gradients: &[Vec<f64>],
    cfg: &GuidanceConfig,
) -> Result<GuidanceOutcome> {
    match cfg.method {
        Method::Proud => proud_direction(eps, gradients, cfg),
        _ => baseline_outcome(eps, gradients, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(method: Method) -> GuidanceConfig {
        GuidanceConfig::new(method)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn phi_switch_examples() {
        let c = cfg(Method::Proud);
        assert_eq!(phi_switch(0.1, &c), Phi::Active(0.05));
        assert_eq!(phi_switch(0.01, &c), Phi::NegInfinity);
        assert_eq!(phi_switch(0.03, &c), Phi::NegInfinity);
        assert_eq!(Phi::NegInfinity.value(), f64::NEG_INFINITY);
    }

    #[test]
    fn dual_single_constraint_closed_form() {
        let l = solve_dual(&[1.0, 0.0], &[vec![0.0, 1.0]], 0.5).unwrap();
        assert!(close(&l, &[0.5], 1e-15));
        assert!(close(&blend(&[1.0, 0.0], &[vec![0.0, 1.0]], &l), &[1.0, 0.5], 1e-15));

        let l = solve_dual(&[1.0, 1.0], &[vec![1.0, 0.0]], 0.5).unwrap();
        assert_eq!(l, vec![0.0]);
    }

    #[test]
    fn dual_separable_pair() {
        let eps = [1.0, 0.0, 0.0];
        let g = [vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let l = solve_dual(&eps, &g, 0.3).unwrap();
        assert!(close(&l, &[0.3, 0.3], 1e-15));
        assert!(close(&blend(&eps, &g, &l), &[1.0, 0.3, 0.3], 1e-15));
    }

    #[test]
    fn dual_infeasible_constraints() {
        let g = [vec![1.0, 0.0], vec![-1.0, 0.0]];
        assert!(matches!(
            solve_dual(&[0.0, 0.0], &g, 0.5),
            Err(Error::DualUnbounded { .. })
        ));
        let g4 = [vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, 2.0]];
        assert!(matches!(
            solve_dual(&[0.0, 0.0], &g4, 0.5),
            Err(Error::DualUnbounded { .. })
        ));
        assert!(solve_dual(&[0.0], &[vec![1.0]], f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn dual_projected_ascent_matches_active_set_structure() {
        // Four separable constraints: per-coordinate closed form.
        let eps = [0.5, -0.2, 1.0, 0.0, 3.0];
        let g: Vec<Vec<f64>> = (0..4)
            .map(|i| {
                let mut v = vec![0.0; 5];
                v[i] = 2.0;
                v
            })
            .collect();
        let phi = 0.4;
        let l = solve_dual(&eps, &g, phi).unwrap();
        for i in 0..4 {
            let expect = ((phi - 2.0 * eps[i]) / 4.0).max(0.0);
            assert!((l[i] - expect).abs() < 1e-9, "{i}: {} vs {expect}", l[i]);
        }
    }

    #[test]
    fn proud_direction_degenerate_cases() {
        let c = cfg(Method::Proud);
        let eps = vec![0.3, -0.7];
        let out = proud_direction(&eps, &[vec![0.0, 0.0], vec![0.0, 0.0]], &c).unwrap();
        assert_eq!(out.direction, eps);
        assert_eq!(out.multipliers, vec![0.0, 0.0]);
        assert_eq!(out.phi, Some(Phi::NegInfinity));
        assert_eq!(out.mgd_norm, 0.0);

        let mut never = c.clone();
        never.e_threshold = f64::INFINITY;
        let out = proud_direction(&eps, &[vec![1.0, 0.0], vec![0.0, 1.0]], &never).unwrap();
        assert_eq!(out.direction, eps);
        assert_eq!(out.multipliers, vec![0.0, 0.0]);

        let out = proud_direction(&eps, &[], &c).unwrap();
        assert_eq!(out.direction, eps);
    }

    #[test]
    fn proud_direction_meets_constraints_off_segment() {
        let c = cfg(Method::Proud);
        let g = [vec![-1.0, -0.2], vec![-0.5, 0.3]];
        let eps = [2.0, -1.0];
        let out = proud_direction(&eps, &g, &c).unwrap();
        let phi = out.phi.unwrap().value();
        assert!(phi > 0.0);
        for gi in &g {
            assert!(dot(gi, &out.direction) >= phi - 1e-9);
        }
    }

    #[test]
    fn baseline_examples() {
        let mut c = cfg(Method::DmMmgd);
        c.fixed_lambda = 1.0;
        let d = baseline_direction(&[1.0, 0.0], &[vec![0.0, 1.0]], &c).unwrap();
        assert_eq!(d, vec![1.0, 1.0]);

        let mut s = cfg(Method::DmSingle);
        s.single_weights = Some(vec![0.5, 0.5]);
        let d = baseline_direction(&[0.0, 0.0], &[vec![2.0, 0.0], vec![0.0, 2.0]], &s).unwrap();
        assert_eq!(d, vec![1.0, 1.0]);

        let mm = cfg(Method::MMgd);
        let d = baseline_direction(&[9.0, 9.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &mm).unwrap();
        assert_eq!(d, vec![0.5, 0.5]);
        let d = baseline_direction(&[], &[vec![1.0, 0.0], vec![0.0, 1.0]], &mm).unwrap();
        assert_eq!(d, vec![0.5, 0.5]);

        let p1 = cfg(Method::MPlus1Mgd);
        let d = baseline_direction(&[0.0, 1.0], &[vec![1.0, 0.0]], &p1).unwrap();
        assert!(close(&d, &[0.5, 0.5], 1e-15));

        assert!(matches!(
            baseline_direction(&[0.0], &[vec![1.0]], &cfg(Method::Proud)),
            Err(Error::MethodMismatch(_))
        ));
    }

    #[test]
    fn single_objective_single_equals_mmgd() {
        let eps = [0.4, -0.1, 0.9];
        let g = [vec![1.0, 2.0, -0.5]];
        let mut a = cfg(Method::DmSingle);
        a.fixed_lambda = 2.5;
        let mut b = cfg(Method::DmMmgd);
        b.fixed_lambda = 2.5;
        assert_eq!(
            baseline_direction(&eps, &g, &a).unwrap(),
            baseline_direction(&eps, &g, &b).unwrap()
        );
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(Method::DmSingle);
        assert!(c.validate(2).is_ok());
        c.single_weights = Some(vec![0.3, 0.3]);
        assert!(c.validate(2).is_err());
        c.single_weights = Some(vec![1.0]);
        assert!(c.validate(2).is_err());
        let mut c = cfg(Method::Proud);
        c.alpha = 0.0;
        assert!(c.validate(2).is_err());
        let mut c = cfg(Method::Proud);
        c.e_threshold = f64::INFINITY;
        assert!(c.validate(2).is_ok());
        assert_eq!("dm_single".parse::<Method>().unwrap(), Method::DmSingle);
        assert!("nope".parse::<Method>().is_err());
    }
}
