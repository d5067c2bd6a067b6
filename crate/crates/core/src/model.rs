//! Domain types and the speed/reliability/energy model.
//!
//! Reliability uses the first-order failure model: one execution of weight
//! `w` at speed `f` fails with probability `lambda0 * exp(-d f) * w / f`.
//! A task executed once is reliable enough iff `f >= frel`; a task executed
//! twice is reliable enough iff the product of the two failure probabilities
//! does not exceed the single-execution failure probability at `frel`.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack allowed on reliability residuals.
pub const RELIABILITY_TOL: f64 = 1e-9;
/// Relative slack allowed on deadlines.
pub const DEADLINE_REL_TOL: f64 = 1e-12;

const F_INF_MAX_ITERS: usize = 200;
const F_INF_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub weight: f64,
}

impl Task {
    pub fn new(id: impl Into<String>, weight: f64) -> Self {
        Task {
            id: id.into(),
            weight,
        }
    }
}

/// Identical processors with continuous speeds in `[fmin, fmax]`.
///
/// `lambda0` and `d` are the normalized failure-rate parameters, i.e. the
/// failure rate at speed `f` is `lambda0 * exp(-d f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub p: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub frel: f64,
    pub lambda0: f64,
    pub d: f64,
}

impl Platform {
    pub fn new(p: usize, fmin: f64, fmax: f64, frel: f64, lambda0: f64, d: f64) -> Result<Self> {
        let platform = Platform {
            p,
            fmin,
            fmax,
            frel,
            lambda0,
            d,
        };
        platform.check()?;
        Ok(platform)
    }

    /// Builds a platform from the raw failure model
    /// `lambda(f) = raw_lambda0 * exp(raw_d * (fmax - f) / (fmax - fmin))`,
    /// where `raw_lambda0` is the failure rate at `fmax`.
    pub fn from_raw_failure_model(
        p: usize,
        fmin: f64,
        fmax: f64,
        frel: f64,
        raw_lambda0: f64,
        raw_d: f64,
    ) -> Result<Self> {
        let d = if raw_d == 0.0 {
            0.0
        } else if fmax > fmin {
            raw_d / (fmax - fmin)
        } else {
            return Err(Error::InvalidInstance(
                "speed sensitivity requires fmax > fmin".into(),
            ));
        };
        Platform::new(p, fmin, fmax, frel, raw_lambda0 * (d * fmax).exp(), d)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInstance(msg.to_string()));
        if self.p == 0 {
            return bad("p must be at least 1");
        }
        let finite = [self.fmin, self.fmax, self.frel, self.lambda0, self.d]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return bad("platform parameters must be finite");
        }
        if !(self.fmin > 0.0 && self.fmin <= self.frel && self.frel <= self.fmax) {
            return bad("speeds must satisfy 0 < fmin <= frel <= fmax");
        }
        if self.lambda0 <= 0.0 {
            return bad("lambda0 must be positive");
        }
        if self.d < 0.0 {
            return bad("d must be nonnegative");
        }
        Ok(())
    }

    /// Failure probability of one execution (first-order model).
    pub fn failure_term(&self, weight: f64, f: f64) -> f64 {
        self.lambda0 * (-self.d * f).exp() * weight / f
    }

    /// Reliability of one execution under the exact exponential model.
    /// Diagnostic only; constraints always use the first-order model.
    pub fn exact_reliability(&self, weight: f64, f: f64) -> f64 {
        (-self.lambda0 * (-self.d * f).exp() * weight / f).exp()
    }

    /// Failure-probability excess of a single execution over the target.
    /// Nonpositive iff the execution meets the reliability constraint.
    pub fn residual_single(&self, weight: f64, f: f64) -> f64 {
        self.failure_term(weight, f) - self.failure_term(weight, self.frel)
    }

    /// Failure-probability excess of two executions at speeds `f1`, `f2`.
    pub fn residual_pair(&self, weight: f64, f1: f64, f2: f64) -> f64 {
        let l = self.lambda0 * weight;
        l * l * (-self.d * (f1 + f2)).exp() / (f1 * f2) - self.failure_term(weight, self.frel)
    }

    /// Smallest common speed at which two executions of `weight` meet the
    /// reliability target.
    ///
    /// Solves `lambda0 w exp(-2 d f) / f^2 = exp(-d frel) / frel` by bisection
    /// on `(0, frel]`, in log form. Returns the upper end of the final bracket
    /// so the returned speed is always on the feasible side.
    pub fn f_inf(&self, weight: f64) -> Result<f64> {
        let rhs = -self.d * self.frel - self.frel.ln();
        let g = |f: f64| (self.lambda0 * weight).ln() - 2.0 * self.d * f - 2.0 * f.ln() - rhs;
        let g_rel = g(self.frel);
        // g is a log-ratio; a rounding-level excess at frel still counts as a root.
        if g_rel > F_INF_REL_TOL {
            return Err(Error::NoRoot { weight });
        }
        if g_rel >= 0.0 {
            return Ok(self.frel);
        }
        let mut hi = self.frel;
        let mut lo = self.frel / 2.0;
        while g(lo) <= 0.0 {
            hi = lo;
            lo /= 2.0;
            if lo < f64::MIN_POSITIVE {
                return Ok(hi);
            }
        }
        for _ in 0..F_INF_MAX_ITERS {
            if hi - lo <= F_INF_REL_TOL * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// Relative residual of the defining equation of `f_inf` at speed `f`.
    pub fn f_inf_equation_residual(&self, weight: f64, f: f64) -> f64 {
        let lhs = self.lambda0 * weight * (-2.0 * self.d * f).exp() / (f * f);
        let rhs = (-self.d * self.frel).exp() / self.frel;
        (lhs - rhs) / rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Chain,
    Independent,
}

/// A task set together with its platform and deadline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub kind: Kind,
    pub deadline: f64,
    pub platform: Platform,
    pub tasks: Vec<Task>,
    /// Marks instances whose weights are integers; the chain FPTAS then
    /// floors its subset-sum threshold.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub integer_weights: bool,
}

impl Instance {
    pub fn new(kind: Kind, tasks: Vec<Task>, platform: Platform, deadline: f64) -> Result<Self> {
        let integer_weights = tasks.iter().all(|t| t.weight.fract() == 0.0);
        let instance = Instance {
            kind,
            deadline,
            platform,
            tasks,
            integer_weights,
        };
        instance.check()?;
        Ok(instance)
    }

    /// Convenience constructor with ids `T1..Tn`.
    pub fn from_weights(kind: Kind, weights: &[f64], platform: Platform, deadline: f64) -> Result<Self> {
        let tasks = weights
            .iter()
            .enumerate()
            .map(|(i, &w)| Task::new(format!("T{}", i + 1), w))
            .collect();
        Instance::new(kind, tasks, platform, deadline)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let instance: Instance =
            serde_json::from_str(text).map_err(|e| Error::InvalidInstance(e.to_string()))?;
        instance.check()?;
        Ok(instance)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn check(&self) -> Result<()> {
        self.platform.check()?;
        if !(self.deadline > 0.0 && self.deadline.is_finite()) {
            return Err(Error::InvalidInstance("deadline must be positive".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::InvalidInstance("instance has no tasks".into()));
        }
        let mut seen = HashSet::new();
        for t in &self.tasks {
            if !(t.weight > 0.0 && t.weight.is_finite()) {
                return Err(Error::InvalidInstance(format!(
                    "task {} has nonpositive weight",
                    t.id
                )));
            }
            if !seen.insert(t.id.as_str()) {
                return Err(Error::InvalidInstance(format!("duplicate task id {}", t.id)));
            }
        }
        if self.integer_weights && self.tasks.iter().any(|t| t.weight.fract() != 0.0) {
            return Err(Error::InvalidInstance(
                "integer_weights set but some weight is fractional".into(),
            ));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.tasks.len()
    }

    /// Total work `S`.
    pub fn total_weight(&self) -> f64 {
        self.tasks.iter().map(|t| t.weight).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.weight).collect()
    }

    pub fn task_index(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    /// Same tasks and platform under another deadline or processor count.
    pub(crate) fn with_tasks(&self, tasks: Vec<Task>, p: usize) -> Instance {
        let mut platform = self.platform.clone();
        platform.p = p;
        Instance {
            kind: self.kind,
            deadline: self.deadline,
            platform,
            integer_weights: self.integer_weights,
            tasks,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Copy {
    Only,
    First,
    Second,
}

/// One execution of one task copy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub task_id: String,
    pub copy: Copy,
    /// 1-based processor index.
    pub processor: usize,
    pub start: f64,
    pub speed: f64,
}

impl ExecutionRecord {
    pub fn new(task_id: impl Into<String>, copy: Copy, processor: usize, start: f64, speed: f64) -> Self {
        ExecutionRecord {
            task_id: task_id.into(),
            copy,
            processor,
            start,
            speed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub records: Vec<ExecutionRecord>,
}

impl Schedule {
    pub fn new(records: Vec<ExecutionRecord>) -> Self {
        Schedule { records }
    }

    /// Energy of the schedule against the instance weights, summed in
    /// record order. Records naming unknown tasks are skipped.
    pub fn energy(&self, instance: &Instance) -> f64 {
        self.records
            .iter()
            .filter_map(|r| instance.task_index(&r.task_id).map(|i| (i, r.speed)))
            .map(|(i, f)| energy_exec(instance.tasks[i].weight, f))
            .sum()
    }

    pub fn makespan(&self, instance: &Instance) -> f64 {
        self.records
            .iter()
            .filter_map(|r| {
                instance
                    .task_index(&r.task_id)
                    .map(|i| r.start + instance.tasks[i].weight / r.speed)
            })
            .fold(0.0, f64::max)
    }
}

/// Energy of one execution: `w f^2`.
pub fn energy_exec(weight: f64, f: f64) -> f64 {
    weight * f * f
}

/// Positive root of `7x^3 + 21x^2 - 3x - 1`.
pub fn compute_c() -> f64 {
    let c = 4.0 * (2.0f64 / 7.0).sqrt() * ((PI - (1.0 / 7.0f64.sqrt()).atan()) / 3.0).cos() - 1.0;
    let residual = ((7.0 * c + 21.0) * c - 3.0) * c - 1.0;
    assert!(residual.abs() <= 1e-12, "cubic residual {residual}");
    c
}

/// Deadline relaxation achieved by decreasing-first-fit on `p` processors.
pub fn beta(p: usize) -> f64 {
    assert!(p >= 1, "beta needs at least one processor");
    let p = p as f64;
    f64::max(2.0 - 3.0 / (2.0 * p + 1.0), 2.0 - (p + 2.0) / (4.0 * p + 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn platform(lambda0: f64, d: f64) -> Platform {
        Platform::new(1, 0.01, 2.0, 1.0, lambda0, d).unwrap()
    }

    fn bisect_cubic() -> f64 {
        let f = |x: f64| 7.0 * x * x * x + 21.0 * x * x - 3.0 * x - 1.0;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn c_matches_bisection() {
        let c = compute_c();
        assert!((0.2837..=0.2839).contains(&c));
        assert!((c - bisect_cubic()).abs() < 1e-12);
    }

    #[test]
    fn beta_values() {
        assert!((beta(2) - 1.6).abs() < 1e-15);
        assert!((beta(4) - 5.0 / 3.0).abs() < 1e-15);
        assert!((beta(1) - 1.5).abs() < 1e-15);
        assert!(beta(1_000_000) < 2.0 && beta(1_000_000) > 1.99999);
    }

    #[test]
    fn single_residual() {
        let pl = platform(1e-5, 0.0);
        assert_eq!(pl.residual_single(100.0, 1.0), 0.0);
        assert!(pl.residual_single(100.0, 1.5) < 0.0);
        assert!((pl.residual_single(100.0, 0.5) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn pair_residual() {
        let pl = platform(1e-5, 0.0);
        assert!((pl.residual_pair(100.0, 0.05, 0.05) + 6e-4).abs() < 1e-15);
        assert!(pl.residual_pair(100.0, 1.0, 1.0) < 0.0);
        let f = pl.f_inf(100.0).unwrap();
        assert!(pl.residual_pair(100.0, f, f).abs() < 1e-14);
    }

    #[test]
    fn f_inf_closed_form_when_insensitive() {
        let pl = platform(1e-5, 0.0);
        let f = pl.f_inf(100.0).unwrap();
        assert!((f - 1e-3f64.sqrt()).abs() < 1e-12);
        assert!(pl.f_inf_equation_residual(100.0, f).abs() < 1e-10);
    }

    #[test]
    fn f_inf_reaches_frel_at_threshold() {
        let pl = platform(1e-3, 0.7);
        let w = pl.frel * (pl.d * pl.frel).exp() / pl.lambda0;
        let f = pl.f_inf(w).unwrap();
        assert!((f - pl.frel).abs() < 1e-9);
        assert!(matches!(pl.f_inf(w * 1.01), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn f_inf_with_sensitivity() {
        let pl = platform(2e-4, 3.0);
        for w in [0.5, 3.0, 40.0] {
            let f = pl.f_inf(w).unwrap();
            assert!(pl.f_inf_equation_residual(w, f).abs() < 1e-10);
            assert!(pl.residual_pair(w, f, f) <= 0.0);
        }
    }

    #[test]
    fn raw_failure_model_normalization() {
        let pl = Platform::from_raw_failure_model(2, 0.2, 1.2, 0.8, 1e-5, 3.0).unwrap();
        assert!((pl.d - 3.0).abs() < 1e-15);
        // rate at fmax equals the raw rate
        assert!((pl.lambda0 * (-pl.d * pl.fmax).exp() - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn energy_values() {
        assert_eq!(energy_exec(10.0, 1.0), 10.0);
        assert_eq!(energy_exec(10.0, 2.0), 40.0);
        assert_eq!(energy_exec(10.0, 0.5), 2.5);
    }

    #[test]
    fn rejects_bad_platforms() {
        assert!(Platform::new(0, 0.1, 1.0, 0.5, 1e-5, 0.0).is_err());
        assert!(Platform::new(1, 0.6, 1.0, 0.5, 1e-5, 0.0).is_err());
        assert!(Platform::new(1, 0.1, 1.0, 0.5, 0.0, 0.0).is_err());
        assert!(Platform::new(1, 0.1, 1.0, 0.5, 1e-5, -1.0).is_err());
    }

    #[test]
    fn instance_json_round_trip() {
        let pl = Platform::new(2, 0.1, 1.0, 0.75, 1e-5, 0.0).unwrap();
        let inst = Instance::from_weights(Kind::Chain, &[3.0, 2.5], pl, 10.0).unwrap();
        assert!(!inst.integer_weights);
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        let dup = r#"{"kind":"chain","deadline":1,"platform":{"p":1,"fmin":0.1,"fmax":1,"frel":1,"lambda0":1e-5,"d":0},
                     "tasks":[{"id":"a","weight":1},{"id":"a","weight":2}]}"#;
        assert!(Instance::from_json(dup).is_err());
    }
}
