//! Linear chains: closed forms, re-execution speeds, exact enumeration and
//! the polynomial special cases.
//!
//! On a chain every task runs alone in its time slot, so a solution is fully
//! described by the set of duplicated tasks. Tasks executed once run at
//! `frel`; duplicated tasks share one speed `f_reex`, except those whose
//! `f_inf` exceeds it, which are pinned at their `f_inf`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compute_c, Copy, ExecutionRecord, Instance, Schedule};

/// Largest chain handled by [`solve_exact`].
pub const EXACT_CAP: usize = 20;

const TIE_REL_TOL: f64 = 1e-12;

/// How the two executions of a duplicated task share time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMode {
    /// Re-execution: both copies run back to back (`p = 1`).
    SingleProcessor,
    /// Replication: both copies run side by side (`p >= 2`).
    MultiProcessor,
}

impl ChainMode {
    pub fn for_processors(p: usize) -> Self {
        if p <= 1 {
            ChainMode::SingleProcessor
        } else {
            ChainMode::MultiProcessor
        }
    }

    /// Time factor of a duplicated task relative to one execution.
    pub fn factor(self) -> f64 {
        match self {
            ChainMode::SingleProcessor => 2.0,
            ChainMode::MultiProcessor => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSolution {
    pub replicated: Vec<String>,
    pub capped: Vec<String>,
    #[serde(rename = "X")]
    pub x: f64,
    pub reex_speed: f64,
    pub single_speed: f64,
    pub energy: f64,
    pub feasible: bool,
}

/// A chain problem in solver form: weights, deadline, mode, and for each task
/// the lowest speed at which it may be duplicated (`None` forbids it).
#[derive(Debug, Clone)]
pub struct ChainProblem {
    pub ids: Vec<String>,
    pub weights: Vec<f64>,
    pub deadline: f64,
    pub fmin: f64,
    pub fmax: f64,
    pub frel: f64,
    pub mode: ChainMode,
    pub floors: Vec<Option<f64>>,
    pub integer_weights: bool,
    total: f64,
}

/// Result of [`ChainProblem::compute_vl`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReexSpeeds {
    pub capped: Vec<bool>,
    pub reex_speed: f64,
}

impl ChainProblem {
    /// The chain problem of an instance, in the mode implied by its processor
    /// count. Tasks without an `f_inf` cannot be duplicated.
    pub fn from_instance(instance: &Instance) -> Self {
        Self::relaxation(
            instance,
            instance.deadline,
            ChainMode::for_processors(instance.platform.p),
        )
    }

    /// The same tasks under an arbitrary deadline and mode.
    pub fn relaxation(instance: &Instance, deadline: f64, mode: ChainMode) -> Self {
        let pl = &instance.platform;
        let weights = instance.weights();
        ChainProblem {
            ids: instance.tasks.iter().map(|t| t.id.clone()).collect(),
            floors: weights.iter().map(|&w| pl.f_inf(w).ok()).collect(),
            total: weights.iter().sum(),
            weights,
            deadline,
            fmin: pl.fmin,
            fmax: pl.fmax,
            frel: pl.frel,
            mode,
            integer_weights: instance.integer_weights,
        }
    }

    /// Forbids duplication of tasks rejected by `eligible`.
    pub fn restrict(mut self, eligible: impl Fn(usize, f64) -> bool) -> Self {
        for (i, floor) in self.floors.iter_mut().enumerate() {
            if !eligible(i, self.weights[i]) {
                *floor = None;
            }
        }
        self
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// `D frel - S`: the time slack, measured in work at `frel`.
    fn slack(&self) -> f64 {
        self.deadline * self.frel - self.total
    }

    /// Whether running everything once at `frel` leaves spare time.
    pub fn has_slack(&self) -> bool {
        self.slack() > 0.0
    }

    pub fn x_opt(&self) -> f64 {
        match self.mode {
            ChainMode::SingleProcessor => compute_c() * self.slack(),
            ChainMode::MultiProcessor => self.slack(),
        }
    }

    pub fn reex_speed(&self, x: f64) -> f64 {
        let f = self.mode.factor() * x / (self.slack() + x) * self.frel;
        self.fmin.max(f)
    }

    pub fn energy_given_x(&self, x: f64) -> f64 {
        let f = self.reex_speed(x);
        (self.total - x) * self.frel * self.frel + 2.0 * x * f * f
    }

    /// Every task once at `max(frel, S/D)`.
    pub fn solve_no_replication(&self) -> Result<ChainSolution> {
        let f = self.frel.max(self.total / self.deadline);
        if f > self.fmax {
            return Err(Error::InfeasibleDeadline(format!(
                "S/D = {} exceeds fmax = {}",
                self.total / self.deadline,
                self.fmax
            )));
        }
        Ok(ChainSolution {
            replicated: Vec::new(),
            capped: Vec::new(),
            x: 0.0,
            reex_speed: self.fmin,
            single_speed: f,
            energy: self.total * f * f,
            feasible: true,
        })
    }

    /// Fixed-point computation of the duplicated-task speed: tasks whose
    /// floor exceeds the current common speed are pinned at their floor and
    /// the common speed is recomputed so the chain meets the deadline.
    pub fn compute_vl(&self, subset: &[bool]) -> Result<ReexSpeeds> {
        let n = self.n();
        debug_assert_eq!(subset.len(), n);
        let lam = self.mode.factor();
        let mut x = 0.0;
        for i in 0..n {
            if subset[i] {
                if self.floors[i].is_none() {
                    return Err(Error::NoRoot {
                        weight: self.weights[i],
                    });
                }
                x += self.weights[i];
            }
        }
        if x > 0.0 && self.slack() + x <= 0.0 {
            return Err(Error::DegenerateDenominator);
        }
        let singles_time = (self.total - x) / self.frel;
        let mut capped = vec![false; n];
        let mut f = if x > 0.0 { self.reex_speed(x) } else { self.fmin };
        loop {
            let mut changed = false;
            for i in 0..n {
                if subset[i] && !capped[i] && self.floors[i].is_some_and(|fl| fl > f) {
                    capped[i] = true;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            let mut num = 0.0;
            let mut den = self.deadline - singles_time;
            for i in 0..n {
                if !subset[i] {
                    continue;
                }
                if capped[i] {
                    den -= lam * self.weights[i] / self.floors[i].unwrap();
                } else {
                    num += lam * self.weights[i];
                }
            }
            if den < 0.0 || (den == 0.0 && num > 0.0) {
                return Err(Error::DegenerateDenominator);
            }
            f = if num > 0.0 { self.fmin.max(num / den) } else { self.fmin };
        }
        Ok(ReexSpeeds {
            capped,
            reex_speed: f,
        })
    }

    /// Solution for a given duplicated subset, or an error when the subset
    /// cannot meet the deadline.
    pub fn evaluate_subset(&self, subset: &[bool]) -> Result<ChainSolution> {
        if !self.has_slack() {
            if subset.iter().any(|&b| b) {
                return Err(Error::DegenerateDenominator);
            }
            return self.solve_no_replication();
        }
        let ReexSpeeds { capped, reex_speed } = self.compute_vl(subset)?;
        let any_free = (0..self.n()).any(|i| subset[i] && !capped[i]);
        if any_free && reex_speed > self.fmax {
            return Err(Error::InfeasibleDeadline(format!(
                "duplicated tasks would need speed {reex_speed} > fmax"
            )));
        }
        let mut x = 0.0;
        let mut energy = 0.0;
        for i in 0..self.n() {
            let w = self.weights[i];
            if subset[i] {
                x += w;
                let f = if capped[i] {
                    self.floors[i].unwrap()
                } else {
                    reex_speed
                };
                energy += 2.0 * w * f * f;
            } else {
                energy += w * self.frel * self.frel;
            }
        }
        let pick = |mask: &[bool]| {
            (0..self.n())
                .filter(|&i| mask[i])
                .map(|i| self.ids[i].clone())
                .collect::<Vec<_>>()
        };
        Ok(ChainSolution {
            replicated: pick(subset),
            capped: pick(&capped),
            x,
            reex_speed,
            single_speed: self.frel,
            energy,
            feasible: true,
        })
    }

    /// Exhaustive search over duplicated subsets.
    pub fn solve_exact(&self) -> Result<ChainSolution> {
        if self.n() > EXACT_CAP {
            return Err(Error::InstanceTooLarge {
                size: self.n(),
                cap: EXACT_CAP,
            });
        }
        if !self.has_slack() {
            return self.solve_no_replication();
        }
        let candidates: Vec<usize> = (0..self.n()).filter(|&i| self.floors[i].is_some()).collect();
        let mut best: Option<(ChainSolution, Vec<usize>)> = None;
        let mut subset = vec![false; self.n()];
        for mask in 0u64..(1u64 << candidates.len()) {
            let mut members = Vec::new();
            for (bit, &i) in candidates.iter().enumerate() {
                subset[i] = mask >> bit & 1 == 1;
                if subset[i] {
                    members.push(i);
                }
            }
            let Ok(sol) = self.evaluate_subset(&subset) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((b, b_members)) => prefer(&sol, &members, b, b_members),
            };
            if better {
                best = Some((sol, members));
            }
        }
        best.map(|(s, _)| s)
            .ok_or_else(|| Error::InfeasibleDeadline("no duplicated subset meets the deadline".into()))
    }

    /// The polynomial special cases; `None` when none applies.
    pub fn fast_paths(&self) -> Result<Option<ChainSolution>> {
        if !self.has_slack() {
            return self.solve_no_replication().map(Some);
        }
        let c = compute_c();
        let all_below = |limit: f64| self.floors.iter().all(|f| f.is_some_and(|f| f <= limit));
        let applies = match self.mode {
            ChainMode::SingleProcessor => {
                self.deadline * self.frel >= (1.0 + c) / c * self.total
                    && all_below(2.0 * c / (1.0 + c) * self.frel)
            }
            ChainMode::MultiProcessor => {
                self.deadline * self.frel >= 2.0 * self.total && all_below(self.frel / 2.0)
            }
        };
        if !applies {
            return Ok(None);
        }
        self.evaluate_subset(&vec![true; self.n()]).map(Some)
    }

    /// Per-task execution speed in `solution` (both copies share it).
    pub fn execution_speeds(&self, solution: &ChainSolution) -> Vec<f64> {
        let index: HashMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut speeds = vec![solution.single_speed; self.n()];
        for id in &solution.replicated {
            speeds[index[id.as_str()]] = solution.reex_speed;
        }
        for id in &solution.capped {
            let i = index[id.as_str()];
            speeds[i] = self.floors[i].expect("capped task has a floor");
        }
        speeds
    }

    /// Duplication mask of `solution`.
    pub fn replicated_mask(&self, solution: &ChainSolution) -> Vec<bool> {
        let mut mask = vec![false; self.n()];
        for id in &solution.replicated {
            if let Some(i) = self.ids.iter().position(|x| x == id) {
                mask[i] = true;
            }
        }
        mask
    }
}

/// Strictly better energy wins; near-ties go to the smaller duplicated
/// weight, then to the lexicographically smaller index list.
fn prefer(a: &ChainSolution, a_members: &[usize], b: &ChainSolution, b_members: &[usize]) -> bool {
    let tol = TIE_REL_TOL * b.energy.abs().max(a.energy.abs());
    if a.energy < b.energy - tol {
        return true;
    }
    if a.energy > b.energy + tol {
        return false;
    }
    if a.x != b.x {
        return a.x < b.x;
    }
    a_members < b_members
}

pub fn solve_no_replication(instance: &Instance) -> Result<ChainSolution> {
    ChainProblem::from_instance(instance).solve_no_replication()
}

pub fn x_opt(instance: &Instance, mode: ChainMode) -> f64 {
    ChainProblem::relaxation(instance, instance.deadline, mode).x_opt()
}

pub fn reex_speed(x: f64, instance: &Instance, mode: ChainMode) -> f64 {
    ChainProblem::relaxation(instance, instance.deadline, mode).reex_speed(x)
}

pub fn energy_given_x(x: f64, instance: &Instance, mode: ChainMode) -> f64 {
    ChainProblem::relaxation(instance, instance.deadline, mode).energy_given_x(x)
}

/// Pinned subset and common speed for the duplicated set `replicated`
/// (given as task ids).
pub fn compute_vl(replicated: &[&str], instance: &Instance, mode: ChainMode) -> Result<(Vec<String>, f64)> {
    let problem = ChainProblem::relaxation(instance, instance.deadline, mode);
    let subset: Vec<bool> = problem.ids.iter().map(|id| replicated.contains(&id.as_str())).collect();
    let r = problem.compute_vl(&subset)?;
    let capped = (0..problem.n())
        .filter(|&i| r.capped[i])
        .map(|i| problem.ids[i].clone())
        .collect();
    Ok((capped, r.reex_speed))
}

pub fn solve_exact(instance: &Instance) -> Result<ChainSolution> {
    ChainProblem::from_instance(instance).solve_exact()
}

pub fn fast_paths(instance: &Instance) -> Result<Option<ChainSolution>> {
    ChainProblem::from_instance(instance).fast_paths()
}

/// Lays a chain solution out in time: one processor with back-to-back
/// re-executions when `p = 1`, otherwise replicas side by side on
/// processors 1 and 2.
pub fn materialize_chain_schedule(solution: &ChainSolution, instance: &Instance) -> Schedule {
    let problem = ChainProblem::from_instance(instance);
    let speeds = problem.execution_speeds(solution);
    let mask = problem.replicated_mask(solution);
    let mut records = Vec::new();
    let mut t = 0.0;
    for (i, task) in instance.tasks.iter().enumerate() {
        let f = speeds[i];
        let dur = task.weight / f;
        if !mask[i] {
            records.push(ExecutionRecord::new(&task.id, Copy::Only, 1, t, f));
            t += dur;
            continue;
        }
        match problem.mode {
            ChainMode::SingleProcessor => {
                records.push(ExecutionRecord::new(&task.id, Copy::First, 1, t, f));
                records.push(ExecutionRecord::new(&task.id, Copy::Second, 1, t + dur, f));
                t += 2.0 * dur;
            }
            ChainMode::MultiProcessor => {
                records.push(ExecutionRecord::new(&task.id, Copy::First, 1, t, f));
                records.push(ExecutionRecord::new(&task.id, Copy::Second, 2, t, f));
                t += dur;
            }
        }
    }
    Schedule::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Kind, Platform};
    use crate::validate::validate;

    fn chain(weights: &[f64], p: usize, deadline: f64) -> Instance {
        let pl = Platform::new(p, 1e-6, 5.0, 1.0, 1e-7, 0.0).unwrap();
        Instance::from_weights(Kind::Chain, weights, pl, deadline).unwrap()
    }

    #[test]
    fn no_replication_cases() {
        let s = solve_no_replication(&chain(&[4.0, 6.0], 1, 20.0)).unwrap();
        assert_eq!((s.single_speed, s.energy), (1.0, 10.0));
        let s = solve_no_replication(&chain(&[4.0, 6.0], 1, 5.0)).unwrap();
        assert_eq!((s.single_speed, s.energy), (2.0, 40.0));
        assert!(matches!(
            solve_no_replication(&chain(&[4.0, 6.0], 1, 1.0)),
            Err(Error::InfeasibleDeadline(_))
        ));
    }

    #[test]
    fn x_opt_values() {
        let i = chain(&[4.0, 6.0], 2, 20.0);
        assert_eq!(x_opt(&i, ChainMode::MultiProcessor), 10.0);
        assert!((x_opt(&i, ChainMode::SingleProcessor) - 10.0 * compute_c()).abs() < 1e-12);
        assert!((x_opt(&i, ChainMode::SingleProcessor) - 2.838).abs() < 1e-3);
        assert_eq!(x_opt(&chain(&[4.0, 6.0], 2, 10.0), ChainMode::MultiProcessor), 0.0);
    }

    #[test]
    fn reex_speed_values() {
        let i = chain(&[4.0, 6.0], 2, 20.0);
        assert_eq!(reex_speed(10.0, &i, ChainMode::MultiProcessor), 0.5);
        assert_eq!(reex_speed(0.0, &i, ChainMode::MultiProcessor), i.platform.fmin);
        // residual set of the illustrated independent example, deadline 4 * 15
        let pl = Platform::new(1, 0.1, 1.0, 0.75, 1e-5, 0.0).unwrap();
        let fig = Instance::from_weights(
            Kind::Chain,
            &[6.0, 6.0, 5.0, 4.0, 4.0, 3.0, 2.0, 1.0, 1.0],
            pl,
            60.0,
        )
        .unwrap();
        let f = reex_speed(5.0, &fig, ChainMode::SingleProcessor);
        assert!((f - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn energy_given_x_values() {
        let i = chain(&[4.0, 6.0], 1, 20.0);
        assert!((energy_given_x(0.0, &i, ChainMode::SingleProcessor) - 10.0).abs() < 1e-12);
        let e = energy_given_x(2.0, &i, ChainMode::SingleProcessor);
        assert!((e - (8.0 + 4.0 / 9.0)).abs() < 1e-9);
        assert!((energy_given_x(10.0, &i, ChainMode::MultiProcessor) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn compute_vl_without_pins() {
        let i = chain(&[4.0, 6.0], 1, 20.0);
        let (capped, f) = compute_vl(&[], &i, ChainMode::SingleProcessor).unwrap();
        assert!(capped.is_empty());
        assert_eq!(f, i.platform.fmin);
        let (capped, f) = compute_vl(&["T1"], &i, ChainMode::SingleProcessor).unwrap();
        assert!(capped.is_empty());
        assert!((f - reex_speed(4.0, &i, ChainMode::SingleProcessor)).abs() < 1e-15);
    }

    #[test]
    fn compute_vl_pins_one_task() {
        // T2's f_inf sits above the common speed: it gets pinned and the
        // others absorb the remaining time.
        let pl = Platform::new(2, 1e-6, 5.0, 1.0, 1e-4, 0.0).unwrap();
        let i = Instance::from_weights(Kind::Chain, &[1.0, 2500.0, 1.0], pl, 5100.0).unwrap();
        let base = reex_speed(2502.0, &i, ChainMode::MultiProcessor);
        let f_inf2 = i.platform.f_inf(2500.0).unwrap();
        assert!((f_inf2 - 0.5).abs() < 1e-9);
        assert!(f_inf2 > base);
        let (capped, f) = compute_vl(&["T1", "T2", "T3"], &i, ChainMode::MultiProcessor).unwrap();
        assert_eq!(capped, vec!["T2".to_string()]);
        // hand trace: f = 2 / (5100 - 2500 / 0.5)
        assert!((f - 0.02).abs() < 1e-9);
        let total = 2.0 / f + 2500.0 / f_inf2;
        assert!((total - 5100.0).abs() < 1e-6);
    }

    #[test]
    fn exact_two_equal_tasks() {
        let i = chain(&[4.0, 4.0], 2, 16.0);
        let s = solve_exact(&i).unwrap();
        assert_eq!(s.replicated.len(), 2);
        assert!((s.energy - 4.0).abs() < 1e-9);
        // the two other candidates from the enumeration
        let p = ChainProblem::from_instance(&i);
        let none = p.evaluate_subset(&[false, false]).unwrap();
        let one = p.evaluate_subset(&[true, false]).unwrap();
        assert!((none.energy - 8.0).abs() < 1e-12);
        assert!((one.energy - (4.0 + 8.0 / 9.0)).abs() < 1e-9);
    }

    #[test]
    fn exact_tight_deadline_has_no_duplication() {
        let i = chain(&[4.0, 4.0], 2, 4.0);
        let s = solve_exact(&i).unwrap();
        assert!(s.replicated.is_empty());
        assert_eq!(s.single_speed, 2.0);
    }

    #[test]
    fn exact_single_task_long_deadline() {
        // p = 1, one task, lots of time: re-execution at 2X/(D frel - S + X).
        let i = chain(&[10.0], 1, 1000.0);
        let s = solve_exact(&i).unwrap();
        assert_eq!(s.replicated, vec!["T1".to_string()]);
        let f = 2.0 * 10.0 / 1000.0;
        assert!((s.energy - 20.0 * f * f).abs() < 1e-12);
        assert!(s.energy < 10.0);
    }

    #[test]
    fn exact_rejects_large() {
        let i = chain(&[1.0; 21], 1, 100.0);
        assert!(matches!(solve_exact(&i), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn fast_path_all_replicated() {
        let i = chain(&[3.0, 5.0], 2, 16.0);
        let s = fast_paths(&i).unwrap().unwrap();
        assert!((s.reex_speed - 0.5).abs() < 1e-15);
        assert!((s.energy - 4.0).abs() < 1e-12);
        assert!((s.energy - solve_exact(&i).unwrap().energy).abs() < 1e-12);
    }

    #[test]
    fn fast_path_boundary_and_reexec() {
        let s = fast_paths(&chain(&[3.0, 5.0], 2, 8.0)).unwrap().unwrap();
        assert!(s.replicated.is_empty());
        assert_eq!(s.single_speed, 1.0);
        let i = chain(&[3.0, 5.0], 1, 40.0);
        let s = fast_paths(&i).unwrap().unwrap();
        assert_eq!(s.replicated.len(), 2);
        assert!((s.energy - solve_exact(&i).unwrap().energy).abs() < 1e-12);
        assert!(fast_paths(&chain(&[3.0, 5.0], 1, 12.0)).unwrap().is_none());
    }

    #[test]
    fn materialized_schedules_validate() {
        for (p, d) in [(1, 30.0), (2, 16.0), (2, 9.0), (3, 12.0)] {
            let i = chain(&[3.0, 5.0, 1.0], p, d);
            let s = solve_exact(&i).unwrap();
            let sched = materialize_chain_schedule(&s, &i);
            let r = validate(&i, &sched, d);
            assert!(r.is_valid(), "p={p} d={d}: {:?}", r.violations);
            assert!((r.energy - s.energy).abs() < 1e-9 * s.energy);
        }
        let i = chain(&[3.0, 5.0], 2, 16.0);
        let sched = materialize_chain_schedule(&fast_paths(&i).unwrap().unwrap(), &i);
        assert!((sched.makespan(&i) - 16.0).abs() < 1e-12);
        assert_eq!(sched.records[0].start, sched.records[1].start);
        assert_eq!((sched.records[0].processor, sched.records[1].processor), (1, 2));
    }
}
