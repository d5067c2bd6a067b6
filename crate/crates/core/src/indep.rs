//! Independent tasks on identical processors.
//!
//! Big tasks are placed alone first. The rest is either spread evenly when
//! the load is high, or solved as a chain on one virtual processor with
//! deadline `pD` and then packed with decreasing first fit, which may
//! overrun the deadline by a factor `beta(p)`.

use std::cmp::Ordering;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::chain::{ChainMode, ChainProblem, ChainSolution, EXACT_CAP};
use crate::error::{Error, Result};
use crate::model::{beta, compute_c, Copy, ExecutionRecord, Instance, Kind, Schedule};

/// Smallest residual processor count for [`schedule_indep_largep`].
pub const LARGE_P_MIN: usize = 24;

const LOWER_BOUND_EPS: f64 = 0.01;

/// Execution time cap used by the large-`p` re-execution mode, in units of `D`.
const ALL_REEXEC_STRETCH: f64 = 1.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    BigOnly,
    HighLoadDff,
    ChainRelaxation,
    AppendixHighLoad,
    AppendixAllReexec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndepResult {
    pub branch: Branch,
    pub beta_used: f64,
    pub energy: f64,
    pub makespan: f64,
    pub lower_bound: f64,
    pub schedule: Schedule,
}

/// One execution of the chain relaxation, stretched back onto real time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledExecution {
    pub task_id: String,
    pub copy: Copy,
    pub original_weight: f64,
    pub chain_speed: f64,
    /// `w * frel / chain_speed`.
    pub scaled_weight: f64,
}

impl ScaledExecution {
    pub fn new(task_id: &str, copy: Copy, weight: f64, chain_speed: f64, frel: f64) -> Self {
        ScaledExecution {
            task_id: task_id.to_string(),
            copy,
            original_weight: weight,
            chain_speed,
            scaled_weight: weight * frel / chain_speed,
        }
    }

    pub fn exec_time(&self) -> f64 {
        self.original_weight / self.chain_speed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BigAssignment {
    pub task_id: String,
    pub processor: usize,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BigExtraction {
    pub assignments: Vec<BigAssignment>,
    /// Remaining tasks on the remaining processors, in original order.
    pub residual: Instance,
}

fn require_independent(instance: &Instance) -> Result<()> {
    if instance.kind != Kind::Independent {
        return Err(Error::KindMismatch("expected an independent-task instance".into()));
    }
    Ok(())
}

/// Peels off, heaviest first, every task with `w >= max(S/p, D frel)`
/// (running `S` and `p`) and gives each its own processor.
pub fn extract_big_tasks(instance: &Instance) -> Result<BigExtraction> {
    require_independent(instance)?;
    let pl = &instance.platform;
    let d = instance.deadline;
    let mut order: Vec<usize> = (0..instance.n()).collect();
    order.sort_by(|&a, &b| {
        instance.tasks[b]
            .weight
            .partial_cmp(&instance.tasks[a].weight)
            .unwrap_or(Ordering::Equal)
    });
    let mut s = instance.total_weight();
    let mut p = pl.p;
    let mut big = vec![false; instance.n()];
    let mut assignments = Vec::new();
    for &i in &order {
        let w = instance.tasks[i].weight;
        if p == 0 {
            return Err(Error::InfeasibleDeadline(
                "every processor holds a big task but tasks remain".into(),
            ));
        }
        if w < (s / p as f64).max(d * pl.frel) {
            break;
        }
        let speed = pl.frel.max(w / d);
        if speed > pl.fmax {
            return Err(Error::InfeasibleDeadline(format!(
                "task {} alone needs speed {speed} > fmax",
                instance.tasks[i].id
            )));
        }
        assignments.push(BigAssignment {
            task_id: instance.tasks[i].id.clone(),
            processor: assignments.len() + 1,
            speed,
        });
        big[i] = true;
        s -= w;
        p -= 1;
    }
    let rest = instance
        .tasks
        .iter()
        .zip(&big)
        .filter(|(_, &b)| !b)
        .map(|(t, _)| t.clone())
        .collect();
    Ok(BigExtraction {
        assignments,
        residual: instance.with_tasks(rest, p),
    })
}

/// Decreasing first fit: longest item first, each on the least loaded
/// processor (lowest index on ties). Returns `(key, processor, start)` with
/// 1-based processors, in placement order.
pub fn dff<K: Ord + Clone>(items: &[(K, f64)], p: usize) -> Vec<(K, usize, f64)> {
    assert!(p >= 1, "dff needs at least one processor");
    let mut order: Vec<&(K, f64)> = items.iter().collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0)));
    let mut loads = vec![0.0f64; p];
    let mut out = Vec::with_capacity(items.len());
    for (key, t) in order {
        let mut q = 0;
        for j in 1..p {
            if loads[j] < loads[q] {
                q = j;
            }
        }
        out.push((key.clone(), q + 1, loads[q]));
        loads[q] += t;
    }
    out
}

pub fn lower_bound_power(instance: &Instance) -> f64 {
    let s = instance.total_weight();
    let pd = instance.platform.p as f64 * instance.deadline;
    s * s * s / (pd * pd)
}

/// Chain relaxation on one processor with deadline `pD`; only tasks lighter
/// than `D frel / sqrt 2` may be duplicated.
fn relaxed_chain(instance: &Instance) -> ChainProblem {
    let pd = instance.platform.p as f64 * instance.deadline;
    let cap = instance.deadline * instance.platform.frel / SQRT_2;
    ChainProblem::relaxation(instance, pd, ChainMode::SingleProcessor).restrict(move |_, w| w < cap)
}

pub fn lower_bound_chain(instance: &Instance) -> Result<f64> {
    let problem = relaxed_chain(instance);
    if problem.n() <= EXACT_CAP {
        Ok(problem.solve_exact()?.energy)
    } else {
        Ok(problem.approx_chain(LOWER_BOUND_EPS)?.energy / (1.0 + LOWER_BOUND_EPS))
    }
}

pub fn epsilon_for_indep(residual: &Instance, beta: f64) -> f64 {
    let pl = &residual.platform;
    let s = residual.total_weight();
    let w_min = residual.tasks.iter().map(|t| t.weight).fold(f64::INFINITY, f64::min);
    let ratio = pl.fmin / pl.frel;
    (2.0 * w_min / (3.0 * s) * ratio * ratio).min(1.0 / (3.0 * beta * beta))
}

/// `(K, eps*, beta)` for the large-`p` variant.
pub fn appendix_constants(p: usize) -> Result<(f64, f64, f64)> {
    if p < LARGE_P_MIN {
        return Err(Error::NotApplicable(format!(
            "large-p variant needs at least {LARGE_P_MIN} processors, got {p}"
        )));
    }
    let c = compute_c();
    let b = beta(p);
    let k = 1.0 - 1.0 / (c * (2.0 * b * SQRT_2 - 1.0));
    let eps_star = 1.0 / (SQRT_2 * c * p as f64 * k - 1.0);
    Ok((k, eps_star, b))
}

/// Collects the partial schedule and processor bookkeeping shared by the
/// branches.
struct Builder<'a> {
    instance: &'a Instance,
    records: Vec<ExecutionRecord>,
    lower_bound: f64,
}

impl<'a> Builder<'a> {
    fn new(instance: &'a Instance, big: &BigExtraction) -> Self {
        let mut records = Vec::new();
        let mut lower_bound = 0.0;
        for a in &big.assignments {
            records.push(ExecutionRecord::new(&a.task_id, Copy::Only, a.processor, 0.0, a.speed));
            let w = instance.tasks[instance.task_index(&a.task_id).unwrap()].weight;
            lower_bound += w * a.speed * a.speed;
        }
        Builder {
            instance,
            records,
            lower_bound,
        }
    }

    /// Places executions `(task, copy, speed)` with dff on processors
    /// `offset + 1 ..= offset + p`.
    fn place_dff(&mut self, execs: &[(String, Copy, f64)], offset: usize, p: usize) {
        let items: Vec<((String, Copy), f64)> = execs
            .iter()
            .map(|(id, copy, f)| ((id.clone(), *copy), self.weight(id) / f))
            .collect();
        let speed_of = |id: &str, copy: Copy| {
            execs
                .iter()
                .find(|(i, c, _)| i == id && *c == copy)
                .map(|e| e.2)
                .unwrap()
        };
        for ((id, copy), q, start) in dff(&items, p) {
            let f = speed_of(&id, copy);
            self.records.push(ExecutionRecord::new(&id, copy, offset + q, start, f));
        }
    }

    fn weight(&self, id: &str) -> f64 {
        self.instance.tasks[self.instance.task_index(id).unwrap()].weight
    }

    fn finish(self, branch: Branch, beta_used: f64, residual_bound: f64) -> IndepResult {
        let schedule = Schedule::new(self.records);
        IndepResult {
            branch,
            beta_used,
            energy: schedule.energy(self.instance),
            makespan: schedule.makespan(self.instance),
            lower_bound: self.lower_bound + residual_bound,
            schedule,
        }
    }
}

fn residual_lower_bound(residual: &Instance) -> Result<f64> {
    if residual.n() == 0 {
        return Ok(0.0);
    }
    Ok(lower_bound_power(residual).max(lower_bound_chain(residual)?))
}

/// Every residual task once at `speed`, packed with dff.
fn even_spread(
    mut b: Builder<'_>,
    residual: &Instance,
    offset: usize,
    speed: f64,
    branch: Branch,
    beta_used: f64,
) -> Result<IndepResult> {
    if speed > residual.platform.fmax {
        return Err(Error::InfeasibleDeadline(format!(
            "even load needs speed {speed} > fmax"
        )));
    }
    let execs: Vec<_> = residual
        .tasks
        .iter()
        .map(|t| (t.id.clone(), Copy::Only, speed))
        .collect();
    b.place_dff(&execs, offset, residual.platform.p);
    let lb = residual_lower_bound(residual)?;
    Ok(b.finish(branch, beta_used, lb))
}

/// Chain relaxation of the residual, stretched back to executions.
fn relaxation_executions(residual: &Instance, eps: f64) -> Result<(ChainSolution, Vec<ScaledExecution>)> {
    let problem = relaxed_chain(residual);
    let sol = problem.approx_chain(eps)?;
    let speeds = problem.execution_speeds(&sol);
    let mask = problem.replicated_mask(&sol);
    let frel = residual.platform.frel;
    let mut execs = Vec::new();
    for (i, t) in residual.tasks.iter().enumerate() {
        if mask[i] {
            execs.push(ScaledExecution::new(&t.id, Copy::First, t.weight, speeds[i], frel));
            execs.push(ScaledExecution::new(&t.id, Copy::Second, t.weight, speeds[i], frel));
        } else {
            execs.push(ScaledExecution::new(&t.id, Copy::Only, t.weight, speeds[i], frel));
        }
    }
    Ok((sol, execs))
}

/// Oversize executions run alone at `w / (beta D)`, mid-size ones alone at
/// their chain speed, the rest go through dff.
fn place_relaxation(
    mut b: Builder<'_>,
    residual: &Instance,
    offset: usize,
    execs: &[ScaledExecution],
    beta_used: f64,
) -> Result<IndepResult> {
    let d = residual.deadline;
    let p = residual.platform.p;
    let stretched = beta_used * d;
    let mut alone = Vec::new();
    let mut rest = Vec::new();
    for e in execs {
        let t = e.exec_time();
        if t > stretched {
            alone.push((e.task_id.clone(), e.copy, e.original_weight / stretched));
        } else if t >= d {
            alone.push((e.task_id.clone(), e.copy, e.chain_speed));
        } else {
            rest.push((e.task_id.clone(), e.copy, e.chain_speed));
        }
    }
    let needed = alone.len() + usize::from(!rest.is_empty());
    if needed > p {
        return Err(Error::InsufficientProcessors { needed, available: p });
    }
    for (k, (id, copy, f)) in alone.iter().enumerate() {
        b.records.push(ExecutionRecord::new(id, *copy, offset + k + 1, 0.0, *f));
    }
    if !rest.is_empty() {
        b.place_dff(&rest, offset + alone.len(), p - alone.len());
    }
    let lb = residual_lower_bound(residual)?;
    Ok(b.finish(Branch::ChainRelaxation, beta_used, lb))
}

/// Energy-minimizing schedule for independent tasks that may overrun the
/// deadline by at most `beta(p)`.
pub fn schedule_indep(instance: &Instance) -> Result<IndepResult> {
    let big = extract_big_tasks(instance)?;
    let beta_used = beta(instance.platform.p);
    let offset = big.assignments.len();
    let residual = &big.residual;
    let b = Builder::new(instance, &big);
    if residual.n() == 0 {
        return Ok(b.finish(Branch::BigOnly, beta_used, 0.0));
    }
    let s = residual.total_weight();
    let pd = residual.platform.p as f64 * residual.deadline;
    if s > pd * residual.platform.frel {
        return even_spread(b, residual, offset, s / pd, Branch::HighLoadDff, beta_used);
    }
    let eps = epsilon_for_indep(residual, beta_used);
    let (_, execs) = relaxation_executions(residual, eps)?;
    place_relaxation(b, residual, offset, &execs, beta_used)
}

/// Variant for many processors: a looser high-load test, and a fallback
/// that re-executes every light task when the relaxation yields an
/// oversize execution.
pub fn schedule_indep_largep(instance: &Instance) -> Result<IndepResult> {
    let big = extract_big_tasks(instance)?;
    let residual = &big.residual;
    let (_, eps_star, _) = appendix_constants(residual.platform.p)?;
    let beta_used = beta(instance.platform.p);
    let offset = big.assignments.len();
    let b = Builder::new(instance, &big);
    if residual.n() == 0 {
        return Ok(b.finish(Branch::BigOnly, beta_used, 0.0));
    }
    let pl = &residual.platform;
    let d = residual.deadline;
    let s = residual.total_weight();
    let pd = pl.p as f64 * d;
    if s > pd * pl.frel / (1.0 + eps_star) {
        let speed = pl.frel.max(s / pd);
        return even_spread(b, residual, offset, speed, Branch::AppendixHighLoad, beta_used);
    }
    let (_, execs) = relaxation_executions(residual, eps_star)?;
    if execs.iter().all(|e| e.exec_time() <= beta_used * d) {
        return place_relaxation(b, residual, offset, &execs, beta_used);
    }
    all_reexec(b, residual, offset, beta_used)
}

/// Every task lighter than `D frel / sqrt 2` is re-executed with its floor
/// raised to `w / (1.9 D)`; the others run once at `frel`.
fn all_reexec(mut b: Builder<'_>, residual: &Instance, offset: usize, beta_used: f64) -> Result<IndepResult> {
    let d = residual.deadline;
    let mut problem = relaxed_chain(residual);
    for (floor, &w) in problem.floors.iter_mut().zip(&problem.weights) {
        if let Some(f) = floor {
            *f = f.max(w / (ALL_REEXEC_STRETCH * d));
        }
    }
    let subset: Vec<bool> = problem.floors.iter().map(Option::is_some).collect();
    let sol = problem.evaluate_subset(&subset)?;
    let speeds = problem.execution_speeds(&sol);
    let mut execs = Vec::new();
    for (i, t) in residual.tasks.iter().enumerate() {
        if subset[i] {
            execs.push((t.id.clone(), Copy::First, speeds[i]));
            execs.push((t.id.clone(), Copy::Second, speeds[i]));
        } else {
            execs.push((t.id.clone(), Copy::Only, residual.platform.frel));
        }
    }
    b.place_dff(&execs, offset, residual.platform.p);
    let lb = residual_lower_bound(residual)?;
    Ok(b.finish(Branch::AppendixAllReexec, beta_used, lb))
}

/// Large-`p` variant when the residual has enough processors, otherwise
/// the general scheduler.
pub fn schedule_indep_auto(instance: &Instance) -> Result<IndepResult> {
    let big = extract_big_tasks(instance)?;
    if big.residual.platform.p >= LARGE_P_MIN {
        schedule_indep_largep(instance)
    } else {
        schedule_indep(instance)
    }
}
