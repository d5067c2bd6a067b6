//! Brute-force reference solutions for small independent-task instances.
//!
//! Every placement structure is enumerated: each task runs once, twice on
//! one processor, or twice on two processors. For a fixed structure the
//! problem is convex in the speeds, so it is solved to optimality by
//! coordinate ascent on the per-processor time multipliers. The optimal
//! speeds are then rounded up onto the speed grid, which keeps the schedule
//! feasible and makes the result monotone under grid refinement.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::chain::ChainSolution;
use crate::error::{Error, Result};
use crate::indep::IndepResult;
use crate::model::{Copy, ExecutionRecord, Instance, Kind, Schedule};

pub const ORACLE_MAX_TASKS: usize = 5;
pub const ORACLE_MAX_PROCESSORS: usize = 3;
pub const DEFAULT_GRID_STEPS: usize = 200;

const MAX_SWEEPS: usize = 400;
const LEVEL_BISECT_ITERS: usize = 56;
const GOLDEN_ITERS: usize = 64;
const TIME_REL_TOL: f64 = 1e-12;

/// Where the executions of one task go. Processors are 0-based here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Once(usize),
    /// Two executions back to back on one processor, at one speed.
    Same(usize),
    /// Two executions on two distinct processors `a < b`.
    Split(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub energy: f64,
    pub makespan: f64,
    /// Optimum of the best structure before rounding speeds to the grid.
    pub continuous_energy: f64,
    pub grid_steps: usize,
    pub grid_resolution: f64,
    pub structures_enumerated: usize,
    pub structures_solved: usize,
    pub structure: Vec<Placement>,
    pub schedule: Schedule,
}

#[derive(Clone, Copy)]
struct TaskData {
    w: f64,
    f_inf: Option<f64>,
    /// `K` in `phi(f1) + phi(f2) >= K`, the two-execution reliability test.
    pair_k: f64,
}

#[derive(Clone, Copy)]
struct Block {
    task: usize,
    copies: usize,
    weight: f64,
    lb: f64,
}

#[derive(Clone, Copy)]
struct Pair {
    task: usize,
    a: usize,
    b: usize,
    w: f64,
    k: f64,
}

struct Layout {
    blocks: Vec<Vec<Block>>,
    pairs: Vec<Pair>,
}

struct Solver {
    p: usize,
    deadline: f64,
    fmin: f64,
    fmax: f64,
    frel: f64,
    d: f64,
    tasks: Vec<TaskData>,
    grid: Vec<f64>,
}

struct StructureSolution {
    energy: f64,
    continuous: f64,
    /// `(task, copy, processor, speed)`.
    execs: Vec<(usize, Copy, usize, f64)>,
}

impl Solver {
    fn phi(&self, f: f64) -> f64 {
        f.ln() + self.d * f
    }

    /// Smallest speed `f` with `phi(f) >= t`.
    fn phi_inverse(&self, t: f64) -> f64 {
        if self.d == 0.0 {
            return t.exp();
        }
        // u + d e^u is convex and increasing; Newton from u = t stays right
        // of the root and decreases monotonically.
        let mut u = t;
        for _ in 0..100 {
            let eu = u.exp();
            let step = (u + self.d * eu - t) / (1.0 + self.d * eu);
            u -= step;
            if step.abs() <= 1e-15 * u.abs().max(1.0) {
                break;
            }
        }
        u.exp()
    }

    fn clamp(&self, f: f64) -> f64 {
        f.clamp(self.fmin, self.fmax)
    }

    fn free_speed(&self, lb: f64, s: f64) -> f64 {
        self.fmax.min(lb.max(s))
    }

    /// Lagrangian minimizer of one distinct-processor pair for levels
    /// `(sa, sb)`.
    fn pair_speeds(&self, pair: &Pair, sa: f64, sb: f64) -> (f64, f64) {
        let u1 = self.clamp(sa);
        let u2 = self.clamp(sb);
        if self.phi(u1) + self.phi(u2) >= pair.k {
            return (u1, u2);
        }
        let partner = |f1: f64| {
            let need = self.phi_inverse(pair.k - self.phi(f1)).max(self.fmin);
            sb.clamp(need, self.fmax.max(need))
        };
        let cost = |f1: f64| {
            let f2 = partner(f1);
            f1 * f1 + 2.0 * sa.powi(3) / f1 + f2 * f2 + 2.0 * sb.powi(3) / f2
        };
        let mut lo = self.fmin.max(self.phi_inverse(pair.k - self.phi(self.fmax)));
        let mut hi = self.fmax;
        if lo >= hi {
            return (hi, partner(hi));
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut c1, mut c2) = (cost(x1), cost(x2));
        for _ in 0..GOLDEN_ITERS {
            if c1 <= c2 {
                hi = x2;
                x2 = x1;
                c2 = c1;
                x1 = hi - g * (hi - lo);
                c1 = cost(x1);
            } else {
                lo = x1;
                x1 = x2;
                c1 = c2;
                x2 = lo + g * (hi - lo);
                c2 = cost(x2);
            }
        }
        let f1 = 0.5 * (lo + hi);
        (f1, partner(f1))
    }

    fn processor_time(&self, layout: &Layout, s: &[f64], q: usize) -> f64 {
        let mut t: f64 = layout.blocks[q]
            .iter()
            .map(|b| b.weight / self.free_speed(b.lb, s[q]))
            .sum();
        for pr in &layout.pairs {
            if pr.a == q || pr.b == q {
                let (f1, f2) = self.pair_speeds(pr, s[pr.a], s[pr.b]);
                t += pr.w / if pr.a == q { f1 } else { f2 };
            }
        }
        t
    }

    /// Lagrangian value at levels `s`; a lower bound on the structure's
    /// optimum up to the accuracy of the pair minimization.
    fn dual_value(&self, layout: &Layout, s: &[f64]) -> f64 {
        let mut energy = 0.0;
        for (q, blocks) in layout.blocks.iter().enumerate() {
            for b in blocks {
                let f = self.free_speed(b.lb, s[q]);
                energy += b.weight * f * f;
            }
        }
        for pr in &layout.pairs {
            let (f1, f2) = self.pair_speeds(pr, s[pr.a], s[pr.b]);
            energy += pr.w * (f1 * f1 + f2 * f2);
        }
        let slack: f64 = (0..self.p)
            .map(|q| 2.0 * s[q].powi(3) * (self.processor_time(layout, s, q) - self.deadline))
            .sum();
        energy + slack
    }

    /// Water-filling bound per processor, ignoring the pair coupling except
    /// through each copy's lowest possible speed.
    fn static_bound(&self, layout: &Layout) -> f64 {
        let mut total = 0.0;
        for q in 0..self.p {
            let mut items: Vec<(f64, f64)> = layout.blocks[q].iter().map(|b| (b.weight, b.lb)).collect();
            for pr in &layout.pairs {
                if pr.a == q || pr.b == q {
                    let lb = self.fmin.max(self.phi_inverse(pr.k - self.phi(self.fmax)));
                    items.push((pr.w, lb));
                }
            }
            let time = |s: f64| items.iter().map(|&(w, lb)| w / lb.max(s)).sum::<f64>();
            let mut s = 0.0;
            if time(0.0) > self.deadline {
                let (mut lo, mut hi) = (0.0, self.fmax);
                for _ in 0..LEVEL_BISECT_ITERS {
                    let mid = 0.5 * (lo + hi);
                    if time(mid) > self.deadline {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                s = lo;
            }
            total += items.iter().map(|&(w, lb)| w * lb.max(s).powi(2)).sum::<f64>();
        }
        let mut floor = 0.0;
        for blocks in &layout.blocks {
            floor += blocks.iter().map(|b| b.weight * b.lb * b.lb).sum::<f64>();
        }
        for pr in &layout.pairs {
            let f = self.tasks[pr.task].f_inf.unwrap().max(self.fmin);
            floor += 2.0 * pr.w * f * f;
        }
        total.max(floor)
    }

    fn layout(&self, structure: &[Placement]) -> Layout {
        let mut blocks = vec![Vec::new(); self.p];
        let mut pairs = Vec::new();
        for (i, pl) in structure.iter().enumerate() {
            let t = self.tasks[i];
            match *pl {
                Placement::Once(q) => blocks[q].push(Block {
                    task: i,
                    copies: 1,
                    weight: t.w,
                    lb: self.frel.max(self.fmin),
                }),
                Placement::Same(q) => blocks[q].push(Block {
                    task: i,
                    copies: 2,
                    weight: 2.0 * t.w,
                    lb: t.f_inf.unwrap().max(self.fmin),
                }),
                Placement::Split(a, b) => pairs.push(Pair {
                    task: i,
                    a,
                    b,
                    w: t.w,
                    k: t.pair_k,
                }),
            }
        }
        Layout { blocks, pairs }
    }

    fn min_time_fits(&self, layout: &Layout) -> bool {
        (0..self.p).all(|q| {
            let blocks: f64 = layout.blocks[q].iter().map(|b| b.weight / self.fmax).sum();
            let pairs: f64 = layout
                .pairs
                .iter()
                .filter(|pr| pr.a == q || pr.b == q)
                .map(|pr| pr.w / self.fmax)
                .sum();
            blocks + pairs <= self.deadline * (1.0 + TIME_REL_TOL)
        })
    }

    /// Optimal levels by coordinate ascent; `None` when the structure cannot
    /// meet the deadline or provably cannot beat `cutoff`.
    fn solve_levels(&self, layout: &Layout, cutoff: f64) -> Option<Vec<f64>> {
        let mut s = vec![0.0; self.p];
        let busy: Vec<bool> = (0..self.p)
            .map(|q| !layout.blocks[q].is_empty() || layout.pairs.iter().any(|pr| pr.a == q || pr.b == q))
            .collect();
        let sweeps = if layout.pairs.is_empty() { 1 } else { MAX_SWEEPS };
        for sweep in 0..sweeps {
            let mut change: f64 = 0.0;
            for q in 0..self.p {
                if !busy[q] {
                    continue;
                }
                let mut trial = s.clone();
                trial[q] = 0.0;
                let next = if self.processor_time(layout, &trial, q) <= self.deadline {
                    0.0
                } else {
                    trial[q] = self.fmax;
                    if self.processor_time(layout, &trial, q) > self.deadline * (1.0 + TIME_REL_TOL) {
                        return None;
                    }
                    let (mut lo, mut hi) = (0.0, self.fmax);
                    for _ in 0..LEVEL_BISECT_ITERS {
                        trial[q] = 0.5 * (lo + hi);
                        if self.processor_time(layout, &trial, q) > self.deadline {
                            lo = trial[q];
                        } else {
                            hi = trial[q];
                        }
                    }
                    hi
                };
                change = change.max((next - s[q]).abs());
                s[q] = next;
            }
            if change <= 1e-13 * self.fmax {
                break;
            }
            if sweep % 8 == 7 && self.dual_value(layout, &s) > cutoff * (1.0 + 1e-9) {
                return None;
            }
        }
        Some(s)
    }

    fn snap_up(&self, f: f64) -> Option<f64> {
        let i = self.grid.partition_point(|&g| g < f);
        if i < self.grid.len() {
            Some(self.grid[i])
        } else if f <= self.fmax * (1.0 + TIME_REL_TOL) {
            Some(self.fmax)
        } else {
            None
        }
    }

    fn solve_structure(&self, structure: &[Placement], cutoff: f64) -> Option<StructureSolution> {
        let layout = self.layout(structure);
        let s = self.solve_levels(&layout, cutoff)?;
        // (task, copy, processor, speed), grouped per processor for the repair
        let mut execs: Vec<(usize, Copy, usize, f64)> = Vec::new();
        for (q, blocks) in layout.blocks.iter().enumerate() {
            for b in blocks {
                let f = self.free_speed(b.lb, s[q]);
                if b.copies == 1 {
                    execs.push((b.task, Copy::Only, q, f));
                } else {
                    execs.push((b.task, Copy::First, q, f));
                    execs.push((b.task, Copy::Second, q, f));
                }
            }
        }
        for pr in &layout.pairs {
            let (f1, f2) = self.pair_speeds(pr, s[pr.a], s[pr.b]);
            execs.push((pr.task, Copy::First, pr.a, f1));
            execs.push((pr.task, Copy::Second, pr.b, f2));
        }
        let continuous: f64 = execs.iter().map(|e| self.tasks[e.0].w * e.3 * e.3).sum();
        for q in 0..self.p {
            let time: f64 = execs.iter().filter(|e| e.2 == q).map(|e| self.tasks[e.0].w / e.3).sum();
            if time > self.deadline {
                let scale = time / self.deadline;
                for e in execs.iter_mut().filter(|e| e.2 == q) {
                    e.3 *= scale;
                }
            }
        }
        for e in &mut execs {
            e.3 = self.snap_up(e.3)?;
        }
        execs.sort_by_key(|e| (e.2, e.0, e.1));
        let energy = execs.iter().map(|e| self.tasks[e.0].w * e.3 * e.3).sum();
        Some(StructureSolution {
            energy,
            continuous,
            execs,
        })
    }

    fn options(&self, i: usize) -> Vec<Placement> {
        let mut out: Vec<Placement> = (0..self.p).map(Placement::Once).collect();
        if let Some(f) = self.tasks[i].f_inf {
            // Two runs on one processor at f >= frel/sqrt 2 never beat one run.
            if f.max(self.fmin) < self.frel / std::f64::consts::SQRT_2 {
                out.extend((0..self.p).map(Placement::Same));
            }
            for a in 0..self.p {
                for b in a + 1..self.p {
                    out.push(Placement::Split(a, b));
                }
            }
        }
        out
    }
}

/// Whether processor labels appear in first-use order `0, 1, 2, ...`.
fn is_canonical(structure: &[Placement]) -> bool {
    let mut next = 0;
    let mut see = |q: usize| {
        if q < next {
            true
        } else if q == next {
            next += 1;
            true
        } else {
            false
        }
    };
    structure.iter().all(|pl| match *pl {
        Placement::Once(q) | Placement::Same(q) => see(q),
        Placement::Split(a, b) => see(a) && see(b),
    })
}

fn enumerate(options: &[Vec<Placement>]) -> Vec<Vec<Placement>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; options.len()];
    if options.iter().any(|o| o.is_empty()) {
        return out;
    }
    loop {
        let s: Vec<Placement> = idx.iter().zip(options).map(|(&k, o)| o[k]).collect();
        if is_canonical(&s) {
            out.push(s);
        }
        let mut pos = options.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

fn speed_grid(instance: &Instance, steps: usize, f_infs: &[Option<f64>]) -> Vec<f64> {
    let pl = &instance.platform;
    let step = (pl.fmax - pl.fmin) / steps as f64;
    let mut grid: Vec<f64> = (0..=steps).map(|k| pl.fmin + k as f64 * step).collect();
    grid.push(pl.fmax);
    grid.push(pl.frel);
    grid.extend(f_infs.iter().flatten().copied().filter(|&f| f >= pl.fmin));
    grid.retain(|&f| f <= pl.fmax);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    grid
}

/// Minimum-energy schedule meeting the deadline `D` itself, over every
/// placement structure.
pub fn oracle_indep(instance: &Instance, grid_steps: usize) -> Result<OracleResult> {
    if instance.kind != Kind::Independent {
        return Err(Error::KindMismatch("the oracle expects independent tasks".into()));
    }
    if instance.n() > ORACLE_MAX_TASKS {
        return Err(Error::InstanceTooLarge {
            size: instance.n(),
            cap: ORACLE_MAX_TASKS,
        });
    }
    if instance.platform.p > ORACLE_MAX_PROCESSORS {
        return Err(Error::InstanceTooLarge {
            size: instance.platform.p,
            cap: ORACLE_MAX_PROCESSORS,
        });
    }
    if grid_steps == 0 {
        return Err(Error::InvalidInstance("grid_steps must be positive".into()));
    }
    let pl = &instance.platform;
    let tasks: Vec<TaskData> = instance
        .tasks
        .iter()
        .map(|t| TaskData {
            w: t.weight,
            f_inf: pl.f_inf(t.weight).ok(),
            pair_k: (pl.lambda0 * t.weight).ln() + pl.d * pl.frel + pl.frel.ln(),
        })
        .collect();
    let f_infs: Vec<Option<f64>> = tasks.iter().map(|t| t.f_inf).collect();
    let solver = Solver {
        p: pl.p,
        deadline: instance.deadline,
        fmin: pl.fmin,
        fmax: pl.fmax,
        frel: pl.frel,
        d: pl.d,
        grid: speed_grid(instance, grid_steps, &f_infs),
        tasks,
    };
    let options: Vec<Vec<Placement>> = (0..instance.n()).map(|i| solver.options(i)).collect();
    let structures = enumerate(&options);
    let mut ranked: Vec<(f64, Vec<Placement>)> = structures
        .into_iter()
        .filter_map(|s| {
            let layout = solver.layout(&s);
            solver.min_time_fits(&layout).then(|| (solver.static_bound(&layout), s))
        })
        .collect();
    let enumerated = ranked.len();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(&b.1)));

    let mut best: Option<(StructureSolution, Vec<Placement>)> = None;
    let mut solved = 0;
    for (bound, structure) in ranked {
        let cutoff = best.as_ref().map_or(f64::INFINITY, |b| b.0.energy);
        if bound > cutoff * (1.0 + 1e-12) {
            break;
        }
        solved += 1;
        let Some(sol) = solver.solve_structure(&structure, cutoff) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((b, bs)) => {
                let tol = 1e-12 * b.energy;
                sol.energy < b.energy - tol || (sol.energy <= b.energy + tol && structure < *bs)
            }
        };
        if better {
            best = Some((sol, structure));
        }
    }
    let Some((sol, structure)) = best else {
        return Err(Error::InfeasibleDeadline("no placement structure meets the deadline".into()));
    };

    let mut records = Vec::new();
    let mut loads = vec![0.0; solver.p];
    for &(task, copy, q, f) in &sol.execs {
        let id = &instance.tasks[task].id;
        records.push(ExecutionRecord::new(id, copy, q + 1, loads[q], f));
        loads[q] += solver.tasks[task].w / f;
    }
    let schedule = Schedule::new(records);
    Ok(OracleResult {
        energy: sol.energy,
        makespan: schedule.makespan(instance),
        continuous_energy: sol.continuous,
        grid_steps,
        grid_resolution: (pl.fmax - pl.fmin) / grid_steps as f64,
        structures_enumerated: enumerated,
        structures_solved: solved,
        structure,
        schedule,
    })
}

/// Anything carrying a total energy.
pub trait Solved {
    fn total_energy(&self) -> f64;
}

impl Solved for IndepResult {
    fn total_energy(&self) -> f64 {
        self.energy
    }
}

impl Solved for ChainSolution {
    fn total_energy(&self) -> f64 {
        self.energy
    }
}

impl Solved for OracleResult {
    fn total_energy(&self) -> f64 {
        self.energy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub pass: bool,
    pub energy: f64,
    pub reference_energy: f64,
    pub ratio: f64,
    pub slack: f64,
    /// `ratio * (1 + slack) * reference_energy`.
    pub bound: f64,
}

/// Checks `result <= ratio * (1 + slack) * reference`. Beating the
/// reference is allowed.
pub fn compare(result: &impl Solved, reference: &impl Solved, ratio: f64, slack: f64) -> CompareReport {
    let energy = result.total_energy();
    let reference_energy = reference.total_energy();
    let bound = ratio * (1.0 + slack) * reference_energy;
    CompareReport {
        pass: energy <= bound,
        energy,
        reference_energy,
        ratio,
        slack,
        bound,
    }
}
