//! Schedule validator.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{
    energy_exec, Copy, Instance, Kind, Schedule, DEADLINE_REL_TOL, RELIABILITY_TOL,
};

/// Relative slack on time comparisons between records.
const TIME_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UnknownTask,
    MissingTask,
    MoreThanTwoCopies,
    SpeedOutOfRange,
    ProcessorOutOfRange,
    NegativeStart,
    Overlap,
    Precedence,
    Reliability,
    Deadline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub task_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReliability {
    pub task_id: String,
    pub ok: bool,
    /// Failure-probability excess over the target; `None` when the task has
    /// no valid execution count.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub makespan: f64,
    pub energy: f64,
    pub per_task_reliability_ok: Vec<TaskReliability>,
    pub deadline_ok: bool,
    pub violations: Vec<Violation>,
    /// First-order failure term `lambda0 exp(-d f) w / f` per record; the
    /// failure model is only accurate while these stay well below 1.
    pub failure_terms: Vec<f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

struct Span {
    task: usize,
    start: f64,
    end: f64,
}

fn late(a: f64, b: f64) -> bool {
    // a > b beyond tolerance
    a - b > TIME_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Checks a schedule against the instance constraints.
///
/// Every problem is reported as a [`Violation`]; nothing is silently dropped.
/// Records that reference unknown tasks are excluded from the time and energy
/// aggregates.
pub fn validate(instance: &Instance, schedule: &Schedule, deadline_bound: f64) -> ValidationReport {
    let platform = &instance.platform;
    let index: HashMap<&str, usize> = instance
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i))
        .collect();

    let mut violations = Vec::new();
    let mut push = |kind, task_id: Option<&str>, message: String| {
        violations.push(Violation {
            kind,
            task_id: task_id.map(str::to_string),
            message,
        })
    };

    let mut energy = 0.0;
    let mut makespan: f64 = 0.0;
    let mut failure_terms = Vec::with_capacity(schedule.records.len());
    let mut speeds: Vec<Vec<f64>> = vec![Vec::new(); instance.n()];
    let mut per_proc: HashMap<usize, Vec<Span>> = HashMap::new();
    let mut spans: Vec<Vec<(f64, f64)>> = vec![Vec::new(); instance.n()];

    for rec in &schedule.records {
        let Some(&i) = index.get(rec.task_id.as_str()) else {
            push(
                ViolationKind::UnknownTask,
                Some(&rec.task_id),
                format!("record references unknown task {}", rec.task_id),
            );
            failure_terms.push(f64::NAN);
            continue;
        };
        let w = instance.tasks[i].weight;
        let f = rec.speed;
        let id = Some(rec.task_id.as_str());
        let speed_ok = f.is_finite()
            && f > 0.0
            && f >= platform.fmin * (1.0 - DEADLINE_REL_TOL)
            && f <= platform.fmax * (1.0 + DEADLINE_REL_TOL);
        if !speed_ok {
            push(
                ViolationKind::SpeedOutOfRange,
                id,
                format!("speed {f} outside [{}, {}]", platform.fmin, platform.fmax),
            );
        }
        if rec.processor < 1 || rec.processor > platform.p {
            push(
                ViolationKind::ProcessorOutOfRange,
                id,
                format!("processor {} outside 1..={}", rec.processor, platform.p),
            );
        }
        if !(rec.start >= 0.0) {
            push(ViolationKind::NegativeStart, id, format!("start {} < 0", rec.start));
        }
        if !(f > 0.0) {
            failure_terms.push(f64::NAN);
            continue;
        }
        let end = rec.start + w / f;
        energy += energy_exec(w, f);
        makespan = makespan.max(end);
        failure_terms.push(platform.failure_term(w, f));
        speeds[i].push(f);
        spans[i].push((rec.start, end));
        per_proc.entry(rec.processor).or_default().push(Span {
            task: i,
            start: rec.start,
            end,
        });
    }

    let mut reliability = Vec::with_capacity(instance.n());
    for (i, task) in instance.tasks.iter().enumerate() {
        let id = Some(task.id.as_str());
        let residual = match speeds[i].as_slice() {
            [] => {
                push(ViolationKind::MissingTask, id, format!("task {} never executed", task.id));
                None
            }
            [f] => Some(platform.residual_single(task.weight, *f)),
            [f1, f2] => Some(platform.residual_pair(task.weight, *f1, *f2)),
            more => {
                push(
                    ViolationKind::MoreThanTwoCopies,
                    id,
                    format!("task {} executed {} times", task.id, more.len()),
                );
                None
            }
        };
        let ok = residual.is_some_and(|r| r <= RELIABILITY_TOL);
        if let Some(r) = residual {
            if !ok {
                push(
                    ViolationKind::Reliability,
                    id,
                    format!("task {} misses its reliability target by {r:e}", task.id),
                );
            }
        }
        reliability.push(TaskReliability {
            task_id: task.id.clone(),
            ok,
            residual,
        });
    }

    let mut procs: Vec<_> = per_proc.into_iter().collect();
    procs.sort_by_key(|(p, _)| *p);
    for (proc, mut list) in procs {
        list.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
        for pair in list.windows(2) {
            if late(pair[0].end, pair[1].start) {
                push(
                    ViolationKind::Overlap,
                    Some(&instance.tasks[pair[1].task].id),
                    format!(
                        "processor {proc}: task {} starts at {} before task {} ends at {}",
                        instance.tasks[pair[1].task].id,
                        pair[1].start,
                        instance.tasks[pair[0].task].id,
                        pair[0].end
                    ),
                );
            }
        }
    }

    if instance.kind == Kind::Chain {
        let mut finished: Option<(usize, f64)> = None;
        for (i, s) in spans.iter().enumerate() {
            if s.is_empty() {
                continue;
            }
            let first_start = s.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
            if let Some((j, end)) = finished {
                if late(end, first_start) {
                    push(
                        ViolationKind::Precedence,
                        Some(&instance.tasks[i].id),
                        format!(
                            "task {} starts at {first_start} before predecessor {} finishes at {end}",
                            instance.tasks[i].id, instance.tasks[j].id
                        ),
                    );
                }
            }
            let last_end = s.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            let prev = finished.map_or(f64::NEG_INFINITY, |x| x.1);
            if last_end >= prev {
                finished = Some((i, last_end));
            }
        }
    }

    let deadline_ok = makespan <= deadline_bound * (1.0 + DEADLINE_REL_TOL);
    if !deadline_ok {
        push(
            ViolationKind::Deadline,
            None,
            format!("makespan {makespan} exceeds bound {deadline_bound}"),
        );
    }

    ValidationReport {
        makespan,
        energy,
        per_task_reliability_ok: reliability,
        deadline_ok,
        violations,
        failure_terms,
    }
}

/// Copy labels are informative only; this helper reports whether a schedule
/// labels its copies consistently (`only` alone, `first`/`second` in pairs).
pub fn copy_labels_consistent(instance: &Instance, schedule: &Schedule) -> bool {
    let mut labels: HashMap<&str, Vec<Copy>> = HashMap::new();
    for r in &schedule.records {
        labels.entry(r.task_id.as_str()).or_default().push(r.copy);
    }
    instance.tasks.iter().all(|t| {
        let mut l = labels.get(t.id.as_str()).cloned().unwrap_or_default();
        l.sort();
        matches!(l.as_slice(), [Copy::Only] | [Copy::First, Copy::Second])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExecutionRecord, Platform};

    fn inst(kind: Kind, weights: &[f64], p: usize) -> Instance {
        let pl = Platform::new(p, 0.05, 1.0, 0.75, 1e-5, 0.0).unwrap();
        Instance::from_weights(kind, weights, pl, 100.0).unwrap()
    }

    #[test]
    fn single_record_at_frel() {
        let i = inst(Kind::Independent, &[6.0], 1);
        let s = Schedule::new(vec![ExecutionRecord::new("T1", Copy::Only, 1, 0.0, 0.75)]);
        let r = validate(&i, &s, 100.0);
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.makespan, 8.0);
        assert!(r.per_task_reliability_ok[0].ok);
        assert!(copy_labels_consistent(&i, &s));
    }

    #[test]
    fn overlap_is_reported() {
        let i = inst(Kind::Independent, &[6.0, 3.0], 1);
        let s = Schedule::new(vec![
            ExecutionRecord::new("T1", Copy::Only, 1, 0.0, 0.75),
            ExecutionRecord::new("T2", Copy::Only, 1, 7.0, 0.75),
        ]);
        let r = validate(&i, &s, 100.0);
        assert!(r.has(ViolationKind::Overlap));
    }

    #[test]
    fn unknown_missing_and_extra_copies() {
        let i = inst(Kind::Independent, &[1.0, 1.0], 3);
        let s = Schedule::new(vec![
            ExecutionRecord::new("T1", Copy::First, 1, 0.0, 0.5),
            ExecutionRecord::new("T1", Copy::Second, 2, 0.0, 0.5),
            ExecutionRecord::new("T1", Copy::Second, 3, 0.0, 0.5),
            ExecutionRecord::new("ghost", Copy::Only, 1, 5.0, 0.5),
        ]);
        let r = validate(&i, &s, 100.0);
        assert!(r.has(ViolationKind::UnknownTask));
        assert!(r.has(ViolationKind::MissingTask));
        assert!(r.has(ViolationKind::MoreThanTwoCopies));
        assert!(!copy_labels_consistent(&i, &s));
    }

    #[test]
    fn chain_precedence() {
        let i = inst(Kind::Chain, &[3.0, 3.0], 2);
        let s = Schedule::new(vec![
            ExecutionRecord::new("T1", Copy::Only, 1, 0.0, 0.75),
            ExecutionRecord::new("T2", Copy::Only, 2, 1.0, 0.75),
        ]);
        assert!(validate(&i, &s, 100.0).has(ViolationKind::Precedence));
        let ok = Schedule::new(vec![
            ExecutionRecord::new("T1", Copy::Only, 1, 0.0, 0.75),
            ExecutionRecord::new("T2", Copy::Only, 2, 4.0, 0.75),
        ]);
        assert!(validate(&i, &ok, 100.0).is_valid());
    }

    #[test]
    fn speed_and_deadline() {
        let i = inst(Kind::Independent, &[3.0], 1);
        let s = Schedule::new(vec![ExecutionRecord::new("T1", Copy::Only, 1, 0.0, 1.5)]);
        let r = validate(&i, &s, 1.0);
        assert!(r.has(ViolationKind::SpeedOutOfRange));
        assert!(r.has(ViolationKind::Deadline));
        assert!(!r.deadline_ok);
    }

    #[test]
    fn slow_single_breaks_reliability() {
        let i = inst(Kind::Independent, &[3.0], 1);
        let s = Schedule::new(vec![ExecutionRecord::new("T1", Copy::Only, 1, 0.0, 0.5)]);
        let r = validate(&i, &s, 100.0);
        assert!(r.has(ViolationKind::Reliability));
        assert!(r.per_task_reliability_ok[0].residual.unwrap() > 0.0);
    }
}
