//! Subset-sum style approximation scheme for chains.

use crate::chain::{ChainMode, ChainProblem, ChainSolution};
use crate::error::{Error, Result};
use crate::model::Instance;

/// Keeps `L[0]`, then every element that either is the first to cross `x`
/// or exceeds the last kept element by more than a factor `1 + eps`.
pub fn trim(list: &[f64], eps: f64, x: f64) -> Vec<f64> {
    let keep = trim_indices(list, eps, x);
    keep.into_iter().map(|i| list[i]).collect()
}

fn trim_indices(list: &[f64], eps: f64, x: f64) -> Vec<usize> {
    let Some(&first) = list.first() else {
        return Vec::new();
    };
    let mut kept = vec![0];
    let mut last = first;
    for (i, &v) in list.iter().enumerate().skip(1) {
        if (last <= x && v > x) || v > last * (1.0 + eps) {
            kept.push(i);
            last = v;
        }
    }
    kept
}

/// Trimmed subset sums, each carrying the bitset of tasks that built it.
struct SumList {
    words: usize,
    sums: Vec<f64>,
    masks: Vec<u64>,
}

impl SumList {
    fn subset(&self, k: usize, n: usize) -> Vec<bool> {
        let bits = &self.masks[k * self.words..(k + 1) * self.words];
        (0..n).map(|i| bits[i / 64] >> (i % 64) & 1 == 1).collect()
    }
}

/// Trimmed subset-sum lists over the duplicable tasks of `problem`.
///
/// Everything above the first sum crossing `x` is dropped after each trim:
/// sums only grow, so those entries can never become the best sum at or
/// below `x` nor the smallest one above it.
fn build_lists(problem: &ChainProblem, eps: f64, x: f64) -> SumList {
    let n = problem.n();
    let words = n.div_ceil(64).max(1);
    let delta = eps / (56.0 * n as f64);
    let mut list = SumList {
        words,
        sums: vec![0.0],
        masks: vec![0; words],
    };
    for i in 0..n {
        if problem.floors[i].is_none() {
            continue;
        }
        let w = problem.weights[i];
        let len = list.sums.len();
        // (shifted, index) in merged order
        let mut merged = Vec::with_capacity(2 * len);
        let (mut a, mut b) = (0, 0);
        while a < len || b < len {
            if b == len || (a < len && list.sums[a] <= list.sums[b] + w) {
                merged.push((false, a));
                a += 1;
            } else {
                merged.push((true, b));
                b += 1;
            }
        }
        let value = |(shifted, k): (bool, usize)| if shifted { list.sums[k] + w } else { list.sums[k] };
        let sums: Vec<f64> = merged.iter().map(|&e| value(e)).collect();
        let mut keep = trim_indices(&sums, delta, x);
        if let Some(cross) = keep.iter().position(|&j| sums[j] > x) {
            keep.truncate(cross + 1);
        }
        let mut next = SumList {
            words,
            sums: Vec::with_capacity(keep.len()),
            masks: Vec::with_capacity(keep.len() * words),
        };
        for j in keep {
            let (shifted, k) = merged[j];
            next.sums.push(sums[j]);
            next.masks.extend_from_slice(&list.masks[k * words..(k + 1) * words]);
            if shifted {
                let last = next.masks.len() - words;
                next.masks[last + i / 64] |= 1 << (i % 64);
            }
        }
        list = next;
    }
    list
}

impl ChainProblem {
    /// Approximate chain solution within a factor `1 + eps` of the optimum.
    ///
    /// The two candidates are the largest surviving sum at or below the
    /// threshold and the smallest one above it; each is realized through
    /// [`ChainProblem::compute_vl`] and the cheaper feasible one wins.
    pub fn approx_chain(&self, eps: f64) -> Result<ChainSolution> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidInstance(format!("eps must lie in (0, 1), got {eps}")));
        }
        if !self.has_slack() || self.n() == 0 {
            return self.solve_no_replication();
        }
        let mut x = self.x_opt();
        if self.integer_weights {
            x = x.floor();
        }
        let list = build_lists(self, eps, x);
        let below = list.sums.iter().rposition(|&v| v <= x);
        let above = list.sums.iter().position(|&v| v > x);

        let mut best: Option<ChainSolution> = None;
        for node in [below, above].into_iter().flatten() {
            let mask = list.subset(node, self.n());
            let Ok(sol) = self.evaluate_subset(&mask) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some(b) => sol.energy < b.energy || (sol.energy == b.energy && sol.x < b.x),
            };
            if better {
                best = Some(sol);
            }
        }
        match best {
            Some(s) => Ok(s),
            None => self.evaluate_subset(&vec![false; self.n()]),
        }
    }
}

/// Approximation scheme on an instance. `mode` defaults to the one implied
/// by the processor count; `eligible` restricts which tasks may be
/// duplicated.
pub fn approx_chain(
    instance: &Instance,
    eps: f64,
    mode: Option<ChainMode>,
    eligible: Option<&dyn Fn(usize, f64) -> bool>,
) -> Result<ChainSolution> {
    let mode = mode.unwrap_or(ChainMode::for_processors(instance.platform.p));
    let mut problem = ChainProblem::relaxation(instance, instance.deadline, mode);
    if let Some(pred) = eligible {
        problem = problem.restrict(pred);
    }
    problem.approx_chain(eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::solve_exact;
    use crate::model::{Kind, Platform};

    #[test]
    fn trim_examples() {
        assert_eq!(trim(&[0.0, 1.0, 2.0, 3.0], 1.0, 2.0), vec![0.0, 1.0, 3.0]);
        assert_eq!(trim(&[5.0, 6.0], 1.0, 2.0), vec![5.0]);
        assert_eq!(trim(&[0.0, 1.0, 1.0, 2.0, 2.0, 7.0], 0.0, 100.0), vec![0.0, 1.0, 2.0, 7.0]);
        assert!(trim(&[], 0.5, 1.0).is_empty());
    }

    #[test]
    fn trim_sparsity_below_threshold() {
        let list: Vec<f64> = (0..200).map(|i| i as f64 * 0.37).collect();
        let x = 40.0;
        let eps = 0.05;
        let out = trim(&list, eps, x);
        for w in out.windows(2) {
            if w[1] <= x {
                assert!(w[1] > w[0] * (1.0 + eps));
            }
        }
        let first_above = out.iter().position(|&v| v > x).unwrap();
        let smallest_above = list.iter().copied().find(|&v| v > x).unwrap();
        assert_eq!(out[first_above], smallest_above);
    }

    fn platform(p: usize) -> Platform {
        Platform::new(p, 1e-6, 5.0, 1.0, 1e-7, 0.0).unwrap()
    }

    #[test]
    fn two_equal_tasks() {
        let i = Instance::from_weights(Kind::Chain, &[4.0, 4.0], platform(2), 16.0).unwrap();
        let s = approx_chain(&i, 0.1, None, None).unwrap();
        assert!((s.energy - 4.0).abs() < 1e-12);
        assert_eq!(s.x, 8.0);
    }

    #[test]
    fn subset_recovery_matches_weight() {
        let w = [7.0, 3.0, 11.0, 2.0, 5.0, 13.0];
        let i = Instance::from_weights(Kind::Chain, &w, platform(1), 60.0).unwrap();
        let s = approx_chain(&i, 0.1, None, None).unwrap();
        let sum: f64 = s
            .replicated
            .iter()
            .map(|id| i.tasks[i.task_index(id).unwrap()].weight)
            .sum();
        assert_eq!(sum, s.x);
        let exact = solve_exact(&i).unwrap();
        assert!(exact.energy <= s.energy * (1.0 + 1e-12));
        assert!(s.energy <= 1.1 * exact.energy);
    }

    #[test]
    fn eligibility_excludes_tasks() {
        let i = Instance::from_weights(Kind::Chain, &[4.0, 4.0], platform(2), 16.0).unwrap();
        let only_first = |idx: usize, _w: f64| idx == 0;
        let s = approx_chain(&i, 0.1, None, Some(&only_first)).unwrap();
        assert_eq!(s.replicated, vec!["T1".to_string()]);
    }

    #[test]
    fn no_slack_falls_back() {
        let i = Instance::from_weights(Kind::Chain, &[4.0, 4.0], platform(2), 8.0).unwrap();
        let s = approx_chain(&i, 0.1, None, None).unwrap();
        assert!(s.replicated.is_empty());
        assert!(approx_chain(&i, 1.5, None, None).is_err());
    }

    #[test]
    fn eleven_task_residual_within_ratio() {
        let pl = Platform::new(1, 0.01, 1.0, 0.75, 1e-5, 0.0).unwrap();
        let w = [6.0, 6.0, 5.0, 4.0, 4.0, 3.0, 2.0, 1.0, 1.0];
        let i = Instance::from_weights(Kind::Chain, &w, pl, 60.0).unwrap();
        let exact = solve_exact(&i).unwrap();
        assert_eq!(exact.x, 4.0);
        for eps in [0.5, 0.1, 0.01] {
            let s = approx_chain(&i, eps, None, None).unwrap();
            assert!(exact.energy <= s.energy && s.energy <= (1.0 + eps) * exact.energy);
        }
    }
}
