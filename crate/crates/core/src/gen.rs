//! Seeded instance generation and named presets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{compute_c, Instance, Kind, Platform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDist {
    /// Integers drawn uniformly from `lo..=hi`.
    UniformInt { lo: u32, hi: u32 },
    /// Reals drawn uniformly from `[lo, hi)`.
    UniformReal { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub kind: Kind,
    pub n: usize,
    pub p: usize,
    pub weights: WeightDist,
    /// Chains get `D = factor * S / frel`, independent tasks
    /// `D = factor * S / (p frel)`.
    pub deadline_factor: f64,
    pub fmin: f64,
    pub fmax: f64,
    pub frel: f64,
    pub lambda0: f64,
    pub d: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            kind: Kind::Chain,
            n: 10,
            p: 1,
            weights: WeightDist::UniformInt { lo: 1, hi: 50 },
            deadline_factor: 1.5,
            fmin: 0.01,
            fmax: 2.0,
            frel: 1.0,
            lambda0: 1e-5,
            d: 0.0,
            seed: 0,
        }
    }
}

/// Deadline factors sitting on the polynomial-case thresholds for chains:
/// no slack, the re-execution threshold `(1+c)/c`, and the replication
/// threshold 2.
pub fn threshold_factors() -> [f64; 3] {
    let c = compute_c();
    [1.0, (1.0 + c) / c, 2.0]
}

pub fn draw_weights(dist: WeightDist, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    match dist {
        WeightDist::UniformInt { lo, hi } => {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidInstance(format!("bad integer weight range {lo}..={hi}")));
            }
            Ok((0..n).map(|_| rng.gen_range(lo..=hi) as f64).collect())
        }
        WeightDist::UniformReal { lo, hi } => {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::InvalidInstance(format!("bad real weight range [{lo}, {hi})")));
            }
            Ok((0..n).map(|_| rng.gen_range(lo..hi)).collect())
        }
    }
}

pub fn generate(cfg: &GenConfig) -> Result<Instance> {
    if cfg.n == 0 {
        return Err(Error::InvalidInstance("n must be positive".into()));
    }
    if !(cfg.deadline_factor > 0.0 && cfg.deadline_factor.is_finite()) {
        return Err(Error::InvalidInstance("deadline factor must be positive".into()));
    }
    let platform = Platform::new(cfg.p, cfg.fmin, cfg.fmax, cfg.frel, cfg.lambda0, cfg.d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights = draw_weights(cfg.weights, cfg.n, &mut rng)?;
    let s: f64 = weights.iter().sum();
    let deadline = match cfg.kind {
        Kind::Chain => cfg.deadline_factor * s / cfg.frel,
        Kind::Independent => cfg.deadline_factor * s / (cfg.p as f64 * cfg.frel),
    };
    Instance::from_weights(cfg.kind, &weights, platform, deadline)
}

/// Eleven tasks on six processors with `frel = 3/4 fmax`.
pub fn eleven_tasks() -> Instance {
    let w = [15.0, 11.25, 6.0, 6.0, 5.0, 4.0, 4.0, 3.0, 2.0, 1.0, 1.0];
    let pl = Platform::new(6, 0.1, 1.0, 0.75, 1e-5, 0.0).expect("valid platform");
    Instance::from_weights(Kind::Independent, &w, pl, 15.0).expect("valid instance")
}

/// Three tasks on two processors where the optimum replicates the smallest
/// task at two different speeds.
pub fn unequal_replicas() -> Instance {
    let pl = Platform::new(2, 0.01, 1.0, 1.0, 1e-5, 0.0).expect("valid platform");
    Instance::from_weights(Kind::Independent, &[5.0, 3.0, 1.0], pl, 6.4).expect("valid instance")
}

pub const TWO_PARTITION_DEFAULT: [f64; 6] = [3.0, 1.0, 1.0, 2.0, 2.0, 1.0];

/// Two processors, `D = 1` and every speed pinned to `S/2`: a feasible
/// schedule is exactly an equal-sum split of `values`.
pub fn two_partition(values: &[f64]) -> Result<Instance> {
    if values.is_empty() || values.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidInstance("two-partition needs positive values".into()));
    }
    let half = values.iter().sum::<f64>() / 2.0;
    let pl = Platform::new(2, half, half, half, 1e-5, 0.0)?;
    Instance::from_weights(Kind::Independent, values, pl, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_instance() {
        let cfg = GenConfig {
            n: 10,
            deadline_factor: 1.5,
            seed: 7,
            ..GenConfig::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a.to_json(), generate(&cfg).unwrap().to_json());
        assert!((a.deadline - 1.5 * a.total_weight()).abs() < 1e-12);
        assert!(a.integer_weights);
        let other = generate(&GenConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.weights(), other.weights());
    }

    #[test]
    fn independent_deadline_scales_with_p() {
        let cfg = GenConfig {
            kind: Kind::Independent,
            p: 4,
            deadline_factor: 2.0,
            weights: WeightDist::UniformReal { lo: 0.5, hi: 3.0 },
            ..GenConfig::default()
        };
        let i = generate(&cfg).unwrap();
        assert!((i.deadline - 2.0 * i.total_weight() / 4.0).abs() < 1e-12);
        assert!(!i.integer_weights);
    }

    #[test]
    fn presets() {
        let f = eleven_tasks();
        assert_eq!((f.n(), f.platform.p), (11, 6));
        assert_eq!(f.platform.frel, 0.75 * f.platform.fmax);
        let t = two_partition(&TWO_PARTITION_DEFAULT).unwrap();
        assert_eq!(t.platform.fmin, 5.0);
        assert_eq!(t.platform.fmax, 5.0);
        assert_eq!(t.deadline, 1.0);
        assert!(two_partition(&[]).is_err());
        assert_eq!(unequal_replicas().deadline, 6.4);
        let [a, b, c] = threshold_factors();
        assert_eq!((a, c), (1.0, 2.0));
        assert!((b - 4.524).abs() < 1e-3);
    }

    #[test]
    fn bad_ranges_rejected() {
        let cfg = GenConfig {
            weights: WeightDist::UniformInt { lo: 5, hi: 2 },
            ..GenConfig::default()
        };
        assert!(generate(&cfg).is_err());
    }
}
