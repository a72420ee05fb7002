//! Exact probabilities, seeding and JSON helpers shared by the reports.

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

/// Exact probability.
pub type Prob = Ratio<i128>;

/// Version tag carried by every JSON report line.
pub const SCHEMA: u32 = 1;

pub fn prob(num: i128, den: i128) -> Prob {
    Ratio::new(num, den)
}

pub fn zero() -> Prob {
    Prob::zero()
}

pub fn one() -> Prob {
    Prob::one()
}

pub fn to_f64(p: &Prob) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

/// `p^e` exactly.
pub fn pow(p: &Prob, e: u32) -> Prob {
    (0..e).fold(Prob::one(), |acc, _| acc * p)
}

/// `base^-e` for a positive integer base.
pub fn inv_pow(base: u64, e: u32) -> Prob {
    Ratio::new(1, (base as i128).pow(e))
}

/// JSON form `{num, den, float}`.
pub fn prob_json(p: &Prob) -> Value {
    json!({ "num": p.numer().to_string(), "den": p.denom().to_string(), "float": to_f64(p) })
}

/// Mixes a master seed and a trial index into an independent per-trial seed
/// (splitmix64 finalizer), so results do not depend on scheduling.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master
        .wrapping_add(trial.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(master, trial))
}

/// Estimate of a Bernoulli rate with a three-standard-error half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub hits: u64,
    pub trials: u64,
}

impl Estimate {
    pub fn mean(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.mean();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn half_width(&self) -> f64 {
        3.0 * self.std_err()
    }

    pub fn json(&self) -> Value {
        json!({ "hits": self.hits, "trials": self.trials, "mean": self.mean(), "half_width": self.half_width() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_per_trial() {
        let a: Vec<u64> = (0..100).map(|i| trial_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(a.len(), b.len());
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
    }

    #[test]
    fn exact_helpers() {
        assert_eq!(pow(&prob(1, 2), 3), prob(1, 8));
        assert_eq!(inv_pow(3, 2), prob(1, 9));
        assert_eq!(prob_json(&prob(2, 4))["den"], "2");
    }
}
