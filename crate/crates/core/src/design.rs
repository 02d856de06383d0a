//! Per-scenario replication bookkeeping: counts, running means and
//! running sample variances, updated in streaming fashion.

use alloc::vec;
use alloc::vec::Vec;

use crate::CoreError;

/// State of the inner-simulation design across all `N` scenarios.
///
/// `var[n]` holds the unbiased sample variance of the outputs at scenario
/// `n` and is only meaningful when `reps[n] >= 2` (see [`DesignState::tau2_hat`]).
#[derive(Debug, Clone)]
pub struct DesignState {
    reps: Vec<u32>,
    mean: Vec<f64>,
    var: Vec<f64>,
    /// Stage counter `k`.
    pub stage: u32,
    /// Inner simulations not yet spent.
    pub remaining_budget: u64,
}

impl DesignState {
    pub fn new(n_scenarios: usize, total_budget: u64) -> Self {
        DesignState {
            reps: vec![0; n_scenarios],
            mean: vec![0.0; n_scenarios],
            var: vec![0.0; n_scenarios],
            stage: 0,
            remaining_budget: total_budget,
        }
    }

    pub fn n_scenarios(&self) -> usize {
        self.reps.len()
    }

    pub fn reps(&self, n: usize) -> u32 {
        self.reps[n]
    }

    pub fn reps_all(&self) -> &[u32] {
        &self.reps
    }

    /// Running sample mean at scenario `n` (0.0 when never sampled).
    pub fn mean(&self, n: usize) -> f64 {
        self.mean[n]
    }

    pub fn means_all(&self) -> &[f64] {
        &self.mean
    }

    /// Empirical variance estimate at `n`, `None` until two replications exist.
    pub fn tau2_hat(&self, n: usize) -> Option<f64> {
        if self.reps[n] >= 2 {
            Some(self.var[n])
        } else {
            None
        }
    }

    /// Number of scenarios with at least one replication.
    pub fn n_sampled(&self) -> usize {
        self.reps.iter().filter(|&&r| r >= 1).count()
    }

    /// Indices with `r >= 1`, ascending.
    pub fn sampled_indices(&self) -> Vec<usize> {
        (0..self.reps.len()).filter(|&n| self.reps[n] >= 1).collect()
    }

    /// Total replications spent so far.
    pub fn total_reps(&self) -> u64 {
        self.reps.iter().map(|&r| r as u64).sum()
    }

    /// Mean of the empirical variances over scenarios where they exist.
    pub fn mean_tau2(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut cnt = 0usize;
        for n in 0..self.reps.len() {
            if self.reps[n] >= 2 {
                sum += self.var[n];
                cnt += 1;
            }
        }
        if cnt > 0 {
            Some(sum / cnt as f64)
        } else {
            None
        }
    }

    /// Fold a fresh batch of outputs at scenario `n` into the running
    /// statistics using the pooled-mean and pooled-variance recursions; the
    /// result is identical (to rounding) to recomputing from the raw sample.
    pub fn update_scenario(&mut self, n: usize, outputs: &[f64]) -> Result<(), CoreError> {
        if outputs.is_empty() {
            return Ok(());
        }
        if outputs.iter().any(|y| !y.is_finite()) {
            return Err(CoreError::SimulationFailure { scenario: n, stage: self.stage });
        }
        let r_new = outputs.len() as u32;
        let mean_new = outputs.iter().sum::<f64>() / r_new as f64;
        let var_new = if r_new >= 2 {
            outputs.iter().map(|y| (y - mean_new) * (y - mean_new)).sum::<f64>()
                / (r_new as f64 - 1.0)
        } else {
            0.0
        };

        let r_old = self.reps[n];
        if r_old == 0 {
            self.mean[n] = mean_new;
            self.var[n] = var_new;
            self.reps[n] = r_new;
            return Ok(());
        }

        let (ro, rn) = (r_old as f64, r_new as f64);
        let mean_old = self.mean[n];
        let pooled_mean = (ro * mean_old + rn * mean_new) / (ro + rn);
        // pooled unbiased variance: within-group sums of squares plus the
        // between-group correction term
        let pooled_var = ((ro - 1.0) * self.var[n]
            + (rn - 1.0) * var_new
            + (ro * rn / (ro + rn)) * (mean_old - mean_new) * (mean_old - mean_new))
            / (ro + rn - 1.0);

        self.mean[n] = pooled_mean;
        self.var[n] = pooled_var;
        self.reps[n] = r_old + r_new;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn batch_stats(ys: &[f64]) -> (f64, f64) {
        let n = ys.len() as f64;
        let m = ys.iter().sum::<f64>() / n;
        let v = if ys.len() >= 2 {
            ys.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (m, v)
    }

    #[test]
    fn pooled_mean_arithmetic() {
        // old (r=2, mean 1) + new (r=2, mean 3) -> mean 2
        let mut d = DesignState::new(1, 100);
        d.update_scenario(0, &[0.5, 1.5]).unwrap();
        d.update_scenario(0, &[2.5, 3.5]).unwrap();
        assert_relative_eq!(d.mean(0), 2.0, max_relative = 1e-15);
        assert_eq!(d.reps(0), 4);
    }

    #[test]
    fn pooled_variance_matches_direct() {
        // {0,2} then {2,4}: pooled sample {0,2,2,4} has variance 8/3
        let mut d = DesignState::new(1, 100);
        d.update_scenario(0, &[0.0, 2.0]).unwrap();
        assert_relative_eq!(d.tau2_hat(0).unwrap(), 2.0, max_relative = 1e-15);
        d.update_scenario(0, &[2.0, 4.0]).unwrap();
        assert_relative_eq!(d.tau2_hat(0).unwrap(), 8.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn single_observation_flags_variance_undefined() {
        let mut d = DesignState::new(2, 10);
        d.update_scenario(1, &[4.2]).unwrap();
        assert_eq!(d.reps(1), 1);
        assert_relative_eq!(d.mean(1), 4.2);
        assert!(d.tau2_hat(1).is_none());
        assert_eq!(d.n_sampled(), 1);
    }

    #[test]
    fn rejects_non_finite() {
        let mut d = DesignState::new(1, 10);
        assert!(d.update_scenario(0, &[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn streaming_equals_batch_over_random_splits() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let total: usize = rng.gen_range(2..40);
            let ys: Vec<f64> = (0..total).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut d = DesignState::new(1, 1000);
            let mut fed = 0;
            while fed < total {
                let take = rng.gen_range(1..=(total - fed));
                d.update_scenario(0, &ys[fed..fed + take]).unwrap();
                fed += take;
            }
            let (m, v) = batch_stats(&ys);
            assert_relative_eq!(d.mean(0), m, epsilon = 1e-10);
            assert_relative_eq!(d.tau2_hat(0).unwrap(), v, epsilon = 1e-10, max_relative = 1e-10);
        }
    }
}
