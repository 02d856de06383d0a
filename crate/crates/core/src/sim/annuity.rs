//! Life annuity under a three-factor CIR short rate and a quadratic-age
//! stochastic mortality model with cohort effect.
//!
//! The 6-D outer state is `(beta, alpha, zeta, kappa1, kappa2, kappa3)`:
//! short rate level, stochastic drift and stochastic volatility of the rate
//! model, plus the three period effects of the mortality model. Rates are
//! simulated by full-truncation Euler; the period effects follow a
//! correlated annual random walk with drift.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use super::{standard_normal, ScenarioSet, Simulator};
use crate::CoreError;

/// Model, contract and discretization parameters.
///
/// The shipped mortality defaults are of plausible magnitude for an aging
/// cohort but are *not* a fit to any national dataset; calibrated drift,
/// covariance and cohort values are expected to come from a parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnuityParams {
    // rate model
    pub beta_bar: f64,
    pub alpha_bar: f64,
    pub zeta_bar: f64,
    pub phi: f64,
    /// Euler step; rounded so that an integer number of steps spans a year.
    pub dt: f64,
    pub beta0: f64,
    pub alpha0: f64,
    pub zeta0: f64,
    // mortality model
    pub kappa0: [f64; 3],
    pub kappa_drift: [f64; 3],
    /// Covariance of the annual random-walk innovations of the period effects.
    pub kappa_cov: [[f64; 3]; 3],
    /// Fixed cohort effect for the insured cohort.
    pub cohort_effect: f64,
    /// Age window the mortality model is parameterized over.
    pub age_low: u32,
    pub age_high: u32,
    /// Mean age of the window (exposed so a calibrated value can be supplied).
    pub x_bar: f64,
    /// Mean of `(x - x_bar)^2` over the window.
    pub sigma2_x: f64,
    // contract
    /// Age of the annuitant at time 0.
    pub age: u32,
    /// Years until the first payment.
    pub start: u32,
    /// Final payment age.
    pub age_cutoff: u32,
    /// Risk horizon `T`.
    pub horizon: f64,
}

impl Default for AnnuityParams {
    fn default() -> Self {
        let (age_low, age_high) = (55u32, 89u32);
        let (x_bar, sigma2_x) = window_moments(age_low, age_high);
        AnnuityParams {
            beta_bar: 0.04,
            alpha_bar: 0.04,
            zeta_bar: 0.02,
            phi: 0.05,
            dt: 0.1,
            beta0: 0.04,
            alpha0: 0.04,
            zeta0: 0.02,
            kappa0: [-2.6, 0.10, 3.0e-4],
            kappa_drift: [-0.02, 5.0e-4, 1.0e-5],
            kappa_cov: [[4.0e-4, 0.0, 0.0], [0.0, 9.0e-6, 0.0], [0.0, 0.0, 4.0e-8]],
            cohort_effect: 0.0,
            age_low,
            age_high,
            x_bar,
            sigma2_x,
            age: 55,
            start: 10,
            age_cutoff: 89,
            horizon: 1.0,
        }
    }
}

/// Mean age and mean squared age deviation over an inclusive age window.
pub fn window_moments(age_low: u32, age_high: u32) -> (f64, f64) {
    let n = (age_high - age_low + 1) as f64;
    let x_bar = (age_low + age_high) as f64 / 2.0;
    let mut s2 = 0.0;
    for a in age_low..=age_high {
        let d = a as f64 - x_bar;
        s2 += d * d;
    }
    (x_bar, s2 / n)
}

impl AnnuityParams {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.dt > 0.0) {
            return Err(CoreError::InvalidArgument("dt must be positive".into()));
        }
        if (self.start as f64) < self.horizon {
            return Err(CoreError::InvalidArgument("payments must not start before the horizon".into()));
        }
        if self.age_high < self.age_low || self.age_cutoff < self.age + self.start {
            return Err(CoreError::InvalidArgument("age window or cutoff empty".into()));
        }
        Ok(())
    }

    /// Mortality rate `q` of an individual at `age` given period effects
    /// `kappa` (inverse-logit of the quadratic age predictor plus cohort).
    pub fn mortality_rate(&self, kappa: &[f64; 3], age: f64) -> f64 {
        let c = age - self.x_bar;
        let lin = kappa[0] + kappa[1] * c + kappa[2] * (c * c - self.sigma2_x) + self.cohort_effect;
        1.0 / (1.0 + libm::exp(-lin))
    }

    /// Years from time 0 to the last payment.
    pub fn last_payment_year(&self) -> u32 {
        self.age_cutoff - self.age
    }

    fn kappa_chol(&self) -> [[f64; 3]; 3] {
        ltri3(&self.kappa_cov)
    }
}

/// Lower-triangular factor of a 3x3 PSD matrix, tolerating zero pivots so
/// that degenerate (e.g. all-zero) covariances are usable in tests.
fn ltri3(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0f64; 3]; 3];
    for j in 0..3 {
        let mut s = a[j][j];
        for k in 0..j {
            s -= l[j][k] * l[j][k];
        }
        let piv = if s > 0.0 { libm::sqrt(s) } else { 0.0 };
        l[j][j] = piv;
        for i in (j + 1)..3 {
            if piv > 0.0 {
                let mut v = a[i][j];
                for k in 0..j {
                    v -= l[i][k] * l[j][k];
                }
                l[i][j] = v / piv;
            }
        }
    }
    l
}

/// CIR-with-stochastic-drift-and-vol state, advanced by full-truncation
/// Euler: truncated values feed every square root and the drift coupling,
/// and the emitted path is the truncated one.
#[derive(Debug, Clone, Copy)]
struct RateState {
    beta: f64,
    alpha: f64,
    zeta: f64,
}

impl RateState {
    #[inline]
    fn step(&mut self, p: &AnnuityParams, dt: f64, rng: &mut ChaCha8Rng) {
        let bp = self.beta.max(0.0);
        let ap = self.alpha.max(0.0);
        let zp = self.zeta.max(0.0);
        let sdt = libm::sqrt(dt);
        let gb = standard_normal(rng);
        let ga = standard_normal(rng);
        let gz = standard_normal(rng);
        self.beta += (p.beta_bar - ap) * dt + libm::sqrt(bp) * zp * sdt * gb;
        self.alpha += (p.alpha_bar - ap) * dt + libm::sqrt(ap) * zp * sdt * ga;
        self.zeta += (p.zeta_bar - zp) * dt + libm::sqrt(zp) * p.phi * sdt * gz;
    }

    #[inline]
    fn truncated(&self) -> (f64, f64, f64) {
        (self.beta.max(0.0), self.alpha.max(0.0), self.zeta.max(0.0))
    }
}

/// Simulator for the annuity contract. `sample` returns the *negated*
/// discounted payment stream so that larger annuity liabilities appear in
/// the left tail of the value distribution, consistent with the rest of
/// the pipeline where value is "more is better".
#[derive(Debug, Clone)]
pub struct AnnuitySimulator {
    pub params: AnnuityParams,
    kappa_chol: [[f64; 3]; 3],
    steps_per_year: u32,
}

impl AnnuitySimulator {
    pub fn new(params: AnnuityParams) -> Result<Self, CoreError> {
        params.validate()?;
        let steps_per_year = libm::round(1.0 / params.dt).max(1.0) as u32;
        let kappa_chol = params.kappa_chol();
        Ok(AnnuitySimulator { params, kappa_chol, steps_per_year })
    }

    fn kappa_step(&self, kappa: &mut [f64; 3], rng: &mut ChaCha8Rng) {
        let g = [standard_normal(rng), standard_normal(rng), standard_normal(rng)];
        for i in 0..3 {
            let mut shock = 0.0;
            for j in 0..=i {
                shock += self.kappa_chol[i][j] * g[j];
            }
            kappa[i] += self.params.kappa_drift[i] + shock;
        }
    }

    /// Survival probabilities `P(t)` for `t = 1..=last_payment_year` along
    /// one simulated path of the period effects, clipped into `[0, 1]`.
    /// `survival[t-1]` holds `P(t)`; the curve is non-increasing because the
    /// cumulative mortality only grows.
    pub fn survival_curve(&self, z: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let p = &self.params;
        let end_year = p.last_payment_year();
        // q(u, age+u) for u = 0 (initial parameters), u = 1 (the scenario
        // state), u >= 2 (simulated annual steps)
        let mut cumulative_q = p.mortality_rate(&p.kappa0, p.age as f64);
        let mut kappa = [z[3], z[4], z[5]];
        let mut survival = Vec::with_capacity(end_year as usize);
        for u in 1..=end_year {
            survival.push((1.0 - cumulative_q).clamp(0.0, 1.0));
            cumulative_q += p.mortality_rate(&kappa, (p.age + u) as f64);
            if u < end_year {
                self.kappa_step(&mut kappa, rng);
            }
        }
        survival
    }

    /// One draw of the summed discounted survival-weighted payments,
    /// conditional on the 6-D state `z` at the horizon. Positive by
    /// construction; the [`Simulator`] impl negates it.
    pub fn sample_payment_value(&self, z: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        let p = &self.params;
        let end_year = p.last_payment_year(); // payments at t = start..=end_year
        let dt = 1.0 / self.steps_per_year as f64;
        let survival = self.survival_curve(z, rng);

        // rate path from the horizon to the last payment date, trapezoid
        // accumulation of the discount integral on the Euler grid
        let mut rate = RateState { beta: z[0], alpha: z[1], zeta: z[2] };
        let mut t = p.horizon;
        let mut integral = 0.0;
        let mut value = 0.0;
        let mut next_payment = p.start.max(libm::ceil(p.horizon) as u32);
        while next_payment <= end_year {
            let target = next_payment as f64;
            while t < target - 1e-9 {
                let b_prev = rate.truncated().0;
                rate.step(p, dt, rng);
                let b_next = rate.truncated().0;
                integral += 0.5 * (b_prev + b_next) * dt;
                t += dt;
            }
            if next_payment >= p.start {
                let p_surv = survival[(next_payment - 1) as usize];
                value += libm::exp(-integral) * p_surv;
            }
            next_payment += 1;
        }
        value
    }
}

impl Simulator for AnnuitySimulator {
    fn dim(&self) -> usize {
        6
    }

    fn sample(&self, z: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        -self.sample_payment_value(z, rng)
    }

    /// Simulate the 6-D state one horizon forward from the time-0 values.
    fn generate_scenarios(&self, n: usize, seed: u64) -> Result<ScenarioSet, CoreError> {
        if n == 0 {
            return Err(CoreError::InvalidArgument("need at least one scenario".into()));
        }
        let p = &self.params;
        let mut rng = crate::rng::scenario_stream(seed);
        let dt = 1.0 / self.steps_per_year as f64;
        let horizon_steps = libm::round(p.horizon / dt) as u32;
        let kappa_steps = libm::round(p.horizon).max(1.0) as u32;
        let mut pts = DMatrix::zeros(n, 6);
        for i in 0..n {
            let mut rate = RateState { beta: p.beta0, alpha: p.alpha0, zeta: p.zeta0 };
            for _ in 0..horizon_steps {
                rate.step(p, dt, &mut rng);
            }
            let (b, a, zt) = rate.truncated();
            let mut kappa = p.kappa0;
            for _ in 0..kappa_steps {
                self.kappa_step(&mut kappa, &mut rng);
            }
            pts[(i, 0)] = b;
            pts[(i, 1)] = a;
            pts[(i, 2)] = zt;
            pts[(i, 3)] = kappa[0];
            pts[(i, 4)] = kappa[1];
            pts[(i, 5)] = kappa[2];
        }
        ScenarioSet::from_points(pts, seed, "annuity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand_chacha::rand_core::SeedableRng;

    fn frozen_params() -> AnnuityParams {
        // all diffusion off, mortality forced to zero
        AnnuityParams {
            beta_bar: 0.0,
            alpha_bar: 0.0,
            zeta_bar: 0.0,
            phi: 0.0,
            beta0: 0.0,
            alpha0: 0.0,
            zeta0: 0.0,
            kappa0: [-1.0e9, 0.0, 0.0],
            kappa_drift: [0.0; 3],
            kappa_cov: [[0.0; 3]; 3],
            ..AnnuityParams::default()
        }
    }

    #[test]
    fn certain_survival_no_discount_counts_payments() {
        let sim = AnnuitySimulator::new(frozen_params()).unwrap();
        let z = [0.0, 0.0, 0.0, -1.0e9, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = sim.sample_payment_value(&z, &mut rng);
        // payments at t = 10..=34: 25 of them
        assert_relative_eq!(v, 25.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_mortality_linear_survival() {
        // q = 0.01 per year, no discounting: sum_{t=10}^{34} (1 - 0.01 t) = 19.5
        let logit001 = libm::log(0.01 / 0.99);
        let mut p = frozen_params();
        p.kappa0 = [logit001, 0.0, 0.0];
        let sim = AnnuitySimulator::new(p).unwrap();
        let z = [0.0, 0.0, 0.0, logit001, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = sim.sample_payment_value(&z, &mut rng);
        assert_relative_eq!(v, 19.5, max_relative = 1e-12);
    }

    #[test]
    fn zero_period_effects_give_half_mortality() {
        // cohort effect of the default is 0, so the logit is exactly 0
        let p = AnnuityParams::default();
        for age in [55.0, 72.0, 89.0] {
            let q = p.mortality_rate(&[0.0, 0.0, 0.0], age);
            assert_relative_eq!(q, 0.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn window_moments_reference() {
        let (x_bar, s2) = window_moments(55, 89);
        assert_relative_eq!(x_bar, 72.0);
        assert_relative_eq!(s2, 102.0);
    }

    #[test]
    fn scenario_positivity_and_determinism() {
        let sim = AnnuitySimulator::new(AnnuityParams::default()).unwrap();
        let a = sim.generate_scenarios(20_000, 9).unwrap();
        let b = sim.generate_scenarios(20_000, 9).unwrap();
        assert_eq!(a.points(), b.points());
        for i in 0..a.len() {
            for j in 0..3 {
                assert!(a.points()[(i, j)] >= 0.0, "negative CIR coordinate");
            }
        }
    }

    #[test]
    fn drift_only_scenarios_are_deterministic() {
        let mut p = AnnuityParams::default();
        p.phi = 0.0;
        p.zeta0 = 0.0;
        p.zeta_bar = 0.0;
        p.kappa_cov = [[0.0; 3]; 3];
        let sim = AnnuitySimulator::new(p.clone()).unwrap();
        let set = sim.generate_scenarios(50, 3).unwrap();
        for i in 1..50 {
            for j in 0..6 {
                assert_relative_eq!(set.points()[(i, j)], set.points()[(0, j)], epsilon = 1e-12);
            }
        }
        // kappa moved by exactly one drift step
        assert_relative_eq!(set.points()[(0, 3)], p.kappa0[0] + p.kappa_drift[0], epsilon = 1e-12);
    }

    #[test]
    fn mean_rate_matches_moment_ode() {
        // with alpha0 = alpha_bar the drift of beta is constant in mean:
        // E[beta_1] = beta0 + (beta_bar - alpha_bar), exact for the Euler
        // scheme as long as truncation never binds
        let mut p = AnnuityParams::default();
        p.beta_bar = 0.06;
        p.alpha_bar = 0.03;
        p.alpha0 = 0.03;
        p.beta0 = 0.05;
        let sim = AnnuitySimulator::new(p.clone()).unwrap();
        let n = 100_000;
        let set = sim.generate_scenarios(n, 17).unwrap();
        let col: Vec<f64> = (0..n).map(|i| set.points()[(i, 0)]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        let se = libm::sqrt(var / n as f64);
        let expected = p.beta0 + (p.beta_bar - p.alpha_bar) * p.horizon;
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected} (se {se})");
    }

    #[test]
    fn survival_monotone_and_discount_bounded() {
        let sim = AnnuitySimulator::new(AnnuityParams::default()).unwrap();
        let set = sim.generate_scenarios(16, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let payments = (sim.params.last_payment_year() - sim.params.start + 1) as f64;
        for i in 0..set.len() {
            let z = set.point(i);
            let curve = sim.survival_curve(&z, &mut rng.clone());
            for w in curve.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "survival must be non-increasing");
            }
            assert!(curve.iter().all(|&s| (0.0..=1.0).contains(&s)));
            // with nonnegative rates the discounted value cannot exceed the
            // undiscounted payment count
            let v = sim.sample_payment_value(&z, &mut rng);
            assert!(v >= 0.0 && v <= payments + 1e-12, "payoff {v} outside [0, {payments}]");
        }
    }
}
