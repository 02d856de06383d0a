//! Two-asset Black–Scholes call portfolio with an analytic value oracle.
//!
//! The outer state is the asset pair at the risk horizon; inner draws
//! simulate the assets to their option maturities under correlated
//! geometric Brownian motion and discount the payoff back to the horizon.
//! The conditional expectation is the Black–Scholes formula, which makes
//! this model the exactness oracle for the whole pipeline.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use super::{standard_normal, ScenarioSet, Simulator};
use crate::special::norm_cdf;
use crate::CoreError;

/// Portfolio and market parameters of the two-asset case.
#[derive(Debug, Clone, PartialEq)]
pub struct BsPortfolioParams {
    /// Option position sizes (positive long, negative short).
    pub positions: [f64; 2],
    /// Spot prices at time 0.
    pub spots: [f64; 2],
    pub strikes: [f64; 2],
    /// Option maturities, measured from time 0.
    pub maturities: [f64; 2],
    pub vols: [f64; 2],
    /// Instantaneous correlation of the two driving Brownian motions.
    pub rho: f64,
    /// Constant risk-free rate.
    pub rate: f64,
    /// Risk horizon `T` at which the portfolio is revalued.
    pub horizon: f64,
}

impl Default for BsPortfolioParams {
    fn default() -> Self {
        BsPortfolioParams {
            positions: [100.0, -50.0],
            spots: [50.0, 80.0],
            strikes: [40.0, 85.0],
            maturities: [2.0, 3.0],
            vols: [0.25, 0.35],
            rho: 0.3,
            rate: 0.04,
            horizon: 1.0,
        }
    }
}

impl BsPortfolioParams {
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.vols.iter().any(|&s| s < 0.0) {
            return Err(CoreError::InvalidArgument("volatilities must be nonnegative".into()));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(CoreError::InvalidArgument("|rho| must be < 1".into()));
        }
        if self.horizon >= self.maturities[0].min(self.maturities[1]) {
            return Err(CoreError::InvalidArgument("horizon must precede both maturities".into()));
        }
        if self.spots.iter().any(|&s| s <= 0.0) {
            return Err(CoreError::InvalidArgument("spots must be positive".into()));
        }
        Ok(())
    }
}

/// European call price with spot `s`, strike `k`, volatility `sigma`,
/// time to maturity `tau` and rate `r`.
pub fn call_price(s: f64, k: f64, sigma: f64, tau: f64, r: f64) -> f64 {
    if k <= 0.0 {
        // forward parity: a zero-strike call is the asset itself
        return s - k * libm::exp(-r * tau);
    }
    if sigma <= 0.0 || tau <= 0.0 {
        let fwd = s * libm::exp(r * tau);
        return libm::exp(-r * tau) * (fwd - k).max(0.0);
    }
    let sq = sigma * libm::sqrt(tau);
    let d1 = (libm::log(s / k) + (r + 0.5 * sigma * sigma) * tau) / sq;
    let d2 = d1 - sq;
    s * norm_cdf(d1) - k * libm::exp(-r * tau) * norm_cdf(d2)
}

/// Simulator for the two-asset portfolio.
#[derive(Debug, Clone)]
pub struct BsSimulator {
    pub params: BsPortfolioParams,
}

impl BsSimulator {
    pub fn new(params: BsPortfolioParams) -> Result<Self, CoreError> {
        params.validate()?;
        Ok(BsSimulator { params })
    }

    /// One inner draw of the discounted portfolio payoff given horizon
    /// prices `z = (z1, z2)`.
    ///
    /// The Brownian increments over `[T, T1]` carry correlation `rho`; the
    /// second asset's remaining leg `[T1, T2]` is independent.
    pub fn sample_payoff(&self, z: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        let p = &self.params;
        let tau1 = p.maturities[0] - p.horizon;
        let tau2 = p.maturities[1] - p.horizon;
        debug_assert!(tau2 >= tau1);
        let g1 = standard_normal(rng);
        let g2 = standard_normal(rng);
        let g3 = standard_normal(rng);

        let w1 = libm::sqrt(tau1) * g1;
        let w2 = libm::sqrt(tau1) * (p.rho * g1 + libm::sqrt(1.0 - p.rho * p.rho) * g2)
            + libm::sqrt(tau2 - tau1) * g3;

        let s1 = z[0] * libm::exp((p.rate - 0.5 * p.vols[0] * p.vols[0]) * tau1 + p.vols[0] * w1);
        let s2 = z[1] * libm::exp((p.rate - 0.5 * p.vols[1] * p.vols[1]) * tau2 + p.vols[1] * w2);

        p.positions[0] * libm::exp(-p.rate * tau1) * (s1 - p.strikes[0]).max(0.0)
            + p.positions[1] * libm::exp(-p.rate * tau2) * (s2 - p.strikes[1]).max(0.0)
    }

    /// Exact portfolio value at the horizon.
    pub fn value(&self, z: &[f64]) -> f64 {
        let p = &self.params;
        let tau1 = p.maturities[0] - p.horizon;
        let tau2 = p.maturities[1] - p.horizon;
        p.positions[0] * call_price(z[0], p.strikes[0], p.vols[0], tau1, p.rate)
            + p.positions[1] * call_price(z[1], p.strikes[1], p.vols[1], tau2, p.rate)
    }

    /// The intrinsic value of the portfolio at the horizon, a natural GP
    /// trend function for this model.
    pub fn intrinsic_value(&self, z: &[f64]) -> f64 {
        let p = &self.params;
        let tau1 = p.maturities[0] - p.horizon;
        let tau2 = p.maturities[1] - p.horizon;
        p.positions[0] * libm::exp(-p.rate * tau1) * (z[0] - p.strikes[0]).max(0.0)
            + p.positions[1] * libm::exp(-p.rate * tau2) * (z[1] - p.strikes[1]).max(0.0)
    }
}

impl Simulator for BsSimulator {
    fn dim(&self) -> usize {
        2
    }

    fn sample(&self, z: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        if z[0] <= 0.0 || z[1] <= 0.0 {
            // lognormal states cannot reach 0; treat as configuration error upstream
            return f64::NAN;
        }
        self.sample_payoff(z, rng)
    }

    fn true_value(&self, z: &[f64]) -> Option<f64> {
        Some(self.value(z))
    }

    /// Fixed draw of `(S1_T, S2_T)` from the bivariate lognormal law.
    fn generate_scenarios(&self, n: usize, seed: u64) -> Result<ScenarioSet, CoreError> {
        if n == 0 {
            return Err(CoreError::InvalidArgument("need at least one scenario".into()));
        }
        let p = &self.params;
        let mut rng = crate::rng::scenario_stream(seed);
        let t = p.horizon;
        let mut pts = DMatrix::zeros(n, 2);
        for i in 0..n {
            let g1 = standard_normal(&mut rng);
            let g2 = standard_normal(&mut rng);
            let e2 = p.rho * g1 + libm::sqrt(1.0 - p.rho * p.rho) * g2;
            pts[(i, 0)] = p.spots[0]
                * libm::exp((p.rate - 0.5 * p.vols[0] * p.vols[0]) * t + p.vols[0] * libm::sqrt(t) * g1);
            pts[(i, 1)] = p.spots[1]
                * libm::exp((p.rate - 0.5 * p.vols[1] * p.vols[1]) * t + p.vols[1] * libm::sqrt(t) * e2);
        }
        ScenarioSet::from_points(pts, seed, "black_scholes")
    }
}
