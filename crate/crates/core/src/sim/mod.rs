//! Stochastic samplers `Y(z) = f(z) + eps(z)` for the bundled case studies,
//! plus outer-scenario containers and coordinate standardization.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use crate::CoreError;

pub mod annuity;
pub mod black_scholes;

pub use annuity::{AnnuityParams, AnnuitySimulator};
pub use black_scholes::{BsPortfolioParams, BsSimulator};

/// A fixed set of `N` outer scenarios in `d` dimensions together with the
/// coordinate-wise statistics used to standardize them.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    /// Raw coordinates, one row per scenario.
    points: DMatrix<f64>,
    /// Standardized coordinates `(z - mean) / sd`; constant coordinates map to 0.
    standardized: DMatrix<f64>,
    center: Vec<f64>,
    scale: Vec<f64>,
    constant_coord: Vec<bool>,
    /// Seed used to generate the set (0 for externally supplied sets).
    pub seed: u64,
    /// Human-readable provenance ("black_scholes", "annuity", "external").
    pub model: String,
}

impl ScenarioSet {
    /// Build from raw points (row = scenario), computing standardization
    /// statistics with the sample (n-1) standard deviation.
    pub fn from_points(points: DMatrix<f64>, seed: u64, model: &str) -> Result<Self, CoreError> {
        let n = points.nrows();
        let d = points.ncols();
        if n == 0 || d == 0 {
            return Err(CoreError::DegenerateDesign("empty scenario set".into()));
        }
        let mut center = Vec::with_capacity(d);
        let mut scale = Vec::with_capacity(d);
        let mut constant = Vec::with_capacity(d);
        for j in 0..d {
            let col = points.column(j);
            let mean = col.sum() / n as f64;
            let sd = if n >= 2 {
                libm::sqrt(col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0))
            } else {
                0.0
            };
            constant.push(sd <= 0.0);
            center.push(mean);
            scale.push(if sd > 0.0 { sd } else { 1.0 });
        }
        let mut standardized = points.clone();
        for j in 0..d {
            for i in 0..n {
                standardized[(i, j)] = if constant[j] {
                    0.0
                } else {
                    (points[(i, j)] - center[j]) / scale[j]
                };
            }
        }
        Ok(ScenarioSet {
            points,
            standardized,
            center,
            scale,
            constant_coord: constant,
            seed,
            model: model.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Raw coordinates of scenario `n`.
    pub fn point(&self, n: usize) -> Vec<f64> {
        self.points.row(n).iter().copied().collect()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// Standardized coordinates of scenario `n` as a slice-backed row.
    pub fn std_row(&self, n: usize) -> Vec<f64> {
        self.standardized.row(n).iter().copied().collect()
    }

    pub fn standardized(&self) -> &DMatrix<f64> {
        &self.standardized
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn constant_coords(&self) -> &[bool] {
        &self.constant_coord
    }
}

/// An inner-simulation engine for one model: draws one discounted cashflow
/// realization conditional on the outer state `z`, and optionally knows the
/// exact conditional expectation.
pub trait Simulator: Sync {
    fn dim(&self) -> usize;

    /// One inner replication of the discounted cashflow given `Z_T = z`.
    fn sample(&self, z: &[f64], rng: &mut ChaCha8Rng) -> f64;

    /// The exact value `f(z)` when available in closed form.
    fn true_value(&self, _z: &[f64]) -> Option<f64> {
        None
    }

    /// Simulate the outer scenario set.
    fn generate_scenarios(&self, n: usize, seed: u64) -> Result<ScenarioSet, CoreError>;
}

/// Standard normal draw via Box–Muller on the given stream.
///
/// Two uniforms are consumed per draw, keeping stream consumption
/// deterministic regardless of the produced value.
#[inline]
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    let u2: f64 = rng.gen();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}
