//! Stationary covariance kernels with per-dimension lengthscales.

use alloc::vec::Vec;

use crate::CoreError;

/// Kernel family for the one-dimensional base correlation `g(h; theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// Matern-5/2: `(1 + sqrt(5)h/theta + 5h^2/(3 theta^2)) exp(-sqrt(5)h/theta)`.
    Matern52,
    /// Squared exponential: `exp(-h^2 / (2 theta^2))`.
    Gaussian,
}

/// A separable stationary kernel `C(z, z') = sigma2 * prod_j g(z_j - z'_j; theta_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// One positive lengthscale per input dimension.
    pub lengthscales: Vec<f64>,
    /// Process variance `sigma^2 > 0`.
    pub variance: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, variance: f64) -> Result<Self, CoreError> {
        let spec = Self { family, lengthscales, variance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.lengthscales.is_empty() {
            return Err(CoreError::InvalidArgument("kernel needs at least one lengthscale".into()));
        }
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(CoreError::InvalidArgument("process variance must be positive and finite".into()));
        }
        if self.lengthscales.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(CoreError::InvalidArgument("lengthscales must be positive and finite".into()));
        }
        Ok(())
    }

    /// Covariance between two points. Errors on dimension mismatch.
    pub fn eval(&self, z: &[f64], z2: &[f64]) -> Result<f64, CoreError> {
        self.validate()?;
        if z.len() != self.dim() {
            return Err(CoreError::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        if z2.len() != self.dim() {
            return Err(CoreError::DimensionMismatch { expected: self.dim(), got: z2.len() });
        }
        Ok(self.variance * self.corr(z, z2))
    }

    /// Correlation `prod_j g(z_j - z'_j; theta_j)` in (0, 1].
    ///
    /// The product is folded so that only a single `exp` is taken per pair,
    /// which matters on the prediction hot path.
    #[inline]
    pub fn corr(&self, z: &[f64], z2: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.dim());
        debug_assert_eq!(z2.len(), self.dim());
        match self.family {
            KernelFamily::Matern52 => {
                const SQRT5: f64 = 2.236_067_977_499_79;
                let mut exp_arg = 0.0;
                let mut poly = 1.0;
                for ((&a, &b), &t) in z.iter().zip(z2).zip(&self.lengthscales) {
                    let u = SQRT5 * libm::fabs(a - b) / t;
                    exp_arg += u;
                    poly *= 1.0 + u + u * u / 3.0;
                }
                poly * libm::exp(-exp_arg)
            }
            KernelFamily::Gaussian => {
                let mut q = 0.0;
                for ((&a, &b), &t) in z.iter().zip(z2).zip(&self.lengthscales) {
                    let h = (a - b) / t;
                    q += h * h;
                }
                libm::exp(-0.5 * q)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use alloc::vec;

    #[test]
    fn kernel_at_zero_lag_is_variance() {
        for fam in [KernelFamily::Matern52, KernelFamily::Gaussian] {
            let k = KernelSpec::new(fam, vec![0.7, 1.3], 2.5).unwrap();
            let z = [0.3, -1.2];
            assert_relative_eq!(k.eval(&z, &z).unwrap(), 2.5, max_relative = 1e-15);
        }
    }

    #[test]
    fn matern52_unit_lag_reference() {
        // (1 + sqrt5 + 5/3) exp(-sqrt5), high-precision arithmetic.
        let k = KernelSpec::new(KernelFamily::Matern52, vec![1.0], 1.0).unwrap();
        assert_relative_eq!(
            k.eval(&[0.0], &[1.0]).unwrap(),
            0.5239941088318203,
            max_relative = 1e-14
        );
    }

    #[test]
    fn gaussian_unit_lag_reference() {
        let k = KernelSpec::new(KernelFamily::Gaussian, vec![1.0], 1.0).unwrap();
        assert_relative_eq!(
            k.eval(&[0.0], &[1.0]).unwrap(),
            0.6065306597126334,
            max_relative = 1e-14
        );
    }

    #[test]
    fn symmetric_and_bounded() {
        let k = KernelSpec::new(KernelFamily::Matern52, vec![0.5, 2.0, 1.1], 3.0).unwrap();
        let a = [0.1, -0.4, 2.2];
        let b = [1.0, 0.0, -0.7];
        let ab = k.eval(&a, &b).unwrap();
        let ba = k.eval(&b, &a).unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0 && ab <= 3.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let k = KernelSpec::new(KernelFamily::Gaussian, vec![1.0, 1.0], 1.0).unwrap();
        assert!(matches!(
            k.eval(&[0.0], &[1.0, 2.0]),
            Err(CoreError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn invalid_hyperparameters_rejected() {
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![1.0, -1.0], 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Matern52, vec![1.0], 0.0).is_err());
    }

    #[test]
    fn gram_matrix_positive_semidefinite() {
        // min eigenvalue of random Gram matrices >= -1e-8 * sigma2.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for fam in [KernelFamily::Matern52, KernelFamily::Gaussian] {
            for trial in 0..4 {
                let d = 1 + trial % 3;
                let n = 50;
                let k = KernelSpec::new(fam, vec![0.8; d], 1.7).unwrap();
                let pts: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
                let mut gram = nalgebra::DMatrix::<f64>::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        gram[(i, j)] = k.eval(&pts[i], &pts[j]).unwrap();
                    }
                }
                let eig = gram.symmetric_eigenvalues();
                let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
                assert!(min >= -1e-8 * 1.7, "min eigenvalue {min} too negative");
            }
        }
    }
}
