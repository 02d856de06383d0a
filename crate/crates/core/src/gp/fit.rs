//! Maximum-likelihood hyperparameter estimation for the GP surrogate.
//!
//! The search runs over `log` lengthscales and `log` process variance with
//! a multi-start simplex; a constant trend coefficient is profiled out in
//! closed form as the generalized-least-squares mean, so it never enters
//! the nonlinear search.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::chol::build_symmetric;
use crate::kernel::KernelSpec;
use crate::optim::{nelder_mead, SimplexOptions};
use crate::CoreError;

use super::factor_with_jitter;

/// Data the likelihood is computed on: training coordinates (row-major),
/// observed means, a fixed trend component and a fixed noise diagonal.
#[derive(Debug, Clone, Copy)]
pub struct FitProblem<'a> {
    pub x: &'a [f64],
    pub dim: usize,
    pub y: &'a [f64],
    /// Fixed trend values per point (all zero under a constant trend).
    pub mu: &'a [f64],
    /// Noise variance of each observed mean (`tau^2 / r`).
    pub delta: &'a [f64],
    /// Profile a constant mean out of the likelihood (constant trend).
    pub profile_constant: bool,
}

impl<'a> FitProblem<'a> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// Search controls. `multi_starts` counts the space-filling grid starts in
/// addition to the caller-supplied initial spec, which is always tried.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub multi_starts: usize,
    pub max_iter: usize,
    /// Lengthscale box in standardized coordinates.
    pub lengthscale_bounds: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { multi_starts: 5, max_iter: 200, lengthscale_bounds: (1e-2, 1e2) }
    }
}

/// Fitted hyperparameters plus diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub kernel: KernelSpec,
    /// Profiled constant trend (0 when the trend is fixed/user-supplied).
    pub beta0: f64,
    pub log_likelihood: f64,
    /// False when every simplex start exhausted its iteration cap; the
    /// best point seen is still returned.
    pub converged: bool,
    pub evals: usize,
}

/// Gaussian marginal log-likelihood of the observed means for a given
/// kernel, with the constant trend (if any) profiled out. Returns the
/// profiled beta0 alongside.
pub fn log_likelihood(p: &FitProblem, kernel: &KernelSpec) -> Result<(f64, f64), CoreError> {
    let m = p.len();
    let a = build_symmetric(m, |i, j| {
        kernel.variance * kernel.corr(p.point(i), p.point(j))
            + if i == j { p.delta[i] } else { 0.0 }
    });
    let (factor, _jit) = factor_with_jitter(&a, kernel.variance)?;

    let yc = DVector::from_fn(m, |i, _| p.y[i] - p.mu[i]);
    let v = factor.solve_vec(&yc);
    // resid' A^{-1} resid with resid = yc - beta0 expands to resid'(v - beta0 u)
    let (beta0, quad) = if p.profile_constant {
        let ones = DVector::from_element(m, 1.0);
        let u = factor.solve_vec(&ones);
        let denom = u.sum();
        let beta0 = if denom.abs() < 1e-300 { 0.0 } else { v.sum() / denom };
        let quad = (0..m).map(|i| (yc[i] - beta0) * (v[i] - beta0 * u[i])).sum::<f64>();
        (beta0, quad)
    } else {
        (0.0, yc.dot(&v))
    };
    let ll = -0.5 * (quad + factor.log_det() + m as f64 * libm::log(2.0 * core::f64::consts::PI));
    Ok((ll, beta0))
}

/// Coordinate ranges of the training points in standardized space; the
/// multi-start grid scales these.
fn coordinate_ranges(p: &FitProblem) -> Vec<f64> {
    let mut lo = vec![f64::INFINITY; p.dim];
    let mut hi = vec![f64::NEG_INFINITY; p.dim];
    for i in 0..p.len() {
        for (j, &v) in p.point(i).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    lo.iter().zip(&hi).map(|(&l, &h)| h - l).collect()
}

/// Maximize the marginal likelihood over lengthscales and process variance.
///
/// The caller's `init` spec is always evaluated and used as the first
/// simplex start, so the returned likelihood can never be below the
/// likelihood at `init`.
pub fn fit_hyperparameters(
    p: &FitProblem,
    init: &KernelSpec,
    opts: &FitOptions,
) -> Result<FitOutcome, CoreError> {
    let m = p.len();
    let d = p.dim;
    if m < 2 {
        return Err(CoreError::DegenerateDesign("need at least 2 training scenarios".into()));
    }
    if init.dim() != d {
        return Err(CoreError::DimensionMismatch { expected: d, got: init.dim() });
    }
    let ranges = coordinate_ranges(p);
    if ranges.iter().all(|&r| r <= 0.0) {
        return Err(CoreError::DegenerateDesign("all training scenarios identical".into()));
    }

    // variance scale for bounds and starts
    let resid_var = {
        let mean = (0..m).map(|i| p.y[i] - p.mu[i]).sum::<f64>() / m as f64;
        let v = (0..m).map(|i| (p.y[i] - p.mu[i] - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0).max(1.0);
        if v > 0.0 {
            v
        } else {
            1.0
        }
    };
    let var_bounds = (1e-9 * resid_var, 1e3 * resid_var);

    let (t_lo, t_hi) = opts.lengthscale_bounds;
    let mut lo = vec![libm::log(t_lo); d];
    lo.push(libm::log(var_bounds.0));
    let mut hi = vec![libm::log(t_hi); d];
    hi.push(libm::log(var_bounds.1));

    let family = init.family;
    let decode = |x: &[f64]| -> KernelSpec {
        KernelSpec {
            family,
            lengthscales: x[..d].iter().map(|&v| libm::exp(v)).collect(),
            variance: libm::exp(x[d]),
        }
    };

    let mut evals = 0usize;
    let mut objective = |x: &[f64]| -> f64 {
        evals += 1;
        match log_likelihood(p, &decode(x)) {
            Ok((ll, _)) => -ll,
            Err(_) => f64::INFINITY,
        }
    };

    // starts: the supplied init, then grid fractions of the coordinate range
    let clamp_box = |x: &mut Vec<f64>| {
        for i in 0..=d {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.multi_starts + 1);
    {
        let mut x0: Vec<f64> = init.lengthscales.iter().map(|&t| libm::log(t)).collect();
        x0.push(libm::log(init.variance));
        clamp_box(&mut x0);
        starts.push(x0);
    }
    for s in 0..opts.multi_starts {
        // log-spaced fractions in [0.1, 2] of each coordinate's range
        let f = if opts.multi_starts == 1 {
            0.45
        } else {
            let t = s as f64 / (opts.multi_starts - 1) as f64;
            0.1 * libm::pow(20.0, t)
        };
        let mut x: Vec<f64> = ranges.iter().map(|&r| libm::log((f * r).max(t_lo))).collect();
        x.push(libm::log(resid_var));
        clamp_box(&mut x);
        starts.push(x);
    }

    let sim_opts = SimplexOptions { max_iter: opts.max_iter, ..Default::default() };
    let mut best_x: Option<Vec<f64>> = None;
    let mut best_f = f64::INFINITY;
    let mut any_converged = false;
    for start in &starts {
        let r = nelder_mead(&mut objective, start, &lo, &hi, &sim_opts);
        any_converged |= r.converged;
        if r.fx < best_f {
            best_f = r.fx;
            best_x = Some(r.x);
        }
    }

    let best_x = best_x.ok_or_else(|| {
        CoreError::DegenerateDesign("likelihood not finite at any evaluated point".into())
    })?;
    let kernel = decode(&best_x);
    let (ll, beta0) = log_likelihood(p, &kernel)?;
    Ok(FitOutcome { kernel, beta0, log_likelihood: ll, converged: any_converged && ll.is_finite(), evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    /// Draw one realization of a zero-mean GP with the given kernel at `x`
    /// and return noisy replication means. The generating process is the
    /// oracle for the recovery test.
    fn synthetic_data(
        x: &[f64],
        kernel: &KernelSpec,
        tau2: f64,
        reps: u32,
        seed: u64,
    ) -> Vec<f64> {
        let m = x.len();
        let cov = build_symmetric(m, |i, j| {
            kernel.variance * kernel.corr(&x[i..=i], &x[j..=j]) + if i == j { 1e-10 } else { 0.0 }
        });
        let f = crate::chol::CholFactor::factor(cov).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = DVector::from_fn(m, |_, _| crate::sim::standard_normal(&mut rng));
        let surface = f.l() * g;
        let se = libm::sqrt(tau2 / reps as f64);
        (0..m).map(|i| surface[i] + se * crate::sim::standard_normal(&mut rng)).collect()
    }

    #[test]
    fn recovers_lengthscale_from_synthetic_gp() {
        let m = 50;
        let x: Vec<f64> = (0..m).map(|i| -2.0 + 4.0 * i as f64 / (m - 1) as f64).collect();
        let truth = KernelSpec::new(KernelFamily::Matern52, vec![0.5], 1.0).unwrap();
        let y = synthetic_data(&x, &truth, 0.25, 200, 42);
        let delta = vec![0.25 / 200.0; m];
        let p = FitProblem { x: &x, dim: 1, y: &y, mu: &vec![0.0; m], delta: &delta, profile_constant: true };
        let init = KernelSpec::new(KernelFamily::Matern52, vec![1.0], 0.5).unwrap();
        let fit = fit_hyperparameters(&p, &init, &FitOptions::default()).unwrap();
        let theta = fit.kernel.lengthscales[0];
        assert!((0.25..=1.0).contains(&theta), "recovered theta = {theta}");
    }

    #[test]
    fn constant_outputs_drive_variance_to_lower_bound() {
        let m = 12;
        let x: Vec<f64> = (0..m).map(|i| i as f64 / 3.0).collect();
        let y = vec![3.25; m];
        let delta = vec![1e-6; m];
        let p = FitProblem { x: &x, dim: 1, y: &y, mu: &vec![0.0; m], delta: &delta, profile_constant: true };
        let init = KernelSpec::new(KernelFamily::Matern52, vec![1.0], 1.0).unwrap();
        let fit = fit_hyperparameters(&p, &init, &FitOptions::default()).unwrap();
        // residual variance collapses to the fallback scale 1.0, whose lower
        // bound is 1e-9
        assert!(fit.kernel.variance <= 1.1e-9, "variance {} not at bound", fit.kernel.variance);
        assert_relative_eq!(fit.beta0, 3.25, max_relative = 1e-9);
    }

    #[test]
    fn never_worse_than_init() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..5 {
            let m = 14;
            let x: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let delta = vec![0.05; m];
            let p = FitProblem {
                x: &x,
                dim: 1,
                y: &y,
                mu: &vec![0.0; m],
                delta: &delta,
                profile_constant: true,
            };
            let init =
                KernelSpec::new(KernelFamily::Matern52, vec![0.3 + 0.4 * trial as f64], 0.8).unwrap();
            let (ll_init, _) = log_likelihood(&p, &init).unwrap();
            let fit = fit_hyperparameters(&p, &init, &FitOptions::default()).unwrap();
            assert!(
                fit.log_likelihood >= ll_init - 1e-9,
                "{} < {}",
                fit.log_likelihood,
                ll_init
            );
        }
    }

    #[test]
    fn degenerate_design_rejected() {
        let x = vec![1.0; 6];
        let y = vec![0.0; 6];
        let delta = vec![0.1; 6];
        let p = FitProblem { x: &x, dim: 1, y: &y, mu: &vec![0.0; 6], delta: &delta, profile_constant: true };
        let init = KernelSpec::new(KernelFamily::Matern52, vec![1.0], 1.0).unwrap();
        assert!(matches!(
            fit_hyperparameters(&p, &init, &FitOptions::default()),
            Err(CoreError::DegenerateDesign(_))
        ));
    }
}
