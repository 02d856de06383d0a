//! Gaussian-process surrogate of the scenario-to-value map with
//! replication-aware heteroskedastic noise.
//!
//! The surrogate is bound to a fixed scenario set and is queried by
//! scenario index, which matches how every consumer works: the procedure
//! never predicts anywhere except on the scenario set itself. Posterior
//! mean and variance come from the usual kriging equations on the sampled
//! subset, with the noise diagonal `tau^2(z^n) / r^n` reflecting how many
//! inner replications each scenario has received.
//!
//! Two update paths avoid refactorizing the covariance between stages:
//! a newly sampled scenario grows the Cholesky factor by one row, and a
//! replication increase at an existing scenario perturbs one diagonal
//! entry by a rank-one update. Hyperparameters stay frozen across both;
//! refits happen on the engine's schedule.

use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::chol::{build_symmetric, CholFactor};
use crate::design::DesignState;
use crate::kernel::KernelSpec;
use crate::CoreError;

pub mod fit;
pub mod noise;

pub use fit::{fit_hyperparameters, FitOptions, FitOutcome, FitProblem};
pub use noise::{NoiseModel, NoiseState};

/// Trend specification for the surrogate mean.
#[derive(Debug, Clone, PartialEq)]
pub enum TrendSpec {
    /// Constant mean, profiled out of the likelihood during fitting.
    Constant,
    /// Deterministic user-supplied trend, realized as its values over the
    /// scenario set (one per scenario).
    Precomputed(Vec<f64>),
}

/// Immutable per-run context: standardized scenario coordinates and the
/// fixed trend component at each scenario.
#[derive(Debug, Clone)]
pub struct GpContext {
    x: Vec<f64>,
    dim: usize,
    mu: Vec<f64>,
}

impl GpContext {
    pub fn new(x: Vec<f64>, dim: usize, mu: Vec<f64>) -> Self {
        assert!(dim > 0 && x.len() == mu.len() * dim, "coordinate/trend size mismatch");
        GpContext { x, dim, mu }
    }

    pub fn from_scenarios(scenarios: &crate::sim::ScenarioSet, trend: &TrendSpec) -> Self {
        let n = scenarios.len();
        let d = scenarios.dim();
        let std = scenarios.standardized();
        let mut x = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..d {
                x.push(std[(i, j)]);
            }
        }
        let mu = match trend {
            TrendSpec::Constant => alloc::vec![0.0; n],
            TrendSpec::Precomputed(values) => {
                assert_eq!(values.len(), n, "trend values must cover every scenario");
                values.clone()
            }
        };
        GpContext { x, dim: d, mu }
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, n: usize) -> &[f64] {
        &self.x[n * self.dim..(n + 1) * self.dim]
    }

    #[inline]
    pub fn mu(&self, n: usize) -> f64 {
        self.mu[n]
    }
}

/// Relative jitter added to the noisy covariance diagonal, escalated
/// tenfold on factorization failure up to the cap.
const JITTER_START: f64 = 1e-8;
const JITTER_CAP: f64 = 1e-4;

pub(crate) fn factor_with_jitter(
    a: &DMatrix<f64>,
    sigma2: f64,
) -> Result<(CholFactor, f64), CoreError> {
    let mut jitter = JITTER_START * sigma2;
    let cap = JITTER_CAP * sigma2;
    loop {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(f) = CholFactor::factor(m) {
            return Ok((f, jitter));
        }
        jitter *= 10.0;
        if jitter > cap * (1.0 + 1e-12) {
            return Err(CoreError::IllConditioned { jitter });
        }
    }
}

/// The fitted surrogate: kernel + trend + noise model + factorized
/// covariance over the sampled scenarios.
///
/// Immutable for readers; [`GpSurrogate::apply_update`] and rebuilds are
/// single-writer operations.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    ctx: Arc<GpContext>,
    pub kernel: KernelSpec,
    pub beta0: f64,
    pub noise: NoiseState,
    train: Vec<usize>,
    /// scenario index -> position in `train`, -1 when unsampled
    pos: Vec<i32>,
    chol: CholFactor,
    alpha: DVector<f64>,
    resid: DVector<f64>,
    delta: Vec<f64>,
    jitter: f64,
    /// Full refactorizations forced by failed incremental updates.
    pub fallback_rebuilds: u32,
}

impl GpSurrogate {
    /// Build the surrogate over all scenarios with `r >= 1`.
    pub fn build(
        ctx: Arc<GpContext>,
        kernel: KernelSpec,
        beta0: f64,
        noise: NoiseState,
        design: &DesignState,
    ) -> Result<Self, CoreError> {
        kernel.validate()?;
        if kernel.dim() != ctx.dim() {
            return Err(CoreError::DimensionMismatch { expected: ctx.dim(), got: kernel.dim() });
        }
        let train = design.sampled_indices();
        if train.is_empty() {
            return Err(CoreError::DegenerateDesign("no sampled scenarios".into()));
        }
        let m = train.len();
        let delta: Vec<f64> =
            train.iter().map(|&n| noise.tau2(design, n) / design.reps(n) as f64).collect();
        let a = build_symmetric(m, |i, j| {
            kernel.variance * kernel.corr(ctx.point(train[i]), ctx.point(train[j]))
                + if i == j { delta[i] } else { 0.0 }
        });
        let (chol, jitter) = factor_with_jitter(&a, kernel.variance)?;
        let resid =
            DVector::from_fn(m, |i, _| design.mean(train[i]) - beta0 - ctx.mu(train[i]));
        let alpha = chol.solve_vec(&resid);
        let mut pos = alloc::vec![-1i32; ctx.len()];
        for (t, &n) in train.iter().enumerate() {
            pos[n] = t as i32;
        }
        Ok(GpSurrogate {
            ctx,
            kernel,
            beta0,
            noise,
            train,
            pos,
            chol,
            alpha,
            resid,
            delta,
            jitter,
            fallback_rebuilds: 0,
        })
    }

    pub fn ctx(&self) -> &Arc<GpContext> {
        &self.ctx
    }

    /// Sampled scenario indices backing the factorization.
    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    pub fn train_pos(&self, scenario: usize) -> Option<usize> {
        let p = self.pos[scenario];
        if p >= 0 {
            Some(p as usize)
        } else {
            None
        }
    }

    pub fn sigma2(&self) -> f64 {
        self.kernel.variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Current noise diagonal (train order).
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// Prior covariance row of scenario `q` against the training set.
    pub fn cov_row_train(&self, q: usize) -> DVector<f64> {
        let zq = self.ctx.point(q);
        DVector::from_fn(self.train.len(), |t, _| {
            self.kernel.variance * self.kernel.corr(zq, self.ctx.point(self.train[t]))
        })
    }

    /// `(C + Delta)^{-1} v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve_vec(v)
    }

    /// Column `t` of `(C + Delta)^{-1}` in train coordinates.
    pub fn inverse_column(&self, t: usize) -> DVector<f64> {
        self.chol.inverse_column(t)
    }

    /// Posterior mean and variance at one scenario.
    pub fn posterior_one(&self, q: usize) -> (f64, f64) {
        let c = self.cov_row_train(q);
        let mean = self.beta0 + self.ctx.mu(q) + c.dot(&self.alpha);
        let mut v = DMatrix::from_column_slice(self.train.len(), 1, c.as_slice());
        self.chol.solve_lower_mut(&mut v);
        let s2 = self.kernel.variance - v.column(0).norm_squared();
        (mean, s2.clamp(0.0, self.kernel.variance))
    }

    /// Posterior means and variances at the given scenarios.
    pub fn posterior(&self, queries: &[usize]) -> (Vec<f64>, Vec<f64>) {
        const CHUNK: usize = 512;
        let chunks: Vec<&[usize]> = queries.chunks(CHUNK).collect();
        let eval = |chunk: &&[usize]| -> (Vec<f64>, Vec<f64>) {
            let m = self.train.len();
            let mut cq = DMatrix::zeros(m, chunk.len());
            for (col, &q) in chunk.iter().enumerate() {
                let zq = self.ctx.point(q);
                for t in 0..m {
                    cq[(t, col)] = self.kernel.variance
                        * self.kernel.corr(zq, self.ctx.point(self.train[t]));
                }
            }
            let means: Vec<f64> = chunk
                .iter()
                .enumerate()
                .map(|(col, &q)| {
                    self.beta0 + self.ctx.mu(q) + cq.column(col).dot(&self.alpha)
                })
                .collect();
            self.chol.solve_lower_mut(&mut cq);
            let vars: Vec<f64> = (0..chunk.len())
                .map(|col| {
                    (self.kernel.variance - cq.column(col).norm_squared())
                        .clamp(0.0, self.kernel.variance)
                })
                .collect();
            (means, vars)
        };

        #[cfg(feature = "parallel")]
        let per_chunk: Vec<(Vec<f64>, Vec<f64>)> = {
            use rayon::prelude::*;
            chunks.par_iter().map(eval).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let per_chunk: Vec<(Vec<f64>, Vec<f64>)> = chunks.iter().map(eval).collect();

        let mut means = Vec::with_capacity(queries.len());
        let mut vars = Vec::with_capacity(queries.len());
        for (m, v) in per_chunk {
            means.extend(m);
            vars.extend(v);
        }
        (means, vars)
    }

    /// Posterior means only (skips the triangular solves).
    pub fn posterior_mean(&self, queries: &[usize]) -> Vec<f64> {
        queries
            .iter()
            .map(|&q| {
                let c = self.cov_row_train(q);
                self.beta0 + self.ctx.mu(q) + c.dot(&self.alpha)
            })
            .collect()
    }

    /// Posterior covariance matrix over the given scenarios:
    /// `C_qq - c_q (C + Delta)^{-1} c_q^T`, symmetric PSD up to jitter.
    pub fn posterior_cov(&self, queries: &[usize]) -> DMatrix<f64> {
        let m = self.train.len();
        let k = queries.len();
        let mut cq = DMatrix::zeros(m, k);
        for (col, &q) in queries.iter().enumerate() {
            let zq = self.ctx.point(q);
            for t in 0..m {
                cq[(t, col)] =
                    self.kernel.variance * self.kernel.corr(zq, self.ctx.point(self.train[t]));
            }
        }
        self.chol.solve_lower_mut(&mut cq);
        let mut out = build_symmetric(k, |i, j| {
            self.kernel.variance
                * self.kernel.corr(self.ctx.point(queries[i]), self.ctx.point(queries[j]))
        });
        // out -= V^T V
        for i in 0..k {
            for j in 0..=i {
                let dot = cq.column(i).dot(&cq.column(j));
                out[(i, j)] -= dot;
                out[(j, i)] = out[(i, j)];
            }
        }
        out
    }

    /// Posterior covariance between two scenarios.
    pub fn pair_cov(&self, a: usize, b: usize) -> f64 {
        let ca = self.cov_row_train(a);
        let cb = self.cov_row_train(b);
        let w = self.chol.solve_vec(&cb);
        self.kernel.variance * self.kernel.corr(self.ctx.point(a), self.ctx.point(b)) - ca.dot(&w)
    }

    /// Next-step kriging variance at `target` assuming `add` replications
    /// are placed at `candidate`, everything else frozen.
    ///
    /// Never exceeds the current posterior variance (up to roundoff) since
    /// extra replications can only remove noise.
    pub fn lookahead_variance(
        &self,
        design: &DesignState,
        target: usize,
        candidate: usize,
        add: u32,
    ) -> f64 {
        let (_, s2_t) = self.posterior_one(target);
        if add == 0 {
            return s2_t;
        }
        let tau2 = self.noise.tau2(design, candidate);
        match self.train_pos(candidate) {
            Some(pm) => {
                let r = design.reps(candidate) as f64;
                let delta_new = tau2 / (r + add as f64);
                let gamma = self.delta[pm] - delta_new;
                if gamma == 0.0 {
                    return s2_t;
                }
                let q = self.chol.inverse_column(pm);
                let denom = (1.0 - gamma * q[pm]).max(1e-300);
                let ct = self.cov_row_train(target);
                let proj = ct.dot(&q);
                (s2_t - gamma * proj * proj / denom).clamp(0.0, s2_t)
            }
            None => {
                let (_, s2_m) = self.posterior_one(candidate);
                let denom = s2_m + tau2 / add as f64;
                let cov = self.pair_cov(target, candidate);
                (s2_t - cov * cov / denom).clamp(0.0, s2_t)
            }
        }
    }

    /// Fold new simulation output into the surrogate without refitting:
    /// `changed` lists the scenarios whose design statistics moved this
    /// stage. Falls back to a full refactorization when an incremental
    /// step is numerically rejected.
    pub fn apply_update(
        &mut self,
        design: &DesignState,
        changed: &[usize],
    ) -> Result<(), CoreError> {
        if changed.is_empty() {
            return Ok(());
        }
        let mut sorted: Vec<usize> = changed.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        for &n in &sorted {
            debug_assert!(design.reps(n) >= 1);
            let r = design.reps(n) as f64;
            let delta_new = self.noise.tau2(design, n) / r;
            match self.train_pos(n) {
                Some(t) => {
                    let bump = delta_new - self.delta[t];
                    if self.chol.bump_diagonal(t, bump).is_err() {
                        log::warn!("diagonal downdate rejected at scenario {n}; refactorizing");
                        return self.full_rebuild(design);
                    }
                    self.delta[t] = delta_new;
                    self.resid[t] = design.mean(n) - self.beta0 - self.ctx.mu(n);
                }
                None => {
                    let cross = self.cov_row_train(n);
                    let diag = self.kernel.variance + delta_new + self.jitter;
                    if self.chol.append(cross.as_slice(), diag).is_err() {
                        log::warn!("factor growth rejected at scenario {n}; refactorizing");
                        return self.full_rebuild(design);
                    }
                    self.pos[n] = self.train.len() as i32;
                    self.train.push(n);
                    self.delta.push(delta_new);
                    self.resid = self.resid.clone().insert_row(
                        self.resid.len(),
                        design.mean(n) - self.beta0 - self.ctx.mu(n),
                    );
                }
            }
        }
        self.alpha = self.chol.solve_vec(&self.resid);
        debug_assert_eq!(self.train.len(), design.n_sampled());
        Ok(())
    }

    /// Refactorize from scratch with the current hyperparameters.
    pub fn full_rebuild(&mut self, design: &DesignState) -> Result<(), CoreError> {
        let rebuilt = GpSurrogate::build(
            self.ctx.clone(),
            self.kernel.clone(),
            self.beta0,
            self.noise.clone(),
            design,
        )?;
        let fallbacks = self.fallback_rebuilds + 1;
        *self = rebuilt;
        self.fallback_rebuilds = fallbacks;
        Ok(())
    }
}
