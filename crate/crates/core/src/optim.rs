//! Derivative-free simplex minimization (Nelder–Mead) with box clamping.
//!
//! The marginal-likelihood surface is cheap per evaluation relative to the
//! simulation budget and is optimized over few (d+1) parameters, so a
//! robust simplex search beats gradient plumbing here.

use alloc::vec;
use alloc::vec::Vec;

/// Options controlling a single simplex run.
#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iter: usize,
    /// Stop when the spread of function values across the simplex falls
    /// below `ftol * (1 + |f_best|)`.
    pub ftol: f64,
    /// Initial simplex edge, as a fraction of the box width per coordinate.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_iter: 200, ftol: 1e-9, initial_step: 0.15 }
    }
}

/// Result of a simplex run.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    /// True when the spread criterion was met before `max_iter`.
    pub converged: bool,
}

#[inline]
fn clamp_to(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        if *v < l {
            *v = l;
        }
        if *v > h {
            *v = h;
        }
    }
}

/// Minimize `f` starting from `x0` inside the box `[lo, hi]`.
///
/// Points outside the box are clamped before evaluation, so the returned
/// minimizer always satisfies the bounds. Non-finite objective values are
/// treated as +inf.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let d = x0.len();
    assert!(d > 0 && lo.len() == d && hi.len() == d);
    let mut evals = 0usize;
    let mut eval = |x: &mut Vec<f64>| -> f64 {
        clamp_to(x, lo, hi);
        evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    // initial simplex: x0 plus a step along each coordinate
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(d + 1);
    let mut p0 = x0.to_vec();
    let v0 = eval(&mut p0);
    pts.push(p0);
    vals.push(v0);
    for j in 0..d {
        let mut p = pts[0].clone();
        let width = (hi[j] - lo[j]).max(1e-12);
        let step = opts.initial_step * width;
        // step toward the interior if at the boundary
        p[j] = if p[j] + step <= hi[j] { p[j] + step } else { p[j] - step };
        let v = eval(&mut p);
        pts.push(p);
        vals.push(v);
    }

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut converged = false;
    for _ in 0..opts.max_iter {
        // order the simplex
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(core::cmp::Ordering::Equal));
        let best = idx[0];
        let worst = idx[d];
        let second_worst = idx[d - 1];

        let spread = vals[worst] - vals[best];
        if spread.is_finite() && spread <= opts.ftol * (1.0 + libm::fabs(vals[best])) {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; d];
        for &i in idx.iter().take(d) {
            for (c, &x) in centroid.iter_mut().zip(&pts[i]) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= d as f64;
        }

        let blend = |from: &[f64], coef: f64| -> Vec<f64> {
            centroid.iter().zip(from).map(|(&c, &w)| c + coef * (c - w)).collect()
        };

        // reflection
        let mut xr = blend(&pts[worst], ALPHA);
        let fr = eval(&mut xr);
        if fr < vals[best] {
            // expansion
            let mut xe = blend(&pts[worst], GAMMA);
            let fe = eval(&mut xe);
            if fe < fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
        } else if fr < vals[second_worst] {
            pts[worst] = xr;
            vals[worst] = fr;
        } else {
            // contraction (outside if the reflected point improved on the worst)
            let (mut xc, against) =
                if fr < vals[worst] { (blend(&pts[worst], RHO), fr) } else { (blend(&pts[worst], -RHO), vals[worst]) };
            let fc = eval(&mut xc);
            if fc < against {
                pts[worst] = xc;
                vals[worst] = fc;
            } else {
                // shrink toward the best point
                let anchor = pts[best].clone();
                for i in 0..=d {
                    if i == best {
                        continue;
                    }
                    let mut p: Vec<f64> = anchor
                        .iter()
                        .zip(&pts[i])
                        .map(|(&a, &x)| a + SIGMA * (x - a))
                        .collect();
                    vals[i] = eval(&mut p);
                    pts[i] = p;
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=d {
        if vals[i] < vals[best] {
            best = i;
        }
    }
    SimplexResult { x: pts.swap_remove(best), fx: vals[best], evals, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2);
        let r = nelder_mead(f, &[0.0, 0.0], &[-10.0, -10.0], &[10.0, 10.0], &SimplexOptions::default());
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 1.5, epsilon = 1e-4);
        assert_relative_eq!(r.x[1], -0.5, epsilon = 1e-4);
    }

    #[test]
    fn respects_bounds() {
        // unconstrained minimum at x = -3 sits outside the box
        let f = |x: &[f64]| (x[0] + 3.0).powi(2);
        let r = nelder_mead(f, &[0.5], &[-1.0], &[1.0], &SimplexOptions::default());
        assert_relative_eq!(r.x[0], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn rosenbrock_two_dim() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
        };
        let r = nelder_mead(
            f,
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &SimplexOptions { max_iter: 2000, ..Default::default() },
        );
        assert!(r.fx < 1e-6, "fx = {}", r.fx);
    }

    #[test]
    fn handles_non_finite_objective() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) };
        let r = nelder_mead(f, &[1.0], &[-4.0], &[4.0], &SimplexOptions::default());
        assert_relative_eq!(r.x[0], 2.0, epsilon = 1e-4);
    }
}
