//! Restarted GMRES on flat vectors.
//!
//! [`gmres_measured`] runs the Arnoldi process on pairs `(q, Cq)`: iterates
//! and the operator live in a "potential" space, while inner products,
//! residuals and the stopping test use the measured images `Cq`. When the
//! operator commutes with `C` this is exactly GMRES on the measured
//! unknowns, and the solution is returned as a potential so that its image is
//! an exact `C`-image. [`gmres`] is the ordinary method (`C = I`).

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Absolute bound on the Euclidean residual norm.
    pub tolerance: f64,
    /// Krylov dimension per cycle.
    pub restart: usize,
    /// Bound on the total number of Arnoldi steps.
    pub max_iterations: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            restart: 30,
            max_iterations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub solution: Vec<f64>,
    /// Arnoldi steps taken over all cycles.
    pub iterations: usize,
    /// True residual norm of the returned solution.
    pub residual: f64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KrylovError {
    #[error("GMRES breakdown: non-finite value at iteration {iteration}")]
    NumericalBreakdown { iteration: usize },
    #[error("GMRES did not reach {tolerance:e} in {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure {
        best: Vec<f64>,
        residual: f64,
        iterations: usize,
        tolerance: f64,
    },
    #[error("invalid GMRES configuration: {0}")]
    InvalidConfig(String),
}

/// Loss-of-orthogonality threshold that triggers a second Gram-Schmidt pass.
const REORTH_THRESHOLD: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Solves `A x = b` with `x0` as the initial guess.
pub fn gmres<A>(mut apply: A, rhs: &[f64], x0: &[f64], cfg: &GmresConfig) -> Result<GmresOutcome, KrylovError>
where
    A: FnMut(&[f64], &mut [f64]),
{
    gmres_measured(
        |q, _mq, out| apply(q, out),
        |q, out| out.copy_from_slice(q),
        rhs,
        x0,
        cfg,
    )
}

/// Solves `C(B x) = C b` for `x`, minimising `‖C(b − B x)‖₂`.
///
/// `apply(q, cq, out)` writes `B q` and receives `cq = C q` so it can reuse it;
/// `measure(q, out)` writes `C q`. `B` must commute with `C` in the sense that
/// `C B = A C` for the operator `A` being inverted on measured vectors.
pub fn gmres_measured<A, M>(
    mut apply: A,
    mut measure: M,
    rhs: &[f64],
    x0: &[f64],
    cfg: &GmresConfig,
) -> Result<GmresOutcome, KrylovError>
where
    A: FnMut(&[f64], &[f64], &mut [f64]),
    M: FnMut(&[f64], &mut [f64]),
{
    if !(cfg.tolerance > 0.0) {
        return Err(KrylovError::InvalidConfig("tolerance must be positive".into()));
    }
    if cfg.restart == 0 {
        return Err(KrylovError::InvalidConfig("restart must be at least 1".into()));
    }
    if rhs.len() != x0.len() {
        return Err(KrylovError::InvalidConfig("rhs and x0 lengths differ".into()));
    }
    if !all_finite(rhs) || !all_finite(x0) {
        return Err(KrylovError::NumericalBreakdown { iteration: 0 });
    }
    let n = rhs.len();
    let k = cfg.restart;
    let mut x = x0.to_vec();
    let mut iterations = 0usize;

    // Scratch.
    let mut mx = vec![0.0; n];
    let mut bx = vec![0.0; n];
    let mut r_pot = vec![0.0; n];
    let mut r = vec![0.0; n];

    let residual_of = |x: &[f64], mx: &mut [f64], bx: &mut [f64], r_pot: &mut [f64], r: &mut [f64],
                           apply: &mut A, measure: &mut M| {
        measure(x, mx);
        apply(x, mx, bx);
        for i in 0..n {
            r_pot[i] = rhs[i] - bx[i];
        }
        measure(r_pot, r);
        norm(r)
    };

    let mut beta = residual_of(&x, &mut mx, &mut bx, &mut r_pot, &mut r, &mut apply, &mut measure);
    if !beta.is_finite() {
        return Err(KrylovError::NumericalBreakdown { iteration: 0 });
    }

    // Krylov basis: potentials q_j and measured images v_j.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut h = vec![vec![0.0; k]; k + 1];
    let mut cs = vec![0.0; k];
    let mut sn = vec![0.0; k];
    let mut g = vec![0.0; k + 1];
    let mut w_pot = vec![0.0; n];
    let mut w = vec![0.0; n];

    while beta > cfg.tolerance {
        if iterations >= cfg.max_iterations {
            return Err(KrylovError::ConvergenceFailure {
                best: x,
                residual: beta,
                iterations,
                tolerance: cfg.tolerance,
            });
        }
        q.clear();
        v.clear();
        q.push(r_pot.iter().map(|e| e / beta).collect());
        v.push(r.iter().map(|e| e / beta).collect());
        g.iter_mut().for_each(|e| *e = 0.0);
        g[0] = beta;
        let mut j_used = 0;
        for j in 0..k {
            if iterations >= cfg.max_iterations {
                break;
            }
            iterations += 1;
            apply(&q[j], &v[j], &mut w_pot);
            measure(&w_pot, &mut w);
            let before = norm(&w);
            for i in 0..=j {
                let hij = dot(&w, &v[i]);
                h[i][j] = hij;
                axpy(&mut w, -hij, &v[i]);
                axpy(&mut w_pot, -hij, &q[i]);
            }
            let mut after = norm(&w);
            if after < before * REORTH_THRESHOLD.sqrt() || after <= REORTH_THRESHOLD * before {
                for i in 0..=j {
                    let c = dot(&w, &v[i]);
                    h[i][j] += c;
                    axpy(&mut w, -c, &v[i]);
                    axpy(&mut w_pot, -c, &q[i]);
                }
                after = norm(&w);
            }
            h[j + 1][j] = after;
            if !after.is_finite() || !h[..=j].iter().all(|row| row[j].is_finite()) {
                return Err(KrylovError::NumericalBreakdown { iteration: iterations });
            }
            // Apply previous rotations, then form the new one.
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let (a, b) = (h[j][j], h[j + 1][j]);
            let rho = a.hypot(b);
            if rho == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = a / rho;
                sn[j] = b / rho;
            }
            h[j][j] = rho;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            j_used = j + 1;
            let happy = after <= f64::EPSILON * before.max(f64::MIN_POSITIVE);
            if g[j + 1].abs() <= cfg.tolerance || happy {
                break;
            }
            q.push(w_pot.iter().map(|e| e / after).collect());
            v.push(w.iter().map(|e| e / after).collect());
        }
        // Back substitution for the cycle's coefficients.
        let mut y = vec![0.0; j_used];
        for i in (0..j_used).rev() {
            let mut s = g[i];
            for l in (i + 1)..j_used {
                s -= h[i][l] * y[l];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (i, yi) in y.iter().enumerate() {
            axpy(&mut x, *yi, &q[i]);
        }
        if !all_finite(&x) {
            return Err(KrylovError::NumericalBreakdown { iteration: iterations });
        }
        let new_beta = residual_of(&x, &mut mx, &mut bx, &mut r_pot, &mut r, &mut apply, &mut measure);
        if !new_beta.is_finite() {
            return Err(KrylovError::NumericalBreakdown { iteration: iterations });
        }
        beta = new_beta;
    }
    if beta > cfg.tolerance {
        return Err(KrylovError::ConvergenceFailure {
            best: x,
            residual: beta,
            iterations,
            tolerance: cfg.tolerance,
        });
    }
    Ok(GmresOutcome {
        solution: x,
        iterations,
        residual: beta,
    })
}
