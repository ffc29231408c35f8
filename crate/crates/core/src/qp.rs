//! Convex quadratic programs with nonnegativity bounds:
//!
//! ```text
//! minimize 1/2 x'Qx + c'x + constant   subject to x >= 0
//! ```
//!
//! `Q` must be positive definite; [`adjust_lambda0`] escalates the ridge
//! penalty until a Cholesky factorization succeeds.

use crate::error::{EpicError, Result};

/// Dense problem data. `q` is row-major `dim x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub dim: usize,
    pub q: Vec<f64>,
    pub c: Vec<f64>,
    pub lb: Vec<f64>,
    /// First flat index of each base's levels.
    pub level_offsets: Vec<usize>,
    pub lambda0: f64,
    pub constant_term: f64,
}

impl QpProblem {
    /// Bare problem without level structure (a single block).
    pub fn new(q: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let dim = c.len();
        if q.len() != dim * dim {
            return Err(EpicError::DimensionMismatch { expected: dim * dim, actual: q.len() });
        }
        Ok(QpProblem {
            dim,
            q,
            c,
            lb: vec![0.0; dim],
            level_offsets: vec![0],
            lambda0: 0.0,
            constant_term: 0.0,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.dim + j]
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for i in 0..self.dim {
            let row = &self.q[i * self.dim..(i + 1) * self.dim];
            let qx: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            quad += x[i] * qx;
        }
        0.5 * quad + self.c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.constant_term
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let row = &self.q[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.c[i]
            })
            .collect()
    }

    /// Dumps `Q` and `c` as CSV rows `q_0..q_{n-1},c`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.push_str(&format!("{:?},", self.at(i, j)));
            }
            out.push_str(&format!("{:?}\n", self.c[i]));
        }
        out
    }
}

/// Bound-constrained KKT residual of `x` given its gradient.
pub fn kkt_residual(x: &[f64], g: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| if xi > 0.0 { gi.abs() } else { (-gi).max(0.0) })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdCheck {
    PositiveDefinite,
    /// The factorization broke down at this pivot.
    NotPd { pivot: usize },
}

fn check_symmetric(q: &[f64], n: usize) -> Result<()> {
    if q.len() != n * n {
        return Err(EpicError::DimensionMismatch { expected: n * n, actual: q.len() });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (q[i * n + j], q[j * n + i]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(EpicError::NotSymmetric { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Lower Cholesky factor, or the index of the first pivot at or below `tol`.
fn cholesky(q: &[f64], n: usize, tol: f64) -> std::result::Result<Vec<f64>, usize> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = q[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > tol) {
            return Err(j);
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = q[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Cholesky test with pivot tolerance `1e-12 * max |Q_ii|`.
pub fn check_pd(q: &[f64], n: usize) -> Result<PdCheck> {
    check_symmetric(q, n)?;
    let scale = (0..n).map(|i| q[i * n + i].abs()).fold(0.0, f64::max);
    Ok(match cholesky(q, n, 1e-12 * scale) {
        Ok(_) => PdCheck::PositiveDefinite,
        Err(pivot) => PdCheck::NotPd { pivot },
    })
}

pub const MAX_LAMBDA_DOUBLINGS: usize = 60;

/// Result of the ridge escalation loop.
#[derive(Debug, Clone)]
pub struct Adjusted {
    pub problem: QpProblem,
    pub lambda0: f64,
    pub doublings: usize,
}

/// Reassembles with `λ₀ ← max(2λ₀, 1e-6)` until `Q` is positive definite.
pub fn adjust_lambda0<F>(mut assemble: F, lambda0_init: f64) -> Result<Adjusted>
where
    F: FnMut(f64) -> Result<QpProblem>,
{
    if !(lambda0_init >= 0.0) {
        return Err(EpicError::InvalidInput(format!("lambda0 must be nonnegative, got {lambda0_init}")));
    }
    let mut lambda0 = lambda0_init;
    for doublings in 0..=MAX_LAMBDA_DOUBLINGS {
        let problem = assemble(lambda0)?;
        if let PdCheck::PositiveDefinite = check_pd(&problem.q, problem.dim)? {
            if doublings > 0 {
                log::warn!(
                    "Q was not positive definite; lambda0 raised to {lambda0:e} after {doublings} doublings \
                     (consider more calibration data, better features, or preconditioning)"
                );
            }
            return Ok(Adjusted { problem, lambda0, doublings });
        }
        lambda0 = (2.0 * lambda0).max(1e-6);
    }
    Err(EpicError::LambdaExhausted { doublings: MAX_LAMBDA_DOUBLINGS, lambda0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Includes the problem's constant term.
    pub objective: f64,
    pub kkt_residual: f64,
    /// Coordinate steps taken.
    pub iterations: usize,
    pub status: QpStatus,
    /// Objective after each sweep or refinement step, starting point first.
    pub trace: Vec<f64>,
}

/// How many coordinate sweeps run between subspace refinement attempts.
const REFINE_EVERY: usize = 8;

/// Projected coordinate descent from the all-ones point.
///
/// Every few sweeps the iterate is also moved toward the minimizer of the
/// quadratic restricted to its current support, stopping at the first bound
/// that would be crossed. That step never raises the objective and removes
/// the slow tail plain coordinate descent has on ill-conditioned `Q`.
pub fn solve_qp(p: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    if !(tol > 0.0) {
        return Err(EpicError::InvalidInput("QP tolerance must be positive".into()));
    }
    let n = p.dim;
    if p.c.len() != n || p.q.len() != n * n {
        return Err(EpicError::DimensionMismatch { expected: n, actual: p.c.len() });
    }
    for i in 0..n {
        if !(p.at(i, i) > 0.0) {
            return Err(EpicError::InvalidInput(format!("QP diagonal entry {i} is not positive")));
        }
    }
    let mut x = vec![1.0; n];
    let mut g = p.gradient(&x);
    let mut iterations = 0;
    let mut trace = vec![p.objective(&x)];
    let mut sweeps = 0;
    let status = loop {
        if kkt_residual(&x, &g) <= tol {
            break QpStatus::Optimal;
        }
        if iterations >= max_iter {
            break QpStatus::MaxIter;
        }
        for i in 0..n {
            let next = (x[i] - g[i] / p.at(i, i)).max(0.0);
            let delta = next - x[i];
            if delta != 0.0 {
                x[i] = next;
                let col = &p.q[i * n..(i + 1) * n];
                for (gj, qji) in g.iter_mut().zip(col) {
                    *gj += qji * delta;
                }
            }
            iterations += 1;
        }
        sweeps += 1;
        trace.push(p.objective(&x));
        if sweeps % REFINE_EVERY == 0 && kkt_residual(&x, &g) > tol {
            if refine(p, &mut x) {
                g = p.gradient(&x);
                trace.push(p.objective(&x));
            }
        }
        // Refresh the running gradient now and then to shed rounding drift.
        if sweeps % 64 == 0 {
            g = p.gradient(&x);
        }
    };
    if status == QpStatus::MaxIter {
        log::warn!("QP stopped after {iterations} coordinate steps");
    }
    let objective = p.objective(&x);
    let kkt = kkt_residual(&x, &g);
    Ok(QpSolution { x, objective, kkt_residual: kkt, iterations, status, trace })
}

/// One step toward the minimizer on the face `{x_i = 0 : i not in support}`.
/// Returns whether `x` changed.
fn refine(p: &QpProblem, x: &mut [f64]) -> bool {
    let free: Vec<usize> = (0..p.dim).filter(|&i| x[i] > 0.0).collect();
    let m = free.len();
    if m == 0 {
        return false;
    }
    let mut sub = vec![0.0; m * m];
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            sub[a * m + b] = p.at(i, j);
        }
    }
    let Ok(l) = cholesky(&sub, m, 0.0) else {
        return false;
    };
    let rhs: Vec<f64> = free.iter().map(|&i| -p.c[i]).collect();
    let target = cholesky_solve(&l, m, &rhs);
    // Longest step in [0, 1] keeping the free coordinates nonnegative.
    let mut step = 1.0;
    let mut blocking = None;
    for (a, &i) in free.iter().enumerate() {
        let d = target[a] - x[i];
        if d < 0.0 && x[i] + d < 0.0 {
            let t = x[i] / -d;
            if t < step {
                step = t;
                blocking = Some(a);
            }
        }
    }
    let before = p.objective(x);
    let old: Vec<f64> = free.iter().map(|&i| x[i]).collect();
    for (a, &i) in free.iter().enumerate() {
        x[i] = if Some(a) == blocking {
            0.0
        } else {
            (old[a] + step * (target[a] - old[a])).max(0.0)
        };
    }
    if p.objective(x) > before {
        for (a, &i) in free.iter().enumerate() {
            x[i] = old[a];
        }
        return false;
    }
    true
}
