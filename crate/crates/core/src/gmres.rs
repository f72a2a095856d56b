//! Full (unrestarted) GMRES on `Cx = g`, matrix-free.
//!
//! Arnoldi uses modified Gram-Schmidt with one re-orthogonalisation pass;
//! the Hessenberg least-squares problem is reduced with Givens rotations.
//! The iterate `x_k` is formed at every step so callers can observe it.

use crate::error::{check_len, Result};
use crate::numerics::{axpy, dot, norm};
use crate::operator::{KaczmarzOperator, LinearOperator};
use crate::sweep::{cycle, dimension, record_at};
use crate::system::BlockProjector;
use crate::trace::{Clock, SolveOptions, SolveStatus, SolveTrace};

/// Arnoldi basis `v_1, ..., v_{k+1}` and Hessenberg columns `h_j` (length `j + 2`).
#[derive(Debug, Clone, Default)]
pub struct ArnoldiState {
    pub basis: Vec<Vec<f64>>,
    pub hessenberg: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// `x_0, x_1, ...`
    pub iterates: Vec<Vec<f64>>,
    /// `‖g - C x_k‖` from the Givens recurrence, one per iterate.
    pub residual_norms: Vec<f64>,
    /// `h_{k+1,k}`: norm of the new Arnoldi vector before normalisation.
    pub new_vector_norms: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub arnoldi: ArnoldiState,
    pub status: SolveStatus,
}

/// Relative size of `h_{k+1,k}` (against `‖C v_k‖`) treated as an exhausted
/// Krylov space.
const LUCKY_BREAKDOWN: f64 = 1e-14;

pub fn gmres_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    x0: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<GmresOutcome> {
    let n = op.dim();
    check_len("gmres right-hand side", n, rhs.len())?;
    check_len("gmres initial guess", n, x0.len())?;
    let clock = Clock::start();

    let cx0 = op.apply(x0);
    let r0: Vec<f64> = rhs.iter().zip(&cx0).map(|(g, c)| g - c).collect();
    let beta = norm(&r0);
    let mut out = GmresOutcome {
        x: x0.to_vec(),
        iterates: vec![x0.to_vec()],
        residual_norms: vec![beta],
        new_vector_norms: Vec::new(),
        wall_ms: vec![clock.ms()],
        arnoldi: ArnoldiState::default(),
        status: SolveStatus::MaxIter,
    };
    let stop = |res: f64, x: &[f64]| res <= tol * (1.0 + norm(x));
    if stop(beta, x0) {
        out.status = SolveStatus::Converged;
        return Ok(out);
    }

    out.arnoldi.basis.push(r0.iter().map(|v| v / beta).collect());
    let mut g_vec = vec![beta];
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    // R factor columns after rotation
    let mut r_cols: Vec<Vec<f64>> = Vec::new();

    for j in 0..max_iter.min(n) {
        let mut w = op.apply(&out.arnoldi.basis[j]);
        let w_norm0 = norm(&w);
        let mut h = vec![0.0; j + 2];
        for _ in 0..2 {
            for (i, v) in out.arnoldi.basis.iter().enumerate() {
                let c = dot(&w, v);
                h[i] += c;
                axpy(-c, v, &mut w);
            }
        }
        let h_next = norm(&w);
        h[j + 1] = h_next;
        out.arnoldi.hessenberg.push(h.clone());
        out.new_vector_norms.push(h_next);

        let mut col = h;
        for i in 0..j {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = cs[i] * a + sn[i] * b;
            col[i + 1] = -sn[i] * a + cs[i] * b;
        }
        let (a, b) = (col[j], col[j + 1]);
        let rnorm = a.hypot(b);
        let (c, s) = if rnorm == 0.0 { (1.0, 0.0) } else { (a / rnorm, b / rnorm) };
        cs.push(c);
        sn.push(s);
        col[j] = rnorm;
        col[j + 1] = 0.0;
        r_cols.push(col);
        let gj = g_vec[j];
        g_vec[j] = c * gj;
        g_vec.push(-s * gj);
        let res = g_vec[j + 1].abs();

        // back substitution R y = g
        let k = j + 1;
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g_vec[i];
            for l in i + 1..k {
                acc -= r_cols[l][i] * y[l];
            }
            y[i] = if r_cols[i][i] != 0.0 { acc / r_cols[i][i] } else { 0.0 };
        }
        let mut x = x0.to_vec();
        for (yi, v) in y.iter().zip(&out.arnoldi.basis) {
            axpy(*yi, v, &mut x);
        }
        out.iterates.push(x.clone());
        out.residual_norms.push(res);
        out.wall_ms.push(clock.ms());
        out.x = x;

        let lucky = h_next <= LUCKY_BREAKDOWN * w_norm0.max(f64::MIN_POSITIVE);
        if lucky || stop(res, &out.x) {
            out.status = SolveStatus::Converged;
            return Ok(out);
        }
        out.arnoldi.basis.push(w.iter().map(|v| v / h_next).collect());
    }
    if stop(*out.residual_norms.last().unwrap(), &out.x) {
        out.status = SolveStatus::Converged;
    }
    Ok(out)
}

/// GMRES on the Kaczmarz-preconditioned system, with the same per-iterate
/// trace as the other solvers (one extra cycle per iterate).
pub fn kaczmarz_gmres(
    projectors: &[BlockProjector],
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveTrace)> {
    opts.validate()?;
    let n = dimension(projectors)?;
    check_len("initial guess", n, x0.len())?;
    let op = KaczmarzOperator::new(projectors)?;
    let outcome = gmres_solve(&op, op.offset(), x0, opts.max_iter, opts.tol)?;
    let clock = Clock::start();
    let mut trace = SolveTrace::new();
    for (k, x) in outcome.iterates.iter().enumerate() {
        let cyc = cycle(projectors, x)?;
        let mut rec = record_at(k, x, &cyc, projectors, opts, &clock);
        rec.qtilde_norm = outcome.new_vector_norms.get(k).copied();
        rec.wall_ms = outcome.wall_ms[k];
        trace.records.push(rec);
    }
    trace.iterates = outcome.iterates;
    trace.status = outcome.status;
    Ok((outcome.x, trace))
}
