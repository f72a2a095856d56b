//! Minimal-error Krylov method preconditioned by the block Kaczmarz cycle.
//!
//! Each step runs one cycle at `x_k`, orthogonalises the fixed-point
//! residual `r_k = P(x_k) - x_k` against the previous directions and moves
//! along the new unit direction by `ν γ`, where `γ = (ω_k + ρ_k) / 2` and
//! `ν = 1 / ‖q̃‖`. The iterate is the point of `x_0 + K_k(C, r_0)` closest to
//! `x*` in exact arithmetic.

use crate::error::{check_len, Error, Result};
use crate::numerics::{axpy, dot, norm, orthogonalize};
use crate::sweep::{cycle, dimension, record_at, CycleOutcome};
use crate::system::BlockProjector;
use crate::trace::{Clock, IterationRecord, SolveOptions, SolveStatus, SolveTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orthogonalization {
    /// One classical Gram-Schmidt pass, exactly as the method is usually
    /// written. Loses orthogonality near the solution.
    Classical,
    /// Classical Gram-Schmidt followed by a full second pass (CGS2).
    #[default]
    Reorthogonalized,
}

impl Orthogonalization {
    fn passes(self) -> usize {
        match self {
            Orthogonalization::Classical => 1,
            Orthogonalization::Reorthogonalized => 2,
        }
    }
}

/// Orthonormal directions `q_1, ..., q_k` and the applied step lengths
/// `c_j = ν_j γ_j`, so that `x_k = x_0 + Σ c_j q_j`.
#[derive(Debug, Clone, Default)]
pub struct KrylovBasis {
    pub q: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
}

impl KrylovBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `x_0 + Σ_{j < k} c_j q_j`
    pub fn reconstruct(&self, x0: &[f64], k: usize) -> Vec<f64> {
        let mut x = x0.to_vec();
        for (c, q) in self.coeffs.iter().zip(&self.q).take(k) {
            axpy(*c, q, &mut x);
        }
        x
    }

    /// Largest `|⟨q_i, q_j⟩ - δ_ij|`.
    pub fn orthogonality_loss(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, qi) in self.q.iter().enumerate() {
            for (j, qj) in self.q.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(qi, qj) - target).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub enum StepKind {
    Advanced { x_next: Vec<f64> },
    Converged,
    /// The new direction collapsed: `‖q̃‖ <= breakdown_tol ‖r_k‖`.
    Breakdown,
}

#[derive(Debug, Clone)]
pub struct MinErrStep {
    pub cycle: CycleOutcome,
    pub rho: f64,
    pub gamma: f64,
    pub qtilde_norm: Option<f64>,
    pub kind: StepKind,
}

/// One step from `x_k`. On `Advanced` the new direction and step length
/// are appended to `basis`.
pub fn minerr_step(
    projectors: &[BlockProjector],
    x: &[f64],
    basis: &mut KrylovBasis,
    opts: &SolveOptions,
) -> Result<MinErrStep> {
    let out = cycle(projectors, x)?;
    let mut r: Vec<f64> = out.y.iter().zip(x).map(|(y, xi)| y - xi).collect();
    let rho = dot(&r, &r);
    let gamma = 0.5 * (out.omega + rho);
    if opts.converged(rho, norm(x)) {
        return Ok(MinErrStep {
            cycle: out,
            rho,
            gamma,
            qtilde_norm: None,
            kind: StepKind::Converged,
        });
    }
    let r_norm = rho.sqrt();
    orthogonalize(&mut r, &basis.q, opts.orthogonalization.passes());
    let qn = norm(&r);
    if qn <= opts.breakdown_tol * r_norm {
        return Ok(MinErrStep {
            cycle: out,
            rho,
            gamma,
            qtilde_norm: Some(qn),
            kind: StepKind::Breakdown,
        });
    }
    let nu = 1.0 / qn;
    for v in r.iter_mut() {
        *v *= nu;
    }
    let c = nu * gamma;
    let mut x_next = x.to_vec();
    axpy(c, &r, &mut x_next);
    basis.q.push(r);
    basis.coeffs.push(c);
    Ok(MinErrStep {
        cycle: out,
        rho,
        gamma,
        qtilde_norm: Some(qn),
        kind: StepKind::Advanced { x_next },
    })
}

/// Runs up to `max_iter` steps. The stop test is evaluated at every iterate
/// including the last; breakdown ends the solve with the current iterate.
pub fn minerr_solve(
    projectors: &[BlockProjector],
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveTrace, KrylovBasis)> {
    opts.validate()?;
    if opts.max_iter == 0 {
        return Err(Error::Contract("max_iter must be at least 1".into()));
    }
    let n = dimension(projectors)?;
    check_len("initial guess", n, x0.len())?;
    let clock = Clock::start();
    let mut trace = SolveTrace::new();
    let mut basis = KrylovBasis::new();
    let mut x = x0.to_vec();
    loop {
        let k = basis.len();
        if k == opts.max_iter {
            let out = cycle(projectors, &x)?;
            let rec = record_at(k, &x, &out, projectors, opts, &clock);
            trace.status = if opts.converged(rec.rho, norm(&x)) {
                SolveStatus::Converged
            } else {
                SolveStatus::MaxIter
            };
            trace.records.push(rec);
            trace.iterates.push(x.clone());
            return Ok((x, trace, basis));
        }
        let step = minerr_step(projectors, &x, &mut basis, opts)?;
        let mut rec: IterationRecord = record_at(k, &x, &step.cycle, projectors, opts, &clock);
        rec.qtilde_norm = step.qtilde_norm;
        trace.records.push(rec);
        trace.iterates.push(x.clone());
        match step.kind {
            StepKind::Advanced { x_next } => x = x_next,
            StepKind::Converged => {
                trace.status = SolveStatus::Converged;
                return Ok((x, trace, basis));
            }
            StepKind::Breakdown => {
                trace.status = SolveStatus::Breakdown;
                trace.breakdown_step = Some(k);
                return Ok((x, trace, basis));
            }
        }
    }
}

/// Truncation at the smallest `γ`: `k_opt` is the first completed step
/// minimising the recorded `γ`, and `x_opt = x_0 + Σ_{j <= k_opt} c_j q_j`.
pub fn heuristic_best(trace: &SolveTrace, basis: &KrylovBasis, x0: &[f64]) -> Result<(Vec<f64>, usize)> {
    let completed = basis.len().min(trace.records.len());
    if completed == 0 {
        return Err(Error::Contract("heuristic needs at least one completed step".into()));
    }
    let mut best = 0;
    for i in 1..completed {
        if trace.records[i].gamma < trace.records[best].gamma {
            best = i;
        }
    }
    let k_opt = best + 1;
    Ok((basis.reconstruct(x0, k_opt), k_opt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dist, Matrix};
    use crate::system::{build_projectors, PartitionedSystem};

    fn two_row_system() -> Vec<BlockProjector> {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let sys = PartitionedSystem::partition_uniform(a, vec![1.0, 2.0], 1).unwrap();
        build_projectors(&sys, None).unwrap()
    }

    #[test]
    fn hand_traced_steps() {
        let ps = two_row_system();
        let opts = SolveOptions::new(10, 1e-12);
        let mut basis = KrylovBasis::new();

        let s1 = minerr_step(&ps, &[0.0, 0.0], &mut basis, &opts).unwrap();
        let x1 = match s1.kind {
            StepKind::Advanced { x_next } => x_next,
            other => panic!("{other:?}"),
        };
        let scale = 2.5f64.sqrt();
        assert!(dist(&basis.q[0], &[1.5 / scale, 0.5 / scale]) < 1e-15);
        assert!((s1.gamma - 2.0).abs() < 1e-15);
        assert!(dist(&x1, &[1.2, 0.4]) < 1e-15);

        let s2 = minerr_step(&ps, &x1, &mut basis, &opts).unwrap();
        let r1: Vec<f64> = s2.cycle.y.iter().zip(&x1).map(|(y, x)| y - x).collect();
        assert!(dist(&r1, &[0.1, 0.3]) < 1e-14);
        assert!((s2.cycle.omega - 0.22).abs() < 1e-14);
        assert!((s2.gamma - 0.16).abs() < 1e-14);
        // ‖(-0.08, 0.24)‖
        assert!((s2.qtilde_norm.unwrap() - 0.064f64.sqrt()).abs() < 1e-14);
        let x2 = match s2.kind {
            StepKind::Advanced { x_next } => x_next,
            other => panic!("{other:?}"),
        };
        assert!(dist(&x2, &[1.0, 1.0]) < 1e-14);

        let s3 = minerr_step(&ps, &x2, &mut basis, &opts).unwrap();
        assert!(matches!(s3.kind, StepKind::Converged));
    }

    #[test]
    fn solved_input_takes_no_steps() {
        let ps = two_row_system();
        let (x, trace, basis) = minerr_solve(&ps, &[1.0, 1.0], &SolveOptions::new(5, 1e-12)).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
        assert!(basis.is_empty());
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.records[0].rho, 0.0);
        assert_eq!(trace.status, SolveStatus::Converged);
    }

    #[test]
    fn heuristic_on_two_row_trace() {
        let ps = two_row_system();
        let x0 = [0.0, 0.0];
        let (_, trace, basis) = minerr_solve(&ps, &x0, &SolveOptions::new(5, 1e-12)).unwrap();
        assert_eq!(basis.len(), 2);
        assert!((trace.records[0].gamma - 2.0).abs() < 1e-15);
        assert!((trace.records[1].gamma - 0.16).abs() < 1e-14);
        let (x_opt, k_opt) = heuristic_best(&trace, &basis, &x0).unwrap();
        assert_eq!(k_opt, 2);
        assert!(dist(&x_opt, &[1.0, 1.0]) < 1e-14);
    }

    #[test]
    fn heuristic_needs_a_step() {
        let ps = two_row_system();
        let (_, trace, basis) = minerr_solve(&ps, &[1.0, 1.0], &SolveOptions::new(5, 1e-12)).unwrap();
        assert!(heuristic_best(&trace, &basis, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn heuristic_picks_first_minimum() {
        let mut trace = SolveTrace::new();
        for (k, g) in [3.0, 1.0, 1.0, 2.0].into_iter().enumerate() {
            trace.records.push(IterationRecord {
                k,
                rho: g,
                omega: g,
                gamma: g,
                qtilde_norm: Some(1.0),
                true_error: None,
                residual_norm: 0.0,
                wall_ms: 0.0,
            });
        }
        let basis = KrylovBasis {
            q: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            coeffs: vec![1.0, 2.0, 3.0, 4.0],
        };
        let (x, k) = heuristic_best(&trace, &basis, &[0.0, 0.0]).unwrap();
        assert_eq!(k, 2);
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn zero_max_iter_rejected() {
        let ps = two_row_system();
        assert!(minerr_solve(&ps, &[0.0, 0.0], &SolveOptions::new(0, 1e-12)).is_err());
    }
}
