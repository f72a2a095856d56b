//! One block Kaczmarz cycle `P = P_p ∘ ... ∘ P_1` and the plain fixed-point
//! iteration built on it.

use crate::error::{check_len, Error, Result};
use crate::numerics::{axpy, dot, norm, norm_sq};
use crate::system::BlockProjector;
use crate::trace::{Clock, IterationRecord, SolveOptions, SolveStatus, SolveTrace};

/// Result of one cycle started at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutcome {
    /// `P(x)`
    pub y: Vec<f64>,
    /// `‖w(x)‖² = Σ_j ‖d_j‖²`
    pub omega: f64,
    /// `‖d_j‖²` per block, in cycle order.
    pub w_sq: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Summation {
    #[default]
    Naive,
    /// Kahan-Babuska (Neumaier) compensated accumulation of `omega`.
    Compensated,
}

/// Projects `x` onto `{z : A_j z = b_j}`; returns the projection and
/// `‖d‖²` for the step `d = A_jᵀ (A_j A_jᵀ)† (b_j - A_j x)`.
pub fn apply_block(proj: &BlockProjector, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_len("block projection input", proj.cols(), x.len())?;
    let mut y = x.to_vec();
    let d_sq = project_in_place(proj, &mut y);
    Ok((y, d_sq))
}

fn project_in_place(proj: &BlockProjector, y: &mut [f64]) -> f64 {
    let res: Vec<f64> = (0..proj.rows())
        .map(|i| proj.b[i] - dot(proj.a.row(i), y))
        .collect();
    let z = proj
        .gram_eig
        .pseudo_apply(&res, proj.rank_tol)
        .expect("gram size matches block rows");
    let d = proj.a.matvec_t(&z);
    axpy(1.0, &d, y);
    norm_sq(&d)
}

pub fn cycle(projectors: &[BlockProjector], x: &[f64]) -> Result<CycleOutcome> {
    cycle_with(projectors, x, Summation::Naive)
}

pub fn cycle_with(projectors: &[BlockProjector], x: &[f64], summation: Summation) -> Result<CycleOutcome> {
    let n = dimension(projectors)?;
    check_len("cycle input", n, x.len())?;
    let mut y = x.to_vec();
    let mut w_sq = Vec::with_capacity(projectors.len());
    let mut omega = 0.0;
    let mut comp = 0.0;
    for proj in projectors {
        let d_sq = project_in_place(proj, &mut y);
        w_sq.push(d_sq);
        match summation {
            Summation::Naive => omega += d_sq,
            Summation::Compensated => {
                let t = omega + d_sq;
                if omega.abs() >= d_sq.abs() {
                    comp += (omega - t) + d_sq;
                } else {
                    comp += (d_sq - t) + omega;
                }
                omega = t;
            }
        }
    }
    Ok(CycleOutcome {
        y,
        omega: omega + comp,
        w_sq,
    })
}

/// Column count shared by all projectors.
pub fn dimension(projectors: &[BlockProjector]) -> Result<usize> {
    let first = projectors
        .first()
        .ok_or_else(|| Error::Contract("at least one block is required".into()))?;
    let n = first.cols();
    for p in projectors {
        check_len("projector column count", n, p.cols())?;
    }
    Ok(n)
}

/// `‖b - Ax‖` assembled from the blocks.
pub fn system_residual_norm(projectors: &[BlockProjector], x: &[f64]) -> f64 {
    projectors
        .iter()
        .flat_map(|p| (0..p.rows()).map(move |i| p.b[i] - dot(p.a.row(i), x)))
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn record_at(
    k: usize,
    x: &[f64],
    out: &CycleOutcome,
    projectors: &[BlockProjector],
    opts: &SolveOptions,
    clock: &Clock,
) -> IterationRecord {
    let rho: f64 = x.iter().zip(&out.y).map(|(a, b)| (b - a) * (b - a)).sum();
    IterationRecord {
        k,
        rho,
        omega: out.omega,
        gamma: 0.5 * (out.omega + rho),
        qtilde_norm: None,
        true_error: opts.true_error(x),
        residual_norm: system_residual_norm(projectors, x),
        wall_ms: clock.ms(),
    }
}

/// Plain iteration `x_{k+1} = P(x_k)` until
/// `‖P(x_k) - x_k‖ <= tol (1 + ‖x_k‖)` or `max_iter` cycles.
///
/// Returns the iterate at which the stop test fired, or the last one.
pub fn iterate_fixed_point(
    projectors: &[BlockProjector],
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveTrace)> {
    opts.validate()?;
    let n = dimension(projectors)?;
    check_len("initial guess", n, x0.len())?;
    let clock = Clock::start();
    let mut trace = SolveTrace::new();
    let mut x = x0.to_vec();
    for k in 0..=opts.max_iter {
        let out = cycle(projectors, &x)?;
        let rec = record_at(k, &x, &out, projectors, opts, &clock);
        let done = opts.converged(rec.rho, norm(&x));
        trace.records.push(rec);
        trace.iterates.push(x.clone());
        if done {
            trace.status = SolveStatus::Converged;
            return Ok((x, trace));
        }
        if k == opts.max_iter {
            break;
        }
        x = out.y;
    }
    trace.status = SolveStatus::MaxIter;
    Ok((x, trace))
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

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        dist(a, b) <= tol
    }

    #[test]
    fn single_block_projection() {
        let p = BlockProjector::new(Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(), vec![2.0], None).unwrap();
        let (y, d) = apply_block(&p, &[0.0, 5.0]).unwrap();
        assert_eq!(y, vec![2.0, 5.0]);
        assert_eq!(d, 4.0);

        let (y, d) = apply_block(&p, &[2.0, -1.0]).unwrap();
        assert_eq!(y, vec![2.0, -1.0]);
        assert_eq!(d, 0.0);

        let p = BlockProjector::new(Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), vec![2.0], None).unwrap();
        let (y, d) = apply_block(&p, &[1.0, 0.0]).unwrap();
        assert!(close(&y, &[1.5, 0.5], 1e-15));
        assert!((d - 0.5).abs() < 1e-15);

        assert!(apply_block(&p, &[1.0]).is_err());
    }

    #[test]
    fn duplicated_rows_still_land_on_block() {
        let p = BlockProjector::new(
            Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap(),
            vec![3.0, 3.0],
            None,
        )
        .unwrap();
        let (y, _) = apply_block(&p, &[-1.0, 4.0]).unwrap();
        let ay = p.a.matvec(&y);
        assert!((ay[0] - 3.0).abs() < 1e-12 && (ay[1] - 3.0).abs() < 1e-12);
        assert!((y[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_block_is_identity() {
        let p = BlockProjector::new(Matrix::zeros(2, 3), vec![0.0, 0.0], None).unwrap();
        let (y, d) = apply_block(&p, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn two_row_cycle() {
        let ps = two_row_system();
        let out = cycle(&ps, &[0.0, 0.0]).unwrap();
        assert!(close(&out.y, &[1.5, 0.5], 1e-15));
        assert!((out.omega - 1.5).abs() < 1e-15);
        assert!((out.w_sq[0] - 1.0).abs() < 1e-15);
        assert!((out.w_sq[1] - 0.5).abs() < 1e-15);
        // ‖x - x*‖² - ‖y - x*‖² with x* = (1, 1)
        let drop = 2.0 - (0.25 + 0.25);
        assert!((out.omega - drop).abs() < 1e-15);

        let at_solution = cycle(&ps, &[1.0, 1.0]).unwrap();
        assert_eq!(at_solution.y, vec![1.0, 1.0]);
        assert_eq!(at_solution.omega, 0.0);
    }

    #[test]
    fn orthogonal_blocks_solve_in_one_cycle() {
        let sys = PartitionedSystem::partition_uniform(Matrix::identity(2), vec![1.0, 2.0], 1).unwrap();
        let ps = build_projectors(&sys, None).unwrap();
        let out = cycle(&ps, &[0.0, 0.0]).unwrap();
        assert_eq!(out.y, vec![1.0, 2.0]);
        assert_eq!(out.omega, 5.0);

        let (x, trace) = iterate_fixed_point(&ps, &[0.0, 0.0], &SolveOptions::new(10, 1e-12)).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert_eq!(trace.iterations(), 1);
        assert_eq!(trace.status, SolveStatus::Converged);
    }

    #[test]
    fn fixed_point_from_solution() {
        let ps = two_row_system();
        let (x, trace) = iterate_fixed_point(&ps, &[1.0, 1.0], &SolveOptions::new(10, 1e-12)).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.status, SolveStatus::Converged);
    }

    #[test]
    fn fixed_point_error_decreases() {
        let ps = two_row_system();
        let opts = SolveOptions::new(30, 1e-14).with_reference(vec![1.0, 1.0]);
        let (_, trace) = iterate_fixed_point(&ps, &[0.0, 0.0], &opts).unwrap();
        let errs = trace.true_errors().unwrap();
        for w in errs.windows(2) {
            assert!(w[1] < w[0] || w[0] == 0.0, "{errs:?}");
        }
        assert!(errs.len() > 2);
    }

    #[test]
    fn compensated_sum_matches_naive_on_small_input() {
        let ps = two_row_system();
        let a = cycle_with(&ps, &[0.3, -2.0], Summation::Naive).unwrap();
        let b = cycle_with(&ps, &[0.3, -2.0], Summation::Compensated).unwrap();
        assert_eq!(a.y, b.y);
        assert!((a.omega - b.omega).abs() < 1e-15);
    }
}
