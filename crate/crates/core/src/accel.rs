//! Affine-subspace acceleration of the block Kaczmarz cycle.
//!
//! Each step minimises `‖x - x*‖` over `aff(x_0, ..., x_k, P(x_k))`. The
//! normal equations of that least-squares problem have right-hand side
//! `(0, ..., 0, γ_k)` with `γ_k = (‖w(x_k)‖² + ‖P(x_k) - x_k‖²) / 2`, so the
//! unknown `x*` never has to be evaluated.

use crate::error::{check_len, Error, Result};
use crate::numerics::{axpy, norm, sub, sym_eig, Matrix};
use crate::sweep::{cycle, dimension, record_at, CycleOutcome};
use crate::system::BlockProjector;
use crate::trace::{Clock, SolveOptions, SolveStatus, SolveTrace};

/// `γ = (ω + ρ) / 2`.
pub fn gamma(omega: f64, rho: f64) -> Result<f64> {
    if omega < 0.0 || rho < 0.0 || omega.is_nan() || rho.is_nan() {
        return Err(Error::Contract(format!(
            "gamma needs nonnegative inputs, got omega = {omega}, rho = {rho}"
        )));
    }
    Ok(0.5 * (omega + rho))
}

/// Iterates `x_0, ..., x_k`; the last one is the current point.
#[derive(Debug, Clone)]
pub struct AffineSearchState {
    anchors: Vec<Vec<f64>>,
}

impl AffineSearchState {
    pub fn new(x0: Vec<f64>) -> Self {
        Self { anchors: vec![x0] }
    }

    pub fn x0(&self) -> &[f64] {
        &self.anchors[0]
    }

    pub fn current(&self) -> &[f64] {
        self.anchors.last().expect("state holds at least x_0")
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    /// Index `k` of the current iterate.
    pub fn step(&self) -> usize {
        self.anchors.len() - 1
    }

    pub fn push(&mut self, x: Vec<f64>) {
        self.anchors.push(x);
    }

    /// Columns `x_0 - x_k, ..., x_{k-1} - x_k, y - x_k`.
    pub fn search_directions(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let xk = self.current();
        let k = self.step();
        self.anchors[..k]
            .iter()
            .map(|xi| sub(xi, xk))
            .chain(std::iter::once(sub(y, xk)))
            .collect()
    }
}

/// Result of one accelerated step.
#[derive(Debug, Clone)]
pub struct GkStep {
    pub x_next: Vec<f64>,
    /// Solution `s*` of the normal equations.
    pub coefficients: Vec<f64>,
    pub gamma: f64,
    /// Distance of `P(x_k) - x_k` from the span of the older directions.
    pub qtilde_norm: f64,
}

/// One step `x_{k+1} = x_k + M_k s*` with `M_kᵀ M_k s* = (0, ..., 0, γ_k)`.
///
/// The Gram matrix is diagonally scaled to unit diagonal and decomposed;
/// if its smallest eigenvalue falls to `normal_eq_tol * λ_max` or below the
/// step fails with [`Error::RankDeficient`].
pub fn gk_step(state: &AffineSearchState, out: &CycleOutcome, normal_eq_tol: f64) -> Result<GkStep> {
    let xk = state.current();
    check_len("cycle output", xk.len(), out.y.len())?;
    let k = state.step();
    let cols = state.search_directions(&out.y);
    let last = cols.len() - 1;
    let rho = cols[last].iter().map(|v| v * v).sum::<f64>();
    if rho == 0.0 {
        return Err(Error::Contract("P(x_k) = x_k; the solve should already have stopped".into()));
    }
    let g = gamma(out.omega, rho)?;

    let scales: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    if scales.contains(&0.0) {
        return Err(Error::RankDeficient { step: k });
    }
    let units: Vec<Vec<f64>> = cols
        .iter()
        .zip(&scales)
        .map(|(c, s)| c.iter().map(|v| v / s).collect())
        .collect();
    let dim = cols.len();
    let mut gram = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = crate::numerics::dot(&units[i], &units[j]);
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    let eig = sym_eig(&gram)?;
    if eig.lambda_min() <= normal_eq_tol * eig.lambda_max() {
        return Err(Error::RankDeficient { step: k });
    }
    // scaled system: (D G D)(D⁻¹ s) = D γ e_last
    let mut rhs = vec![0.0; dim];
    rhs[last] = g / scales[last];
    let scaled = eig.pseudo_apply(&rhs, f64::MIN_POSITIVE)?;
    let s: Vec<f64> = scaled.iter().zip(&scales).map(|(v, d)| v / d).collect();

    let mut x_next = xk.to_vec();
    for (c, si) in cols.iter().zip(&s) {
        axpy(*si, c, &mut x_next);
    }
    // s_last = γ (G⁻¹)_{last,last} and 1 / (G⁻¹)_{last,last} is the squared
    // distance of the last column from the span of the others
    let qtilde_norm = (g / s[last]).sqrt();
    Ok(GkStep {
        x_next,
        coefficients: s,
        gamma: g,
        qtilde_norm,
    })
}

/// Accelerated block Kaczmarz iteration.
///
/// The stop test `‖P(x_k) - x_k‖ <= tol (1 + ‖x_k‖)` runs at every iterate,
/// including the one reached after `max_iter` steps. A singular normal
/// system ends the solve with status `Breakdown` and returns the last
/// accepted iterate.
pub fn gk_solve(
    projectors: &[BlockProjector],
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveTrace)> {
    opts.validate()?;
    let n = dimension(projectors)?;
    check_len("initial guess", n, x0.len())?;
    let clock = Clock::start();
    let mut trace = SolveTrace::new();
    let mut state = AffineSearchState::new(x0.to_vec());
    loop {
        let k = state.step();
        let x = state.current().to_vec();
        let out = cycle(projectors, &x)?;
        let mut rec = record_at(k, &x, &out, projectors, opts, &clock);
        trace.iterates.push(x.clone());
        if opts.converged(rec.rho, norm(&x)) {
            trace.records.push(rec);
            trace.status = SolveStatus::Converged;
            return Ok((x, trace));
        }
        if k == opts.max_iter {
            trace.records.push(rec);
            trace.status = SolveStatus::MaxIter;
            return Ok((x, trace));
        }
        match gk_step(&state, &out, opts.normal_eq_tol) {
            Ok(step) => {
                rec.qtilde_norm = Some(step.qtilde_norm);
                trace.records.push(rec);
                state.push(step.x_next);
            }
            Err(Error::RankDeficient { step }) => {
                trace.records.push(rec);
                trace.status = SolveStatus::Breakdown;
                trace.breakdown_step = Some(step);
                return Ok((x, trace));
            }
            Err(e) => return Err(e),
        }
    }
}
