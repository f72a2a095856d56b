//! Brute-force reference computations, independent of the solvers:
//! explicit Krylov power bases, exact best approximations from an affine
//! Krylov space, and checks of the coordinate identities that make a
//! minimal-error recursion possible.
//!
//! Nothing here calls into `accel`, `minerr` or `gmres`.

use crate::error::{check_len, Error, Result};
use crate::numerics::{axpy, dist, dot, norm, orthogonalize, sub, sym_eig, Matrix};
use crate::operator::LinearOperator;

/// Powers `r_0, C r_0, ...` (each normalised), an orthonormal basis of
/// their span and the index at which the span stops growing.
#[derive(Debug, Clone)]
pub struct ExplicitKrylov {
    pub powers: Vec<Vec<f64>>,
    /// `basis[..k]` spans `K_k(C, r_0)` for every `k <= basis.len()`.
    pub basis: Vec<Vec<f64>>,
    /// `ranks[k - 1] = dim K_k`, for the spaces examined.
    pub ranks: Vec<usize>,
    /// Smallest `k` with `K_{k+1} = K_k`, if reached within `k_max`.
    pub degree_d: Option<usize>,
}

impl ExplicitKrylov {
    /// Orthonormal basis of `K_k`.
    pub fn basis_k(&self, k: usize) -> &[Vec<f64>] {
        &self.basis[..k.min(self.basis.len())]
    }

    /// Relative distance of `v` from the full computed span.
    pub fn relative_distance(&self, v: &[f64]) -> f64 {
        let nv = norm(v);
        if nv == 0.0 {
            return 0.0;
        }
        let mut w = v.to_vec();
        orthogonalize(&mut w, &self.basis, 2);
        norm(&w) / nv
    }
}

/// Builds `K_k(C, r_0)` for `k = 1..=k_max`.
///
/// The raw powers are kept (normalised) in `powers`. The basis extends
/// `q_1..q_k` by `C q_k` orthogonalised twice against all previous vectors,
/// which spans the same space as the next power without the loss of
/// digits that orthogonalising the powers themselves suffers. When the
/// new component has relative norm at most `rank_tol` the space has stopped
/// growing and `degree_d` is set.
pub fn explicit_krylov(
    op: &dyn LinearOperator,
    r0: &[f64],
    k_max: usize,
    rank_tol: f64,
) -> Result<ExplicitKrylov> {
    check_len("krylov start vector", op.dim(), r0.len())?;
    let n0 = norm(r0);
    if n0 == 0.0 {
        return Err(Error::Contract("r0 = 0: the system is already solved at x0".into()));
    }
    let mut kry = ExplicitKrylov {
        powers: Vec::new(),
        basis: Vec::new(),
        ranks: Vec::new(),
        degree_d: None,
    };
    let unit = |v: &[f64]| -> Option<Vec<f64>> {
        let nv = norm(v);
        (nv > 0.0).then(|| v.iter().map(|x| x / nv).collect())
    };
    let mut power: Vec<f64> = r0.iter().map(|v| v / n0).collect();
    let mut candidate = power.clone();
    for _ in 0..k_max {
        kry.powers.push(power.clone());
        let mut w = candidate;
        let before = norm(&w);
        orthogonalize(&mut w, &kry.basis, 2);
        let nw = norm(&w);
        if before == 0.0 || nw <= rank_tol * before {
            kry.ranks.push(kry.basis.len());
            kry.degree_d = Some(kry.basis.len());
            break;
        }
        let q: Vec<f64> = w.iter().map(|v| v / nw).collect();
        candidate = op.apply(&q);
        kry.basis.push(q);
        kry.ranks.push(kry.basis.len());
        power = unit(&op.apply(&power)).unwrap_or_else(|| vec![0.0; r0.len()]);
    }
    Ok(kry)
}

/// The point of `x_0 + span(basis)` closest to `x*`, from the normal
/// equations of the basis.
pub fn best_in_krylov(x0: &[f64], basis: &[Vec<f64>], x_star: &[f64]) -> Result<Vec<f64>> {
    check_len("reference solution", x0.len(), x_star.len())?;
    if basis.is_empty() {
        return Ok(x0.to_vec());
    }
    let e0 = sub(x_star, x0);
    let k = basis.len();
    let mut gram = Matrix::zeros(k, k);
    for i in 0..k {
        check_len("basis vector", x0.len(), basis[i].len())?;
        for j in i..k {
            let v = dot(&basis[i], &basis[j]);
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    let rhs: Vec<f64> = basis.iter().map(|q| dot(q, &e0)).collect();
    let coeffs = sym_eig(&gram)?.pseudo_apply(&rhs, 1e-12)?;
    let mut x = x0.to_vec();
    for (c, q) in coeffs.iter().zip(basis) {
        axpy(*c, q, &mut x);
    }
    Ok(x)
}

/// `‖x* - best_in_krylov(x0, basis, x*)‖`
pub fn krylov_distance(x0: &[f64], basis: &[Vec<f64>], x_star: &[f64]) -> Result<f64> {
    Ok(dist(&best_in_krylov(x0, basis, x_star)?, x_star))
}

/// Maximum deviations of the coordinate identities, each divided by
/// `‖x* - x0‖`.
#[derive(Debug, Clone, Default)]
pub struct AbstractReport {
    /// `μ_i = ⟨x* - x0, q_i⟩`
    pub mu: Vec<f64>,
    /// `‖x0 + Σ μ_i q_i - x*‖`
    pub reconstruction: f64,
    /// `max_k ‖(x0 + Σ_{i<=k} μ_i q_i) - best_in_krylov_k‖`
    pub iterates: f64,
    /// `max_k ‖(x* - x_k) - Σ_{i>k} μ_i q_i‖`
    pub errors: f64,
    /// `max_k |μ_{k+1} - ⟨e_k, r_k⟩ / u_{k+1,k+1}|`
    pub coordinates: f64,
    /// `max_k max_{i>k+1} |⟨r_k, q_i⟩| / ‖r_k‖`: upper-triangularity of `U`.
    pub triangularity: f64,
    /// Steps where `|u_{k+1,k+1}|` was too small to divide by.
    pub skipped: Vec<usize>,
}

impl AbstractReport {
    pub fn max_deviation(&self) -> f64 {
        self.reconstruction
            .max(self.iterates)
            .max(self.errors)
            .max(self.coordinates)
    }
}

/// Guard on `|u_{k+1,k+1}| / ‖r_k‖` below which identity (iv) is skipped.
const DIAGONAL_GUARD: f64 = 1e-12;

/// Checks, for an orthonormal nested basis `q_1..q_d` of the Krylov spaces
/// and the residuals `r_k = g - C x_k` of the optimal iterates
/// (`k = 0..d-1`):
///
/// 1. `x* = x0 + Σ_{i<=d} μ_i q_i`
/// 2. `x_k = x0 + Σ_{i<=k} μ_i q_i` is the best approximation from `x0 + K_k`
/// 3. `e_k = Σ_{i>k} μ_i q_i`
/// 4. `μ_{k+1} = ⟨e_k, r_k⟩ / u_{k+1,k+1}` with `u_{k+1,k+1} = ⟨r_k, q_{k+1}⟩`
pub fn verify_abstract_representation(
    x0: &[f64],
    x_star: &[f64],
    q: &[Vec<f64>],
    residuals: &[Vec<f64>],
) -> Result<AbstractReport> {
    let n = x0.len();
    check_len("reference solution", n, x_star.len())?;
    let d = q.len();
    check_len("residual count", d, residuals.len())?;
    let e0 = sub(x_star, x0);
    let scale = norm(&e0).max(f64::MIN_POSITIVE);
    let mu: Vec<f64> = q.iter().map(|qi| dot(&e0, qi)).collect();

    let partial = |k: usize| {
        let mut x = x0.to_vec();
        for (m, qi) in mu.iter().zip(q).take(k) {
            axpy(*m, qi, &mut x);
        }
        x
    };

    let mut rep = AbstractReport {
        reconstruction: dist(&partial(d), x_star) / scale,
        ..Default::default()
    };
    for k in 0..=d {
        let xk = partial(k);
        let best = best_in_krylov(x0, &q[..k], x_star)?;
        rep.iterates = rep.iterates.max(dist(&xk, &best) / scale);

        let ek = sub(x_star, &xk);
        let mut tail = vec![0.0; n];
        for (m, qi) in mu.iter().zip(q).skip(k) {
            axpy(*m, qi, &mut tail);
        }
        rep.errors = rep.errors.max(dist(&ek, &tail) / scale);

        if k < d {
            let rk = &residuals[k];
            check_len("residual vector", n, rk.len())?;
            let rn = norm(rk);
            if rn == 0.0 {
                rep.skipped.push(k);
                continue;
            }
            for qi in &q[(k + 1).min(d)..] {
                rep.triangularity = rep.triangularity.max(dot(rk, qi).abs() / rn);
            }
            let u = dot(rk, &q[k]);
            if u.abs() <= DIAGONAL_GUARD * rn {
                rep.skipped.push(k);
                continue;
            }
            let coord = dot(&ek, rk) / u;
            rep.coordinates = rep.coordinates.max((coord - mu[k]).abs() / scale);
        }
    }
    rep.mu = mu;
    Ok(rep)
}
