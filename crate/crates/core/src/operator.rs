//! The block Kaczmarz cycle as an affine map `P(x) = Tx + g` and the
//! equivalent square system `Cx = g` with `C = I - T`.

use crate::error::{check_len, Error, Result};
use crate::numerics::{orthonormal_range_basis, sym_eig, Matrix};
use crate::sweep::{cycle, dimension};
use crate::system::BlockProjector;

/// Dense assembly is refused above this size unless explicitly forced.
pub const ASSEMBLY_LIMIT: usize = 4096;

/// Symmetry threshold for `BᵀCB`, absolute on the max-norm.
pub const SYMMETRY_TOL: f64 = 1e-8;

/// A square linear operator applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Vec<f64>;
}

/// Matrix-free `C v = v - P(v) + P(0)` over a set of block projectors.
#[derive(Debug, Clone)]
pub struct KaczmarzOperator<'a> {
    projectors: &'a [BlockProjector],
    g: Vec<f64>,
}

impl<'a> KaczmarzOperator<'a> {
    pub fn new(projectors: &'a [BlockProjector]) -> Result<Self> {
        let n = dimension(projectors)?;
        let g = cycle(projectors, &vec![0.0; n])?.y;
        Ok(Self { projectors, g })
    }

    pub fn projectors(&self) -> &'a [BlockProjector] {
        self.projectors
    }

    /// `g = P(0)`
    pub fn offset(&self) -> &[f64] {
        &self.g
    }

    pub fn apply_c(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("operator input", self.g.len(), v.len())?;
        let pv = cycle(self.projectors, v)?.y;
        Ok(v.iter()
            .zip(&pv)
            .zip(&self.g)
            .map(|((vi, pi), gi)| vi - pi + gi)
            .collect())
    }

    /// `g - C x = P(x) - x`
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let px = cycle(self.projectors, x)?.y;
        Ok(px.iter().zip(x).map(|(p, xi)| p - xi).collect())
    }
}

impl LinearOperator for KaczmarzOperator<'_> {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.apply_c(v).expect("operator input length")
    }
}

/// Dense `(T, g, C)`.
#[derive(Debug, Clone)]
pub struct AffineOperator {
    pub t: Matrix,
    pub g: Vec<f64>,
    pub c: Matrix,
}

impl AffineOperator {
    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// `T x + g`
    pub fn apply_p(&self, x: &[f64]) -> Vec<f64> {
        self.t
            .matvec(x)
            .into_iter()
            .zip(&self.g)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn apply_c(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("operator input", self.dim(), v.len())?;
        Ok(self.c.matvec(v))
    }
}

impl LinearOperator for AffineOperator {
    fn dim(&self) -> usize {
        self.g.len()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.c.matvec(v)
    }
}

/// Probes the cycle with `0` and the unit vectors: `g = P(0)`,
/// `T e_i = P(e_i) - g`, `C = I - T`. Costs `n + 1` cycles.
///
/// Refuses `n > ASSEMBLY_LIMIT` unless `allow_large` is set.
pub fn assemble(projectors: &[BlockProjector], n: usize, allow_large: bool) -> Result<AffineOperator> {
    let dim = dimension(projectors)?;
    check_len("operator dimension", dim, n)?;
    if n > ASSEMBLY_LIMIT && !allow_large {
        return Err(Error::SizeGate {
            n,
            limit: ASSEMBLY_LIMIT,
        });
    }
    let g = cycle(projectors, &vec![0.0; n])?.y;
    let mut t = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let p = cycle(projectors, &e)?.y;
        e[j] = 0.0;
        for i in 0..n {
            t.set(i, j, p[i] - g[i]);
        }
    }
    let c = Matrix::identity(n).sub(&t)?;
    Ok(AffineOperator { t, g, c })
}

/// `(1 + t) / (1 - t)`
pub fn quasi_opt_factor(t2_norm: f64) -> f64 {
    (1.0 + t2_norm) / (1.0 - t2_norm)
}

/// Spectral data of the operator restricted to `R(Aᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// `‖T₂‖₂`
    pub t2_norm: f64,
    pub quasi_opt_factor: f64,
    /// `λ_max(C₂) / λ_min(C₂)` when `C₂` is symmetric positive definite.
    pub kappa: Option<f64>,
    /// Eigenvalues of `C₂` (descending) when it is symmetric.
    pub c2_eigenvalues: Option<Vec<f64>>,
    pub c2_symmetric: bool,
    /// `max |C₂ - C₂ᵀ|`
    pub c2_asymmetry: f64,
    /// `dim R(Aᵀ)`
    pub range_dim: usize,
}

/// Restricts `T` and `C` to `R(Aᵀ)` through an orthonormal basis `B`:
/// `T₂ = BᵀTB`, `C₂ = BᵀCB`.
pub fn spectral_report(op: &AffineOperator, a: &Matrix, rank_tol: f64) -> Result<SpectralReport> {
    check_len("operator vs matrix columns", op.dim(), a.cols())?;
    let b = orthonormal_range_basis(a, rank_tol)?;
    let r = b.cols();
    if r == 0 {
        return Ok(SpectralReport {
            t2_norm: 0.0,
            quasi_opt_factor: 1.0,
            kappa: None,
            c2_eigenvalues: None,
            c2_symmetric: true,
            c2_asymmetry: 0.0,
            range_dim: 0,
        });
    }
    let bt = b.transpose();
    let t2 = bt.matmul(&op.t.matmul(&b)?)?;
    let c2 = bt.matmul(&op.c.matmul(&b)?)?;

    let t2_norm = sym_eig(&t2.gram_cols())?.lambda_max().max(0.0).sqrt();
    let c2_asymmetry = c2.asymmetry();
    let c2_symmetric = c2_asymmetry <= SYMMETRY_TOL;
    let (kappa, c2_eigenvalues) = if c2_symmetric {
        let mut sym = c2.clone();
        for i in 0..r {
            for j in i + 1..r {
                let m = 0.5 * (c2.get(i, j) + c2.get(j, i));
                sym.set(i, j, m);
                sym.set(j, i, m);
            }
        }
        let eig = sym_eig(&sym)?;
        let kappa = (eig.lambda_min() > 0.0).then(|| eig.lambda_max() / eig.lambda_min());
        (kappa, Some(eig.values))
    } else {
        (None, None)
    };
    Ok(SpectralReport {
        t2_norm,
        quasi_opt_factor: quasi_opt_factor(t2_norm),
        kappa,
        c2_eigenvalues,
        c2_symmetric,
        c2_asymmetry,
        range_dim: r,
    })
}

/// `2 ((√κ - 1) / (√κ + 1))^k`, the bound on `‖e_k‖ / ‖e_0‖` when `C₂`
/// is symmetric positive definite.
pub fn cg_bound(kappa: f64, k: usize) -> f64 {
    let s = kappa.sqrt();
    2.0 * ((s - 1.0) / (s + 1.0)).powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dist;
    use crate::system::{build_projectors, PartitionedSystem};

    fn projectors(rows: &[Vec<f64>], b: Vec<f64>, block: usize) -> Vec<BlockProjector> {
        let a = Matrix::from_rows(rows).unwrap();
        let sys = PartitionedSystem::partition_uniform(a, b, block).unwrap();
        build_projectors(&sys, None).unwrap()
    }

    #[test]
    fn identity_system_assembles_to_zero_t() {
        let ps = projectors(
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
            vec![1.0, -2.0, 3.0],
            2,
        );
        let op = assemble(&ps, 3, false).unwrap();
        assert!(op.t.max_abs() < 1e-15);
        assert_eq!(op.g, vec![1.0, -2.0, 3.0]);
        assert!(op.c.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);

        let rep = spectral_report(&op, &Matrix::identity(3), 1e-12).unwrap();
        assert!(rep.t2_norm < 1e-15);
        assert!((rep.quasi_opt_factor - 1.0).abs() < 1e-14);
    }

    #[test]
    fn assembled_columns_match_cycles() {
        let ps = projectors(&[vec![1.0, 0.0], vec![1.0, 1.0]], vec![1.0, 2.0], 1);
        let op = assemble(&ps, 2, false).unwrap();
        for x in [[1.0, 0.0], [0.0, 1.0], [0.3, -0.7]] {
            let direct = cycle(&ps, &x).unwrap().y;
            assert!(dist(&op.apply_p(&x), &direct) < 1e-14);
        }
        // T = (I - a2 a2ᵀ/2)(I - e1 e1ᵀ) = [[0, -1/2], [0, 1/2]]
        assert!((op.t.get(0, 0)).abs() < 1e-15);
        assert!((op.t.get(0, 1) + 0.5).abs() < 1e-15);
        assert!((op.t.get(1, 0)).abs() < 1e-15);
        assert!((op.t.get(1, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_block_leaves_t_unchanged() {
        let base = projectors(&[vec![1.0, 0.0], vec![1.0, 1.0]], vec![1.0, 2.0], 1);
        let mut extended = base.clone();
        extended.push(BlockProjector::new(Matrix::zeros(1, 2), vec![0.0], None).unwrap());
        let a = assemble(&base, 2, false).unwrap();
        let b = assemble(&extended, 2, false).unwrap();
        assert_eq!(a.t, b.t);
        assert_eq!(a.g, b.g);
    }

    #[test]
    fn matrix_free_agrees_with_dense() {
        let ps = projectors(
            &[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, -1.0], vec![3.0, 0.0, 1.0]],
            vec![1.0, 0.0, 2.0],
            1,
        );
        let op = assemble(&ps, 3, false).unwrap();
        let mf = KaczmarzOperator::new(&ps).unwrap();
        assert_eq!(mf.apply_c(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        let v = [0.4, -1.1, 2.5];
        assert!(dist(&mf.apply_c(&v).unwrap(), &op.apply_c(&v).unwrap()) < 1e-13);
        assert!(mf.apply_c(&[1.0]).is_err());
    }

    #[test]
    fn quasi_optimality_factor_at_point_nine() {
        let f = quasi_opt_factor(0.9);
        assert!((f - 19.0).abs() <= 4.0 * f64::EPSILON * 19.0, "{f}");
        assert_eq!(quasi_opt_factor(0.0), 1.0);
    }

    #[test]
    fn size_gate() {
        let ps = projectors(&[vec![1.0]], vec![1.0], 1);
        assert!(matches!(assemble(&ps, 2, false), Err(Error::DimensionMismatch { .. })));
        let wide = vec![BlockProjector::new(Matrix::zeros(1, ASSEMBLY_LIMIT + 1), vec![0.0], None).unwrap()];
        assert!(matches!(
            assemble(&wide, ASSEMBLY_LIMIT + 1, false),
            Err(Error::SizeGate { .. })
        ));
    }

    #[test]
    fn cg_bound_shape() {
        assert_eq!(cg_bound(1.0, 3), 0.0);
        assert_eq!(cg_bound(4.0, 0), 2.0);
        assert!((cg_bound(9.0, 2) - 2.0 * 0.25).abs() < 1e-15);
    }
}
