//! Row-block partitions of a consistent system `Ax = b` and the
//! precomputed projectors onto the block solution sets.

use std::ops::Range;

use crate::error::{check_len, Error, Result};
use crate::numerics::{default_rank_tol, dot, sym_eig, Matrix, SymEig};

/// `A` and `b` split into contiguous row blocks `(A_j, b_j)`.
#[derive(Debug, Clone)]
pub struct PartitionedSystem {
    a: Matrix,
    b: Vec<f64>,
    blocks: Vec<Range<usize>>,
}

impl PartitionedSystem {
    /// Validates that `blocks` are nonempty, ordered, disjoint and cover
    /// every row of `a` exactly once.
    pub fn new(a: Matrix, b: Vec<f64>, blocks: Vec<Range<usize>>) -> Result<Self> {
        check_len("right-hand side vs matrix rows", a.rows(), b.len())?;
        if blocks.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        let mut next = 0;
        for (j, r) in blocks.iter().enumerate() {
            if r.start != next {
                return Err(Error::InvalidPartition(format!(
                    "block {j} starts at row {} but row {next} is next",
                    r.start
                )));
            }
            if r.end <= r.start {
                return Err(Error::InvalidPartition(format!("block {j} is empty")));
            }
            next = r.end;
        }
        if next != a.rows() {
            return Err(Error::InvalidPartition(format!(
                "blocks cover {next} rows, matrix has {}",
                a.rows()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("right-hand side must be finite".into()));
        }
        Ok(Self { a, b, blocks })
    }

    /// Blocks of `block_size` consecutive rows; the last block may be shorter.
    pub fn partition_uniform(a: Matrix, b: Vec<f64>, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidPartition("block size must be at least 1".into()));
        }
        check_len("right-hand side vs matrix rows", a.rows(), b.len())?;
        let m = a.rows();
        let blocks = (0..m)
            .step_by(block_size)
            .map(|s| s..(s + block_size).min(m))
            .collect();
        Self::new(a, b, blocks)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn block_ranges(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }

    pub fn block(&self, j: usize) -> (Matrix, &[f64]) {
        let r = &self.blocks[j];
        (self.a.row_block(r.start, r.end), &self.b[r.clone()])
    }

    /// The palindromic block sequence `(A_1, ..., A_p, A_{p-1}, ..., A_1)`
    /// whose cycle is `P_1 ∘ ... ∘ P_p ∘ ... ∘ P_1`.
    pub fn symmetric_expand(&self) -> PartitionedSystem {
        let p = self.blocks.len();
        let order: Vec<usize> = (0..p).chain((0..p.saturating_sub(1)).rev()).collect();
        let n = self.a.cols();
        let mut data = Vec::new();
        let mut b = Vec::new();
        let mut blocks = Vec::with_capacity(order.len());
        let mut row = 0;
        for j in order {
            let r = &self.blocks[j];
            data.extend_from_slice(&self.a.data()[r.start * n..r.end * n]);
            b.extend_from_slice(&self.b[r.clone()]);
            blocks.push(row..row + r.len());
            row += r.len();
        }
        let a = Matrix::from_row_major(row, n, data).expect("rows copied from a valid matrix");
        PartitionedSystem { a, b, blocks }
    }

    /// `‖b - Ax‖`
    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        (0..self.a.rows())
            .map(|i| {
                let r = self.b[i] - dot(self.a.row(i), x);
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// One block `A_j` with the eigendecomposition of `A_j A_jᵀ`, ready to apply
/// `P_j(x) = x - A_jᵀ (A_j A_jᵀ)† (A_j x - b_j)`.
#[derive(Debug, Clone)]
pub struct BlockProjector {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub gram_eig: SymEig,
    pub rank_tol: f64,
}

impl BlockProjector {
    /// `rank_tol` defaults to `max(m_j, n) * 2^-52` relative to the largest
    /// Gram eigenvalue.
    pub fn new(a: Matrix, b: Vec<f64>, rank_tol: Option<f64>) -> Result<Self> {
        check_len("block right-hand side", a.rows(), b.len())?;
        let rank_tol = rank_tol.unwrap_or_else(|| default_rank_tol(a.rows(), a.cols()));
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::Contract(format!(
                "rank tolerance must lie in (0, 1), got {rank_tol}"
            )));
        }
        let mut gram_eig = sym_eig(&a.gram_rows())?;
        // Gram matrices are PSD; roundoff negatives are clipped
        for v in gram_eig.values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            a,
            b,
            gram_eig,
            rank_tol,
        })
    }

    pub fn rows(&self) -> usize {
        self.a.rows()
    }

    pub fn cols(&self) -> usize {
        self.a.cols()
    }
}

/// One projector per block, in block order.
pub fn build_projectors(sys: &PartitionedSystem, rank_tol: Option<f64>) -> Result<Vec<BlockProjector>> {
    (0..sys.block_count())
        .map(|j| {
            let (a, b) = sys.block(j);
            BlockProjector::new(a, b.to_vec(), rank_tol)
        })
        .collect()
}
