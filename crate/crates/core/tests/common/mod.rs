#![allow(dead_code)]

use kaczmarz_krylov::numerics::sym_eig;
use kaczmarz_krylov::problems::{gen_random, gen_rank_deficient, Problem, ProblemKind, SplitMix64};
use kaczmarz_krylov::system::{build_projectors, BlockProjector, PartitionedSystem};

pub struct Case {
    pub problem: Problem,
    pub blocks: usize,
    pub projectors: Vec<BlockProjector>,
    /// Minimum-norm solution `Aᵀ(AAᵀ)⁺b`, the limit of every method from `x_0 = 0`.
    pub x_ref: Vec<f64>,
}

impl Case {
    pub fn n(&self) -> usize {
        self.problem.a.cols()
    }

    pub fn x0(&self) -> Vec<f64> {
        vec![0.0; self.n()]
    }
}

pub fn partition(problem: Problem, blocks: usize, symmetric: bool) -> Case {
    let m = problem.a.rows();
    let blocks = blocks.clamp(1, m);
    let size = m.div_ceil(blocks);
    let mut sys = PartitionedSystem::partition_uniform(problem.a.clone(), problem.b.clone(), size).unwrap();
    if symmetric {
        sys = sys.symmetric_expand();
    }
    let projectors = build_projectors(&sys, None).unwrap();
    let a = &problem.a;
    // generated x* already lies in R(Aᵀ) unless A has more columns than rows
    let x_ref = if problem.spec.kind == ProblemKind::Random && a.rows() < a.cols() {
        let z = sym_eig(&a.gram_rows()).unwrap().pseudo_apply(&problem.b, 1e-12).unwrap();
        a.matvec_t(&z)
    } else {
        problem.x_star.clone()
    };
    Case { blocks: sys.block_count(), problem, projectors, x_ref }
}

fn pick(rng: &mut SplitMix64, lo: usize, hi: usize) -> usize {
    lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize
}

/// Mixed corpus: `m <= 60`, `n <= 30`, `p` in `1..=6`; every fourth case
/// rank deficient.
pub fn mixed_case(seed: u64) -> Case {
    let mut rng = SplitMix64::new(0xC0FF_EE00 ^ seed);
    let m = pick(&mut rng, 1, 60);
    let n = pick(&mut rng, 1, 30);
    let p = pick(&mut rng, 1, 6);
    let problem = if seed % 4 == 3 && m.min(n) >= 2 {
        let r = pick(&mut rng, 1, m.min(n) - 1);
        gen_rank_deficient(m, n, r, seed).unwrap()
    } else {
        gen_random(m, n, seed).unwrap()
    };
    partition(problem, p, false)
}

/// Overdetermined Gaussian system (`m >= n`, full column rank with
/// probability one).
pub fn full_rank_case(seed: u64, n_max: usize, symmetric: bool) -> Case {
    let mut rng = SplitMix64::new(0xFACE_0000 ^ seed);
    let n = pick(&mut rng, 2, n_max);
    let m = pick(&mut rng, n, 2 * n);
    let p = pick(&mut rng, 2, 6);
    partition(gen_random(m, n, seed).unwrap(), p, symmetric)
}
