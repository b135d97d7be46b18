//! Seeded generators of random convex QP and MIQP instances, for tests and
//! benchmarks. Every instance is built around a known feasible point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::SparseMatrix;
use crate::miqp::MiqpProblem;
use crate::qp::QpProblem;

/// Shape of a generated instance.
#[derive(Debug, Clone, Copy)]
pub struct InstanceShape {
    pub n: usize,
    pub m_eq: usize,
    pub m_in: usize,
    /// Probability that a matrix entry is nonzero.
    pub density: f64,
}

impl InstanceShape {
    /// A shape drawn from the seed with `n` in `[2, max_n]`.
    pub fn sample(rng: &mut impl Rng, max_n: usize) -> Self {
        let n = rng.gen_range(2..=max_n.max(2));
        Self {
            n,
            m_eq: rng.gen_range(0..=n / 3),
            m_in: rng.gen_range(0..=n),
            density: rng.gen_range(0.1..0.6),
        }
    }
}

fn sparse_rows(rng: &mut impl Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..m {
        let mut any = false;
        for j in 0..n {
            if rng.gen_bool(density) {
                t.push((i, j, rng.gen_range(-3.0..3.0)));
                any = true;
            }
        }
        if !any {
            t.push((i, rng.gen_range(0..n), rng.gen_range(0.5..3.0)));
        }
    }
    SparseMatrix::from_triplets(m, n, &t)
}

/// Fills `p` with random rows that `x0` satisfies. Variables without
/// curvature always get finite bounds so the problem stays bounded.
fn populate(rng: &mut impl Rng, p: &mut QpProblem, x0: &[f64], shape: InstanceShape) {
    let n = shape.n;
    for j in 0..n {
        p.p_diag[j] = if rng.gen_bool(0.75) { rng.gen_range(0.1..5.0) } else { 0.0 };
        p.q[j] = rng.gen_range(-5.0..5.0);
        let needs_bounds = p.p_diag[j] == 0.0;
        match rng.gen_range(0..5) {
            0 if !needs_bounds => {}
            1 if !needs_bounds => p.lb[j] = x0[j] - rng.gen_range(0.0..2.0),
            2 if !needs_bounds => p.ub[j] = x0[j] + rng.gen_range(0.0..2.0),
            _ => {
                p.lb[j] = x0[j] - rng.gen_range(0.0..2.0);
                p.ub[j] = x0[j] + rng.gen_range(0.0..2.0);
            }
        }
    }
    p.a_eq = sparse_rows(rng, shape.m_eq, n, shape.density);
    p.b_eq = p.a_eq.mul_vec(x0);
    p.a_in = sparse_rows(rng, shape.m_in, n, shape.density);
    let ax = p.a_in.mul_vec(x0);
    p.l_in = Vec::with_capacity(shape.m_in);
    p.u_in = Vec::with_capacity(shape.m_in);
    for v in ax {
        let (lo, hi) = match rng.gen_range(0..4) {
            0 => (v - rng.gen_range(0.0..2.0), f64::INFINITY),
            1 => (f64::NEG_INFINITY, v + rng.gen_range(0.0..2.0)),
            2 => (v, v),
            _ => (v - rng.gen_range(0.0..2.0), v + rng.gen_range(0.0..2.0)),
        };
        p.l_in.push(lo);
        p.u_in.push(hi);
    }
    p.c0 = rng.gen_range(-1.0..1.0);
}

/// Random feasible convex QP together with one feasible point.
pub fn feasible_qp(seed: u64, max_n: usize) -> (QpProblem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = InstanceShape::sample(&mut rng, max_n);
    let x0: Vec<f64> = (0..shape.n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut p = QpProblem::new(shape.n);
    populate(&mut rng, &mut p, &x0, shape);
    (p, x0)
}

/// Random convex MIQP with `n_bin` binaries (the first variables) and
/// `n_cont` continuous variables. The binaries are coupled to continuous
/// variables through on/off style rows `x_j <= c·δ_b`, and a random binary
/// assignment is feasible by construction.
pub fn feasible_miqp(seed: u64, n_cont: usize, n_bin: usize) -> (MiqpProblem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_cont + n_bin;
    let shape = InstanceShape {
        n,
        m_eq: rng.gen_range(0..=n_cont / 4),
        m_in: rng.gen_range(1..=(n / 2).max(1)),
        density: rng.gen_range(0.1..0.4),
    };
    let mut x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    for v in x0.iter_mut().take(n_bin) {
        *v = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
    }
    let mut p = QpProblem::new(n);
    populate(&mut rng, &mut p, &x0, shape);
    for b in 0..n_bin {
        p.lb[b] = 0.0;
        p.ub[b] = 1.0;
        // mild curvature or none on binaries, and a cost that fights the
        // continuous benefit of switching on
        p.p_diag[b] = if rng.gen_bool(0.5) { rng.gen_range(0.0..2.0) } else { 0.0 };
        p.q[b] = rng.gen_range(-2.0..4.0);
    }
    // gate rows: x_j - c·δ_b <= x0_j - c·δ0_b, i.e. x0 stays feasible
    let mut t: Vec<(usize, usize, f64)> = p.a_in.triplets().collect();
    let mut lo = p.l_in.clone();
    let mut hi = p.u_in.clone();
    let mut row = p.a_in.nrows();
    if n_cont > 0 {
        for b in 0..n_bin {
            let j = n_bin + rng.gen_range(0..n_cont);
            let c = rng.gen_range(0.5..3.0);
            t.push((row, j, 1.0));
            t.push((row, b, -c));
            lo.push(f64::NEG_INFINITY);
            hi.push(x0[j] - c * x0[b] + rng.gen_range(0.0..0.5));
            row += 1;
        }
    }
    p.a_in = SparseMatrix::from_triplets(row, n, &t);
    p.l_in = lo;
    p.u_in = hi;
    (
        MiqpProblem {
            base: p,
            binary_indices: (0..n_bin).collect(),
        },
        x0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_point_is_feasible() {
        for seed in 0..50 {
            let (p, x0) = feasible_qp(seed, 30);
            p.validate().unwrap();
            assert!(p.max_violation(&x0) <= 1e-9, "seed {seed}");
        }
        for seed in 0..50 {
            let (p, x0) = feasible_miqp(seed, 20, 6);
            p.validate().unwrap();
            assert!(p.base.max_violation(&x0) <= 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn same_seed_same_instance() {
        assert_eq!(feasible_qp(7, 20).0, feasible_qp(7, 20).0);
    }
}
