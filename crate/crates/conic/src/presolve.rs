//! Linear-dependence screening of the constraint rows.
//!
//! Rows are vectorized (`svec`, off-diagonals weighted by sqrt 2 so the
//! Euclidean inner product equals the trace inner product) and screened in
//! order by twice-applied Gram-Schmidt. A dependent row is either redundant
//! (dropped) or contradicts the earlier rows, in which case the combination
//! that cancels the matrices is a Farkas certificate with `b'y = 1` and
//! `A^T y = 0`.

use crate::problem::ConicProblem;

const RANK_TOL: f64 = 1e-9;
const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum RowScreen {
    /// Indices of a maximal independent subset (in input order) and the dropped rows.
    Independent { kept: Vec<usize>, dropped: Vec<usize> },
    /// Dependent rows with incompatible right-hand sides.
    Contradiction { certificate: Vec<f64> },
}

fn offsets(dims: &[usize]) -> (Vec<usize>, usize) {
    let mut off = Vec::with_capacity(dims.len());
    let mut total = 0;
    for &d in dims {
        off.push(total);
        total += d * (d + 1) / 2;
    }
    (off, total)
}

pub fn svec_rows(problem: &ConicProblem) -> Vec<Vec<f64>> {
    let (off, total) = offsets(&problem.block_dims);
    let s2 = std::f64::consts::SQRT_2;
    problem
        .constraints
        .iter()
        .map(|c| {
            let mut v = vec![0.0; total];
            for t in &c.terms {
                let d = problem.block_dims[t.block];
                let mut k = off[t.block];
                for col in 0..d {
                    for row in 0..=col {
                        let w = if row == col { 1.0 } else { s2 };
                        v[k] += w * t.matrix[(row, col)];
                        k += 1;
                    }
                }
            }
            v
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn screen_rows(problem: &ConicProblem) -> RowScreen {
    let rows = svec_rows(problem);
    let m = rows.len();
    let b = problem.rhs();
    let b_scale = 1.0 + b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    // Orthonormal basis and each basis vector's expression in original rows.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut coeffs: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let norm = dot(row, row).sqrt();
        let mut r = row.clone();
        let mut comb = vec![0.0; m];
        comb[i] = 1.0;
        for _ in 0..2 {
            for (q, t) in basis.iter().zip(&coeffs) {
                let alpha = dot(q, &r);
                if alpha != 0.0 {
                    r.iter_mut().zip(q).for_each(|(x, qv)| *x -= alpha * qv);
                    comb.iter_mut().zip(t).for_each(|(c, tv)| *c -= alpha * tv);
                }
            }
        }
        let rn = dot(&r, &r).sqrt();
        if rn <= RANK_TOL * norm.max(1e-300) || norm == 0.0 {
            // comb now satisfies sum_j comb_j a_j ~ 0.
            let by = dot(&comb, &b);
            let comb_size: f64 = comb.iter().map(|c| c.abs()).sum();
            if by.abs() > CONSISTENCY_TOL * b_scale * comb_size.max(1.0) {
                let certificate = comb.iter().map(|c| c / by).collect();
                return RowScreen::Contradiction { certificate };
            }
            dropped.push(i);
        } else {
            r.iter_mut().for_each(|x| *x /= rn);
            comb.iter_mut().for_each(|c| *c /= rn);
            basis.push(r);
            coeffs.push(comb);
            kept.push(i);
        }
    }
    RowScreen::Independent { kept, dropped }
}
