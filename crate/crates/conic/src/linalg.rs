//! Dense symmetric-matrix kernels used by the interior-point iteration.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)]];
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    *sym_eigenvalues(m).last().expect("non-empty block")
}

pub fn cholesky_lower(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(m.clone()).map(|c| c.l())
}

/// `L^{-1} M L^{-T}` for lower-triangular `L`.
pub fn congruence_inv(l: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    let z = l.solve_lower_triangular(m).expect("nonsingular Cholesky factor");
    let zt = z.transpose();
    let mut out = l.solve_lower_triangular(&zt).expect("nonsingular Cholesky factor").transpose();
    symmetrize(&mut out);
    out
}

/// Largest `alpha` with `X + alpha dX` PSD, given the Cholesky factor of `X`.
pub fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let lam = min_eigenvalue(&congruence_inv(l, dx));
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

/// Nesterov-Todd scaling of one block.
///
/// `G` satisfies `G^T S G = G^{-1} X G^{-T} = diag(d)`, and `W = G G^T`
/// is the NT scaling point (`W S W = X`).
#[derive(Debug, Clone)]
pub struct NtScaling {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub d: DVector<f64>,
    pub w: DMatrix<f64>,
}

impl NtScaling {
    pub fn new(lx: &DMatrix<f64>, ls: &DMatrix<f64>) -> Option<Self> {
        let n = lx.nrows();
        let prod = ls.transpose() * lx;
        let svd = prod.svd(false, true);
        let v_t = svd.v_t?;
        let d = svd.singular_values;
        if d.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return None;
        }
        let v = v_t.transpose();
        let mut g = lx * &v;
        let mut g_inv_rows = v_t.clone();
        for k in 0..n {
            let s = d[k].sqrt();
            g.column_mut(k).scale_mut(1.0 / s);
            g_inv_rows.row_mut(k).scale_mut(s);
        }
        // G^{-1} = D^{1/2} V^T L_x^{-1}
        let g_inv = lx.transpose().solve_upper_triangular(&g_inv_rows.transpose())?.transpose();
        let mut w = &g * g.transpose();
        symmetrize(&mut w);
        Some(Self { g, g_inv, d, w })
    }

    /// `G R G^T`.
    pub fn unscale(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = &self.g * r * self.g.transpose();
        symmetrize(&mut m);
        m
    }

    /// `G^{-1} dX G^{-T}`.
    pub fn scale_primal(&self, dx: &DMatrix<f64>) -> DMatrix<f64> {
        &self.g_inv * dx * self.g_inv.transpose()
    }

    /// `G^T dS G`.
    pub fn scale_dual(&self, ds: &DMatrix<f64>) -> DMatrix<f64> {
        self.g.transpose() * ds * &self.g
    }

    /// `W M W`.
    pub fn sandwich(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.w * m * &self.w;
        symmetrize(&mut out);
        out
    }

    /// Solves `diag(d) o Z = R` (Jordan product) for symmetric `Z`.
    pub fn lyap_solve(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let n = r.nrows();
        DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (self.d[i] + self.d[j]))
    }
}

/// Cholesky solve of a symmetric positive definite system with escalating
/// diagonal perturbation. Returns the factor and the perturbation used.
pub fn robust_cholesky(m: &DMatrix<f64>, start: f64, limit: f64) -> Option<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some((c, 0.0));
    }
    let scale = m.diagonal().iter().fold(1.0_f64, |a, &v| a.max(v.abs()));
    let mut delta = start;
    while delta <= limit * (1.0 + 1e-9) {
        let mut p = m.clone();
        for i in 0..p.nrows() {
            p[(i, i)] += delta * scale;
        }
        if let Some(c) = Cholesky::new(p) {
            return Some((c, delta));
        }
        delta *= 10.0;
    }
    None
}
