//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Relative eigenvalue floor below which a local information matrix is rejected.
pub const SINGULARITY_TOL: f64 = 1e-10;

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factor of a symmetric matrix that passes the scale-free
/// conditioning guard `lambda_min >= SINGULARITY_TOL * lambda_max`.
pub fn guarded_cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, String> {
    let ev = sym_eigenvalues(m);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(hi > 0.0) || !(lo > SINGULARITY_TOL * hi) {
        return Err(format!("eigenvalue range [{lo:e}, {hi:e}] fails the conditioning guard"));
    }
    Cholesky::new(m.clone()).ok_or_else(|| "Cholesky factorization failed".to_string())
}

/// Ascending eigenvalues of `L^{-1} A L^{-T}` where `B = L L^T`; these are the
/// eigenvalues of `B^{-1/2} A B^{-1/2}`.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &Cholesky<f64, Dyn>) -> Vec<f64> {
    let l = b.l();
    let linv_a = l
        .solve_lower_triangular(a)
        .expect("triangular factor is nonsingular");
    let mut m = l
        .solve_lower_triangular(&linv_a.transpose())
        .expect("triangular factor is nonsingular");
    symmetrize(&mut m);
    sym_eigenvalues(&m)
}

/// Eigenvalue range of `B^{-1/2} A B^{-1/2}` for symmetric `A` and SPD `B`.
pub fn generalized_eig_range(a: &DMatrix<f64>, b: &Cholesky<f64, Dyn>) -> (f64, f64) {
    let l = b.l();
    let linv_a = l
        .solve_lower_triangular(a)
        .expect("triangular factor is nonsingular");
    let mut m = l
        .solve_lower_triangular(&linv_a.transpose())
        .expect("triangular factor is nonsingular");
    symmetrize(&mut m);
    let ev = sym_eigenvalues(&m);
    (ev[0], ev[ev.len() - 1])
}

/// `v^T M v`.
pub fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// `v^T M v` on raw slices for the hot Monte-Carlo paths.
pub fn quad_form_slice(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let p = v.len();
    let mut acc = 0.0;
    for i in 0..p {
        let mut row = 0.0;
        for j in 0..p {
            row += m[(i, j)] * v[j];
        }
        acc += v[i] * row;
    }
    acc
}
