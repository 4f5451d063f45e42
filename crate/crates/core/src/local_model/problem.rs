use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::basis::Basis;
use super::fit::LocalFit;
use super::ladder::ScaleLadder;
use super::points::{euclidean, Points};
use crate::error::{invalid, Error, Result};
use crate::linalg::{generalized_eig_range, guarded_cholesky, sym_eigenvalues, symmetrize};

/// All scale-dependent linear operators at one reference point, precomputed so
/// that a fit for a new response vector costs `K * p * m` multiply-adds.
///
/// Only the `m` design points inside the largest usable window are kept. If a
/// scale fails the conditioning guard the ladder is truncated just below it.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    x: Vec<f64>,
    p: usize,
    requested_scales: usize,
    bandwidths: Vec<f64>,
    active: Vec<usize>,
    /// `m x p`, row `i` is `psi(X_i - x)^T`.
    psi: DMatrix<f64>,
    weights: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    b: Vec<DMatrix<f64>>,
    chol: Vec<Cholesky<f64, Dyn>>,
    /// `p x m` operators `B_k^{-1} Psi W_k`.
    d: Vec<DMatrix<f64>>,
    rejected: Option<(usize, String)>,
}

impl LocalProblem {
    pub fn new(basis: &Basis, ladder: &ScaleLadder, points: &Points, sigma_model: &[f64], x: &[f64]) -> Result<Self> {
        if sigma_model.len() != points.len() {
            return Err(invalid("noise levels and design points differ in length"));
        }
        if x.len() != points.dim() || basis.dim() != points.dim() {
            return Err(invalid("dimension mismatch between basis, design and reference point"));
        }
        if sigma_model.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid("noise levels must be positive"));
        }
        let p = basis.p();
        let k_max = ladder.scales();
        let radius = ladder.kernel.support_radius(ladder.bandwidth(k_max));
        let dists: Vec<(usize, f64)> = points
            .iter()
            .enumerate()
            .map(|(i, t)| (i, euclidean(t, x)))
            .filter(|(_, d)| *d <= radius)
            .collect();
        let active: Vec<usize> = dists
            .iter()
            .filter(|(_, d)| ladder.kernel.weight(*d, ladder.bandwidth(k_max)) > 0.0)
            .map(|(i, _)| *i)
            .collect();
        let m = active.len();
        let mut psi = DMatrix::zeros(m, p);
        let mut row = vec![0.0; p];
        let mut offset = vec![0.0; points.dim()];
        for (r, &i) in active.iter().enumerate() {
            for (o, (a, c)) in offset.iter_mut().zip(points.point(i).iter().zip(x)) {
                *o = a - c;
            }
            basis.evaluate_into(&offset, &mut row);
            for j in 0..p {
                psi[(r, j)] = row[j];
            }
        }
        let sigma: Vec<f64> = active.iter().map(|&i| sigma_model[i]).collect();

        let mut out = Self {
            x: x.to_vec(),
            p,
            requested_scales: k_max,
            bandwidths: Vec::new(),
            active,
            psi,
            weights: Vec::new(),
            sigma,
            b: Vec::new(),
            chol: Vec::new(),
            d: Vec::new(),
            rejected: None,
        };
        for k in 1..=k_max {
            let h = ladder.bandwidth(k);
            let w: Vec<f64> = out
                .active
                .iter()
                .map(|&i| ladder.kernel.weight(euclidean(points.point(i), x), h))
                .collect();
            match out.push_scale(h, w) {
                Ok(()) => {}
                Err(reason) => {
                    if k == 1 {
                        return Err(Error::SingularDesign { scale: 1, reason });
                    }
                    out.rejected = Some((k, reason));
                    break;
                }
            }
        }
        Ok(out)
    }

    fn push_scale(&mut self, h: f64, w: Vec<f64>) -> std::result::Result<(), String> {
        let p = self.p;
        let m = self.active.len();
        let active = w.iter().filter(|v| **v > 0.0).count();
        if active < p {
            return Err(format!("{active} active points for {p} basis functions"));
        }
        // Psi^T W with W = diag(w / sigma^2)
        let mut psi_w = DMatrix::zeros(p, m);
        for r in 0..m {
            let c = w[r] / (self.sigma[r] * self.sigma[r]);
            for j in 0..p {
                psi_w[(j, r)] = self.psi[(r, j)] * c;
            }
        }
        let mut b = &psi_w * &self.psi;
        symmetrize(&mut b);
        let chol = guarded_cholesky(&b)?;
        let d = chol.solve(&psi_w);
        self.bandwidths.push(h);
        self.weights.push(w);
        self.b.push(b);
        self.chol.push(chol);
        self.d.push(d);
        Ok(())
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of usable (nonsingular, contiguous) scales.
    pub fn scales(&self) -> usize {
        self.b.len()
    }

    pub fn requested_scales(&self) -> usize {
        self.requested_scales
    }

    /// First rejected scale and the reason, if the ladder was truncated.
    pub fn rejected(&self) -> Option<&(usize, String)> {
        self.rejected.as_ref()
    }

    pub fn bandwidth(&self, k: usize) -> f64 {
        self.bandwidths[k - 1]
    }

    pub fn b(&self, k: usize) -> &DMatrix<f64> {
        &self.b[k - 1]
    }

    pub fn b_cholesky(&self, k: usize) -> &Cholesky<f64, Dyn> {
        &self.chol[k - 1]
    }

    pub fn b_inverse(&self, k: usize) -> DMatrix<f64> {
        self.chol[k - 1].inverse()
    }

    /// `B_k^{-1} Psi W_k` restricted to the active points (`p x m`).
    pub fn operator(&self, k: usize) -> &DMatrix<f64> {
        &self.d[k - 1]
    }

    /// Kernel weights of the active points at scale `k`.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[k - 1]
    }

    pub fn active_indices(&self) -> &[usize] {
        &self.active
    }

    pub fn active_sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Basis rows `psi(X_i - x)` of the active points (`m x p`).
    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.active.iter().map(|&i| full[i]).collect()
    }

    /// Writes `theta_1, ..., theta_K` (each of length `p`) into `out` for a
    /// response restricted to the active points.
    pub fn thetas_into(&self, y_active: &[f64], out: &mut [f64]) {
        let p = self.p;
        for (k, d) in self.d.iter().enumerate() {
            let slot = &mut out[k * p..(k + 1) * p];
            for j in 0..p {
                let mut acc = 0.0;
                for (r, y) in y_active.iter().enumerate() {
                    acc += d[(j, r)] * y;
                }
                slot[j] = acc;
            }
        }
    }

    pub fn thetas_active(&self, y_active: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.scales() * self.p];
        self.thetas_into(y_active, &mut out);
        out
    }

    /// Fits at every usable scale for a full-length response vector.
    pub fn fits(&self, y: &[f64]) -> Vec<LocalFit> {
        let flat = self.thetas_active(&self.gather(y));
        flat.chunks_exact(self.p)
            .enumerate()
            .map(|(k, t)| LocalFit {
                k: k + 1,
                theta: DVector::from_column_slice(t),
                b: self.b[k].clone(),
            })
            .collect()
    }

    /// Pseudo-true parameters `B_k^{-1} Psi W_k f` for every usable scale.
    pub fn pseudo_true(&self, f: &[f64]) -> Vec<DVector<f64>> {
        let flat = self.thetas_active(&self.gather(f));
        flat.chunks_exact(self.p).map(DVector::from_column_slice).collect()
    }

    /// `sum_i psi_i psi_i^T w_{l,i} w_{m,i} s_i^2 / sigma_i^4` for true noise
    /// levels `s` on the active points: the middle factor of `D_l S D_m^T`.
    pub fn cross_information(&self, l: usize, m: usize, sigma_true_active: &[f64]) -> DMatrix<f64> {
        let p = self.p;
        let wl = &self.weights[l - 1];
        let wm = &self.weights[m - 1];
        let mut c = DMatrix::zeros(p, p);
        for r in 0..self.active.len() {
            let s2 = self.sigma[r] * self.sigma[r];
            let coef = wl[r] * wm[r] * sigma_true_active[r] * sigma_true_active[r] / (s2 * s2);
            if coef == 0.0 {
                continue;
            }
            for i in 0..p {
                for j in 0..p {
                    c[(i, j)] += self.psi[(r, i)] * self.psi[(r, j)] * coef;
                }
            }
        }
        c
    }

    /// Empirical growth bounds: min and max over `k` of the eigenvalues of
    /// `B_{k-1}^{-1/2} B_k B_{k-1}^{-1/2}`. `None` for a single usable scale.
    pub fn growth_bounds(&self) -> Option<(f64, f64)> {
        if self.scales() < 2 {
            return None;
        }
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for k in 2..=self.scales() {
            let (a, b) = generalized_eig_range(&self.b[k - 1], &self.chol[k - 2]);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Some((lo, hi))
    }

    pub fn lambda_min(&self, k: usize) -> f64 {
        sym_eigenvalues(&self.b[k - 1])[0]
    }

    /// Largest model noise level among points with positive weight at scale `k`.
    pub fn sigma_max(&self, k: usize) -> f64 {
        self.weights[k - 1]
            .iter()
            .zip(&self.sigma)
            .filter(|(w, _)| **w > 0.0)
            .map(|(_, s)| *s)
            .fold(0.0, f64::max)
    }

    /// `max_{l <= k} sigma_max(l)`.
    pub fn sigma_max_running(&self, k: usize) -> f64 {
        (1..=k).map(|l| self.sigma_max(l)).fold(0.0, f64::max)
    }

    /// Whether all usable scales satisfy `w_l * w_m = w_l` for `l <= m`.
    pub fn is_nested_boxcar(&self) -> bool {
        let k = self.scales();
        for l in 0..k {
            if self.weights[l].iter().any(|w| *w != 0.0 && *w != 1.0) {
                return false;
            }
            for m in l + 1..k {
                if self.weights[l]
                    .iter()
                    .zip(&self.weights[m])
                    .any(|(a, b)| a * b != *a)
                {
                    return false;
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_model::{qmle, build_weights, Kernel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene() -> (Basis, ScaleLadder, Points, Vec<f64>) {
        let basis = Basis::polynomial(1, 1).unwrap();
        let ladder = ScaleLadder::geometric(0.1, 1.5, 4, Kernel::Epanechnikov).unwrap();
        let pts = Points::equidistant(120, 0.0, 1.0);
        let sigma: Vec<f64> = (0..120).map(|i| 0.5 + i as f64 / 120.0).collect();
        (basis, ladder, pts, sigma)
    }

    #[test]
    fn matches_direct_qmle() {
        let (basis, ladder, pts, sigma) = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..pts.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = [0.43];
        let prob = LocalProblem::new(&basis, &ladder, &pts, &sigma, &x).unwrap();
        assert_eq!(prob.scales(), 4);
        for fit in prob.fits(&y) {
            let w = build_weights(&ladder, &pts, &x, fit.k).unwrap();
            let direct = qmle(&basis, &w, &sigma, &pts, &x, &y, fit.k).unwrap();
            assert!((&fit.theta - &direct.theta).amax() < 1e-11);
            assert!((&fit.b - &direct.b).amax() < 1e-9);
        }
    }

    #[test]
    fn monotone_information() {
        let (basis, ladder, pts, sigma) = scene();
        let prob = LocalProblem::new(&basis, &ladder, &pts, &sigma, &[0.5]).unwrap();
        for k in 2..=prob.scales() {
            let diff = prob.b(k) - prob.b(k - 1);
            assert!(sym_eigenvalues(&diff)[0] >= -1e-10);
        }
        let (u0, u) = prob.growth_bounds().unwrap();
        assert!(u0 > 1.0 && u >= u0);
    }

    #[test]
    fn truncates_at_first_singular_scale() {
        let basis = Basis::polynomial(1, 1).unwrap();
        // scale 1 sees two points, scale 2 adds a point, scale 3 is fine too,
        // but scale 1 alone with one point would fail for p = 2
        let pts = Points::from_1d(&[0.0, 0.05, 0.5, 0.9]);
        let ladder = ScaleLadder::new(vec![0.01, 0.1, 1.0], Kernel::Boxcar).unwrap();
        let err = LocalProblem::new(&basis, &ladder, &pts, &[1.0; 4], &[0.0]).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { scale: 1, .. }));

        let ladder = ScaleLadder::new(vec![0.06, 0.07, 1.0], Kernel::Boxcar).unwrap();
        let prob = LocalProblem::new(&basis, &ladder, &pts, &[1.0; 4], &[0.0]).unwrap();
        assert_eq!(prob.scales(), 3);
        assert!(prob.rejected().is_none());
    }
}
