use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

type BasisFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Which family a [`Basis`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Polynomial { degree: usize },
    Custom,
}

/// Serializable description of a basis, resolved against the design dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisSpec {
    Polynomial { degree: usize },
}

impl BasisSpec {
    pub fn build(&self, dim: usize) -> Result<Basis> {
        match *self {
            BasisSpec::Polynomial { degree } => Basis::polynomial(dim, degree),
        }
    }
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec::Polynomial { degree: 0 }
    }
}

/// Local basis `psi(t - x)` evaluated at offsets from the reference point.
///
/// The polynomial family uses scaled monomials `u^a / a!` (per coordinate), so
/// that the fitted coefficients estimate the function value and its partial
/// derivatives at the reference point. Monomials are ordered by total degree
/// and lexicographically inside each degree; in one dimension this is
/// `(1, u, u^2/2, ..., u^q/q!)`.
#[derive(Clone)]
pub struct Basis {
    kind: BasisKind,
    dim: usize,
    p: usize,
    exponents: Vec<Vec<u32>>,
    custom: Option<Arc<BasisFn>>,
}

impl fmt::Debug for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Basis")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("p", &self.p)
            .finish()
    }
}

impl Basis {
    pub fn polynomial(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("design dimension must be at least 1"));
        }
        let exponents = graded_lex_exponents(dim, degree);
        Ok(Self {
            kind: BasisKind::Polynomial { degree },
            dim,
            p: exponents.len(),
            exponents,
            custom: None,
        })
    }

    /// A user-supplied basis; `eval(offset, out)` must write `p` finite values.
    pub fn custom<F>(dim: usize, p: usize, eval: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if dim == 0 || p == 0 {
            return Err(invalid("custom basis needs dim >= 1 and p >= 1"));
        }
        let basis = Self {
            kind: BasisKind::Custom,
            dim,
            p,
            exponents: Vec::new(),
            custom: Some(Arc::new(eval)),
        };
        let at_zero = basis.evaluate(&vec![0.0; dim]);
        if at_zero.iter().any(|v| !v.is_finite()) {
            return Err(invalid("custom basis is not finite at the reference point"));
        }
        Ok(basis)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self.kind, BasisKind::Polynomial { .. })
    }

    /// Exponent multi-index of each polynomial basis function (empty for custom bases).
    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn evaluate_into(&self, offset: &[f64], out: &mut [f64]) {
        debug_assert_eq!(offset.len(), self.dim);
        debug_assert_eq!(out.len(), self.p);
        if let Some(f) = &self.custom {
            f(offset, out);
            return;
        }
        for (slot, exps) in out.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (&u, &a) in offset.iter().zip(exps) {
                v *= scaled_power(u, a);
            }
            *slot = v;
        }
    }

    pub fn evaluate(&self, offset: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.p];
        self.evaluate_into(offset, &mut out);
        out
    }
}

fn scaled_power(u: f64, a: u32) -> f64 {
    let mut v = 1.0;
    for j in 1..=a {
        v *= u / j as f64;
    }
    v
}

fn graded_lex_exponents(dim: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut all = Vec::new();
    for total in 0..=degree as u32 {
        let mut current = vec![0u32; dim];
        push_compositions(total, 0, &mut current, &mut all);
    }
    all
}

// Emits every exponent vector with the given remaining total, first coordinate
// largest first.
fn push_compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for a in (0..=remaining).rev() {
        current[pos] = a;
        push_compositions(remaining - a, pos + 1, current, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_polynomial_is_scaled_taylor() {
        let b = Basis::polynomial(1, 3).unwrap();
        assert_eq!(b.p(), 4);
        let v = b.evaluate(&[2.0]);
        assert_eq!(v, vec![1.0, 2.0, 2.0, 8.0 / 6.0]);
        assert_eq!(b.evaluate(&[0.0]), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_dimensional_ordering() {
        let b = Basis::polynomial(2, 2).unwrap();
        assert_eq!(b.p(), 6);
        assert_eq!(
            b.exponents(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        let v = b.evaluate(&[2.0, 3.0]);
        assert_eq!(v, vec![1.0, 2.0, 3.0, 2.0, 6.0, 4.5]);
    }

    #[test]
    fn custom_basis_rejects_non_finite_origin() {
        let bad = Basis::custom(1, 1, |_, out| out[0] = f64::NAN);
        assert!(bad.is_err());
        let ok = Basis::custom(1, 2, |u, out| {
            out[0] = 1.0;
            out[1] = u[0].sin();
        })
        .unwrap();
        assert_eq!(ok.evaluate(&[0.0]), vec![1.0, 0.0]);
    }
}
