use crate::error::{invalid, Result};

/// Design points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("point dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(invalid("coordinate count is not a multiple of the dimension"));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_1d(values: &[f64]) -> Self {
        Self {
            dim: 1,
            coords: values.to_vec(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("ragged point list"));
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    /// `n` equidistant points `lo + (i + 1/2)(hi - lo)/n` in one dimension.
    pub fn equidistant(n: usize, lo: f64, hi: f64) -> Self {
        let step = (hi - lo) / n as f64;
        Self::from_1d(&(0..n).map(|i| lo + (i as f64 + 0.5) * step).collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
