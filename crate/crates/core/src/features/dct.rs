use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Orthonormal DCT-II truncated to the first `n_out` coefficients.
#[derive(Debug, Clone)]
pub struct DctII {
    basis: Array2<f64>,
}

impl DctII {
    pub fn new(len: usize, n_out: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("DCT input length must be positive"));
        }
        if n_out > len {
            return Err(Error::invalid(format!(
                "cannot take {n_out} DCT coefficients from {len} inputs"
            )));
        }
        let n = len as f64;
        let basis = Array2::from_shape_fn((n_out, len), |(k, i)| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale * (PI * (2 * i + 1) as f64 * k as f64 / (2.0 * n)).cos()
        });
        Ok(Self { basis })
    }

    pub fn len(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.ncols() == 0
    }

    pub fn n_out(&self) -> usize {
        self.basis.nrows()
    }

    pub fn forward(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.len());
        self.basis
            .rows()
            .into_iter()
            .map(|b| b.iter().zip(row).fold(0.0, |acc, (w, x)| acc + w * x))
            .collect()
    }

    /// DCT-III from (possibly truncated) coefficients; exact inverse when
    /// `n_out == len`.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.n_out());
        (0..self.len())
            .map(|i| {
                coeffs
                    .iter()
                    .enumerate()
                    .fold(0.0, |acc, (k, c)| acc + self.basis[[k, i]] * c)
            })
            .collect()
    }
}

pub fn dct_ii(row: &[f64], n_out: usize) -> Result<Vec<f64>> {
    Ok(DctII::new(row.len(), n_out)?.forward(row))
}

pub fn idct(coeffs: &[f64]) -> Result<Vec<f64>> {
    Ok(DctII::new(coeffs.len(), coeffs.len())?.inverse(coeffs))
}
