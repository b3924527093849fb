//! Small dense complex vector helpers.

use num_complex::Complex64;

/// Hermitian inner product `x^H y`.
pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    norm_sqr(x).sqrt()
}

/// Real part of the inner product, i.e. the Euclidean inner product of the
/// underlying real vectors.
pub fn real_inner(x: &[Complex64], y: &[Complex64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

pub fn scaled(x: &[Complex64], s: f64) -> Vec<Complex64> {
    x.iter().map(|v| v * s).collect()
}

/// Dense row-major square matrix, used for the `N_d x N_d` energy matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    /// Adds `scale * v v^H`.
    pub fn add_outer(&mut self, v: &[Complex64], scale: f64) {
        assert_eq!(v.len(), self.dim);
        for r in 0..self.dim {
            let vr = v[r] * scale;
            let row = &mut self.data[r * self.dim..(r + 1) * self.dim];
            for (entry, vc) in row.iter_mut().zip(v) {
                *entry += vr * vc.conj();
            }
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x^H M x`, real part only (exact for Hermitian `M`).
    pub fn quadratic(&self, x: &[Complex64]) -> f64 {
        inner(x, &self.mul_vec(x)).re
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest `|M_rc - conj(M_cr)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in 0..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_conjugates_left_argument() {
        let x = [c(0.0, 1.0)];
        let y = [c(0.0, 1.0)];
        assert_eq!(inner(&x, &y), c(1.0, 0.0));
    }

    #[test]
    fn outer_product_is_hermitian() {
        let mut m = SquareMatrix::zeros(3);
        m.add_outer(&[c(1.0, 2.0), c(-0.5, 0.3), c(0.0, -1.0)], 0.7);
        assert!(m.hermitian_defect() < 1e-15);
        let v = [c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0)];
        assert!(m.quadratic(&v) >= 0.0);
    }
}
