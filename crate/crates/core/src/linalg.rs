//! Small dense and banded factorizations used by the Gaussian update and the
//! heat-kernel oracle.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::lattice::TorusLattice;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix dimension mismatch: {0}")]
    Shape(&'static str),
}

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n).map(|i| self.data[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    fn add_scaled(&mut self, other: &DenseMatrix, s: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn max_abs_row_sum(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|i| self.data[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Lower Cholesky factor `L` with `A = L Lᵀ`.
    pub fn cholesky(&self) -> Result<DenseMatrix, LinalgError> {
        let n = self.n;
        let mut l = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Inverse of a symmetric positive-definite matrix.
    pub fn spd_inverse(&self) -> Result<DenseMatrix, LinalgError> {
        let n = self.n;
        let l = self.cholesky()?;
        let mut inv = DenseMatrix::zeros(n);
        for c in 0..n {
            let mut y = vec![0.0; n];
            for i in 0..n {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[(i, k)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for k in i + 1..n {
                    s -= l[(k, i)] * y[k];
                }
                y[i] = s / l[(i, i)];
            }
            for i in 0..n {
                inv[(i, c)] = y[i];
            }
        }
        Ok(inv)
    }

    /// `exp(A)` by scaling and squaring of a degree-18 Taylor polynomial.
    pub fn expm(&self) -> DenseMatrix {
        let norm = self.max_abs_row_sum();
        let mut squarings = 0;
        let mut s = 1.0;
        while norm * s > 0.5 {
            s *= 0.5;
            squarings += 1;
        }
        let mut a = self.clone();
        a.scale(s);
        let mut result = DenseMatrix::identity(self.n);
        let mut term = DenseMatrix::identity(self.n);
        for k in 1..=18 {
            term = term.mul(&a);
            term.scale(1.0 / k as f64);
            result.add_scaled(&term, 1.0);
        }
        for _ in 0..squarings {
            result = result.mul(&result);
        }
        result
    }
}

impl core::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Vertex ordering that keeps torus neighbours close: along each axis the
/// coordinates are visited as `0, N-1, 1, N-2, …`, so wrap edges do not
/// widen the band. The half-bandwidth is `2 N^{d-1}`.
#[derive(Clone, Debug)]
pub struct FoldedOrdering {
    /// position of each vertex in the band ordering
    pub position: Vec<usize>,
    pub bandwidth: usize,
}

impl FoldedOrdering {
    pub fn new(lat: &TorusLattice) -> Self {
        let n = lat.side();
        let fold = |c: usize| if 2 * c < n { 2 * c } else { 2 * (n - 1 - c) + 1 };
        let position = (0..lat.num_vertices())
            .map(|v| (0..lat.dim()).map(|a| fold(lat.coord(v, a)) * lat.stride(a)).sum())
            .collect();
        let bandwidth = (2 * lat.stride(lat.dim() - 1)).min(lat.num_vertices() - 1);
        Self { position, bandwidth }
    }
}

/// Banded lower Cholesky factor; row `i` stores `L[i][i-b..=i]`.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    b: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Factors a symmetric matrix given in band storage with the same layout
    /// (`band[i*(b+1) + (j+b-i)] = A[i][j]` for `i-b ≤ j ≤ i`).
    pub fn factor(n: usize, b: usize, mut band: Vec<f64>) -> Result<Self, LinalgError> {
        if band.len() != n * (b + 1) {
            return Err(LinalgError::Shape("band storage length"));
        }
        let w = b + 1;
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(b));
                let mut s = band[i * w + (j + b - i)];
                for k in k0..j {
                    s -= band[i * w + (k + b - i)] * band[j * w + (k + b - j)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(LinalgError::NotPositiveDefinite { row: i, pivot: s });
                    }
                    band[i * w + b] = s.sqrt();
                } else {
                    band[i * w + (j + b - i)] = s / band[j * w + b];
                }
            }
        }
        Ok(Self { n, b, l: band })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn solve_upper(&self, y: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for i in (0..n).rev() {
            let x = y[i] / self.l[i * w + b];
            y[i] = x;
            let j0 = i.saturating_sub(b);
            for j in j0..i {
                y[j] -= self.l[i * w + (j + b - i)] * x;
            }
        }
    }

    /// Solves `L y = x` in place.
    pub fn solve_lower(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.b, self.b + 1);
        for i in 0..n {
            let j0 = i.saturating_sub(b);
            let mut s = x[i];
            for j in j0..i {
                s -= self.l[i * w + (j + b - i)] * x[j];
            }
            x[i] = s / self.l[i * w + b];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let a = DenseMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 1) => -1.0,
            (1, 0) => 1.0,
            _ => 0.0,
        });
        let e = a.expm();
        assert!((e[(0, 0)] - 1f64.cos()).abs() < 1e-14);
        assert!((e[(1, 0)] - 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_of_large_diagonal() {
        let a = DenseMatrix::from_fn(3, |i, j| if i == j { -(i as f64) * 10.0 } else { 0.0 });
        let e = a.expm();
        for i in 0..3 {
            let exact = (-(i as f64) * 10.0).exp();
            assert!((e[(i, i)] - exact).abs() < 1e-12 * exact.max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn banded_matches_dense() {
        let n = 9;
        let b = 2;
        let a = DenseMatrix::from_fn(n, |i, j| {
            if i == j {
                4.0 + i as f64 * 0.1
            } else if i.abs_diff(j) <= b {
                -1.0 / (1 + i + j) as f64
            } else {
                0.0
            }
        });
        let mut band = vec![0.0; n * (b + 1)];
        for i in 0..n {
            for j in i.saturating_sub(b)..=i {
                band[i * (b + 1) + (j + b - i)] = a[(i, j)];
            }
        }
        let chol = BandedCholesky::factor(n, b, band).unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        chol.solve_lower(&mut x);
        chol.solve_upper(&mut x);
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-13);
        }
        let inv = a.spd_inverse().unwrap();
        let y = inv.mul_vec(&rhs);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-13);
        }
    }

    #[test]
    fn folded_ordering_bandwidth_covers_all_edges() {
        for &(d, n) in &[(1, 5), (2, 6), (3, 4)] {
            let lat = TorusLattice::new(d, n).unwrap();
            let ord = FoldedOrdering::new(&lat);
            let mut seen = vec![false; lat.num_vertices()];
            for &p in &ord.position {
                assert!(!seen[p]);
                seen[p] = true;
            }
            for e in 0..lat.num_edges() {
                let (j, k, _) = lat.edge_endpoints(e);
                assert!(ord.position[j].abs_diff(ord.position[k]) <= ord.bandwidth);
            }
        }
    }
}
