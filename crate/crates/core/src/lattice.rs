//! Periodic lattices, the edge-weighted operator `D`, and Green-function solvers.
//!
//! Vertices of the torus `𝕋_N^d` are numbered row-major with axis 0 fastest.
//! Edge `e = vertex·d + axis` joins `vertex` to its `+axis` neighbour, so every
//! unordered nearest-neighbour pair (wrap edges included) appears exactly once.
//!
//! `D` is fixed by its quadratic form
//! `[f; Df] = Σ_{jk} w_{jk} (f_j - f_k)² + ε Σ_j f_j²`, i.e.
//! `(Df)_j = Σ_{k∼j} w_{jk}(f_j - f_k) + ε f_j`. With unit weights and `ε = 0`
//! this is `-Δᵖ`.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("invalid lattice: dimension {dim}, side {side} (need dim >= 1, side >= 3)")]
    InvalidLattice { dim: usize, side: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("edge weight {value} at edge {edge} is not positive and finite")]
    InvalidWeight { edge: usize, value: f64 },
    #[error("mass {0} must be finite and non-negative")]
    InvalidMass(f64),
    #[error("vector is not mean-zero (sum = {0})")]
    NotMeanZero(f64),
    #[error("solver stopped after {iterations} iterations at relative residual {residual}")]
    NotConverged { iterations: usize, residual: f64 },
}

/// The discrete torus `𝕋_N^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TorusLattice {
    dim: usize,
    side: usize,
    vertices: usize,
}

impl TorusLattice {
    pub fn new(dim: usize, side: usize) -> Result<Self, LatticeError> {
        if dim == 0 || side < 3 {
            return Err(LatticeError::InvalidLattice { dim, side });
        }
        let vertices = side
            .checked_pow(dim as u32)
            .ok_or(LatticeError::InvalidLattice { dim, side })?;
        Ok(Self { dim, side, vertices })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices
    }

    pub fn num_edges(&self) -> usize {
        self.dim * self.vertices
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow(axis as u32)
    }

    /// Coordinate of `vertex` along `axis`.
    pub fn coord(&self, vertex: usize, axis: usize) -> usize {
        (vertex / self.stride(axis)) % self.side
    }

    pub fn coords(&self, vertex: usize) -> Vec<usize> {
        (0..self.dim).map(|a| self.coord(vertex, a)).collect()
    }

    /// Vertex with the given coordinates, each reduced mod `N`.
    pub fn vertex(&self, coords: &[i64]) -> usize {
        let n = self.side as i64;
        coords
            .iter()
            .enumerate()
            .map(|(a, &c)| c.rem_euclid(n) as usize * self.stride(a))
            .sum()
    }

    /// Neighbour of `vertex` one step along `axis`, forward or backward.
    #[inline]
    pub fn neighbor(&self, vertex: usize, axis: usize, forward: bool) -> usize {
        let s = self.stride(axis);
        let c = (vertex / s) % self.side;
        match (forward, c) {
            (true, c) if c + 1 == self.side => vertex - (self.side - 1) * s,
            (true, _) => vertex + s,
            (false, 0) => vertex + (self.side - 1) * s,
            (false, _) => vertex - s,
        }
    }

    #[inline]
    pub fn edge(&self, vertex: usize, axis: usize) -> usize {
        vertex * self.dim + axis
    }

    /// `(tail, head, axis)` of an edge; `head` is the `+axis` neighbour of `tail`.
    #[inline]
    pub fn edge_endpoints(&self, edge: usize) -> (usize, usize, usize) {
        let v = edge / self.dim;
        let a = edge % self.dim;
        (v, self.neighbor(v, a, true), a)
    }

    /// The `2d` edges incident to `vertex` with the neighbour across each.
    pub fn incident_edges(&self, vertex: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dim).flat_map(move |a| {
            let fwd = self.neighbor(vertex, a, true);
            let back = self.neighbor(vertex, a, false);
            [(self.edge(vertex, a), fwd), (self.edge(back, a), back)]
        })
    }

    /// Torus graph distance between two vertices.
    pub fn graph_distance(&self, x: usize, y: usize) -> usize {
        (0..self.dim)
            .map(|a| {
                let d = self.coord(x, a).abs_diff(self.coord(y, a));
                d.min(self.side - d)
            })
            .sum()
    }

    fn check_len(&self, len: usize) -> Result<(), LatticeError> {
        if len != self.vertices {
            return Err(LatticeError::DimensionMismatch {
                expected: self.vertices,
                got: len,
            });
        }
        Ok(())
    }
}

/// A vertex function, optionally flagged as lying in the mean-zero subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct TestVector {
    pub values: Vec<f64>,
    pub zero_sum: bool,
}

impl TestVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, zero_sum: false }
    }

    /// Flags `values` as mean-zero after checking `|Σ v| ≤ 1e-12 · max(1, Σ|v|)`.
    pub fn mean_zero(values: Vec<f64>) -> Result<Self, LatticeError> {
        let sum: f64 = values.iter().sum();
        let scale: f64 = values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        if sum.abs() > 1e-12 * scale {
            return Err(LatticeError::NotMeanZero(sum));
        }
        Ok(Self { values, zero_sum: true })
    }

    /// Subtracts the mean and flags the result.
    pub fn projected(mut values: Vec<f64>) -> Self {
        project_mean_zero(&mut values);
        Self { values, zero_sum: true }
    }

    /// `δ_a - δ_b`.
    pub fn dipole(lat: &TorusLattice, a: usize, b: usize) -> Self {
        let mut values = vec![0.0; lat.num_vertices()];
        values[a] += 1.0;
        values[b] -= 1.0;
        Self { values, zero_sum: true }
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.values, other)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn project_mean_zero(x: &mut [f64]) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        *v -= mean;
    }
}

/// Stopping rule for the conjugate-gradient solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Target `‖Du - v‖₂ ≤ tol · ‖v‖₂`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Matrix-free `D_{Λ,ε}` for positive edge weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeightedOperator {
    lattice: TorusLattice,
    weights: Vec<f64>,
    mass: f64,
}

impl EdgeWeightedOperator {
    pub fn new(lattice: TorusLattice, weights: Vec<f64>, mass: f64) -> Result<Self, LatticeError> {
        if weights.len() != lattice.num_edges() {
            return Err(LatticeError::DimensionMismatch {
                expected: lattice.num_edges(),
                got: weights.len(),
            });
        }
        if let Some((edge, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(LatticeError::InvalidWeight { edge, value });
        }
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(LatticeError::InvalidMass(mass));
        }
        Ok(Self { lattice, weights, mass })
    }

    pub fn uniform(lattice: TorusLattice, weight: f64, mass: f64) -> Result<Self, LatticeError> {
        Self::new(lattice, vec![weight; lattice.num_edges()], mass)
    }

    /// Weights `β e^{t_e}`, the conditional precision of `φ` given `t` (up to the factor 2).
    pub fn from_t(lattice: TorusLattice, t: &[f64], beta: f64, mass: f64) -> Result<Self, LatticeError> {
        Self::new(lattice, t.iter().map(|&t| beta * t.exp()).collect(), mass)
    }

    /// `-L^ω` for conductances `ω`: `(-L^ω f)(x) = Σ_y ω_{xy}(f(x) - f(y))`.
    pub fn generator(lattice: TorusLattice, omega: &[f64]) -> Result<Self, LatticeError> {
        Self::new(lattice, omega.to_vec(), 0.0)
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `out = D f`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        let lat = &self.lattice;
        for (o, &x) in out.iter_mut().zip(f) {
            *o = self.mass * x;
        }
        for v in 0..lat.num_vertices() {
            for a in 0..lat.dim() {
                let k = lat.neighbor(v, a, true);
                let flux = self.weights[lat.edge(v, a)] * (f[v] - f[k]);
                out[v] += flux;
                out[k] -= flux;
            }
        }
    }

    pub fn apply_d(&self, f: &TestVector) -> Result<TestVector, LatticeError> {
        self.lattice.check_len(f.len())?;
        let mut out = vec![0.0; f.len()];
        self.apply(&f.values, &mut out);
        Ok(TestVector::new(out))
    }

    /// `Σ w (f_j - f_k)² + ε Σ f²` summed edge by edge.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let lat = &self.lattice;
        let mut s = self.mass * dot(f, f);
        for (e, &w) in self.weights.iter().enumerate() {
            let (j, k, _) = lat.edge_endpoints(e);
            let d = f[j] - f[k];
            s += w * d * d;
        }
        s
    }

    /// Diagonal of `D`.
    pub fn diagonal(&self) -> Vec<f64> {
        let lat = &self.lattice;
        let mut diag = vec![self.mass; lat.num_vertices()];
        for (e, &w) in self.weights.iter().enumerate() {
            let (j, k, _) = lat.edge_endpoints(e);
            diag[j] += w;
            diag[k] += w;
        }
        diag
    }

    /// Jacobi-preconditioned CG for `D u = v`. For `ε = 0`, `v` must be
    /// mean-zero and the mean-zero solution is returned.
    pub fn solve(&self, v: &TestVector, opts: SolverOptions) -> Result<Solution, LatticeError> {
        self.lattice.check_len(v.len())?;
        let singular = self.mass == 0.0;
        let mut b = v.values.clone();
        if singular {
            if !v.zero_sum {
                let sum: f64 = b.iter().sum();
                let scale = b.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
                if sum.abs() > 1e-12 * scale {
                    return Err(LatticeError::NotMeanZero(sum));
                }
            }
            project_mean_zero(&mut b);
        }
        let n = b.len();
        let b_norm = dot(&b, &b).sqrt();
        if b_norm == 0.0 {
            return Ok(Solution {
                values: vec![0.0; n],
                iterations: 0,
                rel_residual: 0.0,
            });
        }
        let inv_diag: Vec<f64> = self.diagonal().iter().map(|d| 1.0 / d).collect();
        let mut x = vec![0.0; n];
        let mut r = b;
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
        let mut p = z.clone();
        let mut q = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let mut res = 1.0;
        for it in 1..=opts.max_iter {
            self.apply(&p, &mut q);
            let alpha = rz / dot(&p, &q);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if singular {
                project_mean_zero(&mut r);
            }
            res = dot(&r, &r).sqrt() / b_norm;
            if res <= opts.tol {
                if singular {
                    project_mean_zero(&mut x);
                }
                return Ok(Solution {
                    values: x,
                    iterations: it,
                    rel_residual: res,
                });
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(LatticeError::NotConverged {
            iterations: opts.max_iter,
            residual: res,
        })
    }

    /// `[v; D⁻¹ v]` from a CG solve.
    pub fn green_form(&self, v: &TestVector, opts: SolverOptions) -> Result<f64, LatticeError> {
        let u = self.solve(v, opts)?;
        Ok(dot(&v.values, &u.values))
    }
}

/// `Gᵖ v`, the mean-zero solution of `-Δᵖ u = v`, by CG.
pub fn laplacian_green_p(lat: &TorusLattice, v: &TestVector, tol: f64) -> Result<TestVector, LatticeError> {
    if !v.zero_sum {
        TestVector::mean_zero(v.values.clone())?;
    }
    let op = EdgeWeightedOperator::uniform(*lat, 1.0, 0.0)?;
    let u = op.solve(v, SolverOptions::with_tol(tol))?;
    Ok(TestVector {
        values: u.values,
        zero_sum: true,
    })
}

/// Diagonalisation of constant-coefficient operators `w(-Δᵖ) + ε` by the
/// discrete Fourier basis, applied axis by axis.
#[derive(Clone, Debug)]
pub struct SpectralLaplacian {
    lattice: TorusLattice,
    cos: Vec<f64>,
    sin: Vec<f64>,
    eigen: Vec<f64>,
}

impl SpectralLaplacian {
    pub fn new(lattice: TorusLattice) -> Self {
        let n = lattice.side();
        let cos: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
        let sin: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
        let eigen = (0..lattice.num_vertices())
            .map(|v| (0..lattice.dim()).map(|a| 2.0 * (1.0 - cos[lattice.coord(v, a)])).sum())
            .collect();
        Self {
            lattice,
            cos,
            sin,
            eigen,
        }
    }

    /// Eigenvalues of `-Δᵖ` indexed like vertices (wave vector `2πk/N`).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen
    }

    fn transform(&self, re: &mut [f64], im: &mut [f64], inverse: bool) {
        let lat = &self.lattice;
        let n = lat.side();
        let sign = if inverse { 1.0 } else { -1.0 };
        let mut line_re = vec![0.0; n];
        let mut line_im = vec![0.0; n];
        for axis in 0..lat.dim() {
            let s = lat.stride(axis);
            for start in 0..lat.num_vertices() {
                if lat.coord(start, axis) != 0 {
                    continue;
                }
                for k in 0..n {
                    let (mut ar, mut ai) = (0.0, 0.0);
                    for j in 0..n {
                        let idx = (j * k) % n;
                        let (c, sn) = (self.cos[idx], sign * self.sin[idx]);
                        let (xr, xi) = (re[start + j * s], im[start + j * s]);
                        ar += xr * c - xi * sn;
                        ai += xr * sn + xi * c;
                    }
                    line_re[k] = ar;
                    line_im[k] = ai;
                }
                for k in 0..n {
                    re[start + k * s] = line_re[k];
                    im[start + k * s] = line_im[k];
                }
            }
        }
        if inverse {
            let scale = 1.0 / lat.num_vertices() as f64;
            for (r, i) in re.iter_mut().zip(im.iter_mut()) {
                *r *= scale;
                *i *= scale;
            }
        }
    }

    /// Solves `(w(-Δᵖ) + ε) u = v`; for `ε = 0` the zero mode is dropped and
    /// `v` is treated as mean-zero.
    pub fn solve(&self, v: &[f64], weight: f64, mass: f64) -> Vec<f64> {
        let mut re = v.to_vec();
        let mut im = vec![0.0; v.len()];
        self.transform(&mut re, &mut im, false);
        for (i, &lam) in self.eigen.iter().enumerate() {
            let denom = weight * lam + mass;
            if denom == 0.0 {
                re[i] = 0.0;
                im[i] = 0.0;
            } else {
                re[i] /= denom;
                im[i] /= denom;
            }
        }
        self.transform(&mut re, &mut im, true);
        re
    }

    /// `Gᵖ v` via the Fourier path.
    pub fn green_p(&self, v: &TestVector) -> Result<TestVector, LatticeError> {
        self.lattice.check_len(v.len())?;
        if !v.zero_sum {
            TestVector::mean_zero(v.values.clone())?;
        }
        Ok(TestVector {
            values: self.solve(&v.values, 1.0, 0.0),
            zero_sum: true,
        })
    }
}

/// Outcome of [`green_form_bound_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenBoundReport {
    /// `[v; G_{Λ,ε}(t) v]`.
    pub lhs: f64,
    /// `Σ_{jk} ((Gᵖv)_j - (Gᵖv)_k)² / (β e^{t_{jk}})`.
    pub rhs: f64,
    pub pass: bool,
}

/// Compares `[v; D⁻¹v]` with the flow bound built from `∇Gᵖ v`.
///
/// `∇Gᵖ v` is a unit-conductance flow with divergence `v`, so Thomson's
/// principle gives `[v; D⁻¹v] ≤ Σ_e (∇Gᵖv)_e² / w_e` for any weights `w`.
pub fn green_form_bound_check(op: &EdgeWeightedOperator, v: &TestVector, tol: f64) -> Result<GreenBoundReport, LatticeError> {
    let lat = op.lattice();
    lat.check_len(v.len())?;
    let mv = TestVector::mean_zero(v.values.clone())?;
    let lhs = op.green_form(&mv, SolverOptions::with_tol(1e-12))?;
    let gp = laplacian_green_p(lat, &mv, 1e-12)?;
    let mut rhs = 0.0;
    for (e, &w) in op.weights().iter().enumerate() {
        let (j, k, _) = lat.edge_endpoints(e);
        let d = gp.values[j] - gp.values[k];
        rhs += d * d / w;
    }
    let pass = lhs >= -tol * rhs.abs() && lhs <= rhs * (1.0 + tol);
    Ok(GreenBoundReport { lhs, rhs, pass })
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Edge length `1 ∧ ω^{-1/2}` of the chemical distance.
pub fn chemical_length(omega: f64) -> f64 {
    (1.0 / omega.sqrt()).min(1.0)
}

/// Chemical distances `d_ω(x, ·)` to every vertex (Dijkstra).
pub fn chemical_distances(lat: &TorusLattice, omega: &[f64], x: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; lat.num_vertices()];
    let mut heap = BinaryHeap::new();
    dist[x] = 0.0;
    heap.push(HeapItem(0.0, x));
    while let Some(HeapItem(d, v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for (e, y) in lat.incident_edges(v) {
            let nd = d + chemical_length(omega[e]);
            if nd < dist[y] {
                dist[y] = nd;
                heap.push(HeapItem(nd, y));
            }
        }
    }
    dist
}

/// `d_ω(x, y)`.
pub fn chemical_distance(lat: &TorusLattice, omega: &[f64], x: usize, y: usize) -> f64 {
    chemical_distances(lat, omega, x)[y]
}
