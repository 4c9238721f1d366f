//! Scaled monomial bases.
//!
//! Cell functions are `ξ^a η^b` with `ξ = (x − x_K)/h_K`, `η = (y − y_K)/h_K`,
//! where `x_K` is the area centroid and `h_K` the diameter. Exponents are in
//! graded lexicographic order: `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), …`.
//! Because of this order the first `dim P_k` functions of a degree-`k+1`
//! basis are exactly the degree-`k` basis, which the reconstruction relies on.
//!
//! Face functions are `s^i` with `s ∈ [−1, 1]` the scaled arclength measured
//! from the face midpoint along the face's stored orientation.

use alloc::vec::Vec;

use crate::{
    mesh::{Mesh, Point, Vector},
    quadrature::QuadratureRule,
    DMatrix,
};

/// `dim P_k` in two variables.
pub const fn cell_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// `dim P_k` in one variable.
pub const fn face_dim(k: usize) -> usize {
    k + 1
}

/// Exponents of all monomials of total degree ≤ `k`, graded lexicographic.
pub fn exponents(k: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::with_capacity(cell_dim(k));
    for d in 0..=k {
        for a in (0..=d).rev() {
            e.push((a, d - a));
        }
    }
    e
}

/// Common interface for point evaluation.
pub trait Basis {
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
    /// Writes the value of every basis function at `p` into `out`.
    fn eval_into(&self, p: &Point, out: &mut [f64]);

    /// Rows are points, columns basis functions.
    fn eval(&self, points: &[Point]) -> DMatrix {
        let mut m = DMatrix::zeros(points.len(), self.dim());
        let mut row = alloc::vec![0.0; self.dim()];
        for (i, p) in points.iter().enumerate() {
            self.eval_into(p, &mut row);
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellBasis {
    center: Point,
    scale: f64,
    degree: usize,
    exponents: Vec<(usize, usize)>,
}

impl CellBasis {
    /// Panics if `degree > 7`.
    pub fn new(center: Point, scale: f64, degree: usize) -> Self {
        assert!(degree <= 7, "cell basis degree {degree} exceeds 7");
        Self { center, scale, degree, exponents: exponents(degree) }
    }

    pub fn for_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        Self::new(mesh.cell_centroid(cell), mesh.cell_diameter(cell), degree)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponents(&self) -> &[(usize, usize)] {
        &self.exponents
    }

    fn powers(&self, p: &Point) -> ([f64; 8], [f64; 8]) {
        let xi = (p.x - self.center.x) / self.scale;
        let eta = (p.y - self.center.y) / self.scale;
        let mut px = [1.0; 8];
        let mut py = [1.0; 8];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * xi;
            py[i] = py[i - 1] * eta;
        }
        (px, py)
    }

    /// Writes the gradient of every basis function at `p` into `out`.
    pub fn grad_into(&self, p: &Point, out: &mut [Vector]) {
        let (px, py) = self.powers(p);
        let inv = 1.0 / self.scale;
        for (g, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            let dx = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
            let dy = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
            *g = Vector::new(dx * inv, dy * inv);
        }
    }

    /// Writes the Laplacian of every basis function at `p` into `out`.
    pub fn laplacian_into(&self, p: &Point, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        let inv2 = 1.0 / (self.scale * self.scale);
        for (l, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            let dxx = if a > 1 { (a * (a - 1)) as f64 * px[a - 2] * py[b] } else { 0.0 };
            let dyy = if b > 1 { (b * (b - 1)) as f64 * px[a] * py[b - 2] } else { 0.0 };
            *l = (dxx + dyy) * inv2;
        }
    }

    /// Gradients at `points`: `(∂x, ∂y)`, each with rows = points.
    pub fn eval_grad(&self, points: &[Point]) -> (DMatrix, DMatrix) {
        let mut gx = DMatrix::zeros(points.len(), self.dim());
        let mut gy = DMatrix::zeros(points.len(), self.dim());
        let mut row = alloc::vec![Vector::zeros(); self.dim()];
        for (i, p) in points.iter().enumerate() {
            self.grad_into(p, &mut row);
            for (j, g) in row.iter().enumerate() {
                gx[(i, j)] = g.x;
                gy[(i, j)] = g.y;
            }
        }
        (gx, gy)
    }

    /// Evaluates the polynomial with coefficients `coeffs` at `p`.
    pub fn eval_poly(&self, coeffs: &[f64], p: &Point) -> f64 {
        let (px, py) = self.powers(p);
        coeffs.iter().zip(&self.exponents).map(|(c, &(a, b))| c * px[a] * py[b]).sum()
    }

    /// Gradient of the polynomial with coefficients `coeffs` at `p`.
    pub fn grad_poly(&self, coeffs: &[f64], p: &Point) -> Vector {
        let mut g = alloc::vec![Vector::zeros(); self.dim()];
        self.grad_into(p, &mut g);
        g.iter().zip(coeffs).map(|(g, c)| g * *c).sum()
    }
}

impl Basis for CellBasis {
    fn dim(&self) -> usize {
        self.exponents.len()
    }

    fn degree(&self) -> usize {
        self.degree
    }

    fn eval_into(&self, p: &Point, out: &mut [f64]) {
        let (px, py) = self.powers(p);
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            *o = px[a] * py[b];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceBasis {
    midpoint: Point,
    // Unit tangent along the stored face orientation.
    tangent: Vector,
    half_length: f64,
    degree: usize,
}

impl FaceBasis {
    pub fn new(a: &Point, b: &Point, degree: usize) -> Self {
        let t = b - a;
        let len = t.norm();
        Self { midpoint: nalgebra::center(a, b), tangent: t / len, half_length: 0.5 * len, degree }
    }

    pub fn for_face(mesh: &Mesh, face: usize, degree: usize) -> Self {
        let (a, b) = mesh.face_endpoints(face);
        Self::new(&a, &b, degree)
    }

    /// Scaled arclength coordinate of `p` (in `[−1, 1]` on the face).
    pub fn coordinate(&self, p: &Point) -> f64 {
        (p - self.midpoint).dot(&self.tangent) / self.half_length
    }

    pub fn eval_poly(&self, coeffs: &[f64], p: &Point) -> f64 {
        let s = self.coordinate(p);
        coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

impl Basis for FaceBasis {
    fn dim(&self) -> usize {
        face_dim(self.degree)
    }

    fn degree(&self) -> usize {
        self.degree
    }

    fn eval_into(&self, p: &Point, out: &mut [f64]) {
        let s = self.coordinate(p);
        let mut v = 1.0;
        for o in out.iter_mut().take(self.degree + 1) {
            *o = v;
            v *= s;
        }
    }
}

/// `(φ_i, φ_j)` over the rule's domain.
///
/// Panics if the rule cannot integrate products of basis functions exactly.
pub fn gram_matrix<B: Basis>(basis: &B, rule: &QuadratureRule) -> DMatrix {
    assert!(rule.degree >= 2 * basis.degree(), "quadrature degree {} too low for basis degree {}", rule.degree, basis.degree());
    let n = basis.dim();
    let mut g = DMatrix::zeros(n, n);
    let mut v = alloc::vec![0.0; n];
    for (p, w) in rule.iter() {
        basis.eval_into(p, &mut v);
        for j in 0..n {
            let wj = w * v[j];
            for i in j..n {
                g[(i, j)] += wj * v[i];
            }
        }
    }
    g.fill_upper_triangle_with_lower_triangle();
    g
}

/// `(∇φ_i, ∇φ_j)` over the rule's domain.
///
/// Panics if the rule cannot integrate products of basis functions exactly.
pub fn stiffness_matrix(basis: &CellBasis, rule: &QuadratureRule) -> DMatrix {
    assert!(rule.degree >= 2 * basis.degree(), "quadrature degree {} too low for basis degree {}", rule.degree, basis.degree());
    let n = basis.dim();
    let mut k = DMatrix::zeros(n, n);
    let mut g = alloc::vec![Vector::zeros(); n];
    for (p, w) in rule.iter() {
        basis.grad_into(p, &mut g);
        for j in 0..n {
            let wj = g[j] * w;
            for i in j..n {
                k[(i, j)] += wj.dot(&g[i]);
            }
        }
    }
    k.fill_upper_triangle_with_lower_triangle();
    k
}
