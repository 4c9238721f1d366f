//! Gauss rules on segments and on star-shaped polygons.
//!
//! Polygons are split into triangles fanned from the vertex centroid; each
//! triangle carries a collapsed (Duffy) tensor Gauss–Legendre rule.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::mesh::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadratureError {
    #[error("degenerate segment of length {0:e}")]
    DegenerateSegment(f64),
    #[error("polygon is not star-shaped with respect to its vertex centroid (fan triangle {0})")]
    NotStarShaped(usize),
}

/// Points with positive weights; `degree` is the total polynomial degree
/// integrated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Sum of the weights, i.e. the measure of the domain.
    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the three-term recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            // P_n(x) = p1, P_{n-1}(x) = p0.
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    // Ascending order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Reference rules for one target degree, reused across many cells.
#[derive(Debug, Clone)]
pub struct QuadratureFactory {
    degree: usize,
    // Gauss–Legendre on [0, 1].
    line: Vec<(f64, f64)>,
    // Collapsed rule on the reference triangle (0,0), (1,0), (0,1); weights sum to 1/2.
    triangle: Vec<(f64, f64, f64)>,
}

impl QuadratureFactory {
    pub fn new(degree: usize) -> Self {
        let unit = |n: usize| {
            let (x, w) = gauss_legendre(n);
            x.into_iter().zip(w).map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect::<Vec<_>>()
        };
        let line = unit(degree / 2 + 1);
        // The collapsed direction carries the Jacobian (1 − ξ), one extra degree.
        let outer = unit((degree + 1) / 2 + 1);
        let inner = unit(degree / 2 + 1);
        let mut triangle = Vec::with_capacity(outer.len() * inner.len());
        for &(xi, wx) in &outer {
            for &(eta, wy) in &inner {
                triangle.push((xi, eta * (1.0 - xi), wx * wy * (1.0 - xi)));
            }
        }
        Self { degree, line, triangle }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn edge(&self, a: &Point, b: &Point) -> Result<QuadratureRule, QuadratureError> {
        let len = (b - a).norm();
        if !(len >= 1e-14) {
            return Err(QuadratureError::DegenerateSegment(len));
        }
        let (points, weights) = self.line.iter().map(|&(s, w)| (a + (b - a) * s, w * len)).unzip();
        Ok(QuadratureRule { points, weights, degree: self.degree })
    }

    fn push_triangle(&self, a: &Point, b: &Point, c: &Point, rule: &mut QuadratureRule) {
        let (e1, e2) = (b - a, c - a);
        let jac = e1.x * e2.y - e1.y * e2.x;
        for &(s, t, w) in &self.triangle {
            rule.points.push(a + e1 * s + e2 * t);
            rule.weights.push(w * jac);
        }
    }

    pub fn triangle(&self, a: &Point, b: &Point, c: &Point) -> QuadratureRule {
        let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new(), degree: self.degree };
        self.push_triangle(a, b, c, &mut rule);
        rule
    }

    /// Rule on a counter-clockwise polygon. Triangles are used directly; other
    /// polygons are fanned from the vertex centroid.
    pub fn cell(&self, polygon: &[Point]) -> Result<QuadratureRule, QuadratureError> {
        let n = polygon.len();
        let mut rule = QuadratureRule {
            points: Vec::with_capacity(n * self.triangle.len()),
            weights: Vec::with_capacity(n * self.triangle.len()),
            degree: self.degree,
        };
        if n == 3 {
            let (e1, e2) = (polygon[1] - polygon[0], polygon[2] - polygon[0]);
            if !(e1.x * e2.y - e1.y * e2.x > 0.0) {
                return Err(QuadratureError::NotStarShaped(0));
            }
            self.push_triangle(&polygon[0], &polygon[1], &polygon[2], &mut rule);
            return Ok(rule);
        }
        let mut centre = Point::origin();
        for p in polygon {
            centre.coords += p.coords;
        }
        centre.coords /= n as f64;
        for i in 0..n {
            let (a, b) = (&polygon[i], &polygon[(i + 1) % n]);
            let (e1, e2) = (a - centre, b - centre);
            if !(e1.x * e2.y - e1.y * e2.x > 0.0) {
                return Err(QuadratureError::NotStarShaped(i));
            }
            self.push_triangle(&centre, a, b, &mut rule);
        }
        Ok(rule)
    }
}

/// Gauss–Legendre rule on the segment `[a, b]`, exact to `degree`.
pub fn edge_rule(a: &Point, b: &Point, degree: usize) -> Result<QuadratureRule, QuadratureError> {
    QuadratureFactory::new(degree).edge(a, b)
}

/// Rule on a star-shaped counter-clockwise polygon, exact to `degree`.
pub fn cell_rule(polygon: &[Point], degree: usize) -> Result<QuadratureRule, QuadratureError> {
    QuadratureFactory::new(degree).cell(polygon)
}
