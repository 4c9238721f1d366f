#![allow(dead_code)]

use hho_core::{
    mesh::{generate, Mesh, MeshFamily, Point, Vector},
    DVector,
};
use rand::{rngs::StdRng, Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_vector(n: usize, rng: &mut StdRng) -> DVector {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn unit_square() -> Mesh {
    let v = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
    Mesh::from_cells(v, vec![vec![0, 1, 2, 3]]).unwrap()
}

/// A handful of small meshes from every family, plus a single square.
pub fn small_meshes() -> Vec<(String, Mesh)> {
    let mut out = vec![("square".to_string(), unit_square())];
    for fam in MeshFamily::ALL {
        for n in [1, 2, 3] {
            out.push((format!("{fam}-{n}"), generate(fam, n, 0.3).unwrap()));
        }
    }
    out
}

/// `Σ c_ab x^a y^b` in global coordinates.
#[derive(Debug, Clone)]
pub struct GlobalPoly {
    pub terms: Vec<(usize, usize, f64)>,
}

impl GlobalPoly {
    /// Random polynomial of total degree `d` with coefficients in `[-1, 1]`.
    pub fn random(d: usize, rng: &mut StdRng) -> Self {
        let mut terms = Vec::new();
        for a in 0..=d {
            for b in 0..=d - a {
                terms.push((a, b, rng.gen_range(-1.0..1.0)));
            }
        }
        Self { terms }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        self.terms.iter().map(|&(a, b, c)| c * p.x.powi(a as i32) * p.y.powi(b as i32)).sum()
    }

    pub fn grad(&self, p: &Point) -> Vector {
        let mut g = Vector::zeros();
        for &(a, b, c) in &self.terms {
            if a > 0 {
                g.x += c * a as f64 * p.x.powi(a as i32 - 1) * p.y.powi(b as i32);
            }
            if b > 0 {
                g.y += c * b as f64 * p.x.powi(a as i32) * p.y.powi(b as i32 - 1);
            }
        }
        g
    }
}

pub fn rel_diff(a: &DVector, b: &DVector) -> f64 {
    let scale = b.norm().max(1e-300);
    (a - b).norm() / scale
}
