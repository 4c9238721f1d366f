//! Global numbering and sparse assembly.

mod common;

use common::{random_vector, rng, small_meshes, unit_square, GlobalPoly};
use hho_core::{
    assembly::{assemble_load, Discretization, DofMap, LoadIntegrator},
    basis::{cell_dim, face_dim},
    hho::interpolate,
    mesh::{generate, MeshFamily},
    DVector,
};

#[test]
fn restrict_and_extend_are_inverse_on_global_vectors() {
    let mut r = rng(10);
    for (name, mesh) in small_meshes() {
        for k in 0..3 {
            let dofs = DofMap::new(&mesh, k);
            let x = random_vector(dofs.total(), &mut r);
            let back = dofs.restrict(&dofs.extend(&x));
            assert_eq!(back, x, "{name} k={k}");
            // Extension leaves boundary faces at zero.
            let v = dofs.extend(&x);
            for f in (0..mesh.num_faces()).filter(|&f| mesh.is_boundary_face(f)) {
                assert!(v.face_block(f).iter().all(|&c| c == 0.0));
            }
        }
    }
}

#[test]
fn dof_counts_follow_mesh_topology() {
    // 4×4 squares split into 32 triangles; interior edges: 12 horizontal,
    // 12 vertical and 16 diagonals.
    let mesh = generate(MeshFamily::Triangular, 4, 0.0).unwrap();
    let dofs = DofMap::new(&mesh, 2);
    assert_eq!(dofs.num_cell_dofs(), 32 * 6);
    assert_eq!(dofs.num_face_dofs(), 40 * 3);
    assert_eq!(dofs.cell_offsets().len(), 33);
    assert_eq!(*dofs.cell_offsets().last().unwrap(), 192);

    for (name, mesh) in small_meshes() {
        // Euler: V − E + C = 1 for a simply connected planar mesh.
        let (v, e, c) = (mesh.vertices().len() as i64, mesh.num_faces() as i64, mesh.num_cells() as i64);
        assert_eq!(v - e + c, 1, "{name}");
        for k in 0..4 {
            let dofs = DofMap::new(&mesh, k);
            let interior = mesh.num_faces() - mesh.num_boundary_faces();
            assert_eq!(dofs.num_cell_dofs(), mesh.num_cells() * cell_dim(k));
            assert_eq!(dofs.num_face_dofs(), interior * face_dim(k));
            assert_eq!(dofs.boundary_mask().iter().filter(|&&b| b).count(), mesh.num_boundary_faces());
            assert_eq!(dofs.face_dof_points(&mesh).len(), dofs.num_face_dofs());
        }
    }
}

#[test]
fn face_offsets_are_contiguous_after_cells() {
    let mesh = generate(MeshFamily::Hexagonal, 3, 0.0).unwrap();
    let k = 1;
    let dofs = DofMap::new(&mesh, k);
    let mut offsets: Vec<usize> = (0..mesh.num_faces()).filter_map(|f| dofs.face_offset(f)).collect();
    offsets.sort_unstable();
    for (i, o) in offsets.iter().enumerate() {
        assert_eq!(*o, dofs.num_cell_dofs() + i * face_dim(k));
    }
}

#[test]
fn global_form_is_sum_of_local_forms() {
    let mut r = rng(11);
    for (name, mesh) in small_meshes() {
        for k in 0..3 {
            let disc = Discretization::new(mesh.clone(), k).unwrap();
            let x = random_vector(disc.dofs().total(), &mut r);
            let v = disc.dofs().extend(&x);
            let local: f64 = (0..mesh.num_cells()).map(|c| disc.locals[c].local_energy(&v.local(&mesh, c))).sum();
            let global = disc.system.stiffness().quadratic_form(&x);
            assert!((local - global).abs() < 1e-12 * global.abs().max(1.0), "{name} k={k}");

            // Mass matrix: ‖v_K‖² as a sum of local cell masses.
            let mass: f64 = (0..mesh.num_cells())
                .map(|c| {
                    let b = DVector::from_column_slice(v.cell_block(c));
                    b.dot(&(&disc.locals[c].mass * &b))
                })
                .sum();
            let l2 = disc.system.l2_cell_norm(&x).unwrap();
            assert!((mass - l2 * l2).abs() < 1e-12 * mass.max(1.0));
        }
    }
}

#[test]
fn block_views_partition_the_stiffness() {
    let mesh = generate(MeshFamily::DistortedQuad, 3, 0.3).unwrap();
    let disc = Discretization::new(mesh, 1).unwrap();
    let s = &disc.system;
    let full = s.stiffness().to_dense();
    let nk = disc.dofs().num_cell_dofs();
    let n = disc.dofs().total();
    assert_eq!(s.a_kk().to_dense(), full.view((0, 0), (nk, nk)).into_owned());
    assert_eq!(s.a_kf().to_dense(), full.view((0, nk), (nk, n - nk)).into_owned());
    assert_eq!(s.a_fk().to_dense(), s.a_kf().transpose().to_dense());
    assert_eq!(s.a_ff().to_dense(), full.view((nk, nk), (n - nk, n - nk)).into_owned());
    let me = s.mass_extended().to_dense();
    assert_eq!(me.view((0, 0), (nk, nk)).into_owned(), s.mass().to_dense());
    assert_eq!(me.rows(nk, n - nk).amax(), 0.0);
}

#[test]
fn single_cell_system_is_definite() {
    // Every face is on the boundary, so only the cell block remains.
    let mesh = unit_square();
    for k in 0..4 {
        let disc = Discretization::new(mesh.clone(), k).unwrap();
        assert_eq!(disc.dofs().num_face_dofs(), 0);
        let a = disc.system.stiffness().to_dense();
        assert!(a.clone().cholesky().is_some(), "k={k}");
    }
}

#[test]
fn unit_load_gives_cell_areas() {
    for (name, mesh) in small_meshes() {
        let k = 2;
        let b = assemble_load(&mesh, k, |_, _| 1.0, 0.0).unwrap();
        let nk = cell_dim(k);
        for c in 0..mesh.num_cells() {
            assert!((b[c * nk] - mesh.cell_area(c)).abs() < 1e-14, "{name} cell {c}");
        }
        let total: f64 = (0..mesh.num_cells()).map(|c| b[c * nk]).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }
}

#[test]
fn polynomial_load_matches_fine_quadrature() {
    let mut r = rng(12);
    for (name, mesh) in small_meshes() {
        for k in 0..3 {
            // Degree k + 2 times the degree-k basis: within the default rule.
            let q = GlobalPoly::random(k + 2, &mut r);
            let coarse = LoadIntegrator::new(&mesh, k).unwrap().assemble(|p| q.eval(p));
            let fine = LoadIntegrator::with_degree(&mesh, k, 4 * k + 12).unwrap().assemble(|p| q.eval(p));
            assert!((&coarse - &fine).amax() < 1e-13, "{name} k={k}");
            // The squared norm of a degree k + 1 polynomial is also exact.
            let s = GlobalPoly::random(k + 1, &mut r);
            let n2 = LoadIntegrator::new(&mesh, k).unwrap().l2_norm_squared(|p| s.eval(p));
            let n2_fine = LoadIntegrator::with_degree(&mesh, k, 4 * k + 12).unwrap().l2_norm_squared(|p| s.eval(p));
            assert!((n2 - n2_fine).abs() < 1e-12 * n2_fine.max(1.0));
        }
    }
}

#[test]
fn load_of_cell_polynomial_is_mass_times_coefficients() {
    let mut r = rng(13);
    let mesh = generate(MeshFamily::Hexagonal, 2, 0.0).unwrap();
    let k = 2;
    let disc = Discretization::new(mesh.clone(), k).unwrap();
    let q = GlobalPoly::random(k, &mut r);
    let v = interpolate(&mesh, k, |p| q.eval(p)).unwrap();
    let b = LoadIntegrator::new(&mesh, k).unwrap().assemble(|p| q.eval(p));
    let mb = disc.system.mass().mul_vec(&v.cells);
    assert!((&b - &mb).amax() < 1e-13);
}

#[test]
fn assembly_is_deterministic() {
    let mesh = generate(MeshFamily::Hexagonal, 4, 0.0).unwrap();
    let a = Discretization::new(mesh.clone(), 2).unwrap();
    let b = Discretization::new(mesh, 2).unwrap();
    assert_eq!(a.system, b.system);
}

#[test]
fn zero_vector_has_zero_norms() {
    let mesh = generate(MeshFamily::Triangular, 3, 0.0).unwrap();
    let disc = Discretization::new(mesh, 1).unwrap();
    let z = DVector::zeros(disc.dofs().total());
    assert_eq!(disc.system.energy_norm(&z).unwrap(), 0.0);
    assert_eq!(disc.system.l2_cell_norm(&z).unwrap(), 0.0);
    assert!(disc.system.energy_norm(&DVector::zeros(3)).is_err());
}
