mod common;

use common::{random_points, rng};
use neural_points::geometry::vec3::{self, Vec3};
use neural_points::geometry::{Surface, TriangleMesh};
use neural_points::metrics::{
    chamfer, chamfer_brute_force, evaluate, hausdorff, hausdorff_brute_force, point_to_surface,
};

fn rigid(p: &[Vec3]) -> Vec<Vec3> {
    let rot = vec3::rotation(vec3::normalized([1.0, 2.0, -0.5], 1e-12).unwrap(), 0.8);
    p.iter().map(|&x| vec3::add(vec3::mat_vec(&rot, x), [0.4, -1.1, 2.0])).collect()
}

#[test]
fn examples() {
    let mut r = rng(1);
    let p = random_points(&mut r, 50, 1.0);
    assert_eq!(chamfer(&p, &p).unwrap(), 0.0);
    assert_eq!(hausdorff(&p, &p).unwrap(), 0.0);
    assert_eq!(chamfer(&[[0.0; 3]], &[[1.0, 0.0, 0.0]]).unwrap(), 2.0);
    assert_eq!(hausdorff(&[[0.0; 3], [2.0, 0.0, 0.0]], &[[0.0; 3]]).unwrap(), 2.0);
    assert!(chamfer(&[], &p).is_err());
    assert!(hausdorff(&p, &[]).is_err());
}

#[test]
fn accelerated_paths_equal_brute_force() {
    for seed in 0..20 {
        let mut r = rng(seed);
        let p = random_points(&mut r, 200, 1.0);
        let q = random_points(&mut r, 180, 1.0);
        assert_eq!(chamfer(&p, &q).unwrap(), chamfer_brute_force(&p, &q).unwrap());
        assert_eq!(hausdorff(&p, &q).unwrap(), hausdorff_brute_force(&p, &q).unwrap());
        assert_eq!(chamfer(&p, &q).unwrap(), chamfer(&q, &p).unwrap());
        assert_eq!(hausdorff(&p, &q).unwrap(), hausdorff(&q, &p).unwrap());
    }
}

#[test]
fn rigid_invariance() {
    let mut r = rng(2);
    let p = random_points(&mut r, 100, 1.0);
    let q = random_points(&mut r, 100, 1.0);
    let (pt, qt) = (rigid(&p), rigid(&q));
    assert!((chamfer(&p, &q).unwrap() - chamfer(&pt, &qt).unwrap()).abs() < 1e-9);
    assert!((hausdorff(&p, &q).unwrap() - hausdorff(&pt, &qt).unwrap()).abs() < 1e-9);

    let mesh = Surface::Mesh(TriangleMesh::icosphere(2));
    let moved = TriangleMesh::new(rigid(TriangleMesh::icosphere(2).vertices()), TriangleMesh::icosphere(2).faces().to_vec())
        .unwrap();
    let a = point_to_surface(&p, Some(&mesh)).unwrap();
    let b = point_to_surface(&pt, Some(&Surface::Mesh(moved))).unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn point_to_sphere() {
    let sphere = Surface::unit_sphere();
    let on = sphere.sample_poisson(300, 4).unwrap();
    assert!(point_to_surface(on.positions(), Some(&sphere)).unwrap() < 1e-12);
    let d = point_to_surface(&[[0.0, 1.1, 0.0]], Some(&sphere)).unwrap();
    assert!((d - 0.1).abs() < 1e-15);
    assert!(point_to_surface(&[[0.0; 3]], None).is_err());
}

#[test]
fn point_to_mesh_matches_all_triangle_scan() {
    let mesh = TriangleMesh::icosphere(2);
    let surface = Surface::Mesh(mesh.clone());
    for seed in 0..5 {
        let mut r = rng(seed + 10);
        let p = random_points(&mut r, 100, 1.5);
        let want = p.iter().map(|&x| mesh.distance_brute_force(x)).sum::<f64>() / 100.0;
        assert_eq!(point_to_surface(&p, Some(&surface)).unwrap(), want);
    }
}

#[test]
fn report_fields() {
    let mut r = rng(3);
    let p = random_points(&mut r, 40, 1.0);
    let q = random_points(&mut r, 40, 1.0);
    let rep = evaluate(&p, &q, None).unwrap();
    assert_eq!(rep.cd, chamfer(&p, &q).unwrap());
    assert_eq!(rep.hd, hausdorff(&p, &q).unwrap());
    assert_eq!(rep.p2f, None);
    let rep = evaluate(&p, &p, Some(&Surface::unit_sphere())).unwrap();
    assert_eq!((rep.cd, rep.hd), (0.0, 0.0));
    assert!(rep.p2f.unwrap() > 0.0);
}
