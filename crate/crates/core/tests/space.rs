use std::sync::Arc;

use nlhelm_core::mesh::EdgeKind;
use nlhelm_core::problem::plane_wave;
use nlhelm_core::quadrature::triangle_quadrature;
use nlhelm_core::space::volume_order;
use nlhelm_core::{build_disk_mesh_level, error_vs_exact, interpolate, make_space, Complex64, FeField, FemError};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn dof_counts() {
    let mesh = build_disk_mesh_level(2, 1).unwrap();
    let (v, e, t) = (mesh.n_vertices(), mesh.n_edges(), mesh.n_triangles());
    let expect = [v, v + e, v + 2 * e + t, v + 3 * e + 3 * t];
    for p in 1..=4 {
        let space = make_space(mesh.clone(), p).unwrap();
        assert_eq!(space.n_dofs(), expect[p - 1]);
        assert_eq!(space.n_local(), (p + 1) * (p + 2) / 2);
    }
    assert!(matches!(make_space(mesh.clone(), 0), Err(FemError::Argument(_))));
    assert!(matches!(make_space(mesh, 5), Err(FemError::Argument(_))));
}

#[test]
fn quadrature_orders_meet_the_minimum() {
    let mesh = build_disk_mesh_level(0, 2).unwrap();
    for p in 1..=4 {
        let space = make_space(mesh.clone(), p).unwrap();
        let vr = space.volume_rule();
        assert!(vr.order >= 3 * p + 2);
        let er = space.edge_rule();
        // Gauss-Legendre with n points is exact to degree 2n - 1.
        assert!(2 * er.points.len() - 1 >= 2 * p + 2);
    }
}

#[test]
fn partition_of_unity_at_quadrature_points() {
    let mesh = build_disk_mesh_level(1, 3).unwrap();
    for p in 1..=4 {
        let space = make_space(mesh.clone(), p).unwrap();
        let nloc = space.n_local();
        for row in space.volume_values().chunks(nloc) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-13);
        }
        let ones = interpolate(&space, |_| c(1.0)).unwrap();
        assert!(ones.coeffs().iter().all(|&v| v == c(1.0)));
    }
}

#[test]
fn shared_edges_agree_from_both_sides() {
    let mesh = build_disk_mesh_level(2, 1).unwrap();
    for p in 1..=4 {
        let space = make_space(mesh.clone(), p).unwrap();
        let field = interpolate(&space, |x| Complex64::new((3.0 * x[0]).sin() * x[1], (x[0] * x[1]).exp())).unwrap();
        let mut checked = 0;
        for e in mesh.edges().iter().filter(|e| e.kind != EdgeKind::Boundary) {
            let [a, b] = e.vertices.map(|v| mesh.vertices()[v]);
            let [t0, t1] = e.triangles.map(Option::unwrap);
            for i in 1..=5 {
                let s = i as f64 / 6.0;
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let (xi0, ok0) = mesh.inverse_map(t0, x, [0.3, 0.3]);
                let (xi1, ok1) = mesh.inverse_map(t1, x, [0.3, 0.3]);
                assert!(ok0 && ok1);
                let d = (field.value_in(t0, xi0) - field.value_in(t1, xi1)).norm();
                assert!(d <= 1e-11, "p = {p}, jump {d}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn straight_mesh_reproduces_polynomials() {
    let mesh = build_disk_mesh_level(2, 1).unwrap();
    let samples = [[0.3, 0.1], [-0.7, 0.2], [0.05, -0.42], [0.0, 0.0], [0.6, 0.6]];
    for p in 1..=4 {
        let space = make_space(mesh.clone(), p).unwrap();
        let poly = move |x: [f64; 2]| {
            let mut v = 0.0;
            for a in 0..=p {
                for b in 0..=(p - a) {
                    v += (1.0 + a as f64 - 0.5 * b as f64) * x[0].powi(a as i32) * x[1].powi(b as i32);
                }
            }
            Complex64::new(v, -0.5 * v)
        };
        let f = interpolate(&space, poly).unwrap();
        for x in samples {
            assert!((f.evaluate(x).unwrap() - poly(x)).norm() <= 1e-12, "p = {p} at {x:?}");
        }
    }
}

#[test]
fn evaluate_examples() {
    let mesh = build_disk_mesh_level(3, 1).unwrap();
    let space = make_space(mesh, 2).unwrap();
    let one = interpolate(&space, |_| c(1.0)).unwrap();
    assert!((one.evaluate([-0.33, 0.71]).unwrap() - c(1.0)).norm() < 1e-13);
    let x1 = interpolate(&space, |x| c(x[0])).unwrap();
    assert!((x1.evaluate([0.3, 0.1]).unwrap() - c(0.3)).norm() <= 1e-12);

    let mut coeffs = vec![c(0.0); space.n_dofs()];
    for (i, v) in coeffs.iter_mut().enumerate() {
        *v = Complex64::new(i as f64, 1.0);
    }
    let f = FeField::from_coeffs(&space, coeffs).unwrap();
    let points = space.dof_points();
    for d in (0..space.n_dofs()).step_by(37) {
        assert!((f.evaluate(points[d]).unwrap() - f.coeffs()[d]).norm() < 1e-9, "dof {d}");
    }
    assert!(matches!(f.evaluate([0.9, 0.9]), Err(FemError::NotFound { .. })));
}

#[test]
fn field_construction_errors() {
    let space = make_space(build_disk_mesh_level(0, 1).unwrap(), 1).unwrap();
    assert!(matches!(FeField::from_coeffs(&space, vec![c(0.0); 3]), Err(FemError::Argument(_))));
    let mut bad = vec![c(0.0); space.n_dofs()];
    bad[2] = Complex64::new(f64::NAN, 0.0);
    assert!(matches!(FeField::from_coeffs(&space, bad), Err(FemError::Data(_))));
    assert!(matches!(interpolate(&space, |x| c(1.0 / x[0])), Err(FemError::Data(_))));
}

#[test]
fn curved_edge_nodes_follow_the_circle() {
    for p in 2..=4 {
        let mesh = build_disk_mesh_level(2, p).unwrap();
        let space = make_space(mesh.clone(), p).unwrap();
        let points = space.dof_points();
        let h = mesh.h();
        for d in space.boundary_dofs() {
            let r = points[d][0].hypot(points[d][1]);
            assert!((r - 1.0).abs() < h.powi(p as i32 + 1), "p = {p}: r = {r}");
        }
    }
}

/// Relative L2 interpolation errors of a plane wave on levels `levels`.
fn interpolation_errors(p: usize, levels: std::ops::RangeInclusive<usize>) -> Vec<(f64, f64)> {
    let k = 8.0;
    let d = [0.6, 0.8];
    levels
        .map(|l| {
            let mesh = build_disk_mesh_level(l, p).unwrap();
            let space = make_space(mesh.clone(), p).unwrap();
            let u = |x| plane_wave(d, k, x);
            let du = |x| {
                let w = plane_wave(d, k, x) * Complex64::new(0.0, k);
                [w * d[0], w * d[1]]
            };
            let f = interpolate(&space, u).unwrap();
            (mesh.h(), error_vs_exact(&f, k, u, du).rel_l2())
        })
        .collect()
}

#[test]
fn plane_wave_interpolation_converges_at_order_p_plus_one() {
    for (p, levels) in [(1, 3..=6), (2, 2..=5), (3, 2..=5), (4, 1..=4)] {
        let e = interpolation_errors(p, levels);
        let last = e.len() - 1;
        let slope = (e[last - 1].1 / e[last].1).ln() / (e[last - 1].0 / e[last].0).ln();
        assert!((slope - (p + 1) as f64).abs() < 0.3, "p = {p}: slope {slope}, errors {e:?}");
    }
}

#[test]
fn quadrature_matches_closed_form_monomials() {
    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }
    for order in [1, 5, 3 * 4 + 2, 20] {
        let rule = triangle_quadrature(order).unwrap();
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        assert!((rule.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
        for a in 0..=order as u32 {
            for b in 0..=(order as u32 - a) {
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let q: f64 =
                    rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32)).sum();
                assert!((q - exact).abs() <= 1e-14 * exact.max(1e-3), "order {order}: x^{a} y^{b}");
            }
        }
    }
    let rule = triangle_quadrature(volume_order(2)).unwrap();
    let deg = volume_order(2) as u32 + 2;
    let exact = 1.0 / ((deg + 1) * (deg + 2)) as f64;
    let q: f64 = rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x[0].powi(deg as i32)).sum();
    assert!((q - exact).abs() > 1e-15);
    assert!(triangle_quadrature(0).is_err() && triangle_quadrature(21).is_err());
}

#[test]
fn spaces_share_the_mesh_arc() {
    let mesh = build_disk_mesh_level(1, 2).unwrap();
    let space = make_space(mesh.clone(), 2).unwrap();
    assert!(Arc::ptr_eq(space.mesh(), &mesh));
}
