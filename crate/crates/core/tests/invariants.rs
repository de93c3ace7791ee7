use approx::assert_relative_eq;
use horolab::coarse::{busemann_minus_center, r_of, rho};
use horolab::connection::sectional_curvature_fd;
use horolab::convexity::{second_fundamental, CurveState};
use horolab::distance::{distance, DistanceOptions};
use horolab::geodesic::{integrate_geodesic, momenta_of, GeodesicState};
use horolab::growth::{ball_volumes, dyadic_radii, fit_growth};
use horolab::mesh::build_mesh;
use horolab::shortest::mesh_distance_from_sources;
use horolab::{HeintzeGroup, Point, Tangent};
use proptest::prelude::*;

fn group() -> impl Strategy<Value = HeintzeGroup> {
    prop::collection::vec(0.3f64..3.0, 1..=3).prop_map(|l| HeintzeGroup::new(l).unwrap())
}

fn point(d: usize) -> impl Strategy<Value = Point> {
    (-3.0f64..3.0, prop::collection::vec(-2.0f64..2.0, d)).prop_map(|(y, x)| Point::new(y, x))
}

fn tangent(d: usize) -> impl Strategy<Value = Tangent> {
    (-2.0f64..2.0, prop::collection::vec(-2.0f64..2.0, d)).prop_map(|(v, u)| Tangent::new(v, u))
}

fn with_points(n: usize) -> impl Strategy<Value = (HeintzeGroup, Vec<Point>, Vec<Tangent>)> {
    group().prop_flat_map(move |g| {
        let d = g.dim();
        (
            Just(g),
            prop::collection::vec(point(d), n),
            prop::collection::vec(tangent(d), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn isometries_preserve_the_metric((g, ps, ws) in with_points(2), s in -3.0f64..3.0, z in prop::collection::vec(-5.0f64..5.0, 3)) {
        let p = &ps[0];
        let z = &z[..g.dim()];
        let q = g.tau(s, p);
        let (a, b) = (g.tau_push(s, &ws[0]), g.tau_push(s, &ws[1]));
        assert_relative_eq!(g.inner(q.y, &a, &b), g.inner(p.y, &ws[0], &ws[1]), max_relative = 1e-12, epsilon = 1e-12);
        let t = g.translate(z, p);
        assert_eq!(t.y, p.y);
        assert_relative_eq!(g.inner(t.y, &ws[0], &ws[1]), g.inner(p.y, &ws[0], &ws[1]), max_relative = 1e-15);
        assert_relative_eq!(g.tau(-s, &q).y, p.y, epsilon = 1e-14);
        for (u, v) in g.tau(-s, &q).x.iter().zip(&p.x) {
            assert_relative_eq!(*u, *v, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn coarse_height_is_invariant_and_the_center_shifts((g, ps, _) in with_points(1), s in -3.0f64..3.0) {
        let p = &ps[0];
        let q = g.tau(s, p);
        assert_relative_eq!(r_of(&g, &q, 1e-13), r_of(&g, p, 1e-13), epsilon = 1e-9);
        assert_relative_eq!(busemann_minus_center(&g, &q), busemann_minus_center(&g, p) + s, epsilon = 1e-9);
    }

    #[test]
    fn rho_is_symmetric_and_at_least_one((g, ps, _) in with_points(2)) {
        let (a, b) = (rho(&g, &ps[0], &ps[1]), rho(&g, &ps[1], &ps[0]));
        assert_relative_eq!(a, b, epsilon = 1e-9);
        prop_assert!(a >= 1.0);
    }

    #[test]
    fn curvature_stays_in_the_pinching_band((g, _, ws) in with_points(2), y in -3.0f64..3.0) {
        let gram = g.inner(y, &ws[0], &ws[0]) * g.inner(y, &ws[1], &ws[1]) - g.inner(y, &ws[0], &ws[1]).powi(2);
        prop_assume!(gram > 1e-3);
        let k = sectional_curvature_fd(&g, y, &ws[0], &ws[1], 1e-4).unwrap();
        prop_assert!(k >= -g.lambda_max().powi(2) - 1e-3 && k <= -g.lambda_min().powi(2) + 1e-3, "K = {}", k);
    }

    #[test]
    fn convex_for_small_a(i in 0usize..2, frac in 0.0f64..=1.0, y in -8.0f64..0.0, dy in -3.0f64..3.0, dx in prop::collection::vec(-3.0f64..3.0, 2)) {
        let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
        let a = frac * 2.0 * g.lambda(i);
        let s = CurveState::tangent(i, a, y, dy, dx);
        prop_assert!(second_fundamental(&g, i, a, &s) >= 0.0);
    }

    #[test]
    fn power_laws_fit_exactly(k in 0.5f64..6.0, c in 0.01f64..100.0) {
        let pts: Vec<(f64, f64)> = dyadic_radii(1.0, 128.0, 3).into_iter().map(|r| (r, c * r.powf(k))).collect();
        let f = fit_growth(&pts, (1.0, 128.0)).unwrap();
        prop_assert!((f.exponent - k).abs() < 1e-12);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn geodesics_conserve_speed_and_momenta((g, ps, ws) in with_points(1)) {
        let n = g.norm(ps[0].y, &ws[0]);
        prop_assume!(n > 1e-3);
        let w = ws[0].scaled(1.0 / n);
        let s0 = GeodesicState::new(&g, ps[0].clone(), w.clone());
        let path = integrate_geodesic(&g, &s0, 5.0, 1e-3).unwrap();
        prop_assert!(path.speed_drift < 1e-9);
        let last = path.states.last().unwrap();
        let p0 = momenta_of(&g, ps[0].y, &w.u);
        for (a, b) in last.momenta.iter().zip(&p0) {
            prop_assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn distance_is_symmetric_invariant_and_below_rho((g, ps, _) in with_points(2), s in -2.0f64..2.0) {
        let tol = 1e-5;
        let opts = DistanceOptions::with_tol(tol);
        let d = distance(&g, &ps[0], &ps[1], &opts).unwrap().value;
        let back = distance(&g, &ps[1], &ps[0], &opts).unwrap().value;
        let moved = distance(&g, &g.tau(s, &ps[0]), &g.tau(s, &ps[1]), &opts).unwrap().value;
        prop_assert!((d - back).abs() <= 2.0 * tol);
        prop_assert!((d - moved).abs() <= 2.0 * tol);
        prop_assert!(rho(&g, &ps[0], &ps[1]) - d >= -3.0 * tol);
        prop_assert!(d >= (ps[0].y - ps[1].y).abs() - tol);
    }
}

#[test]
fn ball_volumes_are_nondecreasing_and_start_at_the_seed() {
    let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
    let mesh = build_mesh(&g, 6.0, 0.4).unwrap();
    let dists = mesh_distance_from_sources(&mesh);
    let radii: Vec<f64> = (0..40).map(|k| k as f64 * 0.5).collect();
    let v = ball_volumes(&mesh, &dists, &radii, 1e9, |r| r).unwrap();
    assert!(v.windows(2).all(|w| w[1].1 >= w[0].1));
    let seed: f64 = mesh.sources.iter().map(|s| mesh.area[*s]).sum();
    assert!(v[0].1 >= seed - 1e-12);
    for &s in &mesh.sources {
        assert_eq!(dists[s], 0.0);
    }
}

#[test]
fn mesh_distances_are_mirror_symmetric() {
    let g = HeintzeGroup::new(vec![1.0, 2.0]).unwrap();
    let mesh = build_mesh(&g, 7.0, 0.3).unwrap();
    let dists = mesh_distance_from_sources(&mesh);
    let key = |y: f64, x: &[f64]| {
        let mut k = vec![(y * 1e8).round() as i64];
        k.extend(x.iter().map(|v| (v * 1e8).round() as i64));
        k
    };
    let index: std::collections::HashMap<Vec<i64>, usize> = (0..mesh.len())
        .map(|v| (key(mesh.y[v], mesh.horizontal(v)), v))
        .collect();
    for i in 0..2 {
        let mut matched = 0;
        for v in 0..mesh.len() {
            let mut x = mesh.horizontal(v).to_vec();
            x[i] = -x[i];
            if let Some(&w) = index.get(&key(mesh.y[v], &x)) {
                matched += 1;
                assert_relative_eq!(dists[v], dists[w], max_relative = 1e-9, epsilon = 1e-12);
            }
        }
        assert_eq!(matched, mesh.len(), "reflection in x_{i} is not a mesh symmetry");
    }
}
