use proptest::prelude::*;
use thickening::polygon2d::{milman_pajor_ratio, rogers_shephard_ratio, ConvexPolygon, Point};
use thickening::Direction;

const TOL: f64 = 1e-9;

fn points(max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3..max)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point::new(x, y)).collect())
}

/// Hulls of random points, discarding nearly flat ones.
fn polygon() -> impl Strategy<Value = ConvexPolygon> {
    points(12).prop_filter_map("degenerate hull", |pts| {
        ConvexPolygon::hull(&pts).ok().filter(|p| p.area() > 0.05)
    })
}

fn centered(p: &ConvexPolygon) -> ConvexPolygon {
    let c = p.barycenter();
    p.translate(Point::new(-c.x, -c.y))
}

fn angles() -> impl Strategy<Value = f64> {
    0.0f64..std::f64::consts::TAU
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hull_contains_its_points(pts in points(15), a in angles()) {
        if let Ok(k) = ConvexPolygon::hull(&pts) {
            let theta = Direction::planar(a);
            let h = k.support(&theta);
            for q in &pts {
                prop_assert!(theta.dot(&[q.x, q.y]) <= h + TOL);
            }
        }
    }

    #[test]
    fn support_is_additive_under_minkowski_sum(k in polygon(), l in polygon(), a in angles()) {
        let theta = Direction::planar(a);
        let s = k.minkowski_sum(&l).unwrap();
        prop_assert!((s.support(&theta) - k.support(&theta) - l.support(&theta)).abs() <= 1e-9);
    }

    #[test]
    fn brunn_minkowski(k in polygon(), l in polygon()) {
        let s = k.minkowski_sum(&l).unwrap();
        prop_assert!(s.area().sqrt() >= k.area().sqrt() + l.area().sqrt() - TOL);
        // Mixed-area form: |K + L| = |K| + 2V(K, L) + |L| with V(K, L) >= sqrt(|K||L|).
        let mixed = (s.area() - k.area() - l.area()) / 2.0;
        prop_assert!(mixed >= (k.area() * l.area()).sqrt() - TOL);
    }

    #[test]
    fn intersection_is_inside_both(k in polygon(), l in polygon(), a in angles()) {
        if let Some(i) = k.intersect(&l) {
            let theta = Direction::planar(a);
            prop_assert!(i.area() <= k.area().min(l.area()) + TOL);
            prop_assert!(i.support(&theta) <= k.support(&theta).min(l.support(&theta)) + TOL);
        }
    }

    #[test]
    fn self_intersection_is_identity(k in polygon()) {
        let i = k.intersect(&k).unwrap();
        prop_assert!((i.area() - k.area()).abs() <= 1e-9);
    }

    #[test]
    fn rogers_shephard_planar_range(k in polygon()) {
        let r = rogers_shephard_ratio(&k).unwrap();
        prop_assert!((4.0 - TOL..=6.0 + TOL).contains(&r), "ratio {r}");
    }

    #[test]
    fn milman_pajor_for_centered_bodies(k in polygon()) {
        let r = milman_pajor_ratio(&centered(&k)).unwrap();
        prop_assert!((0.25 - TOL..=1.0 + TOL).contains(&r), "ratio {r}");
    }

    #[test]
    fn polar_is_an_involution(k in polygon()) {
        let c = centered(&k);
        prop_assume!(c.origin_margin() > 0.1);
        let back = c.polar().unwrap().polar().unwrap();
        prop_assert_eq!(back.vertices().len(), c.vertices().len());
        for a in [0.0, 0.7, 1.9, 3.3, 5.1] {
            let theta = Direction::planar(a);
            prop_assert!((back.support(&theta) - c.support(&theta)).abs() <= 1e-9);
        }
        // Blaschke–Santaló in the plane: |K||K°| <= π² for centered K.
        let product = c.area() * c.polar().unwrap().area();
        prop_assert!(product <= std::f64::consts::PI.powi(2) + 1e-9);
    }

    #[test]
    fn scaling_and_translation(k in polygon(), s in 0.1f64..5.0, dx in -2.0f64..2.0, a in angles()) {
        let theta = Direction::planar(a);
        let scaled = k.scale(s).unwrap();
        prop_assert!((scaled.area() - s * s * k.area()).abs() <= 1e-9 * (1.0 + s * s * k.area()));
        prop_assert!((scaled.support(&theta) - s * k.support(&theta)).abs() <= 1e-9 * (1.0 + s));
        let moved = k.translate(Point::new(dx, 0.0));
        prop_assert!((moved.support(&theta) - k.support(&theta) - dx * theta.coords()[0]).abs() <= 1e-9);
        prop_assert!((moved.area() - k.area()).abs() <= 1e-9);
    }

    #[test]
    fn reflection_flips_support(k in polygon(), a in angles()) {
        let theta = Direction::planar(a);
        prop_assert!((k.reflect().support(&theta) - k.support(&theta.neg())).abs() <= 1e-12);
    }

    #[test]
    fn text_round_trip_is_exact(k in polygon()) {
        let back = ConvexPolygon::from_text(&k.to_text()).unwrap();
        prop_assert_eq!(back, k);
    }

    #[test]
    fn clip_keeps_the_right_half(k in polygon(), a in angles(), off in -1.0f64..1.0) {
        let n = Direction::planar(a);
        if let Some(h) = k.clip(Point::new(n.coords()[0], n.coords()[1]), off) {
            prop_assert!(h.area() <= k.area() + TOL);
            prop_assert!(h.support(&n) <= off + 1e-9);
        }
    }
}

#[test]
fn regular_polygon_area_and_volume_radius() {
    for m in [3usize, 4, 6, 50] {
        let p = ConvexPolygon::regular(m, 2.0, 0.3).unwrap();
        let mf = m as f64;
        let want = 0.5 * mf * 4.0 * (std::f64::consts::TAU / mf).sin();
        assert!((p.area() - want).abs() < 1e-12);
        assert!((p.volume_radius() - (want / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn triangle_extremes() {
    let tri = ConvexPolygon::new(vec![Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.5, 1.5)]).unwrap();
    assert!((rogers_shephard_ratio(&tri).unwrap() - 6.0).abs() < 1e-12);
    assert!((milman_pajor_ratio(&centered(&tri)).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    let sq = ConvexPolygon::rectangle(-1.0, -1.0, 1.0, 1.0).unwrap();
    assert!((rogers_shephard_ratio(&sq).unwrap() - 4.0).abs() < 1e-12);
    assert!((milman_pajor_ratio(&sq).unwrap() - 1.0).abs() < 1e-12);
    // The polar of the square [-1,1]^2 is the cross-polytope of area 2.
    assert!((sq.polar().unwrap().area() - 2.0).abs() < 1e-12);
}

#[test]
fn degenerate_inputs_are_rejected() {
    let line = [Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
    assert!(ConvexPolygon::hull(&line).is_err());
    let off_center = ConvexPolygon::rectangle(1.0, 1.0, 2.0, 2.0).unwrap();
    assert!(off_center.polar().is_err());
    assert!(milman_pajor_ratio(&off_center).is_err());
    let far = ConvexPolygon::rectangle(5.0, 5.0, 6.0, 6.0).unwrap();
    assert!(off_center.intersect(&far).is_none());
}
