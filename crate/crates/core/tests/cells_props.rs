mod common;

use common::{random_net, rng, uniform_vec, vertex_enumeration_max};
use rand::Rng;
use wdro_core::cells::{
    build_cell, cell_feasible, max_linear_over_cone_ball, ConeRow, RecessionCone, Sign,
    STRICT_MARGIN,
};
use wdro_core::linalg::{add_scaled, dot, vec_norm};
use wdro_core::lp::{solve_lp, LpConstraint, LpProblem, LpStatus};
use wdro_core::{ActivationKind, NormKind};

#[test]
fn sampled_points_satisfy_their_cell() {
    let mut g = rng(31);
    let mut checked = 0;
    while checked < 1000 {
        let n = g.random_range(1..4);
        let widths = [g.random_range(1..7), g.random_range(1..5)];
        let net = random_net(&mut g, n, &widths, 3, ActivationKind::Relu);
        let x = uniform_vec(&mut g, n, -1.0, 1.0);
        let (mask, deg) = net.mask_at(&x).unwrap();
        if deg {
            continue;
        }
        let cell = build_cell(&net, &mask).unwrap();
        assert!(cell.contains(&x));
        assert_eq!(cell.jacobian, net.masked_jacobian(&mask).unwrap());
        let affine = add_scaled(&cell.jacobian.matvec(&x), 1.0, &cell.offset);
        let f = net.forward(&x).unwrap();
        for i in 0..f.len() {
            assert!((affine[i] - f[i]).abs() < 1e-10);
        }
        if checked % 10 == 0 {
            assert!(cell_feasible(&cell, net.domain()));
        }
        checked += 1;
    }
}

#[test]
fn interior_cone_rays_keep_the_mask() {
    let mut g = rng(32);
    let mut checked = 0;
    while checked < 200 {
        let n = g.random_range(1..4);
        let net = random_net(&mut g, n, &[6, 4], 3, ActivationKind::Relu);
        let x = uniform_vec(&mut g, n, -1.0, 1.0);
        let (mask, deg) = net.mask_at(&x).unwrap();
        if deg {
            continue;
        }
        let cell = build_cell(&net, &mask).unwrap();
        let cone = cell.recession_cone();
        let c = uniform_vec(&mut g, n, -1.0, 1.0);
        let r = NormKind::ALL[checked % 3];
        let m = max_linear_over_cone_ball(&c, &cone, r, true).unwrap();
        if !m.is_feasible() || m.all_descent {
            continue;
        }
        for t in [1.0, 10.0, 1e3] {
            let y = add_scaled(&x, t, &m.u);
            assert!(cell.contains(&y), "t = {t}");
            let (my, dy) = net.mask_at(&y).unwrap();
            assert!(!dy && my == mask);
            let fx = net.forward(&x).unwrap();
            let fy = net.forward(&y).unwrap();
            let ju = cell.jacobian.matvec(&m.u);
            for i in 0..fx.len() {
                assert!((fy[i] - fx[i] - t * ju[i]).abs() <= 1e-8 * t);
            }
        }
        checked += 1;
    }
}

fn random_cone(g: &mut rand_chacha::ChaCha8Rng, n: usize, rows: usize) -> RecessionCone {
    let rows = (0..rows)
        .map(|_| ConeRow {
            a: uniform_vec(g, n, -1.0, 1.0),
            sign: if g.random::<bool>() { Sign::Plus } else { Sign::Minus },
        })
        .collect();
    RecessionCone::new(n, rows)
}

/// Cone rows `-sign a . u <= 0` plus the unit box, as `A u <= b`.
fn cone_box_rows(cone: &RecessionCone) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = cone.dim();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for r in &cone.rows {
        rows.push(r.a.iter().map(|v| -r.sign.value() * v).collect());
        rhs.push(0.0);
    }
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = s;
            rows.push(e);
            rhs.push(1.0);
        }
    }
    (rows, rhs)
}

#[test]
fn inf_ball_value_matches_vertex_enumeration() {
    let mut g = rng(33);
    for _ in 0..300 {
        let n = g.random_range(1..5);
        let rows = g.random_range(0..4);
        let cone = random_cone(&mut g, n, rows);
        let c = uniform_vec(&mut g, n, -1.0, 1.0);
        let m = max_linear_over_cone_ball(&c, &cone, NormKind::LInf, false).unwrap();
        let (rows, rhs) = cone_box_rows(&cone);
        let oracle = vertex_enumeration_max(&c, &rows, &rhs).unwrap();
        if m.is_feasible() {
            assert!((m.value - oracle.max(0.0)).abs() < 1e-9, "{} vs {oracle}", m.value);
        } else {
            // Only the origin is feasible.
            assert!(oracle.abs() < 1e-9);
        }
    }
}

#[test]
fn random_search_never_beats_the_inf_ball_value() {
    let mut g = rng(34);
    for case in 0..16 {
        let n = 1 + case % 4;
        let rows = g.random_range(0..3);
        let cone = random_cone(&mut g, n, rows);
        let c = uniform_vec(&mut g, n, -1.0, 1.0);
        let m = max_linear_over_cone_ball(&c, &cone, NormKind::LInf, false).unwrap();
        if !m.is_feasible() {
            continue;
        }
        let mut best = 0.0f64;
        for _ in 0..1_000_000 {
            // Pin a random subset of coordinates to the box faces so that
            // low-dimensional faces, where optima live, get sampled densely.
            let mut u = uniform_vec(&mut g, n, -1.0, 1.0);
            for v in u.iter_mut() {
                if g.random::<bool>() {
                    *v = if *v > 0.0 { 1.0 } else { -1.0 };
                }
            }
            if cone.contains(&u, 0.0) {
                best = best.max(dot(&c, &u));
            }
        }
        assert!(best <= m.value + 1e-9, "{best} > {} for {cone:?}, {c:?}", m.value);
        assert!(m.value - best <= 1e-3, "{} vs {best}", m.value);
    }
}

#[test]
fn l2_value_sits_between_scaled_inf_values() {
    let mut g = rng(35);
    for _ in 0..300 {
        let n = g.random_range(1..5);
        let rows = g.random_range(0..4);
        let cone = random_cone(&mut g, n, rows);
        let c = uniform_vec(&mut g, n, -1.0, 1.0);
        let l2 = max_linear_over_cone_ball(&c, &cone, NormKind::L2, false).unwrap();
        let li = max_linear_over_cone_ball(&c, &cone, NormKind::LInf, false).unwrap();
        assert_eq!(l2.is_feasible(), li.is_feasible());
        if !l2.is_feasible() {
            continue;
        }
        let root_n = (n as f64).sqrt();
        assert!(l2.value <= li.value + 1e-8);
        assert!(l2.value <= li.value * root_n + 1e-8);
        assert!(l2.value >= li.value / root_n - 1e-8);
        if !l2.all_descent {
            assert!(cone.contains(&l2.u, 1e-8), "{:?} {:?} {}", cone, c, cone.min_row_value(&l2.u));
            assert!((vec_norm(&l2.u, NormKind::L2) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn l2_value_dominates_random_unit_directions() {
    let mut g = rng(36);
    for _ in 0..100 {
        let n = g.random_range(1..4);
        let rows = g.random_range(1..3);
        let cone = random_cone(&mut g, n, rows);
        let c = uniform_vec(&mut g, n, -1.0, 1.0);
        let m = max_linear_over_cone_ball(&c, &cone, NormKind::L2, false).unwrap();
        let mut best = 0.0f64;
        for _ in 0..20_000 {
            let u = common::random_unit(&mut g, n);
            if cone.contains(&u, 0.0) {
                best = best.max(dot(&c, &u));
            }
        }
        if m.is_feasible() {
            assert!(best <= m.value + 1e-7);
        }
    }
}

#[test]
fn interior_solutions_respect_the_margin() {
    let mut g = rng(37);
    for _ in 0..300 {
        let n = g.random_range(1..5);
        let rows = g.random_range(1..4);
        let cone = random_cone(&mut g, n, rows);
        let c = uniform_vec(&mut g, n, -1.0, 1.0);
        for r in NormKind::ALL {
            let closed = max_linear_over_cone_ball(&c, &cone, r, false).unwrap();
            let open = max_linear_over_cone_ball(&c, &cone, r, true).unwrap();
            if !open.is_feasible() || open.all_descent {
                continue;
            }
            for row in &cone.rows {
                let slack = row.sign.value() * dot(&row.a, &open.u);
                assert!(slack >= STRICT_MARGIN * vec_norm(&row.a, NormKind::L2) * (1.0 - 1e-6));
            }
            assert!(vec_norm(&open.u, r) <= 1.0 + 1e-9);
            assert!(open.value <= closed.value + 1e-9);
            assert!(closed.value - open.value <= 1e-4, "{r}: {} vs {}", open.value, closed.value);
        }
    }
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut g = rng(38);
    let mut optimal = 0;
    for _ in 0..500 {
        let n = g.random_range(1..6);
        let m = g.random_range(1..6);
        let c = uniform_vec(&mut g, n, -1.0, 1.0);
        let mut rows: Vec<Vec<f64>> = (0..m).map(|_| uniform_vec(&mut g, n, -1.0, 1.0)).collect();
        let mut rhs: Vec<f64> = uniform_vec(&mut g, m, -0.5, 1.0);
        // A bounding box keeps every instance bounded.
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[i] = s;
                rows.push(e);
                rhs.push(2.0);
            }
        }
        let mut p = LpProblem::new(c.clone(), false);
        for (r, &b) in rows.iter().zip(&rhs) {
            p.push(LpConstraint::le(r.clone(), b));
        }
        let sol = solve_lp(&p);
        match vertex_enumeration_max(&c, &rows, &rhs) {
            Some(v) => {
                assert_eq!(sol.status, LpStatus::Optimal);
                assert!((sol.value - v).abs() < 1e-9, "{} vs {v}", sol.value);
                for (r, &b) in rows.iter().zip(&rhs) {
                    assert!(dot(r, &sol.x) <= b + 1e-9);
                }
                optimal += 1;
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
    assert!(optimal > 100);
}
