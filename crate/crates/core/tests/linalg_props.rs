mod common;

use common::{rng, uniform_mat, uniform_vec};
use proptest::prelude::*;
use rand::Rng;
use wdro_core::linalg::{dot, dual_norm_maximizer, op_norm, project_ball, spectral_norm, vec_norm};
use wdro_core::{Mat, NormKind};

fn on_sphere(v: Vec<f64>, r: NormKind) -> Option<Vec<f64>> {
    let n = vec_norm(&v, r);
    (n > 1e-12).then(|| v.into_iter().map(|x| x / n).collect())
}

/// Best `||A u||_s` over random unit-`r` directions: dense, sparse and sign
/// vectors, so every ball shape gets near its extreme points.
fn random_search(a: &Mat, r: NormKind, s: NormKind, draws: usize, seed: u64) -> f64 {
    let mut g = rng(seed);
    let n = a.cols();
    let mut best = 0.0f64;
    for t in 0..draws {
        let v: Vec<f64> = match t % 3 {
            0 => uniform_vec(&mut g, n, -1.0, 1.0),
            1 => {
                let mut v = vec![0.0; n];
                v[g.random_range(0..n)] = if g.random::<bool>() { 1.0 } else { -1.0 };
                v
            }
            _ => (0..n).map(|_| if g.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        };
        if let Some(u) = on_sphere(v, r) {
            best = best.max(vec_norm(&a.matvec(&u), s));
        }
    }
    best
}

fn power_iteration(a: &Mat, iters: usize) -> f64 {
    let ata = a.transpose().matmul(a);
    let mut v = vec![1.0; a.cols()];
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = ata.matvec(&v);
        let n = vec_norm(&w, NormKind::L2);
        if n == 0.0 {
            return 0.0;
        }
        lambda = n / vec_norm(&v, NormKind::L2);
        v = w.into_iter().map(|x| x / n).collect();
    }
    lambda.sqrt()
}

#[test]
fn operator_norms_dominate_random_search() {
    let mut g = rng(7);
    for case in 0..30 {
        let rows = g.random_range(1..5);
        let cols = g.random_range(1..5);
        let a = uniform_mat(&mut g, rows, cols, -2.0, 2.0);
        for r in NormKind::ALL {
            for s in NormKind::ALL {
                let exact = op_norm(&a, r, s).unwrap();
                let search = random_search(&a, r, s, 3000, case);
                assert!(exact >= search - 1e-9, "({r},{s}) {exact} < {search}");
                // Random search gets close in these small dimensions, which
                // rules out gross overestimates.
                assert!(search >= 0.8 * exact, "({r},{s}) {search} << {exact}");
            }
        }
    }
}

#[test]
fn inf_source_norms_match_vertex_enumeration() {
    let mut g = rng(11);
    for _ in 0..20 {
        let n = g.random_range(1..9);
        let a = uniform_mat(&mut g, 3, n, -1.0, 1.0);
        for s in NormKind::ALL {
            let mut best = 0.0f64;
            for bits in 0u32..(1 << n) {
                let u: Vec<f64> = (0..n).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
                best = best.max(vec_norm(&a.matvec(&u), s));
            }
            assert_eq!(op_norm(&a, NormKind::LInf, s).unwrap(), best);
        }
    }
}

#[test]
fn spectral_norm_agrees_with_power_iteration() {
    let mut g = rng(3);
    for _ in 0..50 {
        let a = uniform_mat(&mut g, 4, 3, -1.0, 1.0);
        let s = spectral_norm(&a);
        assert!((s - power_iteration(&a, 5000)).abs() < 1e-6 * s.max(1.0));
    }
}

#[test]
fn spectral_norm_with_repeated_singular_values() {
    let a = Mat::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0 - 1e-9]]).unwrap();
    assert!((spectral_norm(&a) - 1.0).abs() < 1e-12);
}

#[test]
fn operator_norm_duality() {
    // ||A||_{r->s} == ||A^T||_{s*->r*}.
    let mut g = rng(5);
    for _ in 0..20 {
        let a = uniform_mat(&mut g, 3, 4, -1.0, 1.0);
        for r in NormKind::ALL {
            for s in NormKind::ALL {
                let lhs = op_norm(&a, r, s).unwrap();
                let rhs = op_norm(&a.transpose(), s.dual(), r.dual()).unwrap();
                assert!((lhs - rhs).abs() < 1e-9 * lhs.max(1.0), "({r},{s}) {lhs} {rhs}");
            }
        }
    }
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

fn norm_strategy() -> impl Strategy<Value = NormKind> {
    prop_oneof![Just(NormKind::L1), Just(NormKind::L2), Just(NormKind::LInf)]
}

proptest! {
    #[test]
    fn dual_maximizer_attains_dual_norm(g in vec_strategy(4), r in norm_strategy()) {
        prop_assume!(vec_norm(&g, NormKind::L2) > 1e-9);
        let h = dual_norm_maximizer(&g, r).unwrap();
        prop_assert!(vec_norm(&h, r) <= 1.0 + 1e-12);
        prop_assert!((dot(&g, &h) - vec_norm(&g, r.dual())).abs() <= 1e-9);
    }

    #[test]
    fn projection_lands_in_ball_and_is_idempotent(
        x in vec_strategy(3),
        anchor in vec_strategy(3),
        radius in 0.0f64..3.0,
        r in norm_strategy(),
    ) {
        let p = project_ball(&x, &anchor, radius, r);
        let d: Vec<f64> = p.iter().zip(&anchor).map(|(a, b)| a - b).collect();
        prop_assert!(vec_norm(&d, r) <= radius + 1e-9);
        let q = project_ball(&p, &anchor, radius, r);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_is_nearest_point(
        x in vec_strategy(3),
        radius in 0.1f64..2.0,
        r in norm_strategy(),
        probes in prop::collection::vec(vec_strategy(3), 50),
    ) {
        let anchor = [0.0; 3];
        let p = project_ball(&x, &anchor, radius, r);
        let dist = |y: &[f64]| vec_norm(&x.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>(), NormKind::L2);
        let dp = dist(&p);
        for y in probes {
            let n = vec_norm(&y, r);
            let y: Vec<f64> = if n > radius { y.iter().map(|v| v * radius / n).collect() } else { y };
            prop_assert!(dp <= dist(&y) + 1e-9);
        }
    }
}
