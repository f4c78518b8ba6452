mod common;

use common::*;
use rand::Rng;
use wdro_core::attack::*;
use wdro_core::linalg::{add_scaled, basis_difference, dual_norm_maximizer, sub, vec_norm};
use wdro_core::loss::loss;
use wdro_core::network::Layer;
use wdro_core::{ActivationKind, BoxDomain, LabeledSample, LossKind, Mlp, NormKind};

const NORMS: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::LInf];

fn cfg(epsilon: f64, kappa: f64, norm: NormKind, step: f64) -> AttackConfig {
    AttackConfig { epsilon, kappa, norm, step, prob: 10, max_iters: 20, seed: 0 }
}

#[test]
fn every_iterate_respects_the_budget() {
    let mut g = rng(21);
    for case in 0..15 {
        let act = [ActivationKind::Relu, ActivationKind::Gelu, ActivationKind::Silu][case % 3];
        let k = 2 + case % 3;
        let net = random_net(&mut g, 3, &[6], k, act);
        let data = random_data(&mut g, 3, k, 5);
        for r in NORMS {
            for kappa in [1.0, 2.0, 3.5] {
                let eps = g.random_range(0.01..0.3);
                let c = cfg(eps, kappa, r, eps);
                let (dist, traces) = wda(&net, &data, &c).unwrap();
                assert!(dist.max_displacement() <= kappa * eps + 1e-9);
                for (p, t) in dist.pairs.iter().zip(&traces) {
                    assert_eq!(t.iterates.len(), 20);
                    for it in &t.iterates {
                        assert!(vec_norm(&sub(it, &p.anchor.x), r) <= kappa * eps + 1e-9);
                    }
                }
            }
        }
    }
}

#[test]
fn rival_is_frozen_after_probing() {
    let mut g = rng(22);
    for case in 0..10 {
        let net = random_net(&mut g, 2, &[8], 4, ActivationKind::Relu);
        let data = random_data(&mut g, 2, 4, 6);
        let mut c = cfg(0.2, 2.0, NORMS[case % 3], 0.05);
        c.prob = 1 + case % 5;
        let (_, traces) = wda(&net, &data, &c).unwrap();
        for t in traces {
            let last_probe = t.rivals[c.prob - 1];
            assert!(t.rivals[c.prob..].iter().all(|&j| j == last_probe));
        }
    }
}

#[test]
fn identical_configs_give_identical_outputs() {
    let mut g = rng(23);
    let net = random_net(&mut g, 3, &[7, 5], 3, ActivationKind::Gelu);
    let data = random_data(&mut g, 3, 3, 12);
    let c = cfg(0.1, 2.0, NormKind::L2, 0.03);
    let (a, ta) = wda(&net, &data, &c).unwrap();
    let (b, tb) = wda(&net, &data, &c).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    for (p, q) in a.pairs.iter().zip(&b.pairs) {
        for (x, y) in p.adv.iter().zip(&q.adv) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

/// Radius within which every hidden pre-activation keeps its sign.
fn cell_radius(net: &Mlp, x: &[f64], r: NormKind) -> f64 {
    let pre = &net.pre_activations(x).unwrap()[0];
    let w = &net.layers()[0].weight;
    (0..pre.len())
        .map(|j| pre[j].abs() / vec_norm(w.row(j), r.dual()).max(1e-300))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn single_cell_attack_beats_one_step() {
    let mut g = rng(24);
    let mut checked = 0;
    while checked < 60 {
        let k = g.random_range(2..5);
        let net = random_net(&mut g, 2, &[5], k, ActivationKind::Relu);
        let s = LabeledSample::new(uniform_vec(&mut g, 2, -0.5, 0.5), g.random_range(0..k));
        for r in NORMS {
            let kappa = 2.0;
            let eps = 0.4 * cell_radius(&net, &s.x, r) / kappa;
            if eps < 1e-4 {
                continue;
            }
            let c = cfg(eps, kappa, r, 2.0 * kappa * eps);
            let (x, trace) = wda_sample(&net, &s, &c).unwrap();
            let j = *trace.rivals.last().unwrap();
            let jac = net.jacobian(&s.x).unwrap();
            let gdir = jac.tr_matvec(&basis_difference(k, j, s.label));
            let one_step = add_scaled(&s.x, kappa * eps, &dual_norm_maximizer(&gdir, r).unwrap());
            let fgsm = loss(LossKind::DlrMargin, &net.forward(&one_step).unwrap(), s.label).unwrap();
            assert!(trace.final_margin >= fgsm - 1e-9, "{} < {fgsm}", trace.final_margin);
            // Linear objective over the ball: closed-form optimum.
            let z0 = net.forward(&s.x).unwrap();
            let z = net.forward(&x).unwrap();
            let reached = (z[j] - z[s.label]) - (z0[j] - z0[s.label]);
            assert!((reached - kappa * eps * vec_norm(&gdir, r.dual())).abs() < 1e-9);
            checked += 1;
        }
    }
}

#[test]
fn pgd_never_loses_ground_on_affine_instances() {
    let mut g = rng(25);
    for case in 0..30 {
        let k = 2 + case % 3;
        let w = uniform_mat(&mut g, k, 3, -1.0, 1.0);
        let b = uniform_vec(&mut g, k, -0.5, 0.5);
        let net = Mlp::new(vec![Layer::new(w, b).unwrap()], ActivationKind::Relu, BoxDomain::uniform(3, -1.0, 1.0).unwrap()).unwrap();
        let data = random_data(&mut g, 3, k, 4);
        for kind in LossKind::ALL {
            for r in [NormKind::L2, NormKind::LInf] {
                let c = PgdConfig { loss: kind, epsilon: 0.3, norm: r, step: 0.05, iters: 15 };
                for s in &data {
                    let (_, t) = pgd_sample(&net, s, &c).unwrap();
                    let mut prev = loss(kind, &net.forward(&s.x).unwrap(), s.label).unwrap();
                    for it in &t.iterates {
                        let v = loss(kind, &net.forward(it).unwrap(), s.label).unwrap();
                        assert!(v >= prev - 1e-12, "{kind:?} {r:?}: {v} < {prev}");
                        prev = v;
                        assert!(vec_norm(&sub(it, &s.x), r) <= 0.3 + 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn mixture_reductions() {
    let mut g = rng(26);
    let net = random_net(&mut g, 2, &[4], 3, ActivationKind::Silu);
    let data = random_data(&mut g, 2, 3, 7);
    let (d1, _) = wda(&net, &data, &cfg(0.1, 1.0, NormKind::LInf, 0.05)).unwrap();
    assert_eq!(d1.anchor_weight(), 0.0);
    let e1 = evaluate(&net, &d1, LossKind::CrossEntropy).unwrap();
    assert_eq!(e1.weighted_accuracy, e1.adv_accuracy);
    let (d2, _) = wda(&net, &data, &cfg(0.1, 2.0, NormKind::LInf, 0.05)).unwrap();
    for (_, _, w) in d2.atoms() {
        assert!((w - 1.0 / 14.0).abs() < 1e-15);
    }
    let e2 = evaluate(&net, &d2, LossKind::CrossEntropy).unwrap();
    assert!((e2.weighted_accuracy - 0.5 * (e2.clean_accuracy + e2.adv_accuracy)).abs() < 1e-15);
}
