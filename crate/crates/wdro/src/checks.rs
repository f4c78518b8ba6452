//! The acceptance criteria as runnable checks. `wdro selftest` and the
//! `acceptance` test target both run these.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wdro_core::attack::{wda_sample, AttackConfig, PgdConfig};
use wdro_core::certify::{enumerate_masks, upper_bound_L};
use wdro_core::linalg::{add_scaled, basis_difference, op_norm, sub, vec_norm};
use wdro_core::loss::{asymptotic_rate, loss};
use wdro_core::transport::{exact_w1_small, CanonicalCoupling, DiscreteDist};
use wdro_core::{ActivationKind, LabeledSample, LossKind, Mat, Mlp, NormKind};

use crate::error::Result;
use crate::harness::{
    certify, convergence_instance, gen_data, gen_model, one_dim_oracle, run_convergence, run_pipeline, run_wda, sandwich,
    tightness_instance, CertifyConfig, DataSpec, ExperimentConfig, ModelSpec, EXTENDED_ALPHA_SCHEDULE,
};
use crate::report::pipeline_artifacts;

pub const NORMS: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::LInf];

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {} ({:.2} s)", self.id, self.name, self.detail, self.seconds)
    }
}

pub const CRITERIA: [(usize, &str); 10] = [
    (1, "one-dimensional oracle"),
    (2, "worst-case sandwich"),
    (3, "tightness"),
    (4, "convergence series"),
    (5, "lipschitz property"),
    (6, "asymptotic rates"),
    (7, "attack feasibility"),
    (8, "operator norms"),
    (9, "jacobians"),
    (10, "determinism"),
];

/// Run criterion `id` (1 to 10).
pub fn run_check(id: usize) -> CheckOutcome {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let result = match id {
        1 => check_one_dim(),
        2 => check_sandwich(),
        3 => check_tightness(),
        4 => check_convergence(),
        5 => check_lipschitz(),
        6 => check_rates(),
        7 => check_attack(),
        8 => check_op_norms(),
        9 => check_jacobians(),
        10 => check_determinism(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    if id == 1 && seconds >= 5.0 {
        passed = false;
        detail.push_str("; over the 5 s budget");
    }
    if id == 2 && seconds >= 120.0 {
        passed = false;
        detail.push_str("; over the 2 min budget");
    }
    CheckOutcome { id, name, passed, detail, seconds }
}

pub fn run_all() -> Vec<CheckOutcome> {
    CRITERIA.iter().map(|c| run_check(c.0)).collect()
}

type Check = Result<(bool, String)>;

fn check_one_dim() -> Check {
    let mut worst = 0.0f64;
    let mut beats = true;
    for eps in [0.1, 1.0, 10.0] {
        let v = one_dim_oracle(eps, 1000);
        worst = worst.max((v - (1.5 + eps / 2.0)).abs());
        beats &= v < 1.5 + eps;
    }
    Ok((worst <= 1e-3 && beats, format!("max |oracle - (E + eps/2)| = {worst:.2e}, below E + eps: {beats}")))
}

fn random_relu_net(i: usize, seed: u64) -> Result<Mlp> {
    let spec = ModelSpec {
        input_dim: 1 + i % 3,
        classes: 2 + (i / 3) % 2,
        widths: vec![2 + i % 9],
        activation: ActivationKind::Relu,
        init: (-1.0, 1.0),
        domain: (-1.0, 1.0),
        monotone: false,
    };
    gen_model(&spec, seed)
}

fn net_data(net: &Mlp, count: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    gen_data(
        &DataSpec {
            count,
            input_dim: net.input_dim(),
            classes: net.output_dim(),
            spread: 0.5,
            domain: (-1.0, 1.0),
        },
        seed,
    )
}

fn check_sandwich() -> Check {
    let mut cases = 0;
    let mut failures = Vec::new();
    let mut min_slack = f64::INFINITY;
    for i in 0..50 {
        let net = random_relu_net(i, 100 + i as u64)?;
        let data = net_data(&net, 8, 200 + i as u64)?;
        for r in NORMS {
            let mut cfg = CertifyConfig::new(r);
            cfg.probes = 0;
            let cert = certify(&net, &data, &cfg)?;
            if !cert.exhaustive {
                failures.push(format!("net {i}: inventory not exhaustive"));
                continue;
            }
            for kind in LossKind::ALL {
                for eps in [0.01, 0.1] {
                    let sw = sandwich(&net, &data, &cert, kind, eps, &EXTENDED_ALPHA_SCHEDULE)?;
                    let lower = sw.lower.unwrap_or(f64::NEG_INFINITY);
                    let ok = lower - 1e-6 <= sw.worst_case_loss && sw.worst_case_loss <= sw.upper + 1e-6;
                    min_slack = min_slack.min(sw.worst_case_loss - lower).min(sw.upper - sw.worst_case_loss);
                    if !ok {
                        failures.push(format!("net {i} r={r} {kind:?} eps={eps}"));
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!("{cases} cases, smallest slack {min_slack:.2e}, failures {failures:?}"),
    ))
}

fn check_tightness() -> Check {
    let mut tight_nets = 0;
    let mut tight_cases = 0;
    let mut worst = 0.0f64;
    for i in 0..50 {
        let net = tightness_instance(1 + i % 3, 2 + i % 7, 2 + i % 2, 300 + i as u64)?;
        let mut any = false;
        for r in NORMS {
            let mut cfg = CertifyConfig::new(r);
            cfg.probes = 0;
            let cert = certify(&net, &[], &cfg)?;
            if cert.tightness.as_ref().is_some_and(|t| t.tight) {
                any = true;
                tight_cases += 1;
                worst = worst.max((cert.lower - cert.upper).abs() / cert.upper.max(1.0));
            }
        }
        tight_nets += usize::from(any);
    }
    Ok((
        tight_nets == 50 && worst <= 1e-6,
        format!("{tight_nets}/50 nets tight ({tight_cases} norm cases), max |l - L|/max(1, L) = {worst:.2e}"),
    ))
}

fn check_convergence() -> Check {
    let (net, data) = convergence_instance(2024)?;
    let mut cfg = CertifyConfig::new(NormKind::LInf);
    cfg.probes = 200;
    let pgd = PgdConfig {
        loss: LossKind::DlrMargin,
        epsilon: 0.05,
        norm: NormKind::LInf,
        step: 0.05,
        iters: 10,
    };
    let series = run_convergence(&net, &data, &cfg, &pgd)?;
    let values: Vec<f64> = series.points.iter().map(|p| p.cumulative_l).collect();
    let monotone = values.windows(2).all(|w| w[1] >= w[0]);
    let tail_ok = values.len() >= 4 && values[values.len() - 4..].windows(2).all(|w| w[1] - w[0] < 1e-9);
    let last = series.final_lower();
    let below = last <= series.upper + 1e-9;
    let gain = series.pgd_gain_per_eps;
    let pgd_ok = gain >= last - 1e-6 && gain <= series.upper + 1e-6;
    Ok((
        monotone && tail_ok && below && pgd_ok && series.exhaustive,
        format!(
            "{} masks, final l = {last:.6}, L = {:.6}, PGD gain/eps = {gain:.6}",
            values.len(),
            series.upper
        ),
    ))
}

fn check_lipschitz() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0usize;
    for i in 0..20 {
        let net = random_relu_net(i, 400 + i as u64)?;
        let inv = enumerate_masks(&net, &[], 0, 24, 0)?;
        if !inv.is_exhaustive() {
            return Ok((false, format!("net {i}: inventory not exhaustive")));
        }
        let mut bounds = Vec::new();
        for r in NORMS {
            for s in NORMS {
                bounds.push((r, upper_bound_L(&net, &inv, r, s)?.value));
            }
        }
        let n = net.input_dim();
        let k = net.output_dim();
        for p in 0..10_000 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            // Half the pairs are local, half span the box.
            let x2: Vec<f64> = if p % 2 == 0 {
                x.iter().map(|v| (v + rng.random_range(-0.05..0.05)).clamp(-1.0, 1.0)).collect()
            } else {
                (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let (z, z2) = (net.forward(&x)?, net.forward(&x2)?);
            let label = p % k;
            let d = sub(&x2, &x);
            for kind in LossKind::ALL {
                let dl = (loss(kind, &z2, label)? - loss(kind, &z, label)?).abs();
                for &(r, l) in &bounds {
                    worst = worst.max(dl - l * vec_norm(&d, r));
                }
            }
            pairs += 1;
        }
    }
    Ok((
        worst <= 1e-9,
        format!("{pairs} pairs x 9 norm pairs x 2 losses, max violation {worst:.2e}"),
    ))
}

fn check_rates() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let alpha = 1e6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.random_range(2..6);
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let class = rng.random_range(0..k);
        for kind in LossKind::ALL {
            let moved = add_scaled(&theta, alpha, &v);
            let numeric = (loss(kind, &moved, class)? - loss(kind, &theta, class)?) / alpha;
            worst = worst.max((numeric - asymptotic_rate(kind, &v, class)?).abs());
        }
    }
    Ok((worst <= 1e-3, format!("100 instances x 2 losses, max deviation {worst:.2e}")))
}

/// Smallest radius at which some hidden unit of a one-hidden-layer net
/// changes sign around `x`.
fn cell_radius(net: &Mlp, x: &[f64], r: NormKind) -> Result<f64> {
    let pre = &net.pre_activations(x)?[0];
    let w = &net.layers()[0].weight;
    Ok((0..pre.len())
        .map(|j| pre[j].abs() / vec_norm(w.row(j), r.dual()).max(1e-300))
        .fold(f64::INFINITY, f64::min))
}

fn check_attack() -> Check {
    let mut failures = Vec::new();
    let mut runs = 0;
    for i in 0..12 {
        let act = [ActivationKind::Relu, ActivationKind::Gelu, ActivationKind::Silu][i % 3];
        let spec = ModelSpec {
            input_dim: 2 + i % 2,
            classes: 2 + i % 3,
            widths: vec![6],
            activation: act,
            init: (-1.0, 1.0),
            domain: (-1.0, 1.0),
            monotone: false,
        };
        let net = gen_model(&spec, 700 + i as u64)?;
        let count = 4 + 2 * i;
        let data = net_data(&net, count, 800 + i as u64)?;
        let empirical = DiscreteDist::uniform(&data.iter().map(|s| (s.x.clone(), s.label)).collect::<Vec<_>>())?;
        for r in NORMS {
            for kappa in [1.0, 2.0, 3.0] {
                let eps = 0.1;
                let cfg = AttackConfig { epsilon: eps, kappa, norm: r, step: 0.05, prob: 10, max_iters: 20, seed: 0 };
                let (dist, _) = run_wda(&net, &data, &cfg)?;
                let canonical = dist.canonical_cost(r)?;
                let exact = exact_w1_small(&DiscreteDist::from_triples(dist.atoms())?, &empirical, r)?;
                if canonical > eps + 1e-9 || exact > eps + 1e-9 || dist.max_displacement() > kappa * eps + 1e-9 {
                    failures.push(format!("net {i} r={r} kappa={kappa}: canonical {canonical}, exact {exact}"));
                }
                if kappa == 1.0 && dist.anchor_weight() != 0.0 {
                    failures.push(format!("net {i}: kappa = 1 keeps anchor mass"));
                }
                if kappa == 2.0 && dist.atoms().iter().any(|a| (a.2 - 0.5 / count as f64).abs() > 1e-15) {
                    failures.push(format!("net {i}: kappa = 2 weights are not 1/(2N)"));
                }
                runs += 1;
            }
        }
    }
    // Balls inside one cell: one dual-norm step reaches the linear optimum.
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    let mut worst = 0.0f64;
    let mut single = 0;
    let mut seed = 950;
    while single < 60 {
        seed += 1;
        let k = 2 + single % 3;
        let spec = ModelSpec { input_dim: 2, classes: k, widths: vec![5], ..ModelSpec::toy() };
        let net = gen_model(&spec, seed)?;
        let s = LabeledSample::new((0..2).map(|_| rng.random_range(-0.5..0.5)).collect(), single % k);
        for r in [NormKind::L2, NormKind::LInf] {
            let kappa = 2.0;
            let eps = 0.4 * cell_radius(&net, &s.x, r)? / kappa;
            if eps < 1e-4 {
                continue;
            }
            let cfg = AttackConfig { epsilon: eps, kappa, norm: r, step: 2.0 * kappa * eps, prob: 10, max_iters: 20, seed: 0 };
            let (x, trace) = wda_sample(&net, &s, &cfg)?;
            let j = *trace.rivals.last().expect("at least one iteration");
            let g = net.jacobian(&s.x)?.tr_matvec(&basis_difference(k, j, s.label));
            let z0 = net.forward(&s.x)?;
            let z = net.forward(&x)?;
            let reached = (z[j] - z[s.label]) - (z0[j] - z0[s.label]);
            worst = worst.max((reached - kappa * eps * vec_norm(&g, r.dual())).abs());
            single += 1;
        }
    }
    let ok = failures.is_empty() && worst <= 1e-9;
    Ok((
        ok,
        format!("{runs} attack runs, {single} single-cell instances (max gap {worst:.2e}), failures {failures:?}"),
    ))
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize, r: NormKind) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Push some draws onto faces and vertices of the ball.
        match rng.random_range(0..4) {
            0 => v.iter_mut().for_each(|x| *x = x.signum()),
            1 => {
                let i = rng.random_range(0..n);
                v.iter_mut().enumerate().for_each(|(j, x)| if j != i { *x *= 1e-3 });
            }
            _ => {}
        }
        let norm = vec_norm(&v, r);
        if norm > 1e-9 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn check_op_norms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut worst = f64::NEG_INFINITY;
    let mut mismatches = 0;
    for case in 0..12 {
        let (m, n) = (1 + case % 6, 1 + (case * 5 + 2) % 6);
        let a = Mat::new(m, n, (0..m * n).map(|_| rng.random_range(-2.0..2.0)).collect())?;
        for r in NORMS {
            for s in NORMS {
                let exact = op_norm(&a, r, s)?;
                let mut search = 0.0f64;
                for _ in 0..100_000 {
                    let u = unit_direction(&mut rng, n, r);
                    search = search.max(vec_norm(&a.matvec(&u), s));
                }
                worst = worst.max(search - exact);
            }
        }
    }
    for case in 0..20 {
        let (m, n) = (1 + case % 5, 1 + case % 10);
        let a = Mat::new(m, n, (0..m * n).map(|_| rng.random_range(-2.0..2.0)).collect())?;
        for s in NORMS {
            let mut best = 0.0f64;
            for bits in 0u32..(1u32 << n) {
                let sigma: Vec<f64> = (0..n).map(|j| if bits >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
                best = best.max(vec_norm(&a.matvec(&sigma), s));
            }
            if op_norm(&a, NormKind::LInf, s)? != best {
                mismatches += 1;
            }
        }
    }
    Ok((
        worst <= 1e-6 && mismatches == 0,
        format!("max (search - op_norm) = {worst:.2e}; sign-vertex mismatches {mismatches}/60"),
    ))
}

fn check_jacobians() -> Check {
    let mut worst = 0.0f64;
    let mut checked = [0usize; 3];
    let h = 1e-5;
    for (a, act) in [ActivationKind::Relu, ActivationKind::Gelu, ActivationKind::Silu].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1100 + a as u64);
        let mut seed = 1200 + 1000 * a as u64;
        while checked[a] < 200 {
            seed += 1;
            let n = rng.random_range(1..5);
            let spec = ModelSpec {
                input_dim: n,
                classes: rng.random_range(1..4),
                widths: (0..rng.random_range(1..3)).map(|_| rng.random_range(2..7)).collect(),
                activation: act,
                init: (-1.0, 1.0),
                domain: (-1.0, 1.0),
                monotone: false,
            };
            let net = gen_model(&spec, seed)?;
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if !act.is_smooth() {
                // Off-kink: every probe of the stencil must share the mask.
                let (mask, degenerate) = net.mask_at(&x)?;
                let mut same = !degenerate;
                for i in 0..n {
                    for sign in [-1.0, 1.0] {
                        let mut y = x.clone();
                        y[i] += sign * h;
                        same &= net.mask_at(&y)?.0 == mask;
                    }
                }
                if !same {
                    continue;
                }
            }
            let j = net.jacobian(&x)?;
            for i in 0..n {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += h;
                xm[i] -= h;
                let (fp, fm) = (net.forward(&xp)?, net.forward(&xm)?);
                for c in 0..fp.len() {
                    worst = worst.max((j.get(c, i) - (fp[c] - fm[c]) / (2.0 * h)).abs());
                }
            }
            checked[a] += 1;
        }
    }
    Ok((
        worst <= 1e-4,
        format!("relu/gelu/silu points {checked:?}, max |J - FD| = {worst:.2e}"),
    ))
}

fn check_determinism() -> Check {
    let cfg = ExperimentConfig::toy(10);
    let first = pipeline_artifacts(&run_pipeline(&cfg)?, &cfg)?;
    let second = pipeline_artifacts(&run_pipeline(&cfg)?, &cfg)?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a.contents.as_bytes() != b.contents.as_bytes())
        .map(|(a, _)| a.name)
        .collect();
    let bytes: usize = first.iter().map(|a| a.contents.len()).sum();
    Ok((
        differing.is_empty() && first.len() == second.len(),
        format!("{} files, {bytes} bytes, differing {differing:?}", first.len()),
    ))
}
