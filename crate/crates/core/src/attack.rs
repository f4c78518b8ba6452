//! Distributional attack with a `kappa`-mixture output, and a PGD baseline.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{add_scaled, basis_difference, check_finite, dual_norm_maximizer, project_ball, vec_norm, NormKind};
use crate::loss::{loss, loss_logit_gradient, predict, LossKind};
use crate::network::{LabeledSample, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub epsilon: f64,
    pub kappa: f64,
    pub norm: NormKind,
    /// Constant step length `alpha`.
    pub step: f64,
    /// Iterations that probe every rival class before freezing the choice.
    pub prob: usize,
    pub max_iters: usize,
    /// Recorded for provenance; the attack itself is deterministic.
    pub seed: u64,
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if !(self.kappa >= 1.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidConfig("kappa must be at least 1"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidConfig("step must be positive"));
        }
        if self.prob == 0 || self.prob > self.max_iters {
            return Err(Error::InvalidConfig("need 0 < prob <= maxiter"));
        }
        Ok(())
    }

    /// Per-point radius `kappa * epsilon`.
    pub fn radius(&self) -> f64 {
        self.kappa * self.epsilon
    }
}

/// One adversarial atom and the datum it was moved from.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvPair {
    pub anchor_index: usize,
    pub anchor: LabeledSample,
    pub adv: Vec<f64>,
}

/// `(1 - 1/kappa)/N` on every anchor plus `(1/kappa)/N` on every
/// adversarial point; labels never change.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvDistribution {
    pub pairs: Vec<AdvPair>,
    pub kappa: f64,
    pub epsilon: f64,
    pub norm: NormKind,
}

impl AdvDistribution {
    pub fn anchor_weight(&self) -> f64 {
        (1.0 - 1.0 / self.kappa) / self.pairs.len() as f64
    }

    pub fn adv_weight(&self) -> f64 {
        (1.0 / self.kappa) / self.pairs.len() as f64
    }

    /// `(point, label, weight)` atoms: anchors first, then adversarial points.
    pub fn atoms(&self) -> Vec<(Vec<f64>, usize, f64)> {
        let wa = self.anchor_weight();
        let wv = self.adv_weight();
        let mut out: Vec<(Vec<f64>, usize, f64)> = self
            .pairs
            .iter()
            .map(|p| (p.anchor.x.clone(), p.anchor.label, wa))
            .collect();
        out.extend(self.pairs.iter().map(|p| (p.adv.clone(), p.anchor.label, wv)));
        out
    }

    /// Largest `||adv - anchor||_r` over the pairs.
    pub fn max_displacement(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| vec_norm(&crate::linalg::sub(&p.adv, &p.anchor.x), self.norm))
            .fold(0.0, f64::max)
    }
}

/// Per-sample diagnostics of one attack run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AttackTrace {
    pub iterates: Vec<Vec<f64>>,
    /// Rival chosen at each iteration.
    pub rivals: Vec<usize>,
    /// Iterations whose step was skipped for a zero gradient.
    pub stalls: usize,
    /// Iterations evaluated at a ReLU kink.
    pub kink_hits: usize,
    pub final_loss: f64,
    /// `max_{j != k} theta_j - theta_k` at the final point.
    pub final_margin: f64,
}

fn check_sample(net: &Mlp, sample: &LabeledSample) -> Result<()> {
    check_finite(&sample.x)?;
    if sample.x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            found: sample.x.len(),
        });
    }
    if net.output_dim() < 2 {
        return Err(Error::InvalidConfig("attacks need at least two classes"));
    }
    if sample.label >= net.output_dim() {
        return Err(Error::ClassOutOfRange {
            class: sample.label,
            classes: net.output_dim(),
        });
    }
    Ok(())
}

fn margin(logits: &[f64], k: usize) -> Result<f64> {
    loss(LossKind::DlrMargin, logits, k)
}

/// Step `x + step * M_r(g)` projected onto the ball; `None` stalls.
fn ascent_step(x: &[f64], g: &[f64], step: f64, anchor: &[f64], radius: f64, r: NormKind) -> Result<Option<Vec<f64>>> {
    match dual_norm_maximizer(g, r) {
        Ok(u) => Ok(Some(project_ball(&add_scaled(x, step, &u), anchor, radius, r))),
        Err(Error::ZeroGradient) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Attack one datum. Starts at the anchor; while `iter < prob` every rival
/// `j` proposes a dual-norm step on `theta_j - theta_k` and the proposal
/// with the largest `theta_j` wins; afterwards only the last winner is
/// followed. Returns the final point.
pub fn wda_sample(net: &Mlp, sample: &LabeledSample, cfg: &AttackConfig) -> Result<(Vec<f64>, AttackTrace)> {
    cfg.validate()?;
    check_sample(net, sample)?;
    let k_count = net.output_dim();
    let k = sample.label;
    let radius = cfg.radius();
    let anchor = &sample.x;
    let mut x = anchor.clone();
    let mut trace = AttackTrace::default();
    let mut frozen = k;
    for iter in 0..cfg.max_iters {
        let (jac, kink) = net.jacobian_resolving_kinks(&x)?;
        if kink {
            trace.kink_hits += 1;
        }
        let rivals: Vec<usize> = if iter < cfg.prob {
            (0..k_count).filter(|&j| j != k).collect()
        } else {
            alloc::vec![frozen]
        };
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        let mut stalled = 0;
        for &j in &rivals {
            let g = jac.tr_matvec(&basis_difference(k_count, j, k));
            let phi = match ascent_step(&x, &g, cfg.step, anchor, radius, cfg.norm)? {
                Some(p) => p,
                None => {
                    stalled += 1;
                    x.clone()
                }
            };
            let score = net.forward(&phi)?[j];
            if best.as_ref().is_none_or(|b| score > b.2) {
                best = Some((j, phi, score));
            }
        }
        if stalled == rivals.len() {
            trace.stalls += 1;
        }
        let (j_star, phi, _) = best.expect("at least one rival");
        frozen = j_star;
        x = phi;
        trace.rivals.push(j_star);
        trace.iterates.push(x.clone());
    }
    let logits = net.forward(&x)?;
    trace.final_loss = loss(LossKind::CrossEntropy, &logits, k)?;
    trace.final_margin = margin(&logits, k)?;
    Ok((x, trace))
}

/// Attack every datum and assemble the `kappa`-mixture.
pub fn wda(net: &Mlp, data: &[LabeledSample], cfg: &AttackConfig) -> Result<(AdvDistribution, Vec<AttackTrace>)> {
    cfg.validate()?;
    let results = data
        .iter()
        .map(|s| wda_sample(net, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(data, results, cfg.kappa, cfg.epsilon, cfg.norm))
}

/// Build a distribution from per-sample results given in data order.
pub fn assemble(
    data: &[LabeledSample],
    results: Vec<(Vec<f64>, AttackTrace)>,
    kappa: f64,
    epsilon: f64,
    norm: NormKind,
) -> (AdvDistribution, Vec<AttackTrace>) {
    let mut pairs = Vec::with_capacity(data.len());
    let mut traces = Vec::with_capacity(data.len());
    for (i, (s, (adv, trace))) in data.iter().zip(results).enumerate() {
        pairs.push(AdvPair {
            anchor_index: i,
            anchor: s.clone(),
            adv,
        });
        traces.push(trace);
    }
    (
        AdvDistribution {
            pairs,
            kappa,
            epsilon,
            norm,
        },
        traces,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdConfig {
    pub loss: LossKind,
    pub epsilon: f64,
    pub norm: NormKind,
    pub step: f64,
    pub iters: usize,
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig("epsilon must be nonnegative"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidConfig("step must be positive"));
        }
        Ok(())
    }
}

/// Projected dual-norm ascent on the loss from the anchor. Returns the
/// iterate with the largest loss, the anchor included.
pub fn pgd_sample(net: &Mlp, sample: &LabeledSample, cfg: &PgdConfig) -> Result<(Vec<f64>, AttackTrace)> {
    cfg.validate()?;
    check_sample(net, sample)?;
    let k = sample.label;
    let anchor = &sample.x;
    let mut x = anchor.clone();
    let mut best_x = x.clone();
    let mut best = loss(cfg.loss, &net.forward(&x)?, k)?;
    let mut trace = AttackTrace::default();
    for _ in 0..cfg.iters {
        let (jac, kink) = net.jacobian_resolving_kinks(&x)?;
        if kink {
            trace.kink_hits += 1;
        }
        let dl = loss_logit_gradient(cfg.loss, &net.forward(&x)?, k)?;
        let g = jac.tr_matvec(&dl);
        match ascent_step(&x, &g, cfg.step, anchor, cfg.epsilon, cfg.norm)? {
            Some(p) => x = p,
            None => trace.stalls += 1,
        }
        let value = loss(cfg.loss, &net.forward(&x)?, k)?;
        if value > best {
            best = value;
            best_x = x.clone();
        }
        trace.iterates.push(x.clone());
    }
    let logits = net.forward(&best_x)?;
    trace.final_loss = best;
    trace.final_margin = margin(&logits, k)?;
    Ok((best_x, trace))
}

/// PGD on every datum; the result is a `kappa = 1` distribution.
pub fn pgd_baseline(net: &Mlp, data: &[LabeledSample], cfg: &PgdConfig) -> Result<(AdvDistribution, Vec<AttackTrace>)> {
    let results = data
        .iter()
        .map(|s| pgd_sample(net, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(data, results, 1.0, cfg.epsilon, cfg.norm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub expected_loss: f64,
    /// Accuracy under the mixture weights `(1 - 1/kappa)` and `1/kappa`.
    pub weighted_accuracy: f64,
    pub clean_accuracy: f64,
    pub adv_accuracy: f64,
}

pub fn evaluate(net: &Mlp, dist: &AdvDistribution, kind: LossKind) -> Result<Evaluation> {
    if dist.pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = dist.pairs.len() as f64;
    let mut clean = 0usize;
    let mut adv = 0usize;
    let mut clean_loss = 0.0;
    let mut adv_loss = 0.0;
    for p in &dist.pairs {
        let k = p.anchor.label;
        let zc = net.forward(&p.anchor.x)?;
        let za = net.forward(&p.adv)?;
        clean += usize::from(predict(&zc) == k);
        adv += usize::from(predict(&za) == k);
        clean_loss += loss(kind, &zc, k)?;
        adv_loss += loss(kind, &za, k)?;
    }
    let wa = 1.0 - 1.0 / dist.kappa;
    let wv = 1.0 / dist.kappa;
    let clean_accuracy = clean as f64 / n;
    let adv_accuracy = adv as f64 / n;
    Ok(Evaluation {
        expected_loss: (wa * clean_loss + wv * adv_loss) / n,
        weighted_accuracy: wa * clean_accuracy + wv * adv_accuracy,
        clean_accuracy,
        adv_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::network::{ActivationKind, BoxDomain, Layer};

    fn linear() -> Mlp {
        let w = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.5]]).unwrap();
        Mlp::new(
            vec![Layer::new(w, vec![0.0; 3]).unwrap()],
            ActivationKind::Relu,
            BoxDomain::uniform(2, -1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    fn cfg(kappa: f64, norm: NormKind) -> AttackConfig {
        AttackConfig {
            epsilon: 0.1,
            kappa,
            norm,
            step: 1.0,
            prob: 2,
            max_iters: 4,
            seed: 0,
        }
    }

    use alloc::vec;

    #[test]
    fn config_validation() {
        let mut c = cfg(1.0, NormKind::L2);
        assert!(c.validate().is_ok());
        c.prob = 5;
        assert!(c.validate().is_err());
        c.prob = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(0.5, NormKind::L2);
        assert!(c.validate().is_err());
        c.kappa = 1.0;
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mixture_weights() {
        let net = linear();
        let data = vec![LabeledSample::new(vec![0.2, 0.1], 0), LabeledSample::new(vec![0.0, 0.3], 1)];
        let (d1, _) = wda(&net, &data, &cfg(1.0, NormKind::L2)).unwrap();
        assert_eq!(d1.anchor_weight(), 0.0);
        let (d2, _) = wda(&net, &data, &cfg(2.0, NormKind::L2)).unwrap();
        assert_eq!(d2.anchor_weight(), 0.25);
        assert_eq!(d2.adv_weight(), 0.25);
        let total: f64 = d2.atoms().iter().map(|a| a.2).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn linear_objective_reaches_ball_optimum() {
        let net = linear();
        let s = LabeledSample::new(vec![0.2, 0.1], 0);
        for norm in [NormKind::L2, NormKind::LInf] {
            let c = cfg(2.0, norm);
            let (adv, trace) = wda_sample(&net, &s, &c).unwrap();
            let j = *trace.rivals.last().unwrap();
            let g = net.jacobian(&s.x).unwrap().tr_matvec(&basis_difference(3, j, 0));
            let gain = crate::linalg::dot(&g, &crate::linalg::sub(&adv, &s.x));
            let optimum = c.radius() * vec_norm(&g, norm.dual());
            assert!((gain - optimum).abs() < 1e-12, "{norm}: {gain} vs {optimum}");
            assert!(trace.rivals[c.prob..].iter().all(|&r| r == trace.rivals[c.prob - 1]));
        }
    }

    #[test]
    fn zero_budget_pgd_is_identity() {
        let net = linear();
        let data = vec![LabeledSample::new(vec![0.2, 0.1], 0)];
        let pc = PgdConfig {
            loss: LossKind::CrossEntropy,
            epsilon: 0.0,
            norm: NormKind::LInf,
            step: 0.1,
            iters: 5,
        };
        let (d, _) = pgd_baseline(&net, &data, &pc).unwrap();
        assert_eq!(d.pairs[0].adv, data[0].x);
        let e = evaluate(&net, &d, LossKind::CrossEntropy).unwrap();
        assert_eq!(e.weighted_accuracy, e.clean_accuracy);
    }

    #[test]
    fn kappa_two_accuracy_is_the_mean() {
        let net = linear();
        let data = vec![LabeledSample::new(vec![0.2, 0.1], 0), LabeledSample::new(vec![0.05, 0.0], 0)];
        let mut c = cfg(2.0, NormKind::LInf);
        c.epsilon = 0.2;
        let (d, _) = wda(&net, &data, &c).unwrap();
        let e = evaluate(&net, &d, LossKind::CrossEntropy).unwrap();
        assert!((e.weighted_accuracy - 0.5 * (e.clean_accuracy + e.adv_accuracy)).abs() < 1e-15);
    }
}
