//! Generators, the certificate pipeline and the experiments built on it.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use wdro_core::attack::{evaluate, pgd_baseline, wda_sample, AttackConfig, AttackTrace, AdvDistribution, Evaluation, PgdConfig};
use wdro_core::certify::{
    build_worst_case_distribution, check_tightness, enumerate_masks, lower_bound_from_parts, mask_lower_contribution,
    mask_operator_norm, practical_bound_from_parts, sample_lower_contribution, smooth_bounds, upper_bound_from_norms,
    LowerBound, MaskLower, Provenance, Tightness, Witness, WorstCaseDistribution,
};
use wdro_core::loss::loss;
use wdro_core::network::Layer;
use wdro_core::{ActivationKind, BoxDomain, LabeledSample, LossKind, Mat, Mlp, NormKind};

use crate::error::{Error, Result};
use crate::parallel::par_map;

/// Step lengths for the worst-case ray: decades from `1e2` to `1e12`. The
/// realized slope approaches the witness slope like `O(1/alpha)`.
pub const EXTENDED_ALPHA_SCHEDULE: [f64; 11] = [1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10, 1e11, 1e12];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub classes: usize,
    pub widths: Vec<usize>,
    pub activation: ActivationKind,
    /// Weights and biases are drawn uniformly from `[init.0, init.1)`.
    pub init: (f64, f64),
    /// Input box `[domain.0, domain.1]^n`.
    pub domain: (f64, f64),
    /// Take absolute values of every drawn parameter.
    pub monotone: bool,
}

impl ModelSpec {
    /// Two inputs, two classes, one hidden ReLU layer of width 8.
    pub fn toy() -> Self {
        ModelSpec {
            input_dim: 2,
            classes: 2,
            widths: vec![8],
            activation: ActivationKind::Relu,
            init: (-1.0, 1.0),
            domain: (-1.0, 1.0),
            monotone: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.classes == 0 || self.widths.contains(&0) {
            return Err(Error::Usage("model dimensions must be positive".into()));
        }
        if !(self.init.0 < self.init.1) || !(self.domain.0 < self.domain.1) {
            return Err(Error::Usage("ranges need lo < hi".into()));
        }
        Ok(())
    }
}

pub fn gen_model(spec: &ModelSpec, seed: u64) -> Result<Mlp> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.init;
    let mut draw = |count: usize| -> Vec<f64> {
        (0..count)
            .map(|_| {
                let v = rng.random_range(lo..hi);
                if spec.monotone { v.abs() } else { v }
            })
            .collect()
    };
    let mut layers = Vec::new();
    let mut prev = spec.input_dim;
    for &w in spec.widths.iter().chain(std::iter::once(&spec.classes)) {
        let weight = Mat::new(w, prev, draw(w * prev))?;
        layers.push(Layer::new(weight, draw(w))?);
        prev = w;
    }
    let domain = BoxDomain::uniform(spec.input_dim, spec.domain.0, spec.domain.1)?;
    Ok(Mlp::new(layers, spec.activation, domain)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub count: usize,
    pub input_dim: usize,
    pub classes: usize,
    /// Standard deviation of each cluster.
    pub spread: f64,
    pub domain: (f64, f64),
}

impl DataSpec {
    pub fn toy() -> Self {
        DataSpec {
            count: 16,
            input_dim: 2,
            classes: 2,
            spread: 0.25,
            domain: (-1.0, 1.0),
        }
    }
}

/// Gaussian clusters, one per class, centred in the middle 60% of the box
/// and clipped to it. Labels cycle so classes are balanced.
pub fn gen_data(spec: &DataSpec, seed: u64) -> Result<Vec<LabeledSample>> {
    if spec.count == 0 || spec.input_dim == 0 || spec.classes == 0 {
        return Err(Error::Usage("dataset dimensions must be positive".into()));
    }
    if !(spec.spread >= 0.0) || !(spec.domain.0 < spec.domain.1) {
        return Err(Error::Usage("need spread >= 0 and lo < hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.domain;
    let width = hi - lo;
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.input_dim).map(|_| lo + width * rng.random_range(0.2..0.8)).collect())
        .collect();
    let noise = Normal::new(0.0, spec.spread).map_err(|e| Error::Usage(e.to_string()))?;
    Ok((0..spec.count)
        .map(|i| {
            let label = i % spec.classes;
            let x = means[label]
                .iter()
                .map(|m| (m + noise.sample(&mut rng)).clamp(lo, hi))
                .collect();
            LabeledSample::new(x, label)
        })
        .collect())
}

/// Nonnegative hidden layer with an antisymmetric head `(w, -w)` (padded
/// with zero rows up to `classes`). Every class pair attains its increment
/// along the all-ones side of the input, so the two slope bounds coincide.
pub fn tightness_instance(input_dim: usize, width: usize, classes: usize, seed: u64) -> Result<Mlp> {
    if classes < 2 {
        return Err(Error::Usage("need at least two classes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w1: Vec<f64> = (0..width * input_dim).map(|_| rng.random_range(0.0..1.0)).collect();
    let b1: Vec<f64> = (0..width).map(|_| rng.random_range(0.0..0.5)).collect();
    let head: Vec<f64> = (0..width).map(|_| rng.random_range(0.0..1.0)).collect();
    let mut w2 = head.clone();
    w2.extend(head.iter().map(|v| -v));
    w2.resize(classes * width, 0.0);
    let layers = vec![
        Layer::new(Mat::new(width, input_dim, w1)?, b1)?,
        Layer::new(Mat::new(classes, width, w2)?, vec![0.0; classes])?,
    ];
    Ok(Mlp::new(layers, ActivationKind::Relu, BoxDomain::uniform(input_dim, -1.0, 1.0)?)?)
}

/// The convergence instance: the toy shape with positive first-layer
/// weights and a one-sided head, data near the upper corner of the box
/// where every unit is active.
pub fn convergence_instance(seed: u64) -> Result<(Mlp, Vec<LabeledSample>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, width) = (2, 8);
    let w1: Vec<f64> = (0..width * n).map(|_| rng.random_range(0.5..1.0)).collect();
    let b1: Vec<f64> = (0..width).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut w2: Vec<f64> = (0..width).map(|_| rng.random_range(0.0..1.0)).collect();
    w2.resize(2 * width, 0.0);
    let net = Mlp::new(
        vec![
            Layer::new(Mat::new(width, n, w1)?, b1)?,
            Layer::new(Mat::new(2, width, w2)?, vec![0.0; 2])?,
        ],
        ActivationKind::Relu,
        BoxDomain::uniform(n, -1.0, 1.0)?,
    )?;
    let data = (0..16)
        .map(|i| LabeledSample::new((0..n).map(|_| rng.random_range(0.7..0.9)).collect(), i % 2))
        .collect();
    Ok((net, data))
}

/// The piecewise loss of the one-dimensional example: `|x|` on `[-1, 1]`,
/// `|x|/2 + 1/2` outside.
pub fn one_dim_loss(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 { a } else { 0.5 * a + 0.5 }
}

/// Brute-force worst-case expected loss around the single atom `x = 2`
/// over two-atom distributions `(1 - eta) delta_2 + eta delta_t` with
/// `eta |t - 2| <= epsilon`. `t` runs over `grid` log-spaced magnitudes in
/// `[1e-4, 1e4]` of each sign (plus zero); `eta` over `grid` evenly spaced
/// fractions of its largest admissible value.
pub fn one_dim_oracle(epsilon: f64, grid: usize) -> f64 {
    let base = one_dim_loss(2.0);
    if !(epsilon > 0.0) || grid == 0 {
        return base;
    }
    let mut ts = vec![0.0];
    for i in 0..grid {
        let e = -4.0 + 8.0 * i as f64 / (grid - 1).max(1) as f64;
        let t = 10f64.powf(e);
        ts.push(t);
        ts.push(-t);
    }
    let mut best = base;
    for t in ts {
        let d = (t - 2.0).abs();
        let eta_max = if d > 0.0 { (epsilon / d).min(1.0) } else { 1.0 };
        let gain = one_dim_loss(t) - base;
        for j in 1..=grid {
            let eta = eta_max * j as f64 / grid as f64;
            best = best.max(base + eta * gain);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyConfig {
    pub r: NormKind,
    pub s: NormKind,
    pub probes: usize,
    pub exhaustive_cap: usize,
    pub seed: u64,
    /// Smooth networks only: random restarts and ascent steps.
    pub restarts: usize,
    pub steps: usize,
}

impl CertifyConfig {
    pub fn new(r: NormKind) -> Self {
        CertifyConfig {
            r,
            s: r.dual(),
            probes: 1000,
            exhaustive_cap: 16,
            seed: 0,
            restarts: 8,
            steps: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s != self.r.dual() {
            return Err(Error::Usage(format!("s must be dual to r (r = {}, so s = {})", self.r, self.r.dual())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskRecord {
    pub id: usize,
    pub code: String,
    pub provenance: Provenance,
    pub op_norm: f64,
    pub lower: MaskLower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub r: NormKind,
    pub s: NormKind,
    pub activation: ActivationKind,
    pub exhaustive: bool,
    /// `L`: certified for exhaustive inventories, an estimate otherwise.
    pub upper: f64,
    /// `l` (or its ascent estimate for smooth nets); `-inf` when no class
    /// pair has a direction.
    pub lower: f64,
    pub lower_witness: Option<Witness>,
    /// `l_N`; `None` for smooth nets or when every sample is degenerate.
    pub practical: Option<LowerBound>,
    pub tightness: Option<Tightness>,
    pub masks: Vec<MaskRecord>,
    pub degenerate_samples: usize,
}

impl Certificate {
    pub fn practical_value(&self) -> Option<f64> {
        self.practical.as_ref().map(|p| p.value)
    }
}

fn check_data(net: &Mlp, data: &[LabeledSample]) -> Result<()> {
    for (i, s) in data.iter().enumerate() {
        if s.x.len() != net.input_dim() {
            return Err(Error::Usage(format!(
                "sample {i} has {} features, the model expects {}",
                s.x.len(),
                net.input_dim()
            )));
        }
        if s.label >= net.output_dim() {
            return Err(Error::Usage(format!("sample {i} has label {} but the model has {} classes", s.label, net.output_dim())));
        }
    }
    Ok(())
}

pub fn certify(net: &Mlp, data: &[LabeledSample], cfg: &CertifyConfig) -> Result<Certificate> {
    cfg.validate()?;
    check_data(net, data)?;
    let (r, s) = (cfg.r, cfg.s);
    if net.activation().is_smooth() {
        let est = smooth_bounds(net, data, r, s, cfg.restarts, cfg.steps, cfg.seed)?;
        return Ok(Certificate {
            r,
            s,
            activation: net.activation(),
            exhaustive: false,
            upper: est.upper_estimate,
            lower: est.lower_estimate,
            lower_witness: None,
            practical: None,
            tightness: None,
            masks: Vec::new(),
            degenerate_samples: 0,
        });
    }
    let inv = enumerate_masks(net, data, cfg.probes, cfg.exhaustive_cap, cfg.seed)?;
    if inv.is_empty() {
        return Err(wdro_core::Error::EmptyInventory.into());
    }
    if !inv.is_exhaustive() {
        warn!("mask inventory is not exhaustive; the upper bound is an estimate");
    }
    let entries = inv.entries();
    let per_mask = par_map(entries, |_, e| -> Result<(f64, MaskLower)> {
        Ok((mask_operator_norm(net, &e.mask, r, s)?, mask_lower_contribution(net, &e.mask, r)?))
    })?;
    let upper = upper_bound_from_norms(per_mask.iter().map(|p| p.0).collect(), s, inv.is_exhaustive())?;
    let lower = lower_bound_from_parts(per_mask.iter().map(|p| p.1.clone()).collect());
    let tightness = check_tightness(net, &inv, r, s, &upper, &lower)?;

    let parts = par_map(data, |i, sample| sample_lower_contribution(net, sample, i, r))?;
    let degenerate_samples = parts.iter().filter(|p| p.is_none()).count();
    if degenerate_samples > 0 {
        warn!("{degenerate_samples} samples sit on a kink and were skipped");
    }
    let practical = match practical_bound_from_parts(parts) {
        Ok(p) => Some(p),
        Err(wdro_core::Error::AllDegenerate | wdro_core::Error::EmptyDataset) => None,
        Err(e) => return Err(e.into()),
    };
    let masks = entries
        .iter()
        .zip(per_mask)
        .enumerate()
        .map(|(id, (e, (op_norm, lower)))| MaskRecord {
            id,
            code: e.mask.to_code(),
            provenance: e.provenance,
            op_norm,
            lower,
        })
        .collect();
    Ok(Certificate {
        r,
        s,
        activation: net.activation(),
        exhaustive: inv.is_exhaustive(),
        upper: upper.value,
        lower: lower.value,
        lower_witness: lower.witness,
        practical,
        tightness: Some(tightness),
        masks,
        degenerate_samples,
    })
}

pub fn mean_loss(net: &Mlp, data: &[LabeledSample], kind: LossKind) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        total += loss(kind, &net.forward(&s.x)?, s.label)?;
    }
    Ok(total / data.len() as f64)
}

/// Expected losses around the data at budget `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    pub kind: LossKind,
    pub epsilon: f64,
    pub clean_loss: f64,
    /// `E_PN + l_N eps`; `None` when `l_N` is unavailable.
    pub lower: Option<f64>,
    pub upper: f64,
    pub worst_case_loss: f64,
    /// `None` when no sample has an ascent ray; the data itself is then
    /// the witness distribution.
    pub worst_case: Option<WorstCaseDistribution>,
}

/// Build the worst-case distribution from the practical witness and place
/// its expected loss between the two slope bounds.
pub fn sandwich(
    net: &Mlp,
    data: &[LabeledSample],
    cert: &Certificate,
    kind: LossKind,
    epsilon: f64,
    schedule: &[f64],
) -> Result<Sandwich> {
    let clean_loss = mean_loss(net, data, kind)?;
    let ln = cert.practical_value().filter(|v| v.is_finite());
    let witness = cert
        .practical
        .as_ref()
        .and_then(|p| p.witness.as_ref())
        .filter(|w| w.value > 0.0);
    let worst_case = match witness {
        Some(w) => Some(build_worst_case_distribution(net, data, kind, cert.r, epsilon, w, schedule)?),
        None => None,
    };
    let worst_case_loss = match &worst_case {
        Some(wc) => wc.expected_loss(net, kind)?,
        None => clean_loss,
    };
    Ok(Sandwich {
        kind,
        epsilon,
        clean_loss,
        lower: ln.map(|l| clean_loss + l * epsilon),
        upper: clean_loss + cert.upper * epsilon,
        worst_case_loss,
        worst_case,
    })
}

/// WDA over the data on the rayon pool.
pub fn run_wda(net: &Mlp, data: &[LabeledSample], cfg: &AttackConfig) -> Result<(AdvDistribution, Vec<AttackTrace>)> {
    cfg.validate()?;
    check_data(net, data)?;
    let results = par_map(data, |_, s| wda_sample(net, s, cfg))?;
    Ok(wdro_core::attack::assemble(data, results, cfg.kappa, cfg.epsilon, cfg.norm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub masks: usize,
    pub code: String,
    pub provenance: Provenance,
    pub mask_value: f64,
    pub cumulative_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSeries {
    pub points: Vec<ConvergencePoint>,
    pub upper: f64,
    pub exhaustive: bool,
    pub pgd_epsilon: f64,
    /// `(E[loss] under PGD - E_PN[loss]) / eps`.
    pub pgd_gain_per_eps: f64,
}

impl ConvergenceSeries {
    pub fn final_lower(&self) -> f64 {
        self.points.last().map_or(f64::NEG_INFINITY, |p| p.cumulative_l)
    }
}

/// Cumulative `l` as the inventory grows (data masks, then probes, then
/// the exhaustive sweep), with `L` and the PGD slope for reference.
pub fn run_convergence(net: &Mlp, data: &[LabeledSample], cfg: &CertifyConfig, pgd: &PgdConfig) -> Result<ConvergenceSeries> {
    if !(pgd.epsilon > 0.0) {
        return Err(Error::Usage("the PGD budget must be positive".into()));
    }
    let cert = certify(net, data, cfg)?;
    if cert.masks.is_empty() {
        return Err(wdro_core::Error::WrongActivation.into());
    }
    let mut running = f64::NEG_INFINITY;
    let points = cert
        .masks
        .iter()
        .map(|m| {
            running = running.max(m.lower.value);
            ConvergencePoint {
                masks: m.id + 1,
                code: m.code.clone(),
                provenance: m.provenance,
                mask_value: m.lower.value,
                cumulative_l: running,
            }
        })
        .collect();
    let results = par_map(data, |_, s| wdro_core::attack::pgd_sample(net, s, pgd))?;
    let (dist, _) = wdro_core::attack::assemble(data, results, 1.0, pgd.epsilon, pgd.norm);
    let attacked = evaluate(net, &dist, pgd.loss)?.expected_loss;
    let clean = mean_loss(net, data, pgd.loss)?;
    Ok(ConvergenceSeries {
        points,
        upper: cert.upper,
        exhaustive: cert.exhaustive,
        pgd_epsilon: pgd.epsilon,
        pgd_gain_per_eps: (attacked - clean) / pgd.epsilon,
    })
}

/// Sequential PGD, kept for callers that do not want the pool.
pub fn run_pgd(net: &Mlp, data: &[LabeledSample], cfg: &PgdConfig) -> Result<(AdvDistribution, Vec<AttackTrace>)> {
    check_data(net, data)?;
    Ok(pgd_baseline(net, data, cfg)?)
}

/// Everything one seeded end-to-end run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelSpec,
    pub data: DataSpec,
    pub certify: CertifyConfig,
    pub loss: LossKind,
    pub epsilon: f64,
    pub kappa: f64,
    pub step: f64,
    pub prob: usize,
    pub max_iters: usize,
    pub pgd_iters: usize,
}

impl ExperimentConfig {
    pub fn toy(seed: u64) -> Self {
        let mut certify = CertifyConfig::new(NormKind::LInf);
        certify.probes = 200;
        certify.seed = seed;
        ExperimentConfig {
            seed,
            model: ModelSpec::toy(),
            data: DataSpec::toy(),
            certify,
            loss: LossKind::CrossEntropy,
            epsilon: 0.05,
            kappa: 2.0,
            step: 0.01,
            prob: 10,
            max_iters: 20,
            pgd_iters: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.certify.validate()?;
        if self.model.input_dim != self.data.input_dim || self.model.classes != self.data.classes {
            return Err(Error::Usage("model and dataset shapes disagree".into()));
        }
        self.attack().validate()?;
        Ok(())
    }

    pub fn attack(&self) -> AttackConfig {
        AttackConfig {
            epsilon: self.epsilon,
            kappa: self.kappa,
            norm: self.certify.r,
            step: self.step,
            prob: self.prob,
            max_iters: self.max_iters,
            seed: self.seed,
        }
    }

    pub fn pgd(&self) -> PgdConfig {
        PgdConfig {
            loss: self.loss,
            epsilon: self.epsilon,
            norm: self.certify.r,
            step: self.step,
            iters: self.pgd_iters,
        }
    }
}

/// One named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: &'static str,
    pub contents: String,
}

/// Outputs of a pipeline run, before anything touches the disk.
pub struct PipelineRun {
    pub net: Mlp,
    pub data: Vec<LabeledSample>,
    pub certificate: Certificate,
    pub sandwich: Sandwich,
    pub adv: AdvDistribution,
    pub traces: Vec<AttackTrace>,
    pub evaluation: Evaluation,
    pub convergence: ConvergenceSeries,
}

/// Generate, certify, attack, evaluate and run the convergence sweep.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineRun> {
    cfg.validate()?;
    let net = gen_model(&cfg.model, cfg.seed)?;
    let data = gen_data(&cfg.data, cfg.seed.wrapping_add(1))?;
    let certificate = certify(&net, &data, &cfg.certify)?;
    let sandwich = sandwich(&net, &data, &certificate, cfg.loss, cfg.epsilon, &EXTENDED_ALPHA_SCHEDULE)?;
    let (adv, traces) = run_wda(&net, &data, &cfg.attack())?;
    let evaluation = evaluate(&net, &adv, cfg.loss)?;
    let convergence = run_convergence(&net, &data, &cfg.certify, &cfg.pgd())?;
    Ok(PipelineRun {
        net,
        data,
        certificate,
        sandwich,
        adv,
        traces,
        evaluation,
        convergence,
    })
}
