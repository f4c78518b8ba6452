//! Slopes of the worst-case loss in the transport budget.
//!
//! For a ReLU network the worst-case expected loss over a type-1
//! Wasserstein ball of radius `eps` satisfies
//! `E[loss] + l_N eps <= E[loss] + l eps <= sup <= E[loss] + L eps`,
//! where `L` bounds the loss slope through the cell Jacobians and `l`, `l_N`
//! follow rays that stay inside one cell forever.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cells::{build_cell, cell_feasible, cell_interior_point, max_linear_over_cone_ball};
use crate::error::{Error, Result};
use crate::linalg::{
    add_scaled, basis_difference, dual_norm_maximizer, op_norm, vec_norm, Mat, NormKind,
};
use crate::loss::{loss, sensitivity_factor, LossKind};
use crate::network::{LabeledSample, Mask, Mlp};

/// Hidden-unit count above which exhaustive enumeration is refused.
pub const EXHAUSTIVE_HARD_CAP: usize = 24;

/// How a mask entered the inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Dataset,
    RandomProbe,
    Exhaustive,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Dataset => "dataset",
            Provenance::RandomProbe => "probe",
            Provenance::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryEntry {
    pub mask: Mask,
    pub provenance: Provenance,
}

/// Duplicate-free, insertion-ordered set of reachable masks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaskInventory {
    entries: Vec<InventoryEntry>,
    seen: BTreeSet<Mask>,
    exhaustive: bool,
}

impl MaskInventory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `mask` unless already present; returns whether it was new.
    pub fn insert(&mut self, mask: Mask, provenance: Provenance) -> bool {
        if self.seen.contains(&mask) {
            return false;
        }
        self.seen.insert(mask.clone());
        self.entries.push(InventoryEntry { mask, provenance });
        true
    }

    pub fn entries(&self) -> &[InventoryEntry] {
        &self.entries
    }

    pub fn masks(&self) -> impl Iterator<Item = &Mask> {
        self.entries.iter().map(|e| &e.mask)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, mask: &Mask) -> bool {
        self.seen.contains(mask)
    }

    /// True when every feasible mask of the domain is present.
    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn set_exhaustive(&mut self, exhaustive: bool) {
        self.exhaustive = exhaustive;
    }

    /// The first `n` entries, as a (non-exhaustive) inventory.
    pub fn prefix(&self, n: usize) -> MaskInventory {
        let mut inv = MaskInventory::new();
        for e in self.entries.iter().take(n) {
            inv.insert(e.mask.clone(), e.provenance);
        }
        inv.exhaustive = self.exhaustive && n >= self.entries.len();
        inv
    }
}

fn insert_if_feasible(net: &Mlp, inv: &mut MaskInventory, mask: Mask, provenance: Provenance) -> Result<()> {
    if inv.contains(&mask) {
        return Ok(());
    }
    let cell = build_cell(net, &mask)?;
    if cell_feasible(&cell, net.domain()) {
        inv.insert(mask, provenance);
    }
    Ok(())
}

/// Collect masks reached by the data, by `probes` uniform points of the
/// domain box, and (when the network has at most `exhaustive_cap` hidden
/// units) by every feasible activation pattern.
pub fn enumerate_masks(
    net: &Mlp,
    data: &[LabeledSample],
    probes: usize,
    exhaustive_cap: usize,
    seed: u64,
) -> Result<MaskInventory> {
    if net.activation().is_smooth() {
        return Err(Error::WrongActivation);
    }
    let mut inv = MaskInventory::new();
    for s in data {
        let (mask, degenerate) = net.mask_at(&s.x)?;
        if !degenerate {
            insert_if_feasible(net, &mut inv, mask, Provenance::Dataset)?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = net.input_dim();
    let dom = net.domain();
    for _ in 0..probes {
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let x = dom.from_unit(&t);
        let (mask, degenerate) = net.mask_at(&x)?;
        if !degenerate {
            insert_if_feasible(net, &mut inv, mask, Provenance::RandomProbe)?;
        }
    }
    let units = net.hidden_units();
    if units <= exhaustive_cap.min(EXHAUSTIVE_HARD_CAP) {
        let widths = net.hidden_widths();
        for bits in 0..(1u64 << units) {
            insert_if_feasible(net, &mut inv, Mask::from_bits(&widths, bits), Provenance::Exhaustive)?;
        }
        inv.exhaustive = true;
    }
    Ok(inv)
}

/// Per-mask operator norm `||J_D||_{r->s}`.
pub fn mask_operator_norm(net: &Mlp, mask: &Mask, r: NormKind, s: NormKind) -> Result<f64> {
    op_norm(&net.masked_jacobian(mask)?, r, s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    /// `sensitivity_factor(s) * max_D ||J_D||_{r->s}`.
    pub value: f64,
    /// Inventory index of the maximizing mask.
    pub argmax: usize,
    pub per_mask: Vec<f64>,
    /// Certified only when the inventory was exhaustive.
    pub certified: bool,
}

#[allow(non_snake_case)]
pub fn upper_bound_L(net: &Mlp, inv: &MaskInventory, r: NormKind, s: NormKind) -> Result<UpperBound> {
    let per_mask = inv
        .masks()
        .map(|m| mask_operator_norm(net, m, r, s))
        .collect::<Result<Vec<f64>>>()?;
    upper_bound_from_norms(per_mask, s, inv.is_exhaustive())
}

/// Reduce per-mask operator norms (in inventory order) to the bound.
pub fn upper_bound_from_norms(per_mask: Vec<f64>, s: NormKind, certified: bool) -> Result<UpperBound> {
    let mut argmax = 0;
    for (i, &v) in per_mask.iter().enumerate() {
        if v > per_mask[argmax] {
            argmax = i;
        }
    }
    let Some(&best) = per_mask.get(argmax) else {
        return Err(Error::EmptyInventory);
    };
    Ok(UpperBound {
        value: sensitivity_factor(s) * best,
        argmax,
        per_mask,
        certified,
    })
}

/// A ray inside a cell along which the loss grows.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub mask: Mask,
    /// Rival class `k'`.
    pub rival: usize,
    /// True class `k`.
    pub class: usize,
    /// Unit direction in the recession cone.
    pub u: Vec<f64>,
    pub value: f64,
    /// Dataset index whose cell carries the ray (practical bound only).
    pub sample: Option<usize>,
}

/// Best class-pair value of one mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskLower {
    pub value: f64,
    pub witness: Option<Witness>,
}

/// `max_{k' != k} max { (e_k' - e_k)^T J_D u : u in rec(C_D), ||u||_r <= 1 }`.
pub fn mask_lower_contribution(net: &Mlp, mask: &Mask, r: NormKind) -> Result<MaskLower> {
    let cell = build_cell(net, mask)?;
    let cone = cell.recession_cone();
    let k_count = net.output_dim();
    let mut best = MaskLower {
        value: f64::NEG_INFINITY,
        witness: None,
    };
    for class in 0..k_count {
        for rival in 0..k_count {
            if rival == class {
                continue;
            }
            let c = cell.jacobian.tr_matvec(&basis_difference(k_count, rival, class));
            let m = max_linear_over_cone_ball(&c, &cone, r, false)?;
            if m.value > best.value {
                best = MaskLower {
                    value: m.value,
                    witness: Some(Witness {
                        mask: mask.clone(),
                        rival,
                        class,
                        u: m.u,
                        value: m.value,
                        sample: None,
                    }),
                };
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    /// `-inf` when no class pair admits a direction.
    pub value: f64,
    pub witness: Option<Witness>,
    pub per_mask: Vec<f64>,
}

/// Reduce per-mask contributions (in inventory order), first maximum wins.
pub fn lower_bound_from_parts(parts: Vec<MaskLower>) -> LowerBound {
    let mut value = f64::NEG_INFINITY;
    let mut witness = None;
    let mut per_mask = Vec::with_capacity(parts.len());
    for p in parts {
        per_mask.push(p.value);
        if p.value > value {
            value = p.value;
            witness = p.witness;
        }
    }
    LowerBound {
        value,
        witness,
        per_mask,
    }
}

pub fn lower_bound_l(net: &Mlp, inv: &MaskInventory, r: NormKind) -> Result<LowerBound> {
    if inv.is_empty() {
        return Err(Error::EmptyInventory);
    }
    let parts = inv
        .masks()
        .map(|m| mask_lower_contribution(net, m, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(lower_bound_from_parts(parts))
}

/// Best interior-cone value over rivals of one sample's cell; `None` when
/// the sample sits on a kink.
pub fn sample_lower_contribution(
    net: &Mlp,
    sample: &LabeledSample,
    index: usize,
    r: NormKind,
) -> Result<Option<MaskLower>> {
    let k_count = net.output_dim();
    if sample.label >= k_count {
        return Err(Error::ClassOutOfRange {
            class: sample.label,
            classes: k_count,
        });
    }
    let (mask, degenerate) = net.mask_at(&sample.x)?;
    if degenerate {
        return Ok(None);
    }
    let cell = build_cell(net, &mask)?;
    let cone = cell.recession_cone();
    let mut best = MaskLower {
        value: f64::NEG_INFINITY,
        witness: None,
    };
    for rival in (0..k_count).filter(|&j| j != sample.label) {
        let c = cell
            .jacobian
            .tr_matvec(&basis_difference(k_count, rival, sample.label));
        let m = max_linear_over_cone_ball(&c, &cone, r, true)?;
        if m.value > best.value {
            best = MaskLower {
                value: m.value,
                witness: Some(Witness {
                    mask: mask.clone(),
                    rival,
                    class: sample.label,
                    u: m.u,
                    value: m.value,
                    sample: Some(index),
                }),
            };
        }
    }
    Ok(Some(best))
}

/// Reduce per-sample contributions; `None` marks a skipped degenerate sample.
pub fn practical_bound_from_parts(parts: Vec<Option<MaskLower>>) -> Result<LowerBound> {
    if parts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if parts.iter().all(Option::is_none) {
        return Err(Error::AllDegenerate);
    }
    Ok(lower_bound_from_parts(
        parts
            .into_iter()
            .map(|p| {
                p.unwrap_or(MaskLower {
                    value: f64::NEG_INFINITY,
                    witness: None,
                })
            })
            .collect(),
    ))
}

/// Dataset-restricted lower slope over interior cone directions. Samples on
/// kinks are skipped (their `per_mask` entry is `-inf`).
#[allow(non_snake_case)]
pub fn practical_lower_bound_lN(net: &Mlp, data: &[LabeledSample], r: NormKind) -> Result<LowerBound> {
    // Samples sharing a (mask, label) pair share the subproblem.
    let mut cache: BTreeMap<(Mask, usize), Option<MaskLower>> = BTreeMap::new();
    let mut parts = Vec::with_capacity(data.len());
    for (i, s) in data.iter().enumerate() {
        let (mask, degenerate) = net.mask_at(&s.x)?;
        if degenerate {
            parts.push(None);
            continue;
        }
        let key = (mask, s.label);
        let part = match cache.get(&key) {
            Some(p) => p.clone().map(|mut p| {
                if let Some(w) = p.witness.as_mut() {
                    w.sample = Some(i);
                }
                p
            }),
            None => {
                let p = sample_lower_contribution(net, s, i, r)?;
                cache.insert(key, p.clone());
                p
            }
        };
        parts.push(part);
    }
    practical_bound_from_parts(parts)
}

/// Outcome of the tightness condition at the maximizers of the two bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Tightness {
    pub tight: bool,
    /// `M_r(J^T (e_k' - e_k))` lies in the recession cone of the cell.
    pub cone_condition: bool,
    /// The class pair attains the largest increment and matches the upper
    /// bound for that mask.
    pub direction_condition: bool,
    pub gap: f64,
}

/// Checks whether the dual-norm maximizer of the witness class pair, taken
/// at the mask maximizing the upper bound, lies in that cell's recession
/// cone with the pair attaining the bound.
pub fn check_tightness(
    net: &Mlp,
    inv: &MaskInventory,
    r: NormKind,
    s: NormKind,
    upper: &UpperBound,
    lower: &LowerBound,
) -> Result<Tightness> {
    let gap = (lower.value - upper.value).abs();
    let Some(w) = lower.witness.as_ref() else {
        return Ok(Tightness {
            tight: false,
            cone_condition: false,
            direction_condition: false,
            gap,
        });
    };
    let mask = &inv
        .entries()
        .get(upper.argmax)
        .ok_or(Error::EmptyInventory)?
        .mask;
    let cell = build_cell(net, mask)?;
    let k_count = net.output_dim();
    let pair_norm = |rival: usize, class: usize| -> f64 {
        let c = cell.jacobian.tr_matvec(&basis_difference(k_count, rival, class));
        vec_norm(&c, r.dual())
    };
    let c = cell
        .jacobian
        .tr_matvec(&basis_difference(k_count, w.rival, w.class));
    let xi = match dual_norm_maximizer(&c, r) {
        Ok(xi) => xi,
        Err(Error::ZeroGradient) => vec![0.0; c.len()],
        Err(e) => return Err(e),
    };
    let cone = cell.recession_cone();
    let cone_condition = cone.rows.iter().all(|row| {
        let scale = vec_norm(&row.a, NormKind::L2).max(1.0);
        row.sign.value() * crate::linalg::dot(&row.a, &xi) >= -1e-9 * scale
    });
    let chosen = pair_norm(w.rival, w.class);
    let mut best_pair = 0.0f64;
    for class in 0..k_count {
        for rival in (0..k_count).filter(|&j| j != class) {
            best_pair = best_pair.max(pair_norm(rival, class));
        }
    }
    let bound = sensitivity_factor(s) * op_norm(&cell.jacobian, r, s)?;
    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    let direction_condition = chosen > 0.0 && rel(chosen, best_pair) && rel(chosen, bound);
    Ok(Tightness {
        tight: cone_condition && direction_condition,
        cone_condition,
        direction_condition,
        gap,
    })
}

/// Worst-case mixture: the data at weight `1/N` each, except the root which
/// keeps `(1 - eta)/N` and sends `eta/N` to a far point of its ray.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseDistribution {
    pub data: Vec<LabeledSample>,
    pub root: usize,
    pub eta: f64,
    pub perturbed: LabeledSample,
    pub x_star: Vec<f64>,
    pub u: Vec<f64>,
    pub alpha: f64,
    /// `||x_tilde - x_root||_r`.
    pub distance: f64,
    pub epsilon: f64,
    pub norm: NormKind,
    /// Witness slope minus the realized loss gain per unit budget.
    pub tol: f64,
}

impl WorstCaseDistribution {
    /// `(point, label, weight)` atoms; the root keeps its slot.
    pub fn atoms(&self) -> Vec<(Vec<f64>, usize, f64)> {
        let n = self.data.len() as f64;
        let mut out: Vec<(Vec<f64>, usize, f64)> = self
            .data
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let w = if i == self.root { (1.0 - self.eta) / n } else { 1.0 / n };
                (s.x.clone(), s.label, w)
            })
            .collect();
        out.push((self.perturbed.x.clone(), self.perturbed.label, self.eta / n));
        out
    }

    pub fn expected_loss(&self, net: &Mlp, kind: LossKind) -> Result<f64> {
        let mut total = 0.0;
        for (x, y, w) in self.atoms() {
            if w != 0.0 {
                total += w * loss(kind, &net.forward(&x)?, y)?;
            }
        }
        Ok(total)
    }
}

/// Geometric step lengths used when none are given.
pub const DEFAULT_ALPHA_SCHEDULE: [f64; 3] = [1e2, 1e3, 1e4];

/// Push `eta` of one datum's mass far along the witness ray so the
/// transport cost is exactly `epsilon`.
///
/// Takes the largest `alpha` in the schedule with `N eps < ||x_tilde - x_root||`.
#[allow(clippy::too_many_arguments)]
pub fn build_worst_case_distribution(
    net: &Mlp,
    data: &[LabeledSample],
    kind: LossKind,
    r: NormKind,
    epsilon: f64,
    witness: &Witness,
    alpha_schedule: &[f64],
) -> Result<WorstCaseDistribution> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidConfig("epsilon must be positive"));
    }
    if !(witness.value > 0.0) || vec_norm(&witness.u, r) == 0.0 {
        return Err(Error::NoAscentRay);
    }
    let cell = build_cell(net, &witness.mask)?;
    let (x_star, root) = match witness.sample {
        Some(i) => {
            let s = data.get(i).ok_or(Error::InvalidConfig("witness sample out of range"))?;
            if s.label != witness.class {
                return Err(Error::InvalidConfig("witness class differs from its sample"));
            }
            (s.x.clone(), i)
        }
        None => {
            let (x, _) = cell_interior_point(&cell, net.domain())
                .ok_or(Error::InvalidConfig("witness cell misses the domain"))?;
            let root = nearest_of_class(data, &x, witness.class, r)
                .ok_or(Error::NoRootSample {
                    class: witness.class,
                })?;
            (x, root)
        }
    };
    let n = data.len() as f64;
    let x_root = &data[root].x;
    let mut schedule: Vec<f64> = alpha_schedule.iter().copied().filter(|a| *a > 0.0).collect();
    schedule.sort_by(|a, b| b.total_cmp(a));
    for alpha in schedule {
        let x_tilde = add_scaled(&x_star, alpha, &witness.u);
        let distance = vec_norm(&crate::linalg::sub(&x_tilde, x_root), r);
        if !(distance > n * epsilon) {
            continue;
        }
        let (mask, degenerate) = net.mask_at(&x_tilde)?;
        if degenerate || mask != witness.mask {
            return Err(Error::CellEscape { alpha });
        }
        let eta = n * epsilon / distance;
        let gain = loss(kind, &net.forward(&x_tilde)?, witness.class)?
            - loss(kind, &net.forward(x_root)?, witness.class)?;
        return Ok(WorstCaseDistribution {
            data: data.to_vec(),
            root,
            eta,
            perturbed: LabeledSample::new(x_tilde, witness.class),
            x_star,
            u: witness.u.clone(),
            alpha,
            distance,
            epsilon,
            norm: r,
            tol: witness.value - gain / distance,
        });
    }
    Err(Error::ScheduleTooShort)
}

fn nearest_of_class(data: &[LabeledSample], x: &[f64], class: usize, r: NormKind) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in data.iter().enumerate().filter(|(_, s)| s.label == class) {
        let d = vec_norm(&crate::linalg::sub(&s.x, x), r);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Heuristic slope estimates for smooth networks.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothBounds {
    pub upper_estimate: f64,
    pub lower_estimate: f64,
    pub upper_argmax: Vec<f64>,
    pub lower_argmax: Vec<f64>,
}

/// Largest dual-norm increment `max_{k' != k} ||J^T (e_k' - e_k)||_{r*}`.
pub fn best_increment(j: &Mat, r: NormKind) -> f64 {
    let k = j.rows();
    let mut best = f64::NEG_INFINITY;
    for class in 0..k {
        for rival in (0..k).filter(|&i| i != class) {
            best = best.max(vec_norm(&j.tr_matvec(&basis_difference(k, rival, class)), r.dual()));
        }
    }
    best
}

/// Multi-start finite-difference ascent of `x -> ||J(x)||_{r->s}` and of the
/// best class-pair increment over the domain box. Starts at every datum and
/// at `restarts` seeded uniform points.
#[allow(clippy::too_many_arguments)]
pub fn smooth_bounds(
    net: &Mlp,
    data: &[LabeledSample],
    r: NormKind,
    s: NormKind,
    restarts: usize,
    steps: usize,
    seed: u64,
) -> Result<SmoothBounds> {
    if !net.activation().is_smooth() {
        return Err(Error::WrongActivation);
    }
    let factor = sensitivity_factor(s);
    let upper_obj = |x: &[f64]| -> Result<f64> { Ok(factor * op_norm(&net.jacobian(x)?, r, s)?) };
    let lower_obj = |x: &[f64]| -> Result<f64> { Ok(best_increment(&net.jacobian(x)?, r)) };

    let dom = net.domain();
    let n = net.input_dim();
    let mut starts: Vec<Vec<f64>> = data.iter().map(|d| d.x.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..restarts {
        let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        starts.push(dom.from_unit(&t));
    }
    if starts.is_empty() {
        starts.push(dom.center());
    }

    let (upper_x, mut upper) = ascend(net, &starts, steps, &upper_obj)?;
    let (lower_x, lower) = ascend(net, &starts, steps, &lower_obj)?;
    // Pointwise the increment never exceeds the scaled norm, so evaluating
    // the upper objective at the lower maximizer keeps the estimates ordered.
    let mut upper_x = upper_x;
    let at_lower = upper_obj(&lower_x)?;
    if at_lower > upper {
        upper = at_lower;
        upper_x = lower_x.clone();
    }
    Ok(SmoothBounds {
        upper_estimate: upper,
        lower_estimate: lower,
        upper_argmax: upper_x,
        lower_argmax: lower_x,
    })
}

fn ascend(
    net: &Mlp,
    starts: &[Vec<f64>],
    steps: usize,
    f: &dyn Fn(&[f64]) -> Result<f64>,
) -> Result<(Vec<f64>, f64)> {
    let dom = net.domain();
    let n = net.input_dim();
    let widths: Vec<f64> = dom.lo().iter().zip(dom.hi()).map(|(l, h)| h - l).collect();
    let mut best_x = starts[0].clone();
    let mut best = f64::NEG_INFINITY;
    for start in starts {
        let mut x = start.clone();
        dom.clamp(&mut x);
        let mut fx = f(&x)?;
        let mut step_scale = 1.0;
        for _ in 0..steps {
            let mut g = vec![0.0; n];
            for i in 0..n {
                let h = 1e-6 * widths[i].max(1e-12);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                dom.clamp(&mut xp);
                dom.clamp(&mut xm);
                let span = xp[i] - xm[i];
                if span > 0.0 {
                    g[i] = (f(&xp)? - f(&xm)?) / span;
                }
            }
            let gn = vec_norm(&g, NormKind::L2);
            if gn == 0.0 {
                break;
            }
            let mut candidate: Vec<f64> = (0..n)
                .map(|i| x[i] + step_scale * 1e-2 * widths[i] * g[i] / gn)
                .collect();
            dom.clamp(&mut candidate);
            let fc = f(&candidate)?;
            if fc >= fx {
                x = candidate;
                fx = fc;
            } else {
                step_scale *= 0.5;
                if step_scale < 1e-6 {
                    break;
                }
            }
        }
        if fx > best {
            best = fx;
            best_x = x;
        }
    }
    Ok((best_x, best))
}
