//! Transport costs between the discrete distributions built here.
//!
//! The ground cost is `||x' - x||_r` between atoms of the same label and
//! infinite across labels.

use alloc::vec;
use alloc::vec::Vec;

use crate::attack::AdvDistribution;
use crate::certify::WorstCaseDistribution;
use crate::error::{Error, Result};
use crate::linalg::{check_finite, sub, vec_norm, NormKind};
use crate::lp::{solve_lp, LpConstraint, LpProblem, LpStatus};

/// Largest number of atoms per side accepted by [`exact_w1_small`].
pub const EXACT_ATOM_CAP: usize = 64;
const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: Vec<f64>,
    pub label: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    atoms: Vec<Atom>,
}

impl DiscreteDist {
    /// Weights must be nonnegative and sum to one within `1e-12`.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let mut total = 0.0;
        for a in &atoms {
            check_finite(&a.x)?;
            if !(a.weight >= 0.0) || !a.weight.is_finite() {
                return Err(Error::InvalidConfig("atom weights must be nonnegative"));
            }
            total += a.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig("atom weights must sum to one"));
        }
        Ok(DiscreteDist { atoms })
    }

    /// Uniform weights over the given points.
    pub fn uniform(points: &[(Vec<f64>, usize)]) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        DiscreteDist::new(
            points
                .iter()
                .map(|(x, label)| Atom {
                    x: x.clone(),
                    label: *label,
                    weight: w,
                })
                .collect(),
        )
    }

    pub fn from_triples(atoms: Vec<(Vec<f64>, usize, f64)>) -> Result<Self> {
        DiscreteDist::new(
            atoms
                .into_iter()
                .map(|(x, label, weight)| Atom { x, label, weight })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }
}

/// Mass moved from `source` atom to `target` atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flow {
    pub source: usize,
    pub target: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Coupling {
    pub flows: Vec<Flow>,
}

impl Coupling {
    /// Cost of the plan; cross-label flow is an error.
    pub fn cost(&self, p: &DiscreteDist, q: &DiscreteDist, r: NormKind) -> Result<f64> {
        let mut total = 0.0;
        for f in &self.flows {
            let a = &p.atoms[f.source];
            let b = &q.atoms[f.target];
            if a.label != b.label {
                return Err(Error::LabelMismatch);
            }
            total += f.mass * vec_norm(&sub(&a.x, &b.x), r);
        }
        Ok(total)
    }
}

/// A moved mass: `(from, from_label, to, to_label, mass)`.
pub type Move = (Vec<f64>, usize, Vec<f64>, usize, f64);

/// Distributions that come with an explicit coupling to the data they were
/// built from.
pub trait CanonicalCoupling {
    /// Moves of the coupling; mass that stays put may be omitted.
    fn moves(&self) -> Vec<Move>;

    /// Cost of the canonical coupling, an upper bound on the type-1
    /// Wasserstein distance to the data.
    fn canonical_cost(&self, r: NormKind) -> Result<f64> {
        let mut total = 0.0;
        for (from, ly, to, lz, mass) in self.moves() {
            if ly != lz {
                return Err(Error::LabelMismatch);
            }
            total += mass * vec_norm(&sub(&to, &from), r);
        }
        Ok(total)
    }
}

impl CanonicalCoupling for AdvDistribution {
    fn moves(&self) -> Vec<Move> {
        let w = self.adv_weight();
        self.pairs
            .iter()
            .map(|p| (p.anchor.x.clone(), p.anchor.label, p.adv.clone(), p.anchor.label, w))
            .collect()
    }
}

impl CanonicalCoupling for WorstCaseDistribution {
    fn moves(&self) -> Vec<Move> {
        let root = &self.data[self.root];
        vec![(
            root.x.clone(),
            root.label,
            self.perturbed.x.clone(),
            self.perturbed.label,
            self.eta / self.data.len() as f64,
        )]
    }
}

/// `canonical_cost` as a free function.
pub fn canonical_cost<D: CanonicalCoupling + ?Sized>(dist: &D, r: NormKind) -> Result<f64> {
    dist.canonical_cost(r)
}

/// Exact type-1 Wasserstein distance by a transportation LP per label.
/// Returns `+inf` when some label carries different mass in `p` and `q`.
pub fn exact_w1_small(p: &DiscreteDist, q: &DiscreteDist, r: NormKind) -> Result<f64> {
    Ok(exact_w1_with_coupling(p, q, r)?.0)
}

/// [`exact_w1_small`] together with an optimal coupling (empty when the
/// distance is infinite).
pub fn exact_w1_with_coupling(p: &DiscreteDist, q: &DiscreteDist, r: NormKind) -> Result<(f64, Coupling)> {
    let live = |d: &DiscreteDist| -> Vec<usize> {
        (0..d.atoms.len()).filter(|&i| d.atoms[i].weight > 0.0).collect()
    };
    let ps = live(p);
    let qs = live(q);
    for count in [ps.len(), qs.len()] {
        if count > EXACT_ATOM_CAP {
            return Err(Error::TooManyAtoms {
                atoms: count,
                cap: EXACT_ATOM_CAP,
            });
        }
    }
    let mut labels: Vec<usize> = ps
        .iter()
        .map(|&i| p.atoms[i].label)
        .chain(qs.iter().map(|&j| q.atoms[j].label))
        .collect();
    labels.sort_unstable();
    labels.dedup();

    let mut total = 0.0;
    let mut coupling = Coupling::default();
    for label in labels {
        let pi: Vec<usize> = ps.iter().copied().filter(|&i| p.atoms[i].label == label).collect();
        let qj: Vec<usize> = qs.iter().copied().filter(|&j| q.atoms[j].label == label).collect();
        let mp: f64 = pi.iter().map(|&i| p.atoms[i].weight).sum();
        let mq: f64 = qj.iter().map(|&j| q.atoms[j].weight).sum();
        if (mp - mq).abs() > MASS_TOL {
            return Ok((f64::INFINITY, Coupling::default()));
        }
        let (cost, flows) = transport_lp(p, q, &pi, &qj, r)?;
        total += cost;
        coupling.flows.extend(flows);
    }
    Ok((total, coupling))
}

fn transport_lp(p: &DiscreteDist, q: &DiscreteDist, pi: &[usize], qj: &[usize], r: NormKind) -> Result<(f64, Vec<Flow>)> {
    let (m, n) = (pi.len(), qj.len());
    let mut cost = Vec::with_capacity(m * n);
    for &i in pi {
        for &j in qj {
            cost.push(vec_norm(&sub(&p.atoms[i].x, &q.atoms[j].x), r));
        }
    }
    // Rescale q so both marginals carry exactly the same total mass.
    let mq: f64 = qj.iter().map(|&j| q.atoms[j].weight).sum();
    let mp: f64 = pi.iter().map(|&i| p.atoms[i].weight).sum();
    let scale = if mq > 0.0 { mp / mq } else { 1.0 };

    let mut lp = LpProblem::new(cost.iter().map(|c| -c).collect(), true);
    for (a, &i) in pi.iter().enumerate() {
        let mut row = vec![0.0; m * n];
        for b in 0..n {
            row[a * n + b] = 1.0;
        }
        lp.push(LpConstraint::eq(row, p.atoms[i].weight));
    }
    for (b, &j) in qj.iter().enumerate() {
        let mut row = vec![0.0; m * n];
        for a in 0..m {
            row[a * n + b] = 1.0;
        }
        lp.push(LpConstraint::eq(row, q.atoms[j].weight * scale));
    }
    let sol = solve_lp(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(Error::InvalidConfig("transport LP did not reach optimality"));
    }
    let mut flows = Vec::new();
    for a in 0..m {
        for b in 0..n {
            let mass = sol.x[a * n + b];
            if mass > 0.0 {
                flows.push(Flow {
                    source: pi[a],
                    target: qj[b],
                    mass,
                });
            }
        }
    }
    Ok((-sol.value, flows))
}

/// Type-1 Wasserstein distance between two weighted point sets on the line,
/// `int |F_p(t) - F_q(t)| dt`.
pub fn w1_1d(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = p
        .iter()
        .map(|&(x, w)| (x, w))
        .chain(q.iter().map(|&(x, w)| (x, -w)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut diff = 0.0;
    for win in 0..events.len() {
        diff += events[win].1;
        if let Some(next) = events.get(win + 1) {
            total += diff.abs() * (next.0 - events[win].0);
        }
    }
    total
}
