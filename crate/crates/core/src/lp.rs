//! Dense two-phase simplex for small linear programs.
//!
//! Pricing uses the most negative reduced cost and switches permanently to
//! Bland's rule after a run of degenerate pivots, so the method terminates.

use alloc::vec;
use alloc::vec::Vec;

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-12;
const DEGENERATE_RUN: usize = 50;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpConstraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LpConstraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        LpConstraint {
            coeffs,
            relation,
            rhs,
        }
    }

    pub fn le(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, Relation::Le, rhs)
    }

    pub fn ge(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, Relation::Ge, rhs)
    }

    pub fn eq(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self::new(coeffs, Relation::Eq, rhs)
    }
}

/// `maximize objective . x` subject to the constraints; `nonnegative[i]`
/// adds `x_i >= 0`, other variables are free.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<LpConstraint>,
    pub nonnegative: Vec<bool>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, nonnegative: bool) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            constraints: Vec::new(),
            nonnegative: vec![nonnegative; n],
        }
    }

    pub fn push(&mut self, c: LpConstraint) -> &mut Self {
        self.constraints.push(c);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Pivot budget exhausted; only possible on pathological inputs.
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point (meaningful when `status` is `Optimal`).
    pub x: Vec<f64>,
    pub value: f64,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize) -> Self {
        let value = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        LpSolution {
            status,
            x: vec![0.0; n],
            value,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    // `rows` constraint rows followed by the objective row; the last column
    // is the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn obj_row(&self) -> usize {
        self.rows
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.at(pr, pc);
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for i in 0..=self.rows {
            if i == pr {
                continue;
            }
            let f = self.data[i * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Run the simplex on the current objective row over the allowed
    /// columns. Returns `Ok(())` at optimality.
    fn optimize(&mut self, allowed: &[bool], pivots: &mut usize) -> Result<(), LpStatus> {
        let obj = self.obj_row();
        let mut bland = false;
        let mut degenerate_run = 0;
        loop {
            let mut enter = None;
            let mut most_negative = -COST_TOL;
            for (j, &ok) in allowed.iter().enumerate() {
                if !ok {
                    continue;
                }
                let c = self.at(obj, j);
                if bland {
                    if c < -COST_TOL {
                        enter = Some(j);
                        break;
                    }
                } else if c < most_negative {
                    most_negative = c;
                    enter = Some(j);
                }
            }
            let Some(pc) = enter else {
                return Ok(());
            };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows {
                let a = self.at(i, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        best_ratio = ratio.min(best_ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(pr) = leave else {
                return Err(LpStatus::Unbounded);
            };

            if best_ratio <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }

            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(LpStatus::IterationLimit);
            }
            self.pivot(pr, pc);
        }
    }
}

/// Solve a dense linear program.
pub fn solve_lp(p: &LpProblem) -> LpSolution {
    let n = p.num_vars();
    debug_assert_eq!(p.nonnegative.len(), n);

    // Column layout: one column per nonnegative variable, two per free one.
    let mut col_of = Vec::with_capacity(n);
    let mut ncols = 0;
    for &nn in &p.nonnegative {
        col_of.push(ncols);
        ncols += if nn { 1 } else { 2 };
    }
    let structural = ncols;

    // Normalize rows to a nonnegative right-hand side.
    struct Row {
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    }
    let mut rows: Vec<Row> = Vec::with_capacity(p.constraints.len());
    for c in &p.constraints {
        debug_assert_eq!(c.coeffs.len(), n);
        let mut coeffs = vec![0.0; structural];
        for (i, &v) in c.coeffs.iter().enumerate() {
            coeffs[col_of[i]] = v;
            if !p.nonnegative[i] {
                coeffs[col_of[i] + 1] = -v;
            }
        }
        let (coeffs, relation, rhs) = if c.rhs < 0.0 {
            let flipped = match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            (coeffs.into_iter().map(|v| -v).collect(), flipped, -c.rhs)
        } else {
            (coeffs, c.relation, c.rhs)
        };
        rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    let m = rows.len();
    let slacks = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let artificials = rows.iter().filter(|r| r.relation != Relation::Le).count();
    let total = structural + slacks + artificials;
    let width = total + 1;
    let mut t = Tableau {
        rows: m,
        width,
        data: vec![0.0; (m + 1) * width],
        basis: vec![0; m],
    };

    let mut next_slack = structural;
    let mut next_art = structural + slacks;
    for (i, r) in rows.iter().enumerate() {
        let base = i * width;
        t.data[base..base + structural].copy_from_slice(&r.coeffs);
        t.data[base + width - 1] = r.rhs;
        match r.relation {
            Relation::Le => {
                t.data[base + next_slack] = 1.0;
                t.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                t.data[base + next_slack] = -1.0;
                next_slack += 1;
                t.data[base + next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                t.data[base + next_art] = 1.0;
                t.basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let first_art = structural + slacks;
    let mut pivots = 0usize;

    // Phase 1: maximize minus the sum of artificials.
    if artificials > 0 {
        let obj = m * width;
        for j in first_art..total {
            t.data[obj + j] = 1.0;
        }
        for i in 0..m {
            if t.basis[i] >= first_art {
                for j in 0..width {
                    t.data[obj + j] -= t.data[i * width + j];
                }
            }
        }
        let allowed = vec![true; total];
        if let Err(status) = t.optimize(&allowed, &mut pivots) {
            return LpSolution::failed(status, n);
        }
        let phase1 = t.data[obj + width - 1];
        if phase1 < -FEAS_TOL * (1.0 + rows.iter().map(|r| r.rhs).fold(0.0, f64::max)) {
            return LpSolution::failed(LpStatus::Infeasible, n);
        }
        // Drive artificials out of the basis, dropping redundant rows.
        let mut i = 0;
        while i < t.rows {
            if t.basis[i] >= first_art {
                let candidate = (0..first_art)
                    .filter(|&j| t.at(i, j).abs() > 1e-9)
                    .max_by(|&a, &b| t.at(i, a).abs().total_cmp(&t.at(i, b).abs()));
                match candidate {
                    Some(j) => t.pivot(i, j),
                    None => {
                        remove_row(&mut t, i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    // Phase 2.
    let obj = t.rows * width;
    for v in &mut t.data[obj..obj + width] {
        *v = 0.0;
    }
    for (i, &c) in p.objective.iter().enumerate() {
        t.data[obj + col_of[i]] = -c;
        if !p.nonnegative[i] {
            t.data[obj + col_of[i] + 1] = c;
        }
    }
    for i in 0..t.rows {
        let b = t.basis[i];
        let f = t.data[obj + b];
        if f != 0.0 {
            for j in 0..width {
                t.data[obj + j] -= f * t.data[i * width + j];
            }
        }
    }
    let allowed: Vec<bool> = (0..total).map(|j| j < first_art).collect();
    if let Err(status) = t.optimize(&allowed, &mut pivots) {
        return LpSolution::failed(status, n);
    }

    let mut cols = vec![0.0; total];
    for i in 0..t.rows {
        cols[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let c = col_of[i];
            if p.nonnegative[i] {
                cols[c]
            } else {
                cols[c] - cols[c + 1]
            }
        })
        .collect();
    let value = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
    }
}

fn remove_row(t: &mut Tableau, i: usize) {
    let w = t.width;
    t.data.drain(i * w..(i + 1) * w);
    t.basis.remove(i);
    t.rows -= 1;
}
