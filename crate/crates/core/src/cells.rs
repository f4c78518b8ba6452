//! ReLU cells, their recession cones, and linear maximization over a cone
//! intersected with a unit norm ball.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, dual_norm_maximizer, vec_norm, Mat, NormKind};
use crate::lp::{solve_lp, LpConstraint, LpProblem, LpStatus};
use crate::network::{BoxDomain, Mask, Mlp};

/// Margin used to model strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Rows shorter than this are treated as zero.
const ZERO_ROW: f64 = 1e-14;
const DYKSTRA_SWEEPS: usize = 10_000;
const DYKSTRA_TOL: f64 = 1e-10;
/// Relative size below which a cone projection counts as zero.
const PROJECTION_NOISE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `sign * (a . x + b) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
    pub sign: Sign,
}

impl Halfspace {
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.sign.value() * (dot(&self.a, x) + self.b)
    }
}

/// Open polyhedral region on which the network is affine,
/// `theta(x) = jacobian * x + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPolyhedron {
    pub halfspaces: Vec<Halfspace>,
    pub mask: Mask,
    pub jacobian: Mat,
    pub offset: Vec<f64>,
}

impl CellPolyhedron {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.slack(x) > 0.0)
    }

    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.slack(x))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn recession_cone(&self) -> RecessionCone {
        RecessionCone {
            dim: self.jacobian.cols(),
            rows: self
                .halfspaces
                .iter()
                .map(|h| ConeRow {
                    a: h.a.clone(),
                    sign: h.sign,
                })
                .collect(),
        }
    }
}

/// `sign * (a . u) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRow {
    pub a: Vec<f64>,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecessionCone {
    dim: usize,
    pub rows: Vec<ConeRow>,
}

impl RecessionCone {
    /// The whole space.
    pub fn full(dim: usize) -> Self {
        RecessionCone {
            dim,
            rows: Vec::new(),
        }
    }

    pub fn new(dim: usize, rows: Vec<ConeRow>) -> Self {
        RecessionCone { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Smallest `sign * a . u` over the rows (`+inf` without rows).
    pub fn min_row_value(&self, u: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.sign.value() * dot(&r.a, u))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        self.min_row_value(u) >= -tol
    }

    /// Unit-length inward normals `sign * a / ||a||`, skipping zero rows.
    fn normals(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .filter_map(|r| {
                let n = vec_norm(&r.a, NormKind::L2);
                (n > ZERO_ROW).then(|| r.a.iter().map(|v| r.sign.value() * v / n).collect())
            })
            .collect()
    }
}

/// Halfspaces of the cell for `mask`, plus the affine logit map on it.
pub fn build_cell(net: &Mlp, mask: &Mask) -> Result<CellPolyhedron> {
    if net.activation().is_smooth() {
        return Err(Error::WrongActivation);
    }
    if mask.widths() != net.hidden_widths() {
        return Err(Error::ShapeMismatch("mask widths differ from hidden widths"));
    }
    let layers = net.layers();
    let mut a_hat = layers[0].weight.clone();
    let mut b_hat = layers[0].bias.clone();
    let mut halfspaces = Vec::with_capacity(net.hidden_units());
    for h in 0..net.hidden_layers() {
        let d = mask.layer(h);
        for (j, &active) in d.iter().enumerate() {
            halfspaces.push(Halfspace {
                a: a_hat.row(j).to_vec(),
                b: b_hat[j],
                sign: if active { Sign::Plus } else { Sign::Minus },
            });
        }
        let scale: Vec<f64> = d.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let next = &layers[h + 1];
        a_hat = next.weight.matmul(&a_hat.scale_rows(&scale));
        let masked_b: Vec<f64> = b_hat.iter().zip(&scale).map(|(b, s)| b * s).collect();
        b_hat = next.weight.matvec(&masked_b);
        for (v, b) in b_hat.iter_mut().zip(&next.bias) {
            *v += b;
        }
    }
    Ok(CellPolyhedron {
        halfspaces,
        mask: mask.clone(),
        jacobian: a_hat,
        offset: b_hat,
    })
}

/// Whether some `x` in the box satisfies every halfspace with slack at
/// least [`STRICT_MARGIN`].
pub fn cell_feasible(cell: &CellPolyhedron, domain: &BoxDomain) -> bool {
    chebyshev_point(cell, domain, false).is_some_and(|(_, t)| t >= STRICT_MARGIN)
}

/// A point of the cell inside the box, chosen to maximize the smallest
/// normalized slack `sign * (a . x + b) / ||a||`, together with that slack.
/// `None` when the cell misses the box.
pub fn cell_interior_point(cell: &CellPolyhedron, domain: &BoxDomain) -> Option<(Vec<f64>, f64)> {
    let (x, t) = chebyshev_point(cell, domain, true)?;
    (t >= STRICT_MARGIN && cell.min_slack(&x) > 0.0).then_some((x, t))
}

/// Maximize `t <= 1` subject to `sign * (a . x + b) >= t * w(a)` over the
/// box, with `w(a) = ||a||` when `normalized` and 1 otherwise.
fn chebyshev_point(
    cell: &CellPolyhedron,
    domain: &BoxDomain,
    normalized: bool,
) -> Option<(Vec<f64>, f64)> {
    let n = domain.dim();
    let lo = domain.lo();
    let hi = domain.hi();
    // Variables: y = x - lo in [0, hi - lo], then t.
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut p = LpProblem::new(objective, true);
    p.nonnegative[n] = false;
    let mut zero_rows_min = f64::INFINITY;
    for h in &cell.halfspaces {
        let s = h.sign.value();
        let norm = vec_norm(&h.a, NormKind::L2);
        if norm <= ZERO_ROW {
            zero_rows_min = zero_rows_min.min(s * h.b);
            continue;
        }
        let w = if normalized { norm } else { 1.0 };
        let mut coeffs: Vec<f64> = h.a.iter().map(|v| s * v).collect();
        coeffs.push(-w);
        let rhs = -s * (dot(&h.a, lo) + h.b);
        p.push(LpConstraint::ge(coeffs, rhs));
    }
    if zero_rows_min < STRICT_MARGIN {
        return None;
    }
    for i in 0..n {
        let mut c = vec![0.0; n + 1];
        c[i] = 1.0;
        p.push(LpConstraint::le(c, hi[i] - lo[i]));
    }
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    p.push(LpConstraint::le(c, 1.0));
    let sol = solve_lp(&p);
    if !sol.is_optimal() {
        return None;
    }
    let x: Vec<f64> = (0..n).map(|i| (lo[i] + sol.x[i]).clamp(lo[i], hi[i])).collect();
    Some((x, sol.x[n].min(zero_rows_min)))
}

/// Result of maximizing `c . u` over a cone intersected with the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeMax {
    /// Optimal value; `-inf` when the feasible set has no nonzero point
    /// (or, for the interior variant, the cone has empty interior).
    pub value: f64,
    pub u: Vec<f64>,
    /// Every cone direction has `c . u <= 0`; `value` is then the ball
    /// value 0 with `u = 0`.
    pub all_descent: bool,
}

impl ConeMax {
    fn infeasible(n: usize) -> Self {
        ConeMax {
            value: f64::NEG_INFINITY,
            u: vec![0.0; n],
            all_descent: false,
        }
    }

    fn descent(n: usize) -> Self {
        ConeMax {
            value: 0.0,
            u: vec![0.0; n],
            all_descent: true,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.value > f64::NEG_INFINITY
    }
}

/// `max c . u` over `{u in cone, ||u||_r <= 1}`.
///
/// With `interior`, cone rows must hold with margin `STRICT_MARGIN * ||a||`.
pub fn max_linear_over_cone_ball(
    c: &[f64],
    cone: &RecessionCone,
    r: NormKind,
    interior: bool,
) -> Result<ConeMax> {
    let n = cone.dim();
    if c.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.len(),
        });
    }
    crate::linalg::check_finite(c)?;
    let normals = cone.normals();
    if normals.is_empty() {
        // Zero rows of an interior cone cannot hold strictly.
        if interior && !cone.rows.is_empty() {
            return Ok(ConeMax::infeasible(n));
        }
        if n == 0 {
            return Ok(ConeMax::infeasible(0));
        }
        let value = vec_norm(c, r.dual());
        if value == 0.0 {
            return Ok(ConeMax::descent(n));
        }
        return Ok(ConeMax {
            value,
            u: dual_norm_maximizer(c, r)?,
            all_descent: false,
        });
    }
    if interior && normals.len() < cone.rows.len() {
        return Ok(ConeMax::infeasible(n));
    }
    let margin = if interior { STRICT_MARGIN } else { 0.0 };

    let result = match r {
        NormKind::LInf | NormKind::L1 => polytope_ball_lp(c, &normals, r, margin),
        NormKind::L2 => {
            if interior {
                l2_interior(c, &normals)
            } else {
                l2_projection(c, &normals)
            }
        }
    };
    let Some(result) = result else {
        return Ok(ConeMax::infeasible(n));
    };
    if result.value > 1e-12 {
        return Ok(result);
    }
    // Non-positive optimum: distinguish a nontrivial cone from {0}.
    if interior || cone_has_nonzero_point(&normals, n) {
        Ok(ConeMax::descent(n))
    } else {
        Ok(ConeMax::infeasible(n))
    }
}

/// LP over the unit L1 or LInf ball. Returns `None` when infeasible.
fn polytope_ball_lp(c: &[f64], normals: &[Vec<f64>], r: NormKind, margin: f64) -> Option<ConeMax> {
    let n = c.len();
    match r {
        NormKind::LInf => {
            let mut p = LpProblem::new(c.to_vec(), false);
            for g in normals {
                p.push(LpConstraint::ge(g.clone(), margin));
            }
            for i in 0..n {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                p.push(LpConstraint::le(e.clone(), 1.0));
                p.push(LpConstraint::ge(e, -1.0));
            }
            finish_lp(&p, |x| x.to_vec())
        }
        NormKind::L1 => {
            // u = p - q with p, q >= 0 and sum(p + q) <= 1.
            let mut objective = c.to_vec();
            objective.extend(c.iter().map(|v| -v));
            let mut p = LpProblem::new(objective, true);
            for g in normals {
                let mut row = g.clone();
                row.extend(g.iter().map(|v| -v));
                p.push(LpConstraint::ge(row, margin));
            }
            p.push(LpConstraint::le(vec![1.0; 2 * n], 1.0));
            finish_lp(&p, |x| (0..n).map(|i| x[i] - x[n + i]).collect())
        }
        NormKind::L2 => unreachable!("L2 uses the projection path"),
    }
}

fn finish_lp(p: &LpProblem, to_u: impl Fn(&[f64]) -> Vec<f64>) -> Option<ConeMax> {
    let sol = solve_lp(p);
    match sol.status {
        LpStatus::Optimal => Some(ConeMax {
            value: sol.value,
            u: to_u(&sol.x),
            all_descent: false,
        }),
        // The ball bounds the problem, so anything else means no feasible
        // point.
        _ => None,
    }
}

/// Euclidean projection onto `{u : g_i . u >= 0}` by cyclic Dykstra.
pub fn project_onto_cone(c: &[f64], normals: &[Vec<f64>]) -> Vec<f64> {
    let m = normals.len();
    let mut x = c.to_vec();
    let mut corrections = vec![vec![0.0; c.len()]; m];
    for _ in 0..DYKSTRA_SWEEPS {
        let mut change = 0.0f64;
        for (g, q) in normals.iter().zip(corrections.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(q.iter()).map(|(a, b)| a + b).collect();
            let v = dot(g, &y);
            let proj: Vec<f64> = if v < 0.0 {
                y.iter().zip(g).map(|(a, gi)| a - v * gi).collect()
            } else {
                y.clone()
            };
            for i in 0..x.len() {
                change = change.max((proj[i] - x[i]).abs());
                q[i] = y[i] - proj[i];
            }
            x = proj;
        }
        let violation = normals
            .iter()
            .map(|g| (-dot(g, &x)).max(0.0))
            .fold(0.0, f64::max);
        if change <= DYKSTRA_TOL && violation <= DYKSTRA_TOL {
            break;
        }
    }
    x
}

fn l2_projection(c: &[f64], normals: &[Vec<f64>]) -> Option<ConeMax> {
    let p = project_onto_cone(c, normals);
    let norm = vec_norm(&p, NormKind::L2);
    // Dykstra stops near 1e-10 accuracy, so tiny projections are noise.
    if norm <= PROJECTION_NOISE * vec_norm(c, NormKind::L2) {
        return Some(ConeMax::descent(c.len()));
    }
    Some(ConeMax {
        value: norm,
        u: p.iter().map(|v| v / norm).collect(),
        all_descent: false,
    })
}

/// Interior variant for L2: find a strictly interior direction, then nudge
/// the normalized projection towards it until every row holds with margin.
fn l2_interior(c: &[f64], normals: &[Vec<f64>]) -> Option<ConeMax> {
    let n = c.len();
    let (w, depth) = interior_direction(normals, n)?;
    let p = project_onto_cone(c, normals);
    let norm = vec_norm(&p, NormKind::L2);
    if norm <= PROJECTION_NOISE * vec_norm(c, NormKind::L2) {
        return Some(ConeMax::descent(n));
    }
    let p_hat: Vec<f64> = p.iter().map(|v| v / norm).collect();
    let violation = normals
        .iter()
        .map(|g| (STRICT_MARGIN - dot(g, &p_hat)).max(0.0))
        .fold(0.0, f64::max);
    let mut tau = if violation > 0.0 {
        (10.0 * (violation + STRICT_MARGIN) / depth).max(1e-6)
    } else {
        0.0
    };
    for _ in 0..60 {
        let v: Vec<f64> = p_hat.iter().zip(&w).map(|(a, b)| a + tau * b).collect();
        let vn = vec_norm(&v, NormKind::L2);
        let u: Vec<f64> = v.iter().map(|x| x / vn).collect();
        if normals.iter().all(|g| dot(g, &u) >= STRICT_MARGIN) {
            return Some(ConeMax {
                value: dot(c, &u),
                u,
                all_descent: false,
            });
        }
        tau = if tau == 0.0 { 1e-6 } else { 2.0 * tau };
    }
    // The interior direction alone always satisfies the margin.
    let wn = vec_norm(&w, NormKind::L2);
    let u: Vec<f64> = w.iter().map(|x| x / wn).collect();
    Some(ConeMax {
        value: dot(c, &u),
        u,
        all_descent: false,
    })
}

/// A direction `w` in the box of half-width `1/sqrt(n)` maximizing the
/// smallest `g . w`; `None` when that depth is below the strict margin.
fn interior_direction(normals: &[Vec<f64>], n: usize) -> Option<(Vec<f64>, f64)> {
    let half = 1.0 / libm::sqrt(n as f64);
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut p = LpProblem::new(objective, false);
    for g in normals {
        let mut row = g.clone();
        row.push(-1.0);
        p.push(LpConstraint::ge(row, 0.0));
    }
    for i in 0..n {
        let mut e = vec![0.0; n + 1];
        e[i] = 1.0;
        p.push(LpConstraint::le(e.clone(), half));
        p.push(LpConstraint::ge(e, -half));
    }
    let mut e = vec![0.0; n + 1];
    e[n] = 1.0;
    p.push(LpConstraint::le(e, 1.0));
    let sol = solve_lp(&p);
    if !sol.is_optimal() || sol.x[n] < STRICT_MARGIN {
        return None;
    }
    Some((sol.x[..n].to_vec(), sol.x[n]))
}

/// Whether `{u : g_i . u >= 0}` contains a nonzero vector.
fn cone_has_nonzero_point(normals: &[Vec<f64>], n: usize) -> bool {
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut objective = vec![0.0; n];
            objective[i] = sign;
            let mut p = LpProblem::new(objective, false);
            for g in normals {
                p.push(LpConstraint::ge(g.clone(), 0.0));
            }
            for k in 0..n {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                p.push(LpConstraint::le(e.clone(), 1.0));
                p.push(LpConstraint::ge(e, -1.0));
            }
            let sol = solve_lp(&p);
            if sol.is_optimal() && sol.value > 1e-9 {
                return true;
            }
        }
    }
    false
}
