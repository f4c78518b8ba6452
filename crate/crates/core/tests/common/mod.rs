#![allow(clippy::needless_range_loop)]

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdro_core::network::Layer;
use wdro_core::{ActivationKind, BoxDomain, LabeledSample, Mat, Mlp};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Mat {
    let data = (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect();
    Mat::new(rows, cols, data).unwrap()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random MLP on `[-1, 1]^n` with `widths.len()` hidden layers.
pub fn random_net(rng: &mut ChaCha8Rng, n: usize, widths: &[usize], k: usize, act: ActivationKind) -> Mlp {
    let mut layers = Vec::new();
    let mut prev = n;
    for &w in widths.iter().chain(std::iter::once(&k)) {
        let weight = uniform_mat(rng, w, prev, -1.0, 1.0);
        let bias = uniform_vec(rng, w, -0.5, 0.5);
        layers.push(Layer::new(weight, bias).unwrap());
        prev = w;
    }
    Mlp::new(layers, act, BoxDomain::uniform(n, -1.0, 1.0).unwrap()).unwrap()
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize, k: usize, count: usize) -> Vec<LabeledSample> {
    (0..count)
        .map(|i| LabeledSample::new(uniform_vec(rng, n, -1.0, 1.0), i % k))
        .collect()
}

pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v = uniform_vec(rng, n, -1.0, 1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Solve the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when (numerically) singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Maximize `c . x` over `{x : rows_i . x <= rhs_i}` (a bounded polytope) by
/// enumerating every vertex. `None` when no vertex is feasible.
pub fn vertex_enumeration_max(c: &[f64], rows: &[Vec<f64>], rhs: &[f64]) -> Option<f64> {
    let n = c.len();
    let m = rows.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    if n > m {
        return None;
    }
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| rhs[i]).collect();
        if let Some(x) = solve_square(a, b) {
            let feasible = rows
                .iter()
                .zip(rhs)
                .all(|(r, &h)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= h + 1e-9);
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // Next n-subset in lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// One-hidden-layer net with nonnegative hidden weights and biases and an
/// antisymmetric head `(w, -w)` (plus a zero row when `k == 3`).
pub fn monotone_net(rng: &mut ChaCha8Rng, n: usize, width: usize, k: usize) -> Mlp {
    let w1 = uniform_mat(rng, width, n, 0.0, 1.0);
    let b1 = uniform_vec(rng, width, 0.0, 0.5);
    let head = uniform_vec(rng, width, 0.0, 1.0);
    let mut rows = vec![head.clone(), head.iter().map(|v| -v).collect::<Vec<_>>()];
    if k == 3 {
        rows.push(vec![0.0; width]);
    }
    let w2 = Mat::new(k, width, rows.concat()).unwrap();
    Mlp::new(
        vec![Layer::new(w1, b1).unwrap(), Layer::new(w2, vec![0.0; k]).unwrap()],
        ActivationKind::Relu,
        BoxDomain::uniform(n, -1.0, 1.0).unwrap(),
    )
    .unwrap()
}

pub fn mean_loss(net: &Mlp, data: &[LabeledSample], kind: wdro_core::LossKind) -> f64 {
    data.iter()
        .map(|s| wdro_core::loss::loss(kind, &net.forward(&s.x).unwrap(), s.label).unwrap())
        .sum::<f64>()
        / data.len() as f64
}
