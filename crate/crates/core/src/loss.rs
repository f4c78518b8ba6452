//! Classification losses on logits.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::NormKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `-log softmax(z)_k`.
    CrossEntropy,
    /// Unnormalized margin `max_{j != k} z_j - z_k`.
    DlrMargin,
}

impl LossKind {
    pub const ALL: [LossKind; 2] = [LossKind::CrossEntropy, LossKind::DlrMargin];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "ce",
            LossKind::DlrMargin => "dlr",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ce" | "cross-entropy" | "crossentropy" => Ok(LossKind::CrossEntropy),
            "dlr" | "dlr-margin" | "margin" => Ok(LossKind::DlrMargin),
            _ => Err(Error::InvalidConfig("loss must be ce or dlr")),
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest entry other than `k`, lowest index on ties.
pub fn argmax_excluding(v: &[f64], k: usize) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if i == k {
            continue;
        }
        match best {
            Some(b) if x <= v[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// `log sum exp(z)` with the max shift.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + libm::log(z.iter().map(|&v| libm::exp(v - m)).sum::<f64>())
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| libm::exp(v - m)).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

fn check_class(logits: &[f64], k: usize) -> Result<()> {
    if logits.len() < 2 {
        return Err(Error::InvalidConfig("losses need at least two classes"));
    }
    if k >= logits.len() {
        return Err(Error::ClassOutOfRange {
            class: k,
            classes: logits.len(),
        });
    }
    Ok(())
}

pub fn loss(kind: LossKind, logits: &[f64], k: usize) -> Result<f64> {
    check_class(logits, k)?;
    Ok(match kind {
        LossKind::CrossEntropy => log_sum_exp(logits) - logits[k],
        LossKind::DlrMargin => {
            let j = argmax_excluding(logits, k).expect("two or more classes");
            logits[j] - logits[k]
        }
    })
}

/// Gradient of the loss with respect to the logits.
pub fn loss_logit_gradient(kind: LossKind, logits: &[f64], k: usize) -> Result<Vec<f64>> {
    check_class(logits, k)?;
    Ok(match kind {
        LossKind::CrossEntropy => {
            let mut g = softmax(logits);
            g[k] -= 1.0;
            g
        }
        LossKind::DlrMargin => {
            let j = argmax_excluding(logits, k).expect("two or more classes");
            let mut g = vec![0.0; logits.len()];
            g[j] = 1.0;
            g[k] = -1.0;
            g
        }
    })
}

/// Lipschitz modulus of both losses with respect to `||.||_s` on the logits.
///
/// Both logit gradients have the form `p - e_k` with `p` in the probability
/// simplex, so their dual-norm size is at most `2^{1/q}` with `q` the dual
/// exponent of `s`: 2 for `s = inf`, `sqrt 2` for `s = 2` and 1 for `s = 1`.
pub fn sensitivity_factor(s: NormKind) -> f64 {
    match s.dual() {
        NormKind::L1 => 2.0,
        NormKind::L2 => core::f64::consts::SQRT_2,
        NormKind::LInf => 1.0,
    }
}

/// Limit of `(loss(z + a v) - loss(z)) / a` as `a -> inf`.
pub fn asymptotic_rate(kind: LossKind, v: &[f64], k: usize) -> Result<f64> {
    check_class(v, k)?;
    Ok(match kind {
        LossKind::CrossEntropy => v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v[k],
        LossKind::DlrMargin => {
            let j = argmax_excluding(v, k).expect("two or more classes");
            v[j] - v[k]
        }
    })
}

/// Predicted class (lowest index on ties).
pub fn predict(logits: &[f64]) -> usize {
    argmax(logits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        for k in 2..6 {
            let z = vec![0.0; k];
            assert!(close(loss(LossKind::CrossEntropy, &z, 1).unwrap(), libm::log(k as f64), 1e-15));
        }
    }

    #[test]
    fn margin_examples() {
        assert_eq!(loss(LossKind::DlrMargin, &[5.0, 1.0, 1.0], 0).unwrap(), -4.0);
        assert_eq!(loss(LossKind::DlrMargin, &[0.0, 0.0], 0).unwrap(), 0.0);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(
            loss_logit_gradient(LossKind::CrossEntropy, &[0.0, 0.0], 0).unwrap(),
            [-0.5, 0.5]
        );
        assert_eq!(
            loss_logit_gradient(LossKind::DlrMargin, &[5.0, 1.0, 2.0], 0).unwrap(),
            [-1.0, 0.0, 1.0]
        );
    }

    #[test]
    fn margin_gradient_ties_pick_lowest_rival() {
        let g = loss_logit_gradient(LossKind::DlrMargin, &[0.0, 3.0, 3.0], 0).unwrap();
        assert_eq!(g, [-1.0, 1.0, 0.0]);
    }

    #[test]
    fn cross_entropy_survives_huge_logits() {
        let v = loss(LossKind::CrossEntropy, &[1000.0, -1000.0], 1).unwrap();
        assert!(close(v, 2000.0, 1e-9));
    }

    #[test]
    fn sensitivity_factors() {
        assert_eq!(sensitivity_factor(NormKind::LInf), 2.0);
        assert_eq!(sensitivity_factor(NormKind::L1), 1.0);
        let f = sensitivity_factor(NormKind::L2);
        assert!(close(f * f, 2.0, 1e-15));
    }

    #[test]
    fn margin_attains_the_inf_norm_factor() {
        // z = (0, 0) -> (-1, 1) moves the margin for class 0 by 2 while the
        // sup-norm of the logit change is 1.
        let a = loss(LossKind::DlrMargin, &[0.0, 0.0], 0).unwrap();
        let b = loss(LossKind::DlrMargin, &[-1.0, 1.0], 0).unwrap();
        assert_eq!((b - a).abs(), sensitivity_factor(NormKind::LInf));
    }

    #[test]
    fn rate_examples() {
        assert_eq!(asymptotic_rate(LossKind::CrossEntropy, &[2.0, 5.0, 1.0], 0).unwrap(), 3.0);
        assert_eq!(asymptotic_rate(LossKind::CrossEntropy, &[5.0, 1.0, 1.0], 0).unwrap(), 0.0);
        assert_eq!(asymptotic_rate(LossKind::DlrMargin, &[5.0, 1.0, 1.0], 0).unwrap(), -4.0);
    }

    #[test]
    fn rejects_bad_classes() {
        assert!(loss(LossKind::CrossEntropy, &[1.0], 0).is_err());
        assert_eq!(
            loss(LossKind::DlrMargin, &[1.0, 2.0], 2),
            Err(Error::ClassOutOfRange { class: 2, classes: 2 })
        );
    }
}
