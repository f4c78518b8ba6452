//! Small fully connected classifiers `x -> logits`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, Mat};

/// Pre-activations with magnitude at or below this are treated as kinks.
pub const KINK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Relu,
    /// Exact Gaussian-CDF form `z * Phi(z)`.
    Gelu,
    /// `z * sigmoid(z)`.
    Silu,
}

impl ActivationKind {
    pub fn is_smooth(self) -> bool {
        !matches!(self, ActivationKind::Relu)
    }

    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::Gelu => z * std_normal_cdf(z),
            ActivationKind::Silu => z * sigmoid(z),
        }
    }

    /// Derivative; for ReLU the kink is resolved to 0.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Gelu => std_normal_cdf(z) + z * std_normal_pdf(z),
            ActivationKind::Silu => {
                let s = sigmoid(z);
                s * (1.0 + z * (1.0 - s))
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Silu => "silu",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(ActivationKind::Relu),
            "gelu" => Ok(ActivationKind::Gelu),
            "silu" | "swish" => Ok(ActivationKind::Silu),
            _ => Err(Error::InvalidConfig("activation must be relu, gelu or silu")),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / core::f64::consts::SQRT_2))
}

fn std_normal_pdf(z: f64) -> f64 {
    libm::exp(-0.5 * z * z) / libm::sqrt(2.0 * core::f64::consts::PI)
}

/// Axis-aligned input domain `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        check_finite(&lo)?;
        check_finite(&hi)?;
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidConfig("domain box has lo > hi"));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        BoxDomain::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    /// Map a point of the unit cube `[0,1]^n` into the box.
    pub fn from_unit(&self, t: &[f64]) -> Vec<f64> {
        t.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (l, h))| l + t * (h - l))
            .collect()
    }
}

/// One affine layer `z -> W z + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Mat,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weight: Mat, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::ShapeMismatch("bias length differs from weight rows"));
        }
        check_finite(&bias)?;
        Ok(Layer { weight, bias })
    }

    fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = self.weight.matvec(z);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        out
    }
}

/// Activation pattern of every hidden unit: `diags[h][j]` is true when unit
/// `j` of hidden layer `h` is active.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mask {
    diags: Vec<Vec<bool>>,
}

impl Mask {
    pub fn new(diags: Vec<Vec<bool>>) -> Self {
        Mask { diags }
    }

    pub fn filled(widths: &[usize], active: bool) -> Self {
        Mask {
            diags: widths.iter().map(|&w| vec![active; w]).collect(),
        }
    }

    /// Unpack `bits` (least significant bit = first unit of the first layer).
    pub fn from_bits(widths: &[usize], bits: u64) -> Self {
        let mut k = 0;
        let diags = widths
            .iter()
            .map(|&w| {
                (0..w)
                    .map(|_| {
                        let b = bits >> k & 1 == 1;
                        k += 1;
                        b
                    })
                    .collect()
            })
            .collect();
        Mask { diags }
    }

    pub fn diags(&self) -> &[Vec<bool>] {
        &self.diags
    }

    pub fn layer(&self, h: usize) -> &[bool] {
        &self.diags[h]
    }

    pub fn widths(&self) -> Vec<usize> {
        self.diags.iter().map(|d| d.len()).collect()
    }

    pub fn active_units(&self) -> usize {
        self.diags.iter().flatten().filter(|&&b| b).count()
    }

    /// Layer-separated 0/1 string such as `10|0110`.
    pub fn to_code(&self) -> alloc::string::String {
        let mut s = alloc::string::String::new();
        for (h, d) in self.diags.iter().enumerate() {
            if h > 0 {
                s.push('|');
            }
            for &b in d {
                s.push(if b { '1' } else { '0' });
            }
        }
        s
    }

    pub fn from_code(code: &str) -> Result<Self> {
        let diags = code
            .split('|')
            .filter(|part| !part.is_empty() || code.is_empty())
            .map(|part| {
                part.chars()
                    .map(|c| match c {
                        '1' => Ok(true),
                        '0' => Ok(false),
                        _ => Err(Error::InvalidConfig("mask code must be 0/1 digits")),
                    })
                    .collect::<Result<Vec<bool>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mask { diags })
    }

    fn as_scale(&self, h: usize) -> Vec<f64> {
        self.diags[h].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// A labeled input `(x, y)` with `y` a class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub label: usize,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, label: usize) -> Self {
        LabeledSample { x, label }
    }
}

/// Multilayer perceptron `W_{H+1} act(... act(W_1 x + b_1) ...) + b_{H+1}`
/// over a box-shaped input domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    activation: ActivationKind,
    domain: BoxDomain,
}

impl Mlp {
    pub fn new(layers: Vec<Layer>, activation: ActivationKind, domain: BoxDomain) -> Result<Self> {
        let first = layers
            .first()
            .ok_or(Error::ShapeMismatch("network needs at least one layer"))?;
        if first.weight.cols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.weight.cols(),
                found: domain.dim(),
            });
        }
        for pair in layers.windows(2) {
            if pair[1].weight.cols() != pair[0].weight.rows() {
                return Err(Error::ShapeMismatch("adjacent layer shapes do not chain"));
            }
        }
        Ok(Mlp {
            layers,
            activation,
            domain,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.rows()
    }

    /// Number of hidden layers `H`.
    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.hidden_layers()]
            .iter()
            .map(|l| l.weight.rows())
            .collect()
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_relu(&self) -> Result<()> {
        if self.activation.is_smooth() {
            Err(Error::WrongActivation)
        } else {
            Ok(())
        }
    }

    /// Logits `theta(x)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut z = x.to_vec();
        let last = self.layers.len() - 1;
        for (h, layer) in self.layers.iter().enumerate() {
            z = layer.apply(&z);
            if h < last {
                for v in &mut z {
                    *v = self.activation.apply(*v);
                }
            }
        }
        Ok(z)
    }

    /// Hidden-layer values before the nonlinearity, `pre_1(x) .. pre_H(x)`.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut pres = Vec::with_capacity(self.hidden_layers());
        let mut z = x.to_vec();
        for layer in &self.layers[..self.hidden_layers()] {
            let pre = layer.apply(&z);
            z = pre.iter().map(|&v| self.activation.apply(v)).collect();
            pres.push(pre);
        }
        Ok(pres)
    }

    /// Activation mask at `x`, and whether any pre-activation sits within
    /// [`KINK_TOLERANCE`] of zero.
    pub fn mask_at(&self, x: &[f64]) -> Result<(Mask, bool)> {
        self.check_relu()?;
        let pres = self.pre_activations(x)?;
        let degenerate = pres.iter().flatten().any(|v| v.abs() <= KINK_TOLERANCE);
        let diags = pres
            .iter()
            .map(|p| p.iter().map(|&v| v > 0.0).collect())
            .collect();
        Ok((Mask { diags }, degenerate))
    }

    fn check_mask(&self, mask: &Mask) -> Result<()> {
        if mask.widths() != self.hidden_widths() {
            return Err(Error::ShapeMismatch("mask widths differ from hidden widths"));
        }
        Ok(())
    }

    /// `J_D = W_{H+1} D_H W_H ... D_1 W_1`.
    pub fn masked_jacobian(&self, mask: &Mask) -> Result<Mat> {
        self.check_relu()?;
        self.check_mask(mask)?;
        let mut acc = self.layers[0].weight.clone();
        for h in 0..self.hidden_layers() {
            acc = self.layers[h + 1]
                .weight
                .matmul(&acc.scale_rows(&mask.as_scale(h)));
        }
        Ok(acc)
    }

    /// Input Jacobian `d theta / d x`, `K x n`. Fails on ReLU kinks.
    pub fn jacobian(&self, x: &[f64]) -> Result<Mat> {
        if self.activation.is_smooth() {
            let pres = self.pre_activations(x)?;
            let mut acc = self.layers[0].weight.clone();
            for (h, pre) in pres.iter().enumerate() {
                let d: Vec<f64> = pre.iter().map(|&v| self.activation.derivative(v)).collect();
                acc = self.layers[h + 1].weight.matmul(&acc.scale_rows(&d));
            }
            Ok(acc)
        } else {
            let (mask, degenerate) = self.mask_at(x)?;
            if degenerate {
                return Err(Error::DegeneratePoint);
            }
            self.masked_jacobian(&mask)
        }
    }

    /// Jacobian that resolves ReLU kinks to the inactive side instead of
    /// failing. The flag reports whether a kink was hit.
    pub fn jacobian_resolving_kinks(&self, x: &[f64]) -> Result<(Mat, bool)> {
        if self.activation.is_smooth() {
            return Ok((self.jacobian(x)?, false));
        }
        let (mask, degenerate) = self.mask_at(x)?;
        Ok((self.masked_jacobian(&mask)?, degenerate))
    }
}
