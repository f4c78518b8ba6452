//! JSON reports and CSV tables. Field names are frozen; see FORMATS.md.
//! Non-finite values (an empty maximum is `-inf`) are written as `null`.

use serde::{Deserialize, Serialize};

use wdro_core::attack::{AdvDistribution, AdvPair, AttackTrace, Evaluation};
use wdro_core::certify::Witness;
use wdro_core::transport::{exact_w1_small, CanonicalCoupling, DiscreteDist, EXACT_ATOM_CAP};
use wdro_core::{LabeledSample, LossKind, NormKind};

use crate::error::{Error, Result};
use crate::fmt::fmt_f64;
use crate::dataset::write_dataset;
use crate::harness::{Artifact, Certificate, ConvergenceSeries, ExperimentConfig, PipelineRun, Sandwich};
use crate::model_io::write_model;

pub const CERTIFICATE_FORMAT: &str = "wdro-certificate 1";
pub const ADV_FORMAT: &str = "wdro-adv 1";
pub const EVAL_FORMAT: &str = "wdro-eval 1";
pub const ONE_DIM_FORMAT: &str = "wdro-remark1 1";

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn opt_field(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessDto {
    pub mask: String,
    pub rival: usize,
    pub class: usize,
    pub u: Vec<f64>,
    pub value: f64,
    pub sample: Option<usize>,
}

impl From<&Witness> for WitnessDto {
    fn from(w: &Witness) -> Self {
        WitnessDto {
            mask: w.mask.to_code(),
            rival: w.rival,
            class: w.class,
            u: w.u.clone(),
            value: w.value,
            sample: w.sample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRow {
    pub id: usize,
    pub mask: String,
    pub provenance: String,
    pub op_norm: f64,
    pub cone_value: Option<f64>,
    pub rival: Option<usize>,
    pub class: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichDto {
    pub loss: String,
    pub epsilon: f64,
    pub clean_loss: f64,
    pub lower: Option<f64>,
    pub worst_case_loss: f64,
    pub upper: f64,
    pub root: Option<usize>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub tol: Option<f64>,
    pub canonical_cost: Option<f64>,
}

impl From<&Sandwich> for SandwichDto {
    fn from(s: &Sandwich) -> Self {
        let wc = s.worst_case.as_ref();
        SandwichDto {
            loss: s.kind.as_str().into(),
            epsilon: s.epsilon,
            clean_loss: s.clean_loss,
            lower: s.lower,
            worst_case_loss: s.worst_case_loss,
            upper: s.upper,
            root: wc.map(|w| w.root),
            alpha: wc.map(|w| w.alpha),
            eta: wc.map(|w| w.eta),
            tol: wc.map(|w| w.tol),
            canonical_cost: wc.and_then(|w| w.canonical_cost(w.norm).ok()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub format: String,
    /// `masks` for ReLU nets, `smooth-ascent` for GELU/SiLU.
    pub method: String,
    pub activation: String,
    pub r: String,
    pub s: String,
    pub exhaustive: bool,
    pub inventory_size: usize,
    #[serde(rename = "L_upper")]
    pub upper: f64,
    /// `certified` or `estimate`.
    #[serde(rename = "L_status")]
    pub upper_status: String,
    pub l_lower: Option<f64>,
    #[serde(rename = "l_N")]
    pub l_n: Option<f64>,
    pub tight: bool,
    pub cone_condition: bool,
    pub direction_condition: bool,
    pub witness: Option<WitnessDto>,
    pub practical_witness: Option<WitnessDto>,
    pub degenerate_samples: usize,
    pub per_mask: Vec<MaskRow>,
    pub sandwich: Option<SandwichDto>,
}

pub fn mask_rows(cert: &Certificate) -> Vec<MaskRow> {
    cert.masks
        .iter()
        .map(|m| {
            let w = m.lower.witness.as_ref();
            MaskRow {
                id: m.id,
                mask: m.code.clone(),
                provenance: m.provenance.as_str().into(),
                op_norm: m.op_norm,
                cone_value: finite(m.lower.value),
                rival: w.map(|w| w.rival),
                class: w.map(|w| w.class),
            }
        })
        .collect()
}

pub fn certificate_report(cert: &Certificate, sandwich: Option<&Sandwich>) -> CertificateReport {
    let t = cert.tightness.as_ref();
    let smooth = cert.activation.is_smooth();
    CertificateReport {
        format: CERTIFICATE_FORMAT.into(),
        method: if smooth { "smooth-ascent" } else { "masks" }.into(),
        activation: cert.activation.as_str().into(),
        r: cert.r.as_str().into(),
        s: cert.s.as_str().into(),
        exhaustive: cert.exhaustive,
        inventory_size: cert.masks.len(),
        upper: cert.upper,
        upper_status: if cert.exhaustive { "certified" } else { "estimate" }.into(),
        l_lower: finite(cert.lower),
        l_n: cert.practical_value().and_then(finite),
        tight: t.is_some_and(|t| t.tight),
        cone_condition: t.is_some_and(|t| t.cone_condition),
        direction_condition: t.is_some_and(|t| t.direction_condition),
        witness: cert.lower_witness.as_ref().map(WitnessDto::from),
        practical_witness: cert
            .practical
            .as_ref()
            .and_then(|p| p.witness.as_ref())
            .map(WitnessDto::from),
        degenerate_samples: cert.degenerate_samples,
        per_mask: mask_rows(cert),
        sandwich: sandwich.map(SandwichDto::from),
    }
}

pub fn mask_csv(rows: &[MaskRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "mask", "provenance", "op_norm", "cone_value", "rival", "class"])?;
    for r in rows {
        w.write_record([
            r.id.to_string(),
            r.mask.clone(),
            r.provenance.clone(),
            fmt_f64(r.op_norm),
            opt_field(r.cone_value),
            r.rival.map(|v| v.to_string()).unwrap_or_default(),
            r.class.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::io("<csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDto {
    pub anchor: usize,
    pub label: usize,
    pub adv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvReport {
    pub format: String,
    /// `wda` or `pgd`.
    pub method: String,
    pub kappa: f64,
    pub epsilon: f64,
    pub r: String,
    pub anchor_weight: f64,
    pub adv_weight: f64,
    pub max_displacement: f64,
    pub canonical_cost: f64,
    pub pairs: Vec<PairDto>,
}

pub fn adv_report(dist: &AdvDistribution, method: &str) -> Result<AdvReport> {
    Ok(AdvReport {
        format: ADV_FORMAT.into(),
        method: method.into(),
        kappa: dist.kappa,
        epsilon: dist.epsilon,
        r: dist.norm.as_str().into(),
        anchor_weight: dist.anchor_weight(),
        adv_weight: dist.adv_weight(),
        max_displacement: dist.max_displacement(),
        canonical_cost: dist.canonical_cost(dist.norm)?,
        pairs: dist
            .pairs
            .iter()
            .map(|p| PairDto {
                anchor: p.anchor_index,
                label: p.anchor.label,
                adv: p.adv.clone(),
            })
            .collect(),
    })
}

/// Rebuild a distribution from its report and the dataset it indexes.
pub fn adv_from_report(report: &AdvReport, data: &[LabeledSample]) -> Result<AdvDistribution> {
    if report.format != ADV_FORMAT {
        return Err(Error::Usage(format!("expected format `{ADV_FORMAT}`, found `{}`", report.format)));
    }
    let norm: NormKind = report.r.parse()?;
    let mut pairs = Vec::with_capacity(report.pairs.len());
    for p in &report.pairs {
        let anchor = data
            .get(p.anchor)
            .ok_or_else(|| Error::Usage(format!("anchor {} is outside the dataset", p.anchor)))?;
        if anchor.label != p.label {
            return Err(Error::Usage(format!("anchor {} changed label", p.anchor)));
        }
        if p.adv.len() != anchor.x.len() {
            return Err(Error::Usage(format!("adversarial point {} has the wrong dimension", p.anchor)));
        }
        pairs.push(AdvPair {
            anchor_index: p.anchor,
            anchor: anchor.clone(),
            adv: p.adv.clone(),
        });
    }
    if pairs.is_empty() {
        return Err(Error::Usage("distribution has no pairs".into()));
    }
    Ok(AdvDistribution {
        pairs,
        kappa: report.kappa,
        epsilon: report.epsilon,
        norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub loss: String,
    pub kappa: f64,
    pub epsilon: f64,
    pub r: String,
    pub expected_loss: f64,
    pub weighted_accuracy: f64,
    pub clean_accuracy: f64,
    pub adv_accuracy: f64,
    pub canonical_cost: f64,
    /// Exact distance to the data; `null` above the solver's atom cap.
    pub exact_w1: Option<f64>,
    /// Every pair within `kappa * epsilon` and the canonical cost within
    /// `epsilon` (both up to `1e-9`).
    pub budget_feasible: bool,
}

pub fn eval_report(dist: &AdvDistribution, eval: &Evaluation, kind: LossKind) -> Result<EvalReport> {
    let canonical = dist.canonical_cost(dist.norm)?;
    let n = dist.pairs.len();
    let exact = if 2 * n <= EXACT_ATOM_CAP {
        let p = DiscreteDist::from_triples(dist.atoms())?;
        let pts: Vec<(Vec<f64>, usize)> = dist.pairs.iter().map(|p| (p.anchor.x.clone(), p.anchor.label)).collect();
        let q = DiscreteDist::uniform(&pts)?;
        Some(exact_w1_small(&p, &q, dist.norm)?)
    } else {
        None
    };
    let tol = 1e-9;
    Ok(EvalReport {
        format: EVAL_FORMAT.into(),
        loss: kind.as_str().into(),
        kappa: dist.kappa,
        epsilon: dist.epsilon,
        r: dist.norm.as_str().into(),
        expected_loss: eval.expected_loss,
        weighted_accuracy: eval.weighted_accuracy,
        clean_accuracy: eval.clean_accuracy,
        adv_accuracy: eval.adv_accuracy,
        canonical_cost: canonical,
        exact_w1: exact,
        budget_feasible: dist.max_displacement() <= dist.kappa * dist.epsilon + tol && canonical <= dist.epsilon + tol,
    })
}

/// `sample,iter,rival,x0,...`; PGD rows leave `rival` empty.
pub fn trace_csv(traces: &[AttackTrace], dim: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sample".to_string(), "iter".into(), "rival".into()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (i, t) in traces.iter().enumerate() {
        for (it, x) in t.iterates.iter().enumerate() {
            let mut row = vec![
                i.to_string(),
                it.to_string(),
                t.rivals.get(it).map(|j| j.to_string()).unwrap_or_default(),
            ];
            row.extend(x.iter().map(|&v| fmt_f64(v)));
            w.write_record(&row)?;
        }
    }
    finish(w)
}

/// `masks,mask,provenance,mask_value,cumulative_l,L_upper,pgd_gain_per_eps`.
pub fn convergence_csv(series: &ConvergenceSeries) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["masks", "mask", "provenance", "mask_value", "cumulative_l", "L_upper", "pgd_gain_per_eps"])?;
    for p in &series.points {
        w.write_record([
            p.masks.to_string(),
            p.code.clone(),
            p.provenance.as_str().into(),
            opt_field(finite(p.mask_value)),
            opt_field(finite(p.cumulative_l)),
            fmt_f64(series.upper),
            fmt_f64(series.pgd_gain_per_eps),
        ])?;
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimRow {
    pub epsilon: f64,
    pub oracle: f64,
    pub closed_form: f64,
    pub lipschitz_certificate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimReport {
    pub format: String,
    pub grid: usize,
    pub rows: Vec<OneDimRow>,
}

/// Render every output of a pipeline run, in a fixed order.
pub fn pipeline_artifacts(run: &PipelineRun, cfg: &ExperimentConfig) -> Result<Vec<Artifact>> {
    let cert = certificate_report(&run.certificate, Some(&run.sandwich));
    Ok(vec![
        Artifact { name: "model.txt", contents: write_model(&run.net) },
        Artifact { name: "data.csv", contents: write_dataset(&run.data)? },
        Artifact { name: "certificate.json", contents: to_json(&cert)? },
        Artifact { name: "per_mask.csv", contents: mask_csv(&cert.per_mask)? },
        Artifact { name: "adv.json", contents: to_json(&adv_report(&run.adv, "wda")?)? },
        Artifact { name: "trace.csv", contents: trace_csv(&run.traces, run.net.input_dim())? },
        Artifact { name: "eval.json", contents: to_json(&eval_report(&run.adv, &run.evaluation, cfg.loss)?)? },
        Artifact { name: "convergence.csv", contents: convergence_csv(&run.convergence)? },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neg_infinity_becomes_null() {
        let row = MaskRow {
            id: 0,
            mask: "01".into(),
            provenance: "dataset".into(),
            op_norm: 1.0,
            cone_value: finite(f64::NEG_INFINITY),
            rival: None,
            class: None,
        };
        let json = serde_json::to_string(&row).unwrap();
        assert!(json.contains("\"cone_value\":null"));
        assert_eq!(mask_csv(&[row]).unwrap(), "id,mask,provenance,op_norm,cone_value,rival,class\n0,01,dataset,1,,,\n");
    }
}
