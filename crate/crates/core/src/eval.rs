//! Classification metrics and ROC curves over scored predictions.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scored {
    pub probability: f64,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_mean: Option<f64>,
}

impl Scored {
    pub fn new(probability: f64, label: u8) -> Self {
        Scored {
            probability,
            label,
            truth_mean: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub samples: usize,
    pub threshold: f64,
    pub accuracy: f64,
    pub mse_hard_label: f64,
    pub mse_truth_mean: Option<f64>,
    pub auc: Option<f64>,
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub f1_pos: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub confusion: Confusion,
    /// Metrics whose denominator was zero and were reported as 0.
    pub undefined: Vec<String>,
    pub roc_points: Vec<RocPoint>,
}

fn check(scored: &[Scored]) -> Result<()> {
    if scored.is_empty() {
        return Err(Error::invalid("no scored rows"));
    }
    for s in scored {
        if s.label > 1 {
            return Err(Error::invalid(format!("label must be 0 or 1, got {}", s.label)));
        }
        if !(0.0..=1.0).contains(&s.probability) {
            return Err(Error::invalid(format!(
                "probability {} outside [0, 1]",
                s.probability
            )));
        }
    }
    Ok(())
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Threshold metrics; `auc` and `roc_points` are left empty.
pub fn binary_metrics(scored: &[Scored], threshold: f64) -> Result<EvalReport> {
    check(scored)?;
    let mut c = Confusion::default();
    for s in scored {
        match (s.probability >= threshold, s.label == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let mut undefined = Vec::new();
    let precision_pos = ratio(c.tp, c.tp + c.fp, "precisionPos", &mut undefined);
    let recall_pos = ratio(c.tp, c.tp + c.fn_, "recallPos", &mut undefined);
    let precision_neg = ratio(c.tn, c.tn + c.fn_, "precisionNeg", &mut undefined);
    let recall_neg = ratio(c.tn, c.tn + c.fp, "recallNeg", &mut undefined);
    let n = scored.len() as f64;
    let (s1, s0) = ((c.tp + c.fn_) as f64 / n, (c.tn + c.fp) as f64 / n);
    let truth_mean = mse(scored, MseTarget::TruthMean).ok();
    Ok(EvalReport {
        samples: scored.len(),
        threshold,
        accuracy: (c.tp + c.tn) as f64 / n,
        mse_hard_label: mse(scored, MseTarget::HardLabel)?,
        mse_truth_mean: truth_mean,
        auc: None,
        precision_pos,
        recall_pos,
        f1_pos: f1(precision_pos, recall_pos),
        precision_weighted: s1 * precision_pos + s0 * precision_neg,
        recall_weighted: s1 * recall_pos + s0 * recall_neg,
        f1_weighted: s1 * f1(precision_pos, recall_pos) + s0 * f1(precision_neg, recall_neg),
        confusion: c,
        undefined,
        roc_points: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseTarget {
    HardLabel,
    TruthMean,
}

pub fn mse(scored: &[Scored], target: MseTarget) -> Result<f64> {
    check(scored)?;
    let mut sum = 0.0;
    for s in scored {
        let t = match target {
            MseTarget::HardLabel => s.label as f64,
            MseTarget::TruthMean => s
                .truth_mean
                .ok_or_else(|| Error::invalid("truthMean missing for MSE"))?,
        };
        sum += (s.probability - t).powi(2);
    }
    Ok(sum / scored.len() as f64)
}

fn class_counts(scored: &[Scored]) -> Result<(usize, usize)> {
    check(scored)?;
    let pos = scored.iter().filter(|s| s.label == 1).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("ROC/AUC need both classes present"));
    }
    Ok((neg, pos))
}

/// One point per distinct score, descending, after a `(0, 0)` start whose
/// threshold is one above the highest score.
pub fn roc_curve(scored: &[Scored]) -> Result<Vec<RocPoint>> {
    let (neg, pos) = class_counts(scored)?;
    let mut sorted: Vec<&Scored> = scored.iter().collect();
    sorted.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: sorted[0].probability + 1.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].probability;
        while i < sorted.len() && sorted[i].probability == t {
            if sorted[i].label == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: t,
        });
    }
    Ok(points)
}

pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

/// Mann-Whitney statistic from average ranks; ties count one half.
pub fn auc(scored: &[Scored]) -> Result<f64> {
    let (neg, pos) = class_counts(scored)?;
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&a, &b| scored[a].probability.total_cmp(&scored[b].probability));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scored[idx[j]].probability == scored[idx[i]].probability {
            j += 1;
        }
        // ranks i+1..=j share their average
        let avg = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = idx[i..j].iter().filter(|&&k| scored[k].label == 1).count();
        rank_sum_pos += avg * pos_in_group as f64;
        i = j;
    }
    let (n0, n1) = (neg as f64, pos as f64);
    Ok((rank_sum_pos - n1 * (n1 + 1.0) / 2.0) / (n0 * n1))
}

/// Threshold metrics plus AUC and the ROC curve.
pub fn evaluate(scored: &[Scored], threshold: f64) -> Result<EvalReport> {
    let mut report = binary_metrics(scored, threshold)?;
    report.auc = Some(auc(scored)?);
    report.roc_points = roc_curve(scored)?;
    Ok(report)
}

pub const TABLE_CSV_HEADER: [&str; 8] = [
    "model", "dataset", "accuracy", "mse", "auc", "precision", "recall", "f1",
];

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// A results-table row using the hard-label MSE and weighted averages.
    pub fn table_row(&self, model: &str, dataset: &str) -> Vec<String> {
        let f = |v: f64| format!("{v:.4}");
        vec![
            model.to_string(),
            dataset.to_string(),
            f(self.accuracy),
            f(self.mse_hard_label),
            self.auc.map(f).unwrap_or_default(),
            f(self.precision_weighted),
            f(self.recall_weighted),
            f(self.f1_weighted),
        ]
    }

    pub fn write_table_csv<W: Write>(&self, out: W, model: &str, dataset: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TABLE_CSV_HEADER)?;
        w.write_record(self.table_row(model, dataset))?;
        w.flush().map_err(|e| Error::io("<table csv>", e))?;
        Ok(())
    }

    pub fn write_roc_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fpr", "tpr", "threshold"])?;
        for p in &self.roc_points {
            w.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<roc csv>", e))?;
        Ok(())
    }
}
