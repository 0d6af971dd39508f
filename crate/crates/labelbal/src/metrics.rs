//! Evaluation: label-based mean accuracy (mA), instance-based precision /
//! recall / F1, and label-mean bucket diagnostics.
//!
//! Conventions, fixed here and relied on by the tests:
//! - A positive prediction is `probability > threshold` (strict).
//! - Instance precision/recall terms with an empty denominator contribute 0
//!   to the unconditional mean over samples.
//! - An attribute with no positives (or no negatives) in the split keeps its
//!   defined accuracy half, scores 0 on the undefined half, and is flagged
//!   degenerate.

use serde::{Deserialize, Serialize};

use crate::datagen::{LabelMatrix, LabelStats};
use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct AttrConfusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SampleConfusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub threshold: f64,
    /// Mean over attributes of (positive recall + negative recall) / 2.
    pub ma: f64,
    pub per_attribute_ma: Vec<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_attribute_confusion: Vec<AttrConfusion>,
    pub per_sample_confusion: Vec<SampleConfusion>,
    /// Attributes whose eval split lacks positives or negatives.
    pub degenerate_attributes: Vec<bool>,
}

pub fn evaluate(probabilities: &Matrix, y: &LabelMatrix, threshold: f64) -> Result<EvalReport> {
    let n = y.rows();
    let c = y.cols();
    if n == 0 {
        return Err(Error::InvalidInput("empty dataset".to_string()));
    }
    if probabilities.rows() != n || probabilities.cols() != c {
        return Err(Error::Dim(format!(
            "probabilities {}x{} vs labels {}x{}",
            probabilities.rows(),
            probabilities.cols(),
            n,
            c
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold {threshold} outside (0, 1)"
        )));
    }
    if probabilities
        .data()
        .iter()
        .any(|&p| !(0.0..=1.0).contains(&p))
    {
        return Err(Error::InvalidInput(
            "probabilities must lie in [0, 1]".to_string(),
        ));
    }

    let mut attr = vec![AttrConfusion::default(); c];
    let mut samples = Vec::with_capacity(n);
    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    for i in 0..n {
        let mut s = SampleConfusion {
            tp: 0,
            fp: 0,
            fn_: 0,
        };
        for k in 0..c {
            let predicted = probabilities.get(i, k) > threshold;
            let actual = y.positive(i, k);
            match (predicted, actual) {
                (true, true) => {
                    attr[k].tp += 1;
                    s.tp += 1;
                }
                (true, false) => {
                    attr[k].fp += 1;
                    s.fp += 1;
                }
                (false, true) => {
                    attr[k].fn_ += 1;
                    s.fn_ += 1;
                }
                (false, false) => attr[k].tn += 1,
            }
        }
        if s.tp + s.fp > 0 {
            prec_sum += s.tp as f64 / (s.tp + s.fp) as f64;
        }
        if s.tp + s.fn_ > 0 {
            rec_sum += s.tp as f64 / (s.tp + s.fn_) as f64;
        }
        samples.push(s);
    }

    let mut per_attribute_ma = Vec::with_capacity(c);
    let mut degenerate = Vec::with_capacity(c);
    for conf in &attr {
        let pos = conf.tp + conf.fn_;
        let neg = conf.tn + conf.fp;
        let pos_half = if pos > 0 {
            conf.tp as f64 / pos as f64
        } else {
            0.0
        };
        let neg_half = if neg > 0 {
            conf.tn as f64 / neg as f64
        } else {
            0.0
        };
        per_attribute_ma.push(0.5 * (pos_half + neg_half));
        degenerate.push(pos == 0 || neg == 0);
    }
    let ma = per_attribute_ma.iter().sum::<f64>() / c as f64;

    let precision = prec_sum / n as f64;
    let recall = rec_sum / n as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };

    Ok(EvalReport {
        schema_version: crate::SCHEMA_VERSION,
        threshold,
        ma,
        per_attribute_ma,
        precision,
        recall,
        f1,
        per_attribute_confusion: attr,
        per_sample_confusion: samples,
        degenerate_attributes: degenerate,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BucketEntry {
    /// Bucket covers label means in `(lo, hi]`.
    pub lo: f64,
    pub hi: f64,
    pub attribute_count: usize,
    pub mean_ma: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedAttribute {
    pub attribute: usize,
    pub label_mean: f64,
    pub imbalance: f64,
    pub ma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_vs_baseline: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BucketReport {
    pub schema_version: u32,
    /// One entry per non-empty bucket; empty buckets are absent.
    pub curve: Vec<BucketEntry>,
    /// Attributes sorted by |label mean - 0.5| descending.
    pub ranked: Vec<RankedAttribute>,
}

/// Groups per-attribute mA by label-mean bucket. `bucket_edges` must be
/// strictly increasing in (0, 1]; bucket b covers `(edge_{b-1}, edge_b]` with
/// an implicit leading edge at 0.
pub fn ma_by_label_mean_buckets(
    report: &EvalReport,
    stats: &LabelStats,
    bucket_edges: &[f64],
    baseline: Option<&EvalReport>,
) -> Result<BucketReport> {
    let c = report.per_attribute_ma.len();
    if stats.label_means.len() != c {
        return Err(Error::Dim("stats attribute count".to_string()));
    }
    if bucket_edges.is_empty()
        || bucket_edges.windows(2).any(|w| w[0] >= w[1])
        || bucket_edges.iter().any(|&e| !(e > 0.0 && e <= 1.0))
    {
        return Err(Error::InvalidInput(
            "bucket edges must be strictly increasing in (0, 1]".to_string(),
        ));
    }
    if let Some(base) = baseline {
        if base.per_attribute_ma.len() != c {
            return Err(Error::Dim("baseline attribute count".to_string()));
        }
    }

    let mut curve = Vec::new();
    let mut lo = 0.0;
    for &hi in bucket_edges {
        let members: Vec<usize> = (0..c)
            .filter(|&k| stats.label_means[k] > lo && stats.label_means[k] <= hi)
            .collect();
        if !members.is_empty() {
            let mean_ma = members
                .iter()
                .map(|&k| report.per_attribute_ma[k])
                .sum::<f64>()
                / members.len() as f64;
            curve.push(BucketEntry {
                lo,
                hi,
                attribute_count: members.len(),
                mean_ma,
            });
        }
        lo = hi;
    }

    let mut ranked: Vec<RankedAttribute> = (0..c)
        .map(|k| RankedAttribute {
            attribute: k,
            label_mean: stats.label_means[k],
            imbalance: stats.imbalance[k],
            ma: report.per_attribute_ma[k],
            delta_vs_baseline: baseline.map(|b| report.per_attribute_ma[k] - b.per_attribute_ma[k]),
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.imbalance
            .partial_cmp(&a.imbalance)
            .unwrap()
            .then(a.attribute.cmp(&b.attribute))
    });

    Ok(BucketReport {
        schema_version: crate::SCHEMA_VERSION,
        curve,
        ranked,
    })
}
