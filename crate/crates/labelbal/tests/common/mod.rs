//! Independent oracles shared by the integration suites. Everything here is
//! deliberately written against the math, not against the library's
//! implementation path, so the two can disagree when one of them is wrong.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use labelbal::datagen::LabelMatrix;
use labelbal::metrics::EvalReport;
use labelbal::numkit::Matrix;

/// Dense cyclic Jacobi eigensolver for symmetric matrices. Returns
/// eigenvalues in descending order with matching unit eigenvectors.
pub fn jacobi_eigh(a: &Matrix) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()))
        .max(1e-300);
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (m[j][j], (0..n).map(|i| v[i][j]).collect()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = pairs.into_iter().map(|p| p.1).collect();
    (values, vectors)
}

/// Brute-force grid oracle for the balanced-sampling feasibility question.
///
/// Weights live on the simplex grid with step 0.02 (50 units, each sample
/// at least one unit). A label column is balanced when its positive mask
/// sums to exactly half the units. Returns, for sample count `n`, the set of
/// feasible single columns and feasible ordered column pairs, encoded as
/// bitmasks over samples.
pub struct GridOracle {
    pub n: usize,
    pub singles: Vec<bool>,
    pub pairs: Vec<bool>,
}

impl GridOracle {
    pub fn build(n: usize) -> GridOracle {
        const UNITS: usize = 50;
        let n_masks = 1usize << n;
        let mut singles = vec![false; n_masks];
        let mut pairs = vec![false; n_masks * n_masks];
        let mut units = vec![1usize; n];
        // Enumerate compositions of UNITS into n parts, each >= 1.
        enumerate_compositions(&mut units, 0, UNITS - n, &mut |u| {
            // Subset sums via the lowest-bit recursion.
            let mut sums = vec![0usize; n_masks];
            for mask in 1..n_masks {
                let low = mask.trailing_zeros() as usize;
                sums[mask] = sums[mask & (mask - 1)] + u[low];
            }
            let balanced: Vec<usize> = (0..n_masks)
                .filter(|&mask| sums[mask] * 2 == UNITS)
                .collect();
            for &m1 in &balanced {
                singles[m1] = true;
                for &m2 in &balanced {
                    pairs[m1 * n_masks + m2] = true;
                }
            }
        });
        GridOracle { n, singles, pairs }
    }

    pub fn single_feasible(&self, mask: usize) -> bool {
        self.singles[mask]
    }

    pub fn pair_feasible(&self, mask1: usize, mask2: usize) -> bool {
        self.pairs[mask1 * (1 << self.n) + mask2]
    }
}

fn enumerate_compositions(
    units: &mut Vec<usize>,
    index: usize,
    spare: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if index + 1 == units.len() {
        units[index] = 1 + spare;
        f(units);
        return;
    }
    for extra in 0..=spare {
        units[index] = 1 + extra;
        enumerate_compositions(units, index + 1, spare - extra, f);
    }
}

/// Label matrix from per-attribute sample bitmasks.
pub fn labels_from_masks(n: usize, masks: &[usize]) -> LabelMatrix {
    let rows: Vec<Vec<u8>> = (0..n)
        .map(|i| masks.iter().map(|m| ((m >> i) & 1) as u8).collect())
        .collect();
    LabelMatrix::from_rows(&rows).unwrap()
}

/// Independent confusion counter mirroring the metric definitions with plain
/// integer loops.
pub struct BruteMetrics {
    pub ma: f64,
    pub per_attribute_ma: Vec<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn brute_metrics(probs: &Matrix, y: &LabelMatrix, threshold: f64) -> BruteMetrics {
    let n = y.rows();
    let c = y.cols();
    let mut per_attribute_ma = Vec::with_capacity(c);
    for k in 0..c {
        let mut tp = 0u64;
        let mut tn = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for i in 0..n {
            let pred = probs.get(i, k) > threshold;
            let act = y.get(i, k) == 1;
            if pred && act {
                tp += 1;
            } else if pred && !act {
                fp += 1;
            } else if !pred && act {
                fn_ += 1;
            } else {
                tn += 1;
            }
        }
        let pos_half = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let neg_half = if tn + fp > 0 {
            tn as f64 / (tn + fp) as f64
        } else {
            0.0
        };
        per_attribute_ma.push(0.5 * (pos_half + neg_half));
    }
    let ma = per_attribute_ma.iter().sum::<f64>() / c as f64;

    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    for i in 0..n {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for k in 0..c {
            let pred = probs.get(i, k) > threshold;
            let act = y.get(i, k) == 1;
            if pred && act {
                tp += 1;
            } else if pred {
                fp += 1;
            } else if act {
                fn_ += 1;
            }
        }
        if tp + fp > 0 {
            prec_sum += tp as f64 / (tp + fp) as f64;
        }
        if tp + fn_ > 0 {
            rec_sum += tp as f64 / (tp + fn_) as f64;
        }
    }
    let precision = prec_sum / n as f64;
    let recall = rec_sum / n as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    BruteMetrics {
        ma,
        per_attribute_ma,
        precision,
        recall,
        f1,
    }
}

pub fn assert_reports_agree(report: &EvalReport, brute: &BruteMetrics, tol: f64) {
    assert!(
        (report.ma - brute.ma).abs() <= tol,
        "mA {} vs {}",
        report.ma,
        brute.ma
    );
    assert!((report.precision - brute.precision).abs() <= tol);
    assert!((report.recall - brute.recall).abs() <= tol);
    assert!((report.f1 - brute.f1).abs() <= tol);
    for (a, b) in report.per_attribute_ma.iter().zip(&brute.per_attribute_ma) {
        assert!((a - b).abs() <= tol);
    }
}
