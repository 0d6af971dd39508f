//! Label-balanced image re-sampling (LIR) feasibility audit.
//!
//! Decides whether sampling weights `{a_i}` exist with `sum_i a_i = 1`,
//! `a_i >= eps`, and, for every attribute k, positive and negative labels
//! receiving equal total weight: `sum_i (2 y_ik - 1) a_i = 0`. The strict
//! positivity of the mathematical statement is operationalized as a floor
//! `a_i >= eps`; the solver maximizes the smallest weight and compares it
//! against that floor, so a witness (when one exists) spreads mass as evenly
//! as the label structure allows.
//!
//! Samples sharing a label pattern are interchangeable, so the program is
//! solved over pattern weights (at most `min(2^C, N)` variables after
//! substituting out the floor), then expanded back to a per-sample witness.

mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datagen::LabelMatrix;
use crate::error::{Error, Result};

use simplex::{solve_max, LpOutcome};

/// Default floor for the smallest sampling weight.
pub fn default_eps(n: usize) -> f64 {
    1e-6 / n as f64
}

/// Tolerance on the equality constraints of a returned witness.
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub schema_version: u32,
    pub feasible: bool,
    /// Sampling weights, present iff feasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_a: Option<Vec<f64>>,
    /// The optimized smallest weight; 0 when the balance constraints
    /// themselves are unsatisfiable.
    pub max_min_weight: f64,
    /// Present iff infeasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violated_note: Option<String>,
    pub eps: f64,
}

/// Solves `max eps* s.t. sum_i (2 y_ik - 1) a_i = 0 for all k, sum a_i = 1,
/// a_i >= eps*` and reports `feasible = (eps* >= eps)`.
pub fn check_lir_feasibility(y: &LabelMatrix, eps: f64) -> Result<FeasibilityResult> {
    let n = y.rows();
    let c = y.cols();
    if n == 0 {
        return Err(Error::InvalidInput("empty label matrix".to_string()));
    }
    if !(eps > 0.0 && eps < 1.0 / n as f64) {
        return Err(Error::config(
            "config.eps",
            format!(
                "eps {eps} outside (0, 1/N); the simplex constraint caps the \
                 minimum weight at 1/N = {}",
                1.0 / n as f64
            ),
        ));
    }

    // An all-same-label attribute makes the balance sum +-1, never 0.
    for k in 0..c {
        let pos = (0..n).filter(|&i| y.positive(i, k)).count();
        if pos == 0 || pos == n {
            let side = if pos == 0 { "negative" } else { "positive" };
            return Ok(FeasibilityResult {
                schema_version: crate::SCHEMA_VERSION,
                feasible: false,
                witness_a: None,
                max_min_weight: 0.0,
                violated_note: Some(format!(
                    "attribute {k} is all-{side}: its balance sum equals \
                     +-1 for every weighting"
                )),
                eps,
            });
        }
    }

    // Group samples by label pattern; BTreeMap fixes the variable order.
    let mut patterns: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    for i in 0..n {
        *patterns.entry(y.row(i).to_vec()).or_insert(0) += 1;
    }
    let pattern_list: Vec<(&Vec<u8>, usize)> = patterns.iter().map(|(p, &cnt)| (p, cnt)).collect();
    let p_count = pattern_list.len();

    // Variables: slack-above-floor per pattern (b_p = c_p + n_p * eps*), then
    // eps*. Substituting the floor out leaves only the C+1 equalities.
    let n_vars = p_count + 1;
    let mut a_rows: Vec<Vec<f64>> = Vec::with_capacity(c + 1);
    let mut b_rhs: Vec<f64> = Vec::with_capacity(c + 1);
    for k in 0..c {
        let mut row = vec![0.0; n_vars];
        let mut eps_coef = 0.0;
        for (j, (pat, cnt)) in pattern_list.iter().enumerate() {
            let sign = if pat[k] == 1 { 1.0 } else { -1.0 };
            row[j] = sign;
            eps_coef += sign * *cnt as f64;
        }
        row[p_count] = eps_coef;
        // Normalize the row sign so the (zero) rhs stays non-negative and the
        // tableau is deterministic.
        a_rows.push(row);
        b_rhs.push(0.0);
    }
    let mut sum_row = vec![1.0; n_vars];
    sum_row[p_count] = n as f64;
    a_rows.push(sum_row);
    b_rhs.push(1.0);

    let mut objective = vec![0.0; n_vars];
    objective[p_count] = 1.0;

    match solve_max(&a_rows, &b_rhs, &objective) {
        LpOutcome::Infeasible => Ok(FeasibilityResult {
            schema_version: crate::SCHEMA_VERSION,
            feasible: false,
            witness_a: None,
            max_min_weight: 0.0,
            violated_note: Some(
                "the per-attribute balance constraints admit no distribution \
                 over samples"
                    .to_string(),
            ),
            eps,
        }),
        LpOutcome::Unbounded => Err(Error::Numeric(
            "feasibility program reported unbounded; the simplex constraint \
             should cap it"
                .to_string(),
        )),
        LpOutcome::Optimal { x, objective } => {
            let eps_star = objective;
            if eps_star >= eps - BALANCE_TOL {
                let witness = expand_witness(y, &pattern_list, &x, eps_star);
                validate_witness(y, &witness, eps)?;
                Ok(FeasibilityResult {
                    schema_version: crate::SCHEMA_VERSION,
                    feasible: true,
                    witness_a: Some(witness),
                    max_min_weight: eps_star,
                    violated_note: None,
                    eps,
                })
            } else {
                Ok(FeasibilityResult {
                    schema_version: crate::SCHEMA_VERSION,
                    feasible: false,
                    witness_a: None,
                    max_min_weight: eps_star,
                    violated_note: Some(format!(
                        "max achievable min weight {eps_star:.6e} falls below \
                         the floor {eps:.6e}"
                    )),
                    eps,
                })
            }
        }
    }
}

fn expand_witness(
    y: &LabelMatrix,
    pattern_list: &[(&Vec<u8>, usize)],
    x: &[f64],
    eps_star: f64,
) -> Vec<f64> {
    let index: BTreeMap<&[u8], usize> = pattern_list
        .iter()
        .enumerate()
        .map(|(j, (p, _))| (p.as_slice(), j))
        .collect();
    (0..y.rows())
        .map(|i| {
            let j = index[y.row(i)];
            let n_p = pattern_list[j].1 as f64;
            // b_p / n_p with b_p = slack + n_p * eps*.
            x[j] / n_p + eps_star
        })
        .collect()
}

fn validate_witness(y: &LabelMatrix, a: &[f64], eps: f64) -> Result<()> {
    let sum: f64 = a.iter().sum();
    if (sum - 1.0).abs() > BALANCE_TOL {
        return Err(Error::Numeric(format!("witness sums to {sum}, not 1")));
    }
    let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < eps - 1e-12 {
        return Err(Error::Numeric(format!(
            "witness min weight {min} below floor {eps}"
        )));
    }
    for k in 0..y.cols() {
        let balance: f64 = (0..y.rows())
            .map(|i| if y.positive(i, k) { a[i] } else { -a[i] })
            .sum();
        if balance.abs() > BALANCE_TOL {
            return Err(Error::Numeric(format!(
                "witness violates balance for attribute {k}: {balance}"
            )));
        }
    }
    Ok(())
}
