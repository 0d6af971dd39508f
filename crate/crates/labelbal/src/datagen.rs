//! Synthetic multi-label datasets with controllable imbalance and forced
//! co-occurrence, CSV ingestion, and label statistics.
//!
//! Labels are drawn attribute-by-attribute. An attribute follows its own
//! Bernoulli with the configured target mean unless it is the target of a
//! co-occurrence rule `(source -> target, rho)`, in which case it copies the
//! source label with probability `rho`. Inputs are a seeded Gaussian prototype
//! mixture: `x = sum_k y_k * prototype_k * scale + N(0, sigma^2 I)`, which is
//! linearly separable in expectation while leaving rare attributes hard.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, RngStream, StreamId};

/// N x C binary label matrix, row-major `u8` storage.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LabelMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dim("ragged label rows".to_string()));
        }
        let data = rows.concat();
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("labels must be 0 or 1".to_string()));
        }
        Ok(LabelMatrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, k: usize) -> u8 {
        self.data[i * self.cols + k]
    }

    pub fn set(&mut self, i: usize, k: usize, v: u8) {
        debug_assert!(v <= 1);
        self.data[i * self.cols + k] = v;
    }

    pub fn positive(&self, i: usize, k: usize) -> bool {
        self.get(i, k) == 1
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Single-column view as a fresh label matrix (used for per-attribute or
    /// attribute-pair feasibility audits).
    pub fn select_columns(&self, cols: &[usize]) -> LabelMatrix {
        let mut out = LabelMatrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (j, &k) in cols.iter().enumerate() {
                out.set(i, j, self.get(i, k));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    /// N x D inputs.
    pub x: Matrix,
    /// N x C binary labels.
    pub y: LabelMatrix,
    pub attribute_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Matrix, y: LabelMatrix, attribute_names: Vec<String>) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::Dim(format!(
                "{} input rows vs {} label rows",
                x.rows(),
                y.rows()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::InvalidInput("empty dataset".to_string()));
        }
        if attribute_names.len() != y.cols() {
            return Err(Error::Dim("attribute name count".to_string()));
        }
        Ok(Dataset {
            x,
            y,
            attribute_names,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    pub fn num_attributes(&self) -> usize {
        self.y.cols()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    /// Deterministic split into (train, eval) by a seeded permutation.
    pub fn split(&self, eval_fraction: f64, rng: &mut RngStream) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&eval_fraction) || eval_fraction <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "eval fraction {eval_fraction} outside (0, 1)"
            )));
        }
        let n = self.len();
        let n_eval = ((n as f64) * eval_fraction).floor() as usize;
        if n_eval == 0 || n_eval == n {
            return Err(Error::InvalidInput(
                "split leaves an empty side".to_string(),
            ));
        }
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let take = |idxs: &[usize]| -> Dataset {
            let mut x = Matrix::zeros(idxs.len(), self.input_dim());
            let mut y = LabelMatrix::zeros(idxs.len(), self.num_attributes());
            for (r, &i) in idxs.iter().enumerate() {
                x.row_mut(r).copy_from_slice(self.x.row(i));
                for k in 0..self.num_attributes() {
                    y.set(r, k, self.y.get(i, k));
                }
            }
            Dataset {
                x,
                y,
                attribute_names: self.attribute_names.clone(),
            }
        };
        let eval = take(&order[..n_eval]);
        let train = take(&order[n_eval..]);
        Ok((train, eval))
    }
}

/// Directed copy rule: with probability `rho` the target attribute's label is
/// copied from the source attribute instead of being drawn independently.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CoOccurrenceRule {
    pub source: usize,
    pub target: usize,
    pub rho: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GenConfig {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub target_means: Vec<f64>,
    #[serde(default)]
    pub co_occurrence_rules: Vec<CoOccurrenceRule>,
    pub prototype_scale: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("config.empty", "n must be >= 1"));
        }
        if self.d < self.c {
            return Err(Error::config(
                "config.dims",
                format!("d ({}) must be >= c ({})", self.d, self.c),
            ));
        }
        if self.target_means.len() != self.c {
            return Err(Error::config(
                "config.target_means",
                format!(
                    "expected {} target means, got {}",
                    self.c,
                    self.target_means.len()
                ),
            ));
        }
        if self.target_means.iter().any(|&m| !(m > 0.0 && m < 1.0)) {
            return Err(Error::config(
                "config.target_means",
                "target means must lie in (0, 1)",
            ));
        }
        if !self.prototype_scale.is_finite()
            || !self.noise_sigma.is_finite()
            || self.noise_sigma < 0.0
        {
            return Err(Error::config("config.scales", "bad prototype/noise scales"));
        }
        let mut seen_targets = vec![false; self.c];
        for rule in &self.co_occurrence_rules {
            if rule.source >= self.c || rule.target >= self.c || rule.source == rule.target {
                return Err(Error::config(
                    "config.rule_indices",
                    format!("bad rule {} -> {}", rule.source, rule.target),
                ));
            }
            if !(0.0..=1.0).contains(&rule.rho) {
                return Err(Error::config("config.rule_rho", "rho must lie in [0, 1]"));
            }
            if seen_targets[rule.target] {
                return Err(Error::config(
                    "config.duplicate_target",
                    format!("attribute {} is the target of two rules", rule.target),
                ));
            }
            seen_targets[rule.target] = true;
        }
        self.draw_order()?;
        Ok(())
    }

    /// Topological order over attributes induced by the rules; errors on
    /// cycles. Labels are drawn in this order so sources precede targets.
    fn draw_order(&self) -> Result<Vec<usize>> {
        let mut rule_for_target: Vec<Option<&CoOccurrenceRule>> = vec![None; self.c];
        for rule in &self.co_occurrence_rules {
            rule_for_target[rule.target] = Some(rule);
        }
        let mut state = vec![0u8; self.c]; // 0 unvisited, 1 in progress, 2 done
        let mut order = Vec::with_capacity(self.c);
        fn visit(
            k: usize,
            rule_for_target: &[Option<&CoOccurrenceRule>],
            state: &mut [u8],
            order: &mut Vec<usize>,
        ) -> Result<()> {
            match state[k] {
                2 => return Ok(()),
                1 => {
                    return Err(Error::config(
                        "config.cyclic_rules",
                        format!("co-occurrence rules form a cycle through attribute {k}"),
                    ))
                }
                _ => {}
            }
            state[k] = 1;
            if let Some(rule) = rule_for_target[k] {
                visit(rule.source, rule_for_target, state, order)?;
            }
            state[k] = 2;
            order.push(k);
            Ok(())
        }
        for k in 0..self.c {
            visit(k, &rule_for_target, &mut state, &mut order)?;
        }
        Ok(order)
    }
}

/// Generate a dataset per the config. Each sample's draws come from its own
/// deterministic substream, so the output is byte-identical across runs and
/// independent of any evaluation order.
pub fn generate_synthetic(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let order = cfg.draw_order()?;
    let mut rule_for_target: Vec<Option<&CoOccurrenceRule>> = vec![None; cfg.c];
    for rule in &cfg.co_occurrence_rules {
        rule_for_target[rule.target] = Some(rule);
    }

    // Fixed random unit prototypes, one per attribute.
    let mut proto_rng = RngStream::new(cfg.seed, StreamId::DataGen);
    let prototypes: Vec<Vec<f64>> = (0..cfg.c)
        .map(|_| {
            let v: Vec<f64> = (0..cfg.d).map(|_| proto_rng.normal()).collect();
            let n = crate::numkit::norm(&v);
            v.iter().map(|x| x / n).collect()
        })
        .collect();

    let mut x = Matrix::zeros(cfg.n, cfg.d);
    let mut y = LabelMatrix::zeros(cfg.n, cfg.c);
    for i in 0..cfg.n {
        let mut rng = RngStream::for_sample(cfg.seed, i as u64);
        let mut labels = vec![0u8; cfg.c];
        for &k in &order {
            let v = match rule_for_target[k] {
                Some(rule) if rng.bernoulli(rule.rho) => labels[rule.source],
                _ => u8::from(rng.bernoulli(cfg.target_means[k])),
            };
            labels[k] = v;
        }
        let row = x.row_mut(i);
        for (k, &label) in labels.iter().enumerate() {
            if label == 1 {
                crate::numkit::axpy(row, &prototypes[k], cfg.prototype_scale);
            }
            y.set(i, k, label);
        }
        if cfg.noise_sigma > 0.0 {
            for v in row.iter_mut() {
                *v += cfg.noise_sigma * rng.normal();
            }
        }
    }

    let names = (0..cfg.c).map(|k| format!("attr_{k}")).collect();
    Dataset::new(x, y, names)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelStats {
    pub schema_version: u32,
    pub label_means: Vec<f64>,
    /// `|mean - 0.5|` per attribute; larger means more imbalanced.
    pub imbalance: Vec<f64>,
    /// C x C joint positive frequencies; diagonal equals the label means.
    pub cooccurrence: Matrix,
    pub positives: Vec<usize>,
    /// Attributes with no positive or no negative samples.
    pub degenerate: Vec<bool>,
}

pub fn label_stats(ds: &Dataset) -> LabelStats {
    let n = ds.len();
    let c = ds.num_attributes();
    let mut positives = vec![0usize; c];
    let mut joint = Matrix::zeros(c, c);
    for i in 0..n {
        let row = ds.y.row(i);
        for a in 0..c {
            if row[a] == 1 {
                positives[a] += 1;
                for b in 0..c {
                    if row[b] == 1 {
                        joint.set(a, b, joint.get(a, b) + 1.0);
                    }
                }
            }
        }
    }
    joint.scale(1.0 / n as f64);
    let label_means: Vec<f64> = positives.iter().map(|&p| p as f64 / n as f64).collect();
    let imbalance = label_means.iter().map(|m| (m - 0.5).abs()).collect();
    let degenerate = positives.iter().map(|&p| p == 0 || p == n).collect();
    LabelStats {
        schema_version: crate::SCHEMA_VERSION,
        label_means,
        imbalance,
        cooccurrence: joint,
        positives,
        degenerate,
    }
}

/// CSV header for a D-input, C-attribute dataset:
/// `id,x_0..x_{D-1},y_0..y_{C-1}`.
fn csv_header(d: usize, c: usize) -> String {
    let mut h = String::from("id");
    for j in 0..d {
        let _ = write!(h, ",x_{j}");
    }
    for k in 0..c {
        let _ = write!(h, ",y_{k}");
    }
    h
}

/// Writes the dataset in the canonical CSV format (LF endings, floats in
/// shortest round-trip decimal form, labels as 0/1).
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&csv_header(ds.input_dim(), ds.num_attributes()));
    out.push('\n');
    for i in 0..ds.len() {
        let _ = write!(out, "{i}");
        for v in ds.x.row(i) {
            let _ = write!(out, ",{v}");
        }
        for k in 0..ds.num_attributes() {
            let _ = write!(out, ",{}", ds.y.get(i, k));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".to_string()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.first() != Some(&"id") {
        return Err(Error::Parse("header must start with 'id'".to_string()));
    }
    let d = fields.iter().filter(|f| f.starts_with("x_")).count();
    let c = fields.iter().filter(|f| f.starts_with("y_")).count();
    if d == 0 || c == 0 || fields.len() != 1 + d + c {
        return Err(Error::Parse(format!(
            "header needs id, x_*, then y_* columns; got {} fields",
            fields.len()
        )));
    }
    for (j, f) in fields[1..=d].iter().enumerate() {
        if **f != format!("x_{j}") {
            return Err(Error::Parse(format!("expected column x_{j}, got {f}")));
        }
    }
    for (k, f) in fields[1 + d..].iter().enumerate() {
        if **f != format!("y_{k}") {
            return Err(Error::Parse(format!("expected column y_{k}, got {f}")));
        }
    }

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<u8> = Vec::new();
    let mut n = 0usize;
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != 1 + d + c {
            return Err(Error::Parse(format!(
                "line {}: expected {} fields, got {}",
                lineno + 2,
                1 + d + c,
                row.len()
            )));
        }
        for f in &row[1..=d] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad float {f}", lineno + 2)))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "line {}: non-finite input value",
                    lineno + 2
                )));
            }
            xs.push(v);
        }
        for f in &row[1 + d..] {
            match *f {
                "0" => ys.push(0),
                "1" => ys.push(1),
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: non-binary label {other}",
                        lineno + 2
                    )))
                }
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Parse("no data rows".to_string()));
    }
    let x = Matrix::from_vec(n, d, xs)?;
    let y = LabelMatrix {
        rows: n,
        cols: c,
        data: ys,
    };
    let names = (0..c).map(|k| format!("y_{k}")).collect();
    Dataset::new(x, y, names)
}

/// Rule-implied stationary label means (what the empirical means converge to
/// as N grows): `mean_k = rho * mean_source + (1 - rho) * target_mean_k`.
pub fn implied_means(cfg: &GenConfig) -> Result<Vec<f64>> {
    let order = cfg.draw_order()?;
    let mut rule_for_target: BTreeMap<usize, &CoOccurrenceRule> = BTreeMap::new();
    for rule in &cfg.co_occurrence_rules {
        rule_for_target.insert(rule.target, rule);
    }
    let mut means = vec![0.0; cfg.c];
    for &k in &order {
        means[k] = match rule_for_target.get(&k) {
            Some(rule) => rule.rho * means[rule.source] + (1.0 - rule.rho) * cfg.target_means[k],
            None => cfg.target_means[k],
        };
    }
    Ok(means)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_cfg() -> GenConfig {
        GenConfig {
            n: 100,
            d: 8,
            c: 3,
            target_means: vec![0.3, 0.5, 0.2],
            co_occurrence_rules: vec![],
            prototype_scale: 1.0,
            noise_sigma: 0.5,
            seed: 1,
        }
    }

    #[test]
    fn single_attribute_mean_within_binomial_band() {
        let cfg = GenConfig {
            n: 10_000,
            d: 4,
            c: 1,
            target_means: vec![0.1],
            co_occurrence_rules: vec![],
            prototype_scale: 1.0,
            noise_sigma: 0.1,
            seed: 5,
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let stats = label_stats(&ds);
        assert!(
            (stats.label_means[0] - 0.1).abs() < 0.01,
            "mean {}",
            stats.label_means[0]
        );
    }

    #[test]
    fn rho_one_copies_labels_exactly() {
        let mut cfg = basic_cfg();
        cfg.co_occurrence_rules = vec![CoOccurrenceRule {
            source: 1,
            target: 2,
            rho: 1.0,
        }];
        let ds = generate_synthetic(&cfg).unwrap();
        for i in 0..ds.len() {
            assert_eq!(ds.y.get(i, 1), ds.y.get(i, 2));
        }
    }

    #[test]
    fn zero_noise_makes_inputs_a_function_of_labels() {
        let mut cfg = basic_cfg();
        cfg.noise_sigma = 0.0;
        let ds = generate_synthetic(&cfg).unwrap();
        for i in 0..ds.len() {
            for j in 0..ds.len() {
                if ds.y.row(i) == ds.y.row(j) {
                    assert_eq!(ds.x.row(i), ds.x.row(j));
                }
            }
        }
    }

    #[test]
    fn cyclic_rules_rejected() {
        let mut cfg = basic_cfg();
        cfg.co_occurrence_rules = vec![
            CoOccurrenceRule {
                source: 0,
                target: 1,
                rho: 0.5,
            },
            CoOccurrenceRule {
                source: 1,
                target: 0,
                rho: 0.5,
            },
        ];
        let err = generate_synthetic(&cfg).unwrap_err();
        assert_eq!(err.code(), "config.cyclic_rules");
    }

    #[test]
    fn duplicate_rule_target_rejected() {
        let mut cfg = basic_cfg();
        cfg.co_occurrence_rules = vec![
            CoOccurrenceRule {
                source: 0,
                target: 2,
                rho: 0.5,
            },
            CoOccurrenceRule {
                source: 1,
                target: 2,
                rho: 0.5,
            },
        ];
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn stats_hand_counts() {
        let y = LabelMatrix::from_rows(&[vec![1], vec![0]]).unwrap();
        let x = Matrix::zeros(2, 1);
        let ds = Dataset::new(x, y, vec!["a".into()]).unwrap();
        let s = label_stats(&ds);
        assert_eq!(s.label_means, vec![0.5]);
        assert_eq!(s.imbalance, vec![0.0]);

        let y = LabelMatrix::from_rows(&[vec![1, 1], vec![1, 0], vec![0, 0], vec![0, 0]]).unwrap();
        let x = Matrix::zeros(4, 2);
        let ds = Dataset::new(x, y, vec!["a".into(), "b".into()]).unwrap();
        let s = label_stats(&ds);
        assert_eq!(s.label_means, vec![0.5, 0.25]);
        assert_eq!(s.cooccurrence.get(0, 1), 0.25);
        assert_eq!(s.cooccurrence.get(1, 0), 0.25);
        assert_eq!(s.cooccurrence.get(0, 0), 0.5);
    }

    #[test]
    fn all_positive_attribute_is_degenerate() {
        let y = LabelMatrix::from_rows(&[vec![1], vec![1], vec![1]]).unwrap();
        let x = Matrix::zeros(3, 1);
        let ds = Dataset::new(x, y, vec!["a".into()]).unwrap();
        let s = label_stats(&ds);
        assert_eq!(s.imbalance, vec![0.5]);
        assert_eq!(s.degenerate, vec![true]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cfg = basic_cfg();
        let ds = generate_synthetic(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("labelbal_csv_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        save_csv(&ds, &path).unwrap();
        let back = load_csv(&path).unwrap();
        assert_eq!(back.len(), ds.len());
        for i in 0..ds.len() {
            for j in 0..ds.input_dim() {
                assert_eq!(ds.x.get(i, j).to_bits(), back.x.get(i, j).to_bits());
            }
            assert_eq!(ds.y.row(i), back.y.row(i));
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn csv_errors() {
        let dir = std::env::temp_dir().join(format!("labelbal_csv_err_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();

        assert!(load_csv(&dir.join("missing.csv")).is_err());

        let bad_label = dir.join("bad_label.csv");
        std::fs::write(&bad_label, "id,x_0,y_0\n0,1.5,2\n").unwrap();
        let err = load_csv(&bad_label).unwrap_err();
        assert!(err.to_string().contains("non-binary label"), "{err}");

        let bad_cols = dir.join("bad_cols.csv");
        std::fs::write(&bad_cols, "id,x_0,y_0\n0,1.5\n").unwrap();
        assert!(load_csv(&bad_cols).is_err());

        let bad_float = dir.join("bad_float.csv");
        std::fs::write(&bad_float, "id,x_0,y_0\n0,abc,1\n").unwrap();
        assert!(load_csv(&bad_float).is_err());

        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = basic_cfg();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.x.data(), b.x.data());
        assert_eq!(a.y.row(0), b.y.row(0));
        for i in 0..a.len() {
            assert_eq!(a.y.row(i), b.y.row(i));
        }
    }

    #[test]
    fn stats_are_permutation_equivariant() {
        let cfg = basic_cfg();
        let ds = generate_synthetic(&cfg).unwrap();
        let s1 = label_stats(&ds);

        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.reverse();
        let mut x = Matrix::zeros(ds.len(), ds.input_dim());
        let mut y = LabelMatrix::zeros(ds.len(), ds.num_attributes());
        for (r, &i) in order.iter().enumerate() {
            x.row_mut(r).copy_from_slice(ds.x.row(i));
            for k in 0..ds.num_attributes() {
                y.set(r, k, ds.y.get(i, k));
            }
        }
        let shuffled = Dataset::new(x, y, ds.attribute_names.clone()).unwrap();
        let s2 = label_stats(&shuffled);
        assert_eq!(s1.label_means, s2.label_means);
        assert_eq!(s1.positives, s2.positives);
        assert_eq!(s1.cooccurrence, s2.cooccurrence);
    }

    #[test]
    fn implied_means_chain_through_rules() {
        let mut cfg = basic_cfg();
        cfg.co_occurrence_rules = vec![CoOccurrenceRule {
            source: 0,
            target: 2,
            rho: 0.9,
        }];
        let means = implied_means(&cfg).unwrap();
        assert!((means[2] - (0.9 * 0.3 + 0.1 * 0.2)).abs() < 1e-12);
    }

    #[test]
    fn split_partitions_and_replays() {
        let cfg = basic_cfg();
        let ds = generate_synthetic(&cfg).unwrap();
        let mut rng = RngStream::new(9, StreamId::Split);
        let (train, eval) = ds.split(0.25, &mut rng).unwrap();
        assert_eq!(train.len() + eval.len(), ds.len());
        assert_eq!(eval.len(), 25);

        let mut rng2 = RngStream::new(9, StreamId::Split);
        let (train2, _) = ds.split(0.25, &mut rng2).unwrap();
        assert_eq!(train.x.data(), train2.x.data());
    }
}
