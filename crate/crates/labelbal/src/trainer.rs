//! Two-stage decoupled training.
//!
//! Stage 1 trains the whole model with plain BCE on instance-balanced
//! minibatches. The per-attribute loss centroids are then computed under the
//! frozen stage-1 classifier, and short gradient trajectories on the
//! extractor (periodically reloaded to the stage-1 snapshot) harvest
//! attribute features into per-label banks. Stage 2 fine-tunes a fresh
//! classifier on label-balanced draws from those banks. A weighted-BCE
//! baseline shares the stage-1 loop.

use serde::{Deserialize, Serialize};

use crate::datagen::{label_stats, Dataset};
use crate::error::{Error, Result};
use crate::model::{
    self, attribute_losses, backward_bce, backward_bce_weighted, backward_goat, sgd_step, HeadKind,
    ModelParams,
};
use crate::numkit::loss::bce_raw;
use crate::numkit::{indicator, sigmoid, Matrix, RngStream, StreamId};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    /// SGD learning rate (all stages).
    pub alpha: f64,
    /// Stage-1 step count.
    pub t1: usize,
    /// Harvest / fine-tune end step; stage 2 runs `t2 - t1` steps.
    pub t2: usize,
    /// Extractor reload period during harvesting.
    pub t: usize,
    pub batch_size: usize,
    /// Ring-buffer capacity per (attribute, polarity) bank.
    pub bank_capacity: usize,
    /// Step size for explicit one-shot feature translation (analysis only).
    pub eta: f64,
    /// Label-balancing ratio for the weighted-BCE baseline.
    pub gamma: f64,
    pub seed: u64,
    /// Optional single decay: multiply alpha by `factor` at `at_step`.
    #[serde(default)]
    pub lr_decay: Option<LrDecay>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LrDecay {
    pub at_step: usize,
    pub factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.12,
            t1: 2500,
            t2: 4000,
            t: 20,
            batch_size: 64,
            bank_capacity: 4096,
            eta: 0.05,
            gamma: 1.0,
            seed: 1,
            lr_decay: Some(LrDecay {
                at_step: 3500,
                factor: 0.1,
            }),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::config(
                "config.alpha",
                "alpha must be finite and >= 0",
            ));
        }
        if self.t < 1 {
            return Err(Error::config("config.t", "reload period t must be >= 1"));
        }
        if self.t1 >= self.t2 {
            return Err(Error::config("config.steps", "t1 must be < t2"));
        }
        if self.batch_size == 0 || self.bank_capacity == 0 {
            return Err(Error::config(
                "config.sizes",
                "batch size and bank capacity must be >= 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("config.gamma", "gamma must lie in [0, 1]"));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::config("config.eta", "eta must be finite and >= 0"));
        }
        Ok(())
    }

    fn lr_at(&self, step: usize) -> f64 {
        match &self.lr_decay {
            Some(d) if step >= d.at_step => self.alpha * d.factor,
            _ => self.alpha,
        }
    }
}

/// Instance-balanced batches: per-epoch shuffle without replacement,
/// sequential slices, reshuffle at each epoch boundary.
struct EpochBatches {
    order: Vec<usize>,
    pos: usize,
}

impl EpochBatches {
    fn new(n: usize, rng: &mut RngStream) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        EpochBatches { order, pos: 0 }
    }

    fn next(&mut self, size: usize, rng: &mut RngStream) -> Vec<usize> {
        if self.pos >= self.order.len() {
            rng.shuffle(&mut self.order);
            self.pos = 0;
        }
        let end = (self.pos + size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        batch
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LogRecord {
    pub step: usize,
    pub stage: &'static str,
    pub loss: f64,
    pub per_attr_loss: Vec<f64>,
}

pub type TrainLog = Vec<LogRecord>;

pub fn write_log_csv(log: &TrainLog, path: &std::path::Path) -> Result<()> {
    let c = log.first().map_or(0, |r| r.per_attr_loss.len());
    let mut out = String::from("step,stage,loss");
    for k in 0..c {
        out.push_str(&format!(",loss_attr_{k}"));
    }
    out.push('\n');
    for r in log {
        out.push_str(&format!("{},{},{}", r.step, r.stage, r.loss));
        for v in &r.per_attr_loss {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Stage 1: `t1` SGD steps of plain BCE over per-epoch-shuffled minibatches.
pub fn train_stage1(
    ds: &Dataset,
    cfg: &TrainConfig,
    p0: &ModelParams,
) -> Result<(ModelParams, TrainLog)> {
    train_instance_balanced(ds, cfg, p0, None, "stage1")
}

/// Weighted-BCE baseline: stage-1 loop with per-attribute label weights
/// `w = e^{1 - (gamma (r - 0.5) + 0.5)}` for positives and
/// `w = e^{gamma (r - 0.5) + 0.5}` for negatives, where r is the attribute's
/// label mean. `gamma = 0` collapses both to `e^{0.5}`.
pub fn train_reweighted(
    ds: &Dataset,
    cfg: &TrainConfig,
    p0: &ModelParams,
) -> Result<(ModelParams, TrainLog)> {
    let (pos, neg) = reweight_factors(ds, cfg.gamma);
    train_instance_balanced(ds, cfg, p0, Some((pos, neg)), "reweighted")
}

pub fn reweight_factors(ds: &Dataset, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let stats = label_stats(ds);
    let mut pos = Vec::with_capacity(stats.label_means.len());
    let mut neg = Vec::with_capacity(stats.label_means.len());
    for &r in &stats.label_means {
        let t = gamma * (r - 0.5) + 0.5;
        pos.push((1.0 - t).exp());
        neg.push(t.exp());
    }
    (pos, neg)
}

fn train_instance_balanced(
    ds: &Dataset,
    cfg: &TrainConfig,
    p0: &ModelParams,
    weights: Option<(Vec<f64>, Vec<f64>)>,
    stage: &'static str,
) -> Result<(ModelParams, TrainLog)> {
    cfg.validate()?;
    let mut p = p0.clone();
    let mut order_rng = RngStream::new_phase(cfg.seed, StreamId::BatchOrder, 0);
    let mut batches = EpochBatches::new(ds.len(), &mut order_rng);
    let mut log = Vec::with_capacity(cfg.t1);
    for step in 1..=cfg.t1 {
        let batch = batches.next(cfg.batch_size, &mut order_rng);
        let out = match &weights {
            Some((pos, neg)) => backward_bce_weighted(&p, ds, &batch, HeadKind::Cls, pos, neg)?,
            None => backward_bce(&p, ds, &batch, HeadKind::Cls)?,
        };
        if !out.loss.is_finite() {
            return Err(Error::Numeric(format!(
                "{stage} loss diverged (non-finite) at step {step}"
            )));
        }
        sgd_step(&mut p, &out.grads, HeadKind::Cls, cfg.lr_at(step), true);
        log.push(LogRecord {
            step,
            stage,
            loss: out.loss,
            per_attr_loss: out.per_attr_loss,
        });
    }
    Ok((p, log))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossCentroids {
    pub mu: Vec<f64>,
}

/// Exact dataset mean of the per-attribute BCE loss under the stage-1
/// classifier.
pub fn compute_loss_centroids(p: &ModelParams, ds: &Dataset) -> Result<LossCentroids> {
    let losses = attribute_losses(p, ds, HeadKind::Cls)?;
    let n = ds.len() as f64;
    let mu = (0..p.dims.c)
        .map(|k| (0..ds.len()).map(|i| losses.get(i, k)).sum::<f64>() / n)
        .collect::<Vec<f64>>();
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite loss centroid".to_string()));
    }
    Ok(LossCentroids { mu })
}

/// One bounded feature store; ring eviction past capacity.
#[derive(Clone, Debug)]
pub struct Bank {
    feature_dim: usize,
    capacity: usize,
    inserted: u64,
    data: Vec<f64>,
    /// (sample id, label) per stored slot, for audits.
    provenance: Vec<(u32, u8)>,
}

impl Bank {
    fn new(feature_dim: usize, capacity: usize) -> Self {
        Bank {
            feature_dim,
            capacity,
            inserted: 0,
            data: Vec::new(),
            provenance: Vec::new(),
        }
    }

    fn push(&mut self, feature: &[f64], sample: u32, label: u8) {
        debug_assert_eq!(feature.len(), self.feature_dim);
        if self.len() < self.capacity {
            self.data.extend_from_slice(feature);
            self.provenance.push((sample, label));
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.data[slot * self.feature_dim..(slot + 1) * self.feature_dim]
                .copy_from_slice(feature);
            self.provenance[slot] = (sample, label);
        }
        self.inserted += 1;
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    /// Total insertions, including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn get(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.feature_dim..(idx + 1) * self.feature_dim]
    }

    pub fn provenance(&self, idx: usize) -> (u32, u8) {
        self.provenance[idx]
    }
}

/// Per-attribute pair of append-then-freeze feature stores, indexed by label.
#[derive(Clone, Debug)]
pub struct FeatureBanks {
    feature_dim: usize,
    banks: Vec<[Bank; 2]>,
    frozen: bool,
}

impl FeatureBanks {
    pub fn new(c: usize, feature_dim: usize, capacity: usize) -> Self {
        FeatureBanks {
            feature_dim,
            banks: (0..c)
                .map(|_| {
                    [
                        Bank::new(feature_dim, capacity),
                        Bank::new(feature_dim, capacity),
                    ]
                })
                .collect(),
            frozen: false,
        }
    }

    pub fn num_attributes(&self) -> usize {
        self.banks.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn bank(&self, k: usize, positive: bool) -> &Bank {
        &self.banks[k][usize::from(positive)]
    }

    fn push(&mut self, k: usize, positive: bool, feature: &[f64], sample: u32) -> Result<()> {
        if self.frozen {
            return Err(Error::InvalidInput("banks are frozen".to_string()));
        }
        self.banks[k][usize::from(positive)].push(feature, sample, u8::from(positive));
        Ok(())
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HarvestStepStat {
    pub step: usize,
    /// Steps since the last snapshot reload.
    pub trajectory_pos: usize,
    pub goat_loss: f64,
    pub per_attr_absdev: Vec<f64>,
}

#[derive(Debug)]
pub struct HarvestOutput {
    pub banks: FeatureBanks,
    pub stats: Vec<HarvestStepStat>,
    /// Extractor state at the end of the harvest (classifier untouched).
    pub final_params: ModelParams,
}

/// Harvest attribute features into banks along short extractor trajectories.
///
/// For each step j in `[t1, t2)`: reload the extractor to the stage-1
/// snapshot if the trajectory length reached `t`, draw an instance-balanced
/// batch, bank each sample's per-attribute features under the current
/// extractor, then take one SGD step on the centroid-deviation loss with the
/// stage-1 classifier frozen. With `alpha = 0` the trajectory never moves and
/// the banks hold pure stage-1 features.
pub fn harvest_banks(
    p_star: &ModelParams,
    ds: &Dataset,
    cfg: &TrainConfig,
    mu: &LossCentroids,
) -> Result<HarvestOutput> {
    cfg.validate()?;
    if mu.mu.len() != p_star.dims.c {
        return Err(Error::Dim("centroid count vs model".to_string()));
    }
    let c = p_star.dims.c;
    let m = p_star.dims.m;
    let snapshot_theta = p_star.theta.clone();
    let snapshot_psi = p_star.psi.clone();
    let cls_before = p_star.cls.clone();

    let mut p = p_star.clone();
    let mut banks = FeatureBanks::new(c, m, cfg.bank_capacity);
    let mut order_rng = RngStream::new_phase(cfg.seed, StreamId::BatchOrder, 1);
    let mut batches = EpochBatches::new(ds.len(), &mut order_rng);
    let mut stats = Vec::with_capacity(cfg.t2 - cfg.t1);

    for step in cfg.t1..cfg.t2 {
        let pos_in_trajectory = (step - cfg.t1) % cfg.t;
        if pos_in_trajectory == 0 {
            p.theta = snapshot_theta.clone();
            p.psi = snapshot_psi.clone();
        }
        let batch = batches.next(cfg.batch_size, &mut order_rng);
        for &i in &batch {
            let trace = model::forward(&p, ds.input(i), HeadKind::Cls)?;
            for k in 0..c {
                banks.push(k, ds.y.positive(i, k), trace.attr_feature(k, m), i as u32)?;
            }
        }
        let out = backward_goat(&p, ds, &batch, &mu.mu, HeadKind::Cls)?;
        if !out.loss.is_finite() {
            return Err(Error::Numeric(format!(
                "harvest loss diverged (non-finite) at step {step}"
            )));
        }
        stats.push(HarvestStepStat {
            step,
            trajectory_pos: pos_in_trajectory,
            goat_loss: out.loss,
            per_attr_absdev: out.per_attr_loss.clone(),
        });
        if cfg.alpha > 0.0 {
            sgd_step(&mut p, &out.grads, HeadKind::Cls, cfg.lr_at(step), false);
        }
    }

    debug_assert_eq!(p.cls, cls_before, "frozen classifier moved during harvest");
    for k in 0..c {
        for positive in [false, true] {
            if banks.bank(k, positive).is_empty() {
                let side = if positive { "positive" } else { "negative" };
                return Err(Error::Numeric(format!(
                    "attribute {k} never produced a {side} feature; bank empty"
                )));
            }
        }
    }
    banks.freeze();
    Ok(HarvestOutput {
        banks,
        stats,
        final_params: p,
    })
}

/// One label-balanced draw batch: fair coin between the two banks, then
/// uniform with replacement within the chosen bank.
pub fn balanced_sample<'a>(
    banks: &'a FeatureBanks,
    k: usize,
    m: usize,
    rng: &mut RngStream,
) -> Result<Vec<(&'a [f64], bool)>> {
    if k >= banks.num_attributes() {
        return Err(Error::InvalidInput(format!("attribute {k} out of range")));
    }
    for positive in [false, true] {
        if banks.bank(k, positive).is_empty() {
            return Err(Error::InvalidInput(format!(
                "attribute {k} has an empty {} bank",
                if positive { "positive" } else { "negative" }
            )));
        }
    }
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let positive = rng.bernoulli(0.5);
        let bank = banks.bank(k, positive);
        let idx = rng.below(bank.len());
        out.push((bank.get(idx), positive));
    }
    Ok(out)
}

/// Stage-2 objective for the fresh classifier.
#[derive(Clone, Debug)]
pub enum FinetuneLoss {
    /// Plain BCE on the balanced feature batches.
    PlainBce,
    /// `|L - mu_k|`, pulling per-feature losses toward the stage-1 centroid.
    Denoised,
    /// Closed-form Gaussian-margin BCE; one (lambda, covariance) pair per
    /// attribute.
    IsdaMargin {
        lambda: Vec<f64>,
        sigma: Vec<Matrix>,
    },
}

/// Fine-tunes the fresh classifier on label-balanced bank draws, attribute by
/// attribute (round-robin, one batch per attribute per outer step). Only the
/// classifier row of the attribute being updated moves.
pub fn finetune_classifier(
    banks: &FeatureBanks,
    mu: &LossCentroids,
    cfg: &TrainConfig,
    p: &mut ModelParams,
    loss: &FinetuneLoss,
) -> Result<TrainLog> {
    cfg.validate()?;
    if !banks.is_frozen() {
        return Err(Error::InvalidInput(
            "banks must be frozen before fine-tuning".to_string(),
        ));
    }
    let c = p.dims.c;
    let m_dim = p.dims.m;
    if banks.num_attributes() != c || banks.feature_dim() != m_dim {
        return Err(Error::Dim("banks do not match model dims".to_string()));
    }
    if let FinetuneLoss::IsdaMargin { lambda, sigma } = loss {
        if lambda.len() != c || sigma.len() != c {
            return Err(Error::Dim("margin parameter count".to_string()));
        }
        if sigma.iter().any(|s| s.rows() != m_dim || s.cols() != m_dim) {
            return Err(Error::Dim("margin covariance shape".to_string()));
        }
    }

    let mut rng = RngStream::new_phase(cfg.seed, StreamId::BankSampling, 0);
    let steps = cfg.t2 - cfg.t1;
    let mut log = Vec::with_capacity(steps);
    for outer in 0..steps {
        let mut per_attr = vec![0.0; c];
        for l in 0..c {
            let batch = balanced_sample(banks, l, cfg.batch_size, &mut rng)?;
            let (loss_l, grad_w, grad_b) = head_batch_gradient(p, l, &batch, mu, loss)?;
            if !loss_l.is_finite() {
                return Err(Error::Numeric(format!(
                    "fine-tune loss diverged (non-finite) at step {outer} attribute {l}"
                )));
            }
            let lr = cfg.lr_at(cfg.t1 + outer);
            crate::numkit::axpy(p.ft.w.row_mut(l), &grad_w, -lr);
            p.ft.b[l] -= lr * grad_b;
            per_attr[l] = loss_l;
        }
        log.push(LogRecord {
            step: cfg.t1 + outer,
            stage: "finetune",
            loss: per_attr.iter().sum(),
            per_attr_loss: per_attr,
        });
    }
    Ok(log)
}

/// Mean loss and gradient of the fresh classifier's row `l` over one batch.
fn head_batch_gradient(
    p: &ModelParams,
    l: usize,
    batch: &[(&[f64], bool)],
    mu: &LossCentroids,
    loss: &FinetuneLoss,
) -> Result<(f64, Vec<f64>, f64)> {
    let m_dim = p.dims.m;
    let w = p.ft.w.row(l);
    let b = p.ft.b[l];
    let mut grad_w = vec![0.0; m_dim];
    let mut grad_b = 0.0;
    let mut total = 0.0;
    // Margin term is feature-independent; fold it per batch.
    let margin_ctx = match loss {
        FinetuneLoss::IsdaMargin { lambda, sigma } => {
            let sw = sigma[l].matvec(w);
            let quad = crate::numkit::dot(w, &sw);
            Some((lambda[l], sw, 0.5 * lambda[l] * quad))
        }
        _ => None,
    };
    for (feature, positive) in batch {
        let ind = indicator(*positive);
        let logit = crate::numkit::dot(w, feature) + b;
        match (loss, &margin_ctx) {
            (FinetuneLoss::PlainBce, _) => {
                let (bce, dlogit) = bce_raw(ind, logit);
                total += bce;
                crate::numkit::axpy(&mut grad_w, feature, dlogit);
                grad_b += dlogit;
            }
            (FinetuneLoss::Denoised, _) => {
                let (bce, dlogit) = bce_raw(ind, logit);
                let dev = bce - mu.mu[l];
                let sign = if dev > 0.0 {
                    1.0
                } else if dev < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                total += dev.abs();
                crate::numkit::axpy(&mut grad_w, feature, sign * dlogit);
                grad_b += sign * dlogit;
            }
            (FinetuneLoss::IsdaMargin { .. }, Some((lambda, sw, margin))) => {
                let z = -ind * logit + margin;
                total += crate::numkit::softplus(z);
                let dz = sigmoid(z);
                // d z / d w = -ind * f + lambda * Sigma w
                crate::numkit::axpy(&mut grad_w, feature, -ind * dz);
                crate::numkit::axpy(&mut grad_w, sw, *lambda * dz);
                grad_b += -ind * dz;
            }
            _ => unreachable!(),
        }
    }
    let inv = 1.0 / batch.len() as f64;
    for g in &mut grad_w {
        *g *= inv;
    }
    Ok((total * inv, grad_w, grad_b * inv))
}

/// Re-trains the fresh classifier on instance-balanced batches of frozen
/// stage-1 features with the weighted BCE (all attribute rows move each
/// step). The re-weighted counterpart of the balanced bank fine-tune.
pub fn refit_classifier_weighted(
    ds: &Dataset,
    cfg: &TrainConfig,
    p: &mut ModelParams,
    gamma: f64,
) -> Result<()> {
    cfg.validate()?;
    let (pos, neg) = reweight_factors(ds, gamma);
    let c = p.dims.c;
    let m_dim = p.dims.m;
    let mut order_rng = RngStream::new_phase(cfg.seed, StreamId::BatchOrder, 2);
    let mut batches = EpochBatches::new(ds.len(), &mut order_rng);
    for outer in 0..(cfg.t2 - cfg.t1) {
        let batch = batches.next(cfg.batch_size, &mut order_rng);
        let mut grad_w = Matrix::zeros(c, m_dim);
        let mut grad_b = vec![0.0; c];
        for &i in &batch {
            let trace = model::forward(p, ds.input(i), HeadKind::Ft)?;
            for k in 0..c {
                let positive = ds.y.positive(i, k);
                let ind = indicator(positive);
                let weight = if positive { pos[k] } else { neg[k] };
                let (_, dbce) = bce_raw(ind, trace.logits[k]);
                let d = weight * dbce;
                crate::numkit::axpy(grad_w.row_mut(k), trace.attr_feature(k, m_dim), d);
                grad_b[k] += d;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        let lr = cfg.lr_at(cfg.t1 + outer);
        grad_w.scale(inv);
        p.ft.w.add_scaled(&grad_w, -lr);
        for (b, g) in p.ft.b.iter_mut().zip(&grad_b) {
            *b -= lr * g * inv;
        }
    }
    Ok(())
}
