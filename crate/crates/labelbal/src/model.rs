//! The parametric model: an MLP feature extractor, an attribute decomposer
//! splitting the backbone feature into per-attribute features, and two sets
//! of per-attribute linear classifiers: the trained one used for gradient
//! computation and a fresh one fine-tuned on re-sampled features.
//!
//! All gradients are hand-derived and validated against central differences.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::numkit::loss::bce_raw;
use crate::numkit::{indicator, sigmoid, softplus, Affine, Matrix, RngStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    /// Input dimension.
    pub d: usize,
    /// Hidden widths of the extractor; ReLU between consecutive affine maps.
    pub hidden: Vec<usize>,
    /// Backbone feature dimension.
    pub m_h: usize,
    /// Number of attributes.
    pub c: usize,
    /// Per-attribute feature dimension.
    pub m: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m_h == 0 || self.c == 0 || self.m == 0 {
            return Err(Error::InvalidInput("zero model dimension".to_string()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidInput("zero hidden width".to_string()));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.d;
        for &h in &self.hidden {
            dims.push((h, prev));
            prev = h;
        }
        dims.push((self.m_h, prev));
        dims
    }
}

/// Per-attribute linear classifiers: row k of `w` and `b[k]` score attribute k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Head {
    pub fn zeros(c: usize, m: usize) -> Self {
        Head {
            w: Matrix::zeros(c, m),
            b: vec![0.0; c],
        }
    }

    pub fn he_uniform(c: usize, m: usize, rng: &mut RngStream) -> Self {
        let limit = (6.0 / m as f64).sqrt();
        Head {
            w: Matrix::from_fn(c, m, |_, _| rng.uniform_symmetric(limit)),
            b: vec![0.0; c],
        }
    }

    pub fn logit(&self, k: usize, feature: &[f64]) -> f64 {
        crate::numkit::dot(self.w.row(k), feature) + self.b[k]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Classifier trained in stage 1; frozen during augmentation.
    Cls,
    /// Fresh classifier fine-tuned on re-sampled features.
    Ft,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub theta: Vec<Affine>,
    pub psi: Affine,
    pub cls: Head,
    pub ft: Head,
}

impl ModelParams {
    /// He-uniform init for all weight matrices, zero biases.
    pub fn init(dims: &ModelDims, rng: &mut RngStream) -> Result<Self> {
        dims.validate()?;
        let theta = dims
            .layer_dims()
            .into_iter()
            .map(|(out, inp)| Affine::he_uniform(out, inp, rng))
            .collect();
        let psi = Affine::he_uniform(dims.c * dims.m, dims.m_h, rng);
        let cls = Head::he_uniform(dims.c, dims.m, rng);
        let ft = Head::he_uniform(dims.c, dims.m, rng);
        Ok(ModelParams {
            dims: dims.clone(),
            theta,
            psi,
            cls,
            ft,
        })
    }

    pub fn zeros(dims: &ModelDims) -> Result<Self> {
        dims.validate()?;
        let theta = dims
            .layer_dims()
            .into_iter()
            .map(|(out, inp)| Affine::zeros(out, inp))
            .collect();
        Ok(ModelParams {
            dims: dims.clone(),
            theta,
            psi: Affine::zeros(dims.c * dims.m, dims.m_h),
            cls: Head::zeros(dims.c, dims.m),
            ft: Head::zeros(dims.c, dims.m),
        })
    }

    pub fn head(&self, kind: HeadKind) -> &Head {
        match kind {
            HeadKind::Cls => &self.cls,
            HeadKind::Ft => &self.ft,
        }
    }

    pub fn head_mut(&mut self, kind: HeadKind) -> &mut Head {
        match kind {
            HeadKind::Cls => &mut self.cls,
            HeadKind::Ft => &mut self.ft,
        }
    }

    fn shapes_consistent(&self) -> bool {
        let expected = self.dims.layer_dims();
        self.theta.len() == expected.len()
            && self
                .theta
                .iter()
                .zip(&expected)
                .all(|(l, &(out, inp))| l.out_dim() == out && l.in_dim() == inp && l.b.len() == out)
            && self.psi.out_dim() == self.dims.c * self.dims.m
            && self.psi.in_dim() == self.dims.m_h
            && self.cls.w.rows() == self.dims.c
            && self.cls.w.cols() == self.dims.m
            && self.cls.b.len() == self.dims.c
            && self.ft.w.rows() == self.dims.c
            && self.ft.w.cols() == self.dims.m
            && self.ft.b.len() == self.dims.c
    }

    pub fn all_finite(&self) -> bool {
        self.theta.iter().all(Affine::all_finite)
            && self.psi.all_finite()
            && self.cls.w.all_finite()
            && self.cls.b.iter().all(|v| v.is_finite())
            && self.ft.w.all_finite()
            && self.ft.b.iter().all(|v| v.is_finite())
    }

    /// Flattened view of the trainable parameters: theta layers in order
    /// (weights row-major, then bias), psi, then the selected head if any.
    /// Used by the finite-difference validation harness.
    pub fn params_vec(&self, include_head: Option<HeadKind>) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.theta {
            out.extend_from_slice(layer.w.data());
            out.extend_from_slice(&layer.b);
        }
        out.extend_from_slice(self.psi.w.data());
        out.extend_from_slice(&self.psi.b);
        if let Some(kind) = include_head {
            let head = self.head(kind);
            out.extend_from_slice(head.w.data());
            out.extend_from_slice(&head.b);
        }
        out
    }

    /// Inverse of [`ModelParams::params_vec`].
    pub fn assign_params(&mut self, include_head: Option<HeadKind>, flat: &[f64]) -> Result<()> {
        let expected = self.params_vec(include_head).len();
        if flat.len() != expected {
            return Err(Error::Dim(format!(
                "flat parameter length {} vs expected {}",
                flat.len(),
                expected
            )));
        }
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &flat[pos..pos + n];
            pos += n;
            s
        };
        for layer in &mut self.theta {
            let wn = layer.w.rows() * layer.w.cols();
            layer.w.data_mut().copy_from_slice(take(wn));
            let bn = layer.b.len();
            layer.b.copy_from_slice(take(bn));
        }
        let wn = self.psi.w.rows() * self.psi.w.cols();
        self.psi.w.data_mut().copy_from_slice(take(wn));
        let bn = self.psi.b.len();
        self.psi.b.copy_from_slice(take(bn));
        if let Some(kind) = include_head {
            let head = self.head_mut(kind);
            let wn = head.w.rows() * head.w.cols();
            head.w.data_mut().copy_from_slice(take(wn));
            let bn = head.b.len();
            head.b.copy_from_slice(take(bn));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let blob = CheckpointFile {
            schema_version: crate::SCHEMA_VERSION,
            params: self.clone(),
        };
        let json = serde_json::to_string(&blob)
            .map_err(|e| Error::Parse(format!("checkpoint encode: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let blob: CheckpointFile = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("checkpoint decode: {e}")))?;
        if blob.schema_version != crate::SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint schema_version {}",
                blob.schema_version
            )));
        }
        if !blob.params.shapes_consistent() {
            return Err(Error::Dim(
                "checkpoint parameter shapes do not match its dims".to_string(),
            ));
        }
        if !blob.params.all_finite() {
            return Err(Error::Numeric(
                "checkpoint holds non-finite values".to_string(),
            ));
        }
        Ok(blob.params)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    schema_version: u32,
    params: ModelParams,
}

/// Everything produced by one forward pass, retained for backprop.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Input to each theta layer (first entry is x itself).
    pub layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each theta layer.
    pub preacts: Vec<Vec<f64>>,
    /// Backbone feature f (output of the extractor).
    pub backbone: Vec<f64>,
    /// Flattened per-attribute features, C blocks of length M.
    pub attr_features: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardTrace {
    pub fn attr_feature(&self, k: usize, m: usize) -> &[f64] {
        &self.attr_features[k * m..(k + 1) * m]
    }
}

pub fn forward(p: &ModelParams, x: &[f64], head: HeadKind) -> Result<ForwardTrace> {
    if x.len() != p.dims.d {
        return Err(Error::Dim(format!(
            "input length {} vs model d {}",
            x.len(),
            p.dims.d
        )));
    }
    let n_layers = p.theta.len();
    let mut layer_inputs = Vec::with_capacity(n_layers);
    let mut preacts = Vec::with_capacity(n_layers);
    let mut a = x.to_vec();
    for (idx, layer) in p.theta.iter().enumerate() {
        let z = layer.forward(&a);
        layer_inputs.push(a);
        a = if idx + 1 < n_layers {
            z.iter().map(|&v| v.max(0.0)).collect()
        } else {
            z.clone()
        };
        preacts.push(z);
    }
    let backbone = a;
    let attr_features = p.psi.forward(&backbone);
    let h = p.head(head);
    let logits = (0..p.dims.c)
        .map(|k| h.logit(k, &attr_features[k * p.dims.m..(k + 1) * p.dims.m]))
        .collect();
    Ok(ForwardTrace {
        layer_inputs,
        preacts,
        backbone,
        attr_features,
        logits,
    })
}

/// Gradients in parameter-shaped containers.
#[derive(Clone, Debug)]
pub struct ParamGrads {
    pub theta: Vec<Affine>,
    pub psi: Affine,
    pub head: Head,
}

impl ParamGrads {
    fn zeros(p: &ModelParams) -> Self {
        ParamGrads {
            theta: p
                .theta
                .iter()
                .map(|l| Affine::zeros(l.out_dim(), l.in_dim()))
                .collect(),
            psi: Affine::zeros(p.psi.out_dim(), p.psi.in_dim()),
            head: Head::zeros(p.dims.c, p.dims.m),
        }
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.theta {
            l.w.scale(s);
            for b in &mut l.b {
                *b *= s;
            }
        }
        self.psi.w.scale(s);
        for b in &mut self.psi.b {
            *b *= s;
        }
        self.head.w.scale(s);
        for b in &mut self.head.b {
            *b *= s;
        }
    }

    /// Flattened to match [`ModelParams::params_vec`] ordering.
    pub fn grads_vec(&self, include_head: bool) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.theta {
            out.extend_from_slice(layer.w.data());
            out.extend_from_slice(&layer.b);
        }
        out.extend_from_slice(self.psi.w.data());
        out.extend_from_slice(&self.psi.b);
        if include_head {
            out.extend_from_slice(self.head.w.data());
            out.extend_from_slice(&self.head.b);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct BatchBackward {
    pub grads: ParamGrads,
    /// Mean over the batch of the summed per-attribute losses.
    pub loss: f64,
    /// Mean over the batch, per attribute.
    pub per_attr_loss: Vec<f64>,
}

/// How per-logit loss derivatives are formed from the forward trace.
enum LossMode<'a> {
    /// Plain BCE summed over attributes; optional per-attribute (pos, neg)
    /// sample weights.
    Bce {
        weights: Option<(&'a [f64], &'a [f64])>,
    },
    /// Absolute deviation of the per-attribute BCE from its centroid
    /// (`|L - mu|`, subgradient 0 at the kink). Head gradients are zero by
    /// construction: only the extractor is being steered.
    CentroidAbs { mu: &'a [f64] },
}

fn backward_batch(
    p: &ModelParams,
    ds: &Dataset,
    batch: &[usize],
    head: HeadKind,
    mode: LossMode<'_>,
) -> Result<BatchBackward> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".to_string()));
    }
    if ds.input_dim() != p.dims.d || ds.num_attributes() != p.dims.c {
        return Err(Error::Dim("dataset does not match model dims".to_string()));
    }
    let c = p.dims.c;
    let m = p.dims.m;
    let h = p.head(head);
    let mut grads = ParamGrads::zeros(p);
    let mut per_attr_loss = vec![0.0; c];
    let mut total = 0.0;
    let n_layers = p.theta.len();

    for &i in batch {
        let trace = forward(p, ds.input(i), head)?;
        // d(loss)/d(attr_features), accumulated over attributes.
        let mut d_attr = vec![0.0; c * m];
        for k in 0..c {
            let positive = ds.y.positive(i, k);
            let ind = indicator(positive);
            let (bce, dbce) = bce_raw(ind, trace.logits[k]);
            let (loss_k, dlogit) = match &mode {
                LossMode::Bce { weights } => {
                    let w = match weights {
                        Some((pos, neg)) => {
                            if positive {
                                pos[k]
                            } else {
                                neg[k]
                            }
                        }
                        None => 1.0,
                    };
                    (w * bce, w * dbce)
                }
                LossMode::CentroidAbs { mu } => {
                    let dev = bce - mu[k];
                    let sign = if dev > 0.0 {
                        1.0
                    } else if dev < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    (dev.abs(), sign * dbce)
                }
            };
            per_attr_loss[k] += loss_k;
            total += loss_k;
            if matches!(mode, LossMode::Bce { .. }) {
                let f_k = trace.attr_feature(k, m);
                grads
                    .head
                    .w
                    .row_mut(k)
                    .iter_mut()
                    .zip(f_k)
                    .for_each(|(g, f)| {
                        *g += dlogit * f;
                    });
                grads.head.b[k] += dlogit;
            }
            if dlogit != 0.0 {
                let w_k = h.w.row(k);
                crate::numkit::axpy(&mut d_attr[k * m..(k + 1) * m], w_k, dlogit);
            }
        }

        // psi
        grads.psi.w.add_outer(&d_attr, &trace.backbone, 1.0);
        for (g, d) in grads.psi.b.iter_mut().zip(&d_attr) {
            *g += d;
        }
        let mut upstream = p.psi.w.matvec_t(&d_attr);

        // theta, walking backward; ReLU applies between layers only.
        for idx in (0..n_layers).rev() {
            if idx + 1 < n_layers {
                for (u, z) in upstream.iter_mut().zip(&trace.preacts[idx]) {
                    if *z <= 0.0 {
                        *u = 0.0;
                    }
                }
            }
            grads.theta[idx]
                .w
                .add_outer(&upstream, &trace.layer_inputs[idx], 1.0);
            for (g, u) in grads.theta[idx].b.iter_mut().zip(&upstream) {
                *g += u;
            }
            if idx > 0 {
                upstream = p.theta[idx].w.matvec_t(&upstream);
            }
        }
    }

    let inv = 1.0 / batch.len() as f64;
    grads.scale(inv);
    for l in &mut per_attr_loss {
        *l *= inv;
    }
    Ok(BatchBackward {
        grads,
        loss: total * inv,
        per_attr_loss,
    })
}

/// Mean-over-batch, sum-over-attributes BCE loss and its exact gradients for
/// (theta, psi, selected head).
pub fn backward_bce(
    p: &ModelParams,
    ds: &Dataset,
    batch: &[usize],
    head: HeadKind,
) -> Result<BatchBackward> {
    backward_batch(p, ds, batch, head, LossMode::Bce { weights: None })
}

/// BCE with per-attribute positive/negative sample weights.
pub fn backward_bce_weighted(
    p: &ModelParams,
    ds: &Dataset,
    batch: &[usize],
    head: HeadKind,
    pos_weights: &[f64],
    neg_weights: &[f64],
) -> Result<BatchBackward> {
    if pos_weights.len() != p.dims.c || neg_weights.len() != p.dims.c {
        return Err(Error::Dim("weight vector length".to_string()));
    }
    backward_batch(
        p,
        ds,
        batch,
        head,
        LossMode::Bce {
            weights: Some((pos_weights, neg_weights)),
        },
    )
}

/// Gradient of `(1/|B|) sum_i sum_k |L_cls(f_i^k) - mu_k|` for (theta, psi)
/// only; the frozen classifier's gradients are identically zero.
pub fn backward_goat(
    p: &ModelParams,
    ds: &Dataset,
    batch: &[usize],
    mu: &[f64],
    frozen: HeadKind,
) -> Result<BatchBackward> {
    if mu.len() != p.dims.c {
        return Err(Error::Dim("centroid vector length".to_string()));
    }
    if mu.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite centroid".to_string()));
    }
    backward_batch(p, ds, batch, frozen, LossMode::CentroidAbs { mu })
}

/// One SGD step; `update_head` selects whether the chosen head moves.
pub fn sgd_step(
    p: &mut ModelParams,
    grads: &ParamGrads,
    head: HeadKind,
    lr: f64,
    update_head: bool,
) {
    for (layer, g) in p.theta.iter_mut().zip(&grads.theta) {
        layer.add_scaled(g, -lr);
    }
    p.psi.add_scaled(&grads.psi, -lr);
    if update_head {
        let h = p.head_mut(head);
        h.w.add_scaled(&grads.head.w, -lr);
        for (b, g) in h.b.iter_mut().zip(&grads.head.b) {
            *b += -lr * g;
        }
    }
}

/// Sigmoid posterior matrix (N x C) under the chosen head.
pub fn predict_probs(p: &ModelParams, ds: &Dataset, head: HeadKind) -> Result<Matrix> {
    let mut out = Matrix::zeros(ds.len(), p.dims.c);
    for i in 0..ds.len() {
        let trace = forward(p, ds.input(i), head)?;
        for k in 0..p.dims.c {
            out.set(i, k, sigmoid(trace.logits[k]));
        }
    }
    Ok(out)
}

/// Per-sample, per-attribute BCE loss under the chosen head.
pub fn attribute_losses(p: &ModelParams, ds: &Dataset, head: HeadKind) -> Result<Matrix> {
    let mut out = Matrix::zeros(ds.len(), p.dims.c);
    for i in 0..ds.len() {
        let trace = forward(p, ds.input(i), head)?;
        for k in 0..p.dims.c {
            let ind = indicator(ds.y.positive(i, k));
            out.set(i, k, softplus(-ind * trace.logits[k]));
        }
    }
    Ok(out)
}
