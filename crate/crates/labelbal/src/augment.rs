//! Feature-space augmentation and its analysis tools.
//!
//! Two augmentation families live here. The homogeneous one re-samples a
//! feature from a Gaussian centered on it, `f ~ N(f, lambda * Sigma)`; its
//! expected-loss upper bound has a closed form, BCE with a fixed margin
//! `0.5 * w' lambda Sigma w`, so the specific covariance only matters
//! through that quadratic form ([`margin_matched_sigma`] makes two
//! covariances agree exactly). The heterogeneous one translates each
//! feature along the gradient of its classifier-loss deviation from the
//! dataset centroid ([`goat_translate`]), which is what the harvest
//! trajectories in [`crate::trainer`] realize implicitly.

use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::model::{forward, Head, HeadKind, ModelParams};
use crate::numkit::loss::bce_raw;
use crate::numkit::{dot, indicator, sigmoid, softplus, Matrix, RngStream, StreamId};
use crate::trainer::{compute_loss_centroids, TrainConfig};

/// Covariance choice for homogeneous augmentation: explicit matrices or a
/// seeded random-noise covariance (the ablation that shows the choice is
/// margin-equivalent anyway).
#[derive(Clone, Debug)]
pub enum SigmaSpec {
    Matrices(Vec<Matrix>),
    RandomNoise { seed: u64 },
}

#[derive(Clone, Debug)]
pub struct HomoAugConfig {
    pub lambda: Vec<f64>,
    pub sigma: SigmaSpec,
}

impl HomoAugConfig {
    /// Concrete per-attribute covariances; random-noise resolves to a seeded
    /// PSD matrix `G G^T / m` shared across attributes.
    pub fn resolved_sigmas(&self, c: usize, m: usize) -> Result<Vec<Matrix>> {
        if self.lambda.len() != c {
            return Err(Error::Dim("lambda count".to_string()));
        }
        if self.lambda.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
            return Err(Error::InvalidInput(
                "lambda must be finite and >= 0".to_string(),
            ));
        }
        match &self.sigma {
            SigmaSpec::Matrices(ms) => {
                if ms.len() != c {
                    return Err(Error::Dim("sigma count".to_string()));
                }
                if ms.iter().any(|s| s.rows() != m || s.cols() != m) {
                    return Err(Error::Dim("sigma shape".to_string()));
                }
                Ok(ms.clone())
            }
            SigmaSpec::RandomNoise { seed } => {
                let noise = random_noise_sigma(m, *seed);
                Ok(vec![noise; c])
            }
        }
    }
}

/// Seeded random PSD covariance for the noise-covariance ablation.
pub fn random_noise_sigma(m: usize, seed: u64) -> Matrix {
    let mut rng = RngStream::new(seed, StreamId::IsdaNoise);
    let g = Matrix::from_fn(m, m, |_, _| rng.normal());
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = dot(g.row(i), g.row(j)) / m as f64;
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    out
}

/// Translates a feature one step along the descent direction of
/// `|L_cls(f) - mu_k|` under the attribute-k classifier; returns `f`
/// unchanged at the kink (`L = mu`).
pub fn goat_translate(
    head: &Head,
    k: usize,
    f: &[f64],
    positive: bool,
    mu_k: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    if k >= head.w.rows() {
        return Err(Error::InvalidInput(format!("attribute {k} out of range")));
    }
    if f.len() != head.w.cols() {
        return Err(Error::Dim("feature length".to_string()));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidInput("eta must be positive".to_string()));
    }
    let ind = indicator(positive);
    let logit = head.logit(k, f);
    let (loss, dlogit) = bce_raw(ind, logit);
    let dev = loss - mu_k;
    if dev == 0.0 {
        return Ok(f.to_vec());
    }
    let sign = dev.signum();
    // grad_f |L - mu| = sign * dlogit * w; step against it.
    let mut out = f.to_vec();
    crate::numkit::axpy(&mut out, head.w.row(k), -eta * sign * dlogit);
    Ok(out)
}

/// Cholesky-style factor of a PSD matrix scaled by `lambda`, tolerant of
/// semidefiniteness: returns lower-triangular L with `L L^T = lambda * S`.
/// Rejects matrices with a meaningfully negative pivot.
pub fn psd_factor(sigma: &Matrix, lambda: f64) -> Result<Matrix> {
    if sigma.rows() != sigma.cols() {
        return Err(Error::Dim("covariance must be square".to_string()));
    }
    let m = sigma.rows();
    for i in 0..m {
        for j in 0..i {
            if (sigma.get(i, j) - sigma.get(j, i)).abs() > 1e-9 {
                return Err(Error::config(
                    "config.sigma_not_symmetric",
                    "covariance must be symmetric",
                ));
            }
        }
    }
    let scale = sigma
        .data()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let tol = 1e-10 * scale * lambda.max(1.0);
    let mut l = Matrix::zeros(m, m);
    for j in 0..m {
        let mut d = lambda * sigma.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if d < -tol {
            return Err(Error::config(
                "config.sigma_not_psd",
                format!("covariance is not positive semidefinite (pivot {d} at {j})"),
            ));
        }
        if d <= tol {
            // Semidefinite direction: zero column.
            continue;
        }
        let root = d.sqrt();
        l.set(j, j, root);
        for i in (j + 1)..m {
            let mut v = lambda * sigma.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / root);
        }
    }
    Ok(l)
}

/// Pre-factored sampler for `f ~ N(f, lambda_k * Sigma_k)`.
pub struct IsdaSampler {
    factors: Vec<Matrix>,
}

impl IsdaSampler {
    pub fn new(cfg: &HomoAugConfig, c: usize, m: usize) -> Result<Self> {
        let sigmas = cfg.resolved_sigmas(c, m)?;
        let factors = sigmas
            .iter()
            .zip(&cfg.lambda)
            .map(|(s, &l)| psd_factor(s, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(IsdaSampler { factors })
    }

    pub fn sample(&self, f: &[f64], k: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        let factor = self
            .factors
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("attribute {k} out of range")))?;
        if f.len() != factor.rows() {
            return Err(Error::Dim("feature length".to_string()));
        }
        let m = f.len();
        let z: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
        let mut out = f.to_vec();
        // out += L z (lower triangular)
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += factor.get(i, j) * z[j];
            }
            out[i] += acc;
        }
        Ok(out)
    }
}

/// One draw of the homogeneous augmentation.
pub fn isda_sample(
    f: &[f64],
    k: usize,
    cfg: &HomoAugConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let sampler = IsdaSampler::new(cfg, cfg.lambda.len(), f.len())?;
    sampler.sample(f, k, rng)
}

/// Closed-form upper bound of the expected BCE under Gaussian feature
/// re-sampling: `(1/n) sum log(1 + e^{-I(y)(w f + b) + 0.5 w' lambda Sigma w})`.
pub fn isda_margin_loss(
    batch: &[(Vec<f64>, bool)],
    w: &[f64],
    b: f64,
    lambda: f64,
    sigma: &Matrix,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".to_string()));
    }
    if sigma.rows() != w.len() || sigma.cols() != w.len() {
        return Err(Error::Dim("covariance vs weight length".to_string()));
    }
    let margin = 0.5 * lambda * dot(w, &sigma.matvec(w));
    let mut total = 0.0;
    for (f, positive) in batch {
        if f.len() != w.len() {
            return Err(Error::Dim("feature length".to_string()));
        }
        let ind = indicator(*positive);
        total += softplus(-ind * (dot(w, f) + b) + margin);
    }
    Ok(total / batch.len() as f64)
}

/// Solves `w' lambda1 Sigma1 w = w' lambda* SigmaStar w` for `lambda*`; the
/// margin loss with `(lambda*, SigmaStar)` then equals the one with
/// `(lambda1, Sigma1)` for this `w`.
pub fn margin_matched_sigma(
    w: &[f64],
    lambda1: f64,
    sigma1: &Matrix,
    sigma_star: &Matrix,
) -> Result<f64> {
    if sigma1.rows() != w.len() || sigma_star.rows() != w.len() {
        return Err(Error::Dim("covariance vs weight length".to_string()));
    }
    let q1 = dot(w, &sigma1.matvec(w));
    let q_star = dot(w, &sigma_star.matvec(w));
    if q_star <= 0.0 {
        return Err(Error::Numeric(
            "degenerate quadratic form w' Sigma* w <= 0".to_string(),
        ));
    }
    Ok(lambda1 * q1 / q_star)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DenoiseEstimate {
    /// Estimated feature-noise rate per attribute.
    pub sigma_hat: Vec<f64>,
    /// `1 - sigma_hat`: mean posterior assigned to the observed label.
    pub success_rate: Vec<f64>,
}

/// Estimates the extractor's per-attribute success rate as the dataset mean
/// of the sigmoid probability assigned to the observed label under the
/// stage-1 classifier.
pub fn estimate_noise_rate(p: &ModelParams, ds: &Dataset) -> Result<DenoiseEstimate> {
    let c = p.dims.c;
    let mut success = vec![0.0; c];
    for i in 0..ds.len() {
        let trace = forward(p, ds.input(i), HeadKind::Cls)?;
        for k in 0..c {
            let prob = sigmoid(trace.logits[k]);
            success[k] += if ds.y.positive(i, k) {
                prob
            } else {
                1.0 - prob
            };
        }
    }
    let n = ds.len() as f64;
    for s in &mut success {
        *s /= n;
    }
    let sigma_hat = success.iter().map(|s| 1.0 - s).collect();
    Ok(DenoiseEstimate {
        sigma_hat,
        success_rate: success,
    })
}

/// Top-k eigenpairs of a symmetric PSD matrix by power iteration with
/// deflation. Eigenvalues come out non-increasing; eigenvectors unit-norm.
pub fn top_eigenpairs(
    mat: &Matrix,
    k: usize,
    iterations: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if mat.rows() != mat.cols() {
        return Err(Error::Dim("matrix must be square".to_string()));
    }
    let m = mat.rows();
    if k > m {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenpairs of a {m}x{m} matrix"
        )));
    }
    let mut deflated = mat.clone();
    let mut values = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        // Deterministic start vector with components on every axis.
        let mut v: Vec<f64> = (0..m)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } + 0.01 * i as f64)
            .collect();
        let n0 = crate::numkit::norm(&v);
        v.iter_mut().for_each(|x| *x /= n0);
        for _ in 0..iterations {
            let mut next = deflated.matvec(&v);
            // Re-orthogonalize against found eigenvectors; keeps deflation
            // from drifting back.
            for prev in &vectors {
                let proj = dot(&next, prev);
                crate::numkit::axpy(&mut next, prev, -proj);
            }
            let n = crate::numkit::norm(&next);
            if n < 1e-300 {
                break;
            }
            next.iter_mut().for_each(|x| *x /= n);
            v = next;
        }
        let lambda = dot(&v, &deflated.matvec(&v));
        // Deflate.
        let mut next_mat = deflated.clone();
        next_mat.add_outer(&v, &v, -lambda);
        deflated = next_mat;
        values.push(lambda);
        vectors.push(v);
    }
    Ok((values, vectors))
}

/// Empirical covariance of the stage-1 features of label-positive samples,
/// per attribute; the default homogeneous-augmentation covariance.
pub fn positive_feature_covariances(p: &ModelParams, ds: &Dataset) -> Result<Vec<Matrix>> {
    let c = p.dims.c;
    let m = p.dims.m;
    let mut sums = vec![vec![0.0; m]; c];
    let mut counts = vec![0usize; c];
    let mut feats: Vec<Vec<Vec<f64>>> = vec![Vec::new(); c];
    for i in 0..ds.len() {
        let trace = forward(p, ds.input(i), HeadKind::Cls)?;
        for k in 0..c {
            if ds.y.positive(i, k) {
                let f = trace.attr_feature(k, m).to_vec();
                crate::numkit::axpy(&mut sums[k], &f, 1.0);
                counts[k] += 1;
                feats[k].push(f);
            }
        }
    }
    let mut out = Vec::with_capacity(c);
    for k in 0..c {
        if counts[k] < 2 {
            return Err(Error::Numeric(format!(
                "attribute {k} has fewer than 2 positive samples; covariance undefined"
            )));
        }
        let n = counts[k] as f64;
        let mean: Vec<f64> = sums[k].iter().map(|s| s / n).collect();
        let mut cov = Matrix::zeros(m, m);
        for f in &feats[k] {
            let centered: Vec<f64> = f.iter().zip(&mean).map(|(a, b)| a - b).collect();
            cov.add_outer(&centered, &centered, 1.0);
        }
        cov.scale(1.0 / (n - 1.0));
        out.push(cov);
    }
    Ok(out)
}

/// Eigen-analysis of translation directions for one probe feature.
#[derive(Clone, Debug, Serialize)]
pub struct FeatureEigens {
    pub sample: usize,
    pub attribute: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Collects `n_dirs` translating directions per (probe sample, attribute) by
/// re-running short harvest-style extractor trajectories under varied batch
/// orders, then returns the top eigenpairs of each direction covariance.
///
/// A direction is `f(snapshot moved s steps) - f(stage 1)` for the probe's
/// attribute feature; trajectories restart from the stage-1 snapshot, so the
/// cloud is exactly the displacement field the implicit augmentation
/// produces around each feature.
pub fn direction_eigens(
    p_star: &ModelParams,
    ds_sample: &Dataset,
    cfg: &TrainConfig,
    n_dirs: usize,
    top_l: usize,
) -> Result<Vec<FeatureEigens>> {
    cfg.validate()?;
    if n_dirs < top_l {
        return Err(Error::InvalidInput(
            "n_dirs must be at least top_l".to_string(),
        ));
    }
    if top_l == 0 || top_l > p_star.dims.m {
        return Err(Error::InvalidInput("bad top_l".to_string()));
    }
    let c = p_star.dims.c;
    let m = p_star.dims.m;
    let n_probe = ds_sample.len();
    let dirs_per_trajectory = cfg.t;
    let n_trajectories = n_dirs.div_ceil(dirs_per_trajectory);

    let mu = compute_loss_centroids(p_star, ds_sample)?;

    // Stage-1 features of every probe sample.
    let mut base_features = Vec::with_capacity(n_probe);
    for i in 0..n_probe {
        let trace = forward(p_star, ds_sample.input(i), HeadKind::Cls)?;
        base_features.push(trace.attr_features.clone());
    }

    // directions[i][k] collects one displacement vector per trajectory step.
    let mut directions: Vec<Vec<Vec<Vec<f64>>>> = vec![vec![Vec::new(); c]; n_probe];
    for traj in 0..n_trajectories {
        let mut p = p_star.clone();
        let mut order_rng = RngStream::new_phase(cfg.seed, StreamId::Directions, traj as u64);
        let mut order: Vec<usize> = (0..n_probe).collect();
        let mut pos = 0usize;
        order_rng.shuffle(&mut order);
        for _step in 0..dirs_per_trajectory {
            // Instance-balanced batch over the probe set.
            let mut batch = Vec::with_capacity(cfg.batch_size.min(n_probe));
            for _ in 0..cfg.batch_size.min(n_probe) {
                if pos >= order.len() {
                    order_rng.shuffle(&mut order);
                    pos = 0;
                }
                batch.push(order[pos]);
                pos += 1;
            }
            let out = crate::model::backward_goat(&p, ds_sample, &batch, &mu.mu, HeadKind::Cls)?;
            crate::model::sgd_step(&mut p, &out.grads, HeadKind::Cls, cfg.alpha, false);
            for i in 0..n_probe {
                let trace = forward(&p, ds_sample.input(i), HeadKind::Cls)?;
                for k in 0..c {
                    let dir: Vec<f64> = trace
                        .attr_feature(k, m)
                        .iter()
                        .zip(&base_features[i][k * m..(k + 1) * m])
                        .map(|(a, b)| a - b)
                        .collect();
                    directions[i][k].push(dir);
                }
            }
        }
    }

    let mut out = Vec::with_capacity(n_probe * c);
    for i in 0..n_probe {
        for k in 0..c {
            let dirs = &directions[i][k];
            if dirs.len() < n_dirs {
                return Err(Error::InvalidInput(format!(
                    "collected {} directions, need {n_dirs}",
                    dirs.len()
                )));
            }
            let dirs = &dirs[..n_dirs];
            let cov = covariance_of(dirs, m);
            let (eigenvalues, eigenvectors) = top_eigenpairs(&cov, top_l, 200)?;
            out.push(FeatureEigens {
                sample: i,
                attribute: k,
                eigenvalues,
                eigenvectors,
            });
        }
    }
    Ok(out)
}

/// Sample covariance of a direction set.
pub fn covariance_of(dirs: &[Vec<f64>], m: usize) -> Matrix {
    let n = dirs.len() as f64;
    let mut mean = vec![0.0; m];
    for d in dirs {
        crate::numkit::axpy(&mut mean, d, 1.0);
    }
    for v in &mut mean {
        *v /= n;
    }
    let mut cov = Matrix::zeros(m, m);
    for d in dirs {
        let centered: Vec<f64> = d.iter().zip(&mean).map(|(a, b)| a - b).collect();
        cov.add_outer(&centered, &centered, 1.0);
    }
    cov.scale(1.0 / (n - 1.0).max(1.0));
    cov
}

/// Posterior variation `|sigmoid(w_k (f + t v) + b_k) - sigmoid(w_k f + b_k)|`
/// per attribute along a unit ray.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCurve {
    pub t_grid: Vec<f64>,
    /// `values[j][k]`: variation at `t_grid[j]` for attribute k.
    pub values: Vec<Vec<f64>>,
}

/// CSV export of posterior sweeps along each probe feature's
/// eigen-directions: one row per (feature, eigen index, t) with one
/// variation column per attribute.
pub fn write_eigen_sweep_csv(
    p: &ModelParams,
    ds_probe: &Dataset,
    eigens: &[FeatureEigens],
    t_grid: &[f64],
    path: &std::path::Path,
) -> Result<()> {
    let c = p.dims.c;
    let m = p.dims.m;
    let mut out = String::from("sample,attribute,eigen_index,t");
    for k in 0..c {
        out.push_str(&format!(",var_attr_{k}"));
    }
    out.push('\n');
    for fe in eigens {
        let trace = forward(p, ds_probe.input(fe.sample), HeadKind::Cls)?;
        let f = trace.attr_feature(fe.attribute, m);
        for (l, v) in fe.eigenvectors.iter().enumerate() {
            let curve = posterior_sweep(f, v, t_grid, &p.cls)?;
            for (j, &t) in curve.t_grid.iter().enumerate() {
                out.push_str(&format!("{},{},{l},{t}", fe.sample, fe.attribute));
                for k in 0..c {
                    out.push_str(&format!(",{}", curve.values[j][k]));
                }
                out.push('\n');
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn posterior_sweep(f: &[f64], v: &[f64], t_grid: &[f64], head: &Head) -> Result<SweepCurve> {
    if f.len() != head.w.cols() || v.len() != f.len() {
        return Err(Error::Dim("feature/direction length".to_string()));
    }
    if (crate::numkit::norm(v) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(
            "direction must be unit-norm".to_string(),
        ));
    }
    let c = head.w.rows();
    let base: Vec<f64> = (0..c).map(|k| sigmoid(head.logit(k, f))).collect();
    let mut values = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let shifted: Vec<f64> = f.iter().zip(v).map(|(a, b)| a + t * b).collect();
        values.push(
            (0..c)
                .map(|k| (sigmoid(head.logit(k, &shifted)) - base[k]).abs())
                .collect(),
        );
    }
    Ok(SweepCurve {
        t_grid: t_grid.to_vec(),
        values,
    })
}
