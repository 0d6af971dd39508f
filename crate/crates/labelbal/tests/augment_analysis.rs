//! Eigen-analysis of translation directions: the power-iteration solver
//! against a dense Jacobi oracle, sampling-fluctuation behavior on isotropic
//! clouds, and the posterior-variation contrast between top and bottom
//! eigen-directions on a trained model.

mod common;

use labelbal::augment::{covariance_of, direction_eigens, posterior_sweep, top_eigenpairs};
use labelbal::datagen::{generate_synthetic, Dataset, GenConfig};
use labelbal::model::{forward, HeadKind, ModelDims, ModelParams};
use labelbal::numkit::{dot, Matrix, RngStream, StreamId};
use labelbal::trainer::{train_stage1, TrainConfig};

#[test]
fn power_iteration_matches_dense_jacobi() {
    // Anisotropic directions give a well-separated spectrum on M = 16.
    let m = 16;
    let mut rng = RngStream::new(31, StreamId::Directions);
    let dirs: Vec<Vec<f64>> = (0..512)
        .map(|_| {
            (0..m)
                .map(|j| rng.normal() * (1.0 + 0.6 * j as f64))
                .collect()
        })
        .collect();
    let cov = covariance_of(&dirs, m);
    let (vals, vecs) = top_eigenpairs(&cov, m, 200).unwrap();
    let (dense_vals, dense_vecs) = common::jacobi_eigh(&cov);
    for k in 0..m {
        let rel = (vals[k] - dense_vals[k]).abs() / dense_vals[k].abs().max(1e-12);
        assert!(
            rel < 1e-6,
            "eigenvalue {k}: {} vs {} (rel {rel})",
            vals[k],
            dense_vals[k]
        );
        let align = dot(&vecs[k], &dense_vecs[k]).abs();
        assert!(align > 1.0 - 1e-6, "eigenvector {k} alignment {align}");
    }
}

#[test]
fn isotropic_directions_have_bounded_eigenvalue_spread() {
    // 4096 isotropic Gaussian directions: the covariance spectrum is flat up
    // to sampling fluctuation; top/bottom ratio stays under 1.5.
    let m = 16;
    let mut rng = RngStream::new(33, StreamId::Directions);
    let dirs: Vec<Vec<f64>> = (0..4096)
        .map(|_| (0..m).map(|_| rng.normal()).collect())
        .collect();
    let cov = covariance_of(&dirs, m);
    let (dense_vals, _) = common::jacobi_eigh(&cov);
    let dense_ratio = dense_vals[0] / dense_vals[m - 1];
    assert!(dense_ratio < 1.5, "dense spread {dense_ratio}");
    let (vals, _) = top_eigenpairs(&cov, m, 200).unwrap();
    let ratio = vals[0] / vals[m - 1];
    assert!(ratio < 1.5, "power-iteration spread {ratio}");
}

fn trained_small_model() -> (ModelParams, Dataset, TrainConfig) {
    let gen = GenConfig {
        n: 2000,
        d: 12,
        c: 3,
        target_means: vec![0.1, 0.3, 0.5],
        co_occurrence_rules: vec![],
        prototype_scale: 1.0,
        noise_sigma: 0.5,
        seed: 35,
    };
    let ds = generate_synthetic(&gen).unwrap();
    let dims = ModelDims {
        d: 12,
        hidden: vec![16],
        m_h: 16,
        c: 3,
        m: 6,
    };
    let mut rng = RngStream::new(35, StreamId::Init);
    let p0 = ModelParams::init(&dims, &mut rng).unwrap();
    let cfg = TrainConfig {
        alpha: 0.1,
        t1: 500,
        t2: 520,
        t: 20,
        batch_size: 64,
        bank_capacity: 1024,
        eta: 0.05,
        gamma: 1.0,
        seed: 35,
        lr_decay: None,
    };
    let (p, _) = train_stage1(&ds, &cfg, &p0).unwrap();
    (p, ds, cfg)
}

#[test]
fn direction_eigens_produces_orthonormal_pairs_and_validates_inputs() {
    let (p, ds, mut cfg) = trained_small_model();
    cfg.alpha = 0.05;
    let mut probe_rows: Vec<Vec<f64>> = Vec::new();
    let mut probe_labels = Vec::new();
    for i in 0..24 {
        probe_rows.push(ds.input(i).to_vec());
        probe_labels.push(ds.y.row(i).to_vec());
    }
    let probe = Dataset::new(
        Matrix::from_rows(&probe_rows).unwrap(),
        labelbal::datagen::LabelMatrix::from_rows(&probe_labels).unwrap(),
        ds.attribute_names.clone(),
    )
    .unwrap();

    let eigens = direction_eigens(&p, &probe, &cfg, 40, 3).unwrap();
    assert_eq!(eigens.len(), probe.len() * 3);
    for fe in &eigens {
        for w in fe.eigenvalues.windows(2) {
            assert!(w[0] >= w[1] - 1e-9);
        }
        for i in 0..fe.eigenvectors.len() {
            let n = labelbal::numkit::norm(&fe.eigenvectors[i]);
            assert!((n - 1.0).abs() < 1e-6, "norm {n}");
            for j in 0..i {
                assert!(dot(&fe.eigenvectors[i], &fe.eigenvectors[j]).abs() < 1e-6);
            }
        }
    }

    // top_l larger than the collected budget is rejected.
    assert!(direction_eigens(&p, &probe, &cfg, 2, 3).is_err());

    // CSV export: header plus one row per (feature, eigen, t); variation
    // values round-trip against a direct sweep.
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("eigen_sweep.csv");
    let grid = [-1.0, 0.0, 1.0];
    labelbal::augment::write_eigen_sweep_csv(&p, &probe, &eigens, &grid, &csv_path).unwrap();
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sample,attribute,eigen_index,t,var_attr_0,var_attr_1,var_attr_2"
    );
    // 3 eigenvectors per feature, 3 grid points each.
    assert_eq!(text.lines().count(), 1 + eigens.len() * 3 * grid.len());
    // Spot-check the first data row against posterior_sweep directly.
    let first = lines.next().unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    let fe = &eigens[0];
    let trace = forward(&p, probe.input(fe.sample), HeadKind::Cls).unwrap();
    let f = trace.attr_feature(fe.attribute, p.dims.m);
    let sweep = posterior_sweep(f, &fe.eigenvectors[0], &[-1.0], &p.cls).unwrap();
    for k in 0..3 {
        let got: f64 = fields[4 + k].parse().unwrap();
        assert_eq!(got, sweep.values[0][k]);
    }
}

#[test]
fn posterior_varies_more_along_top_than_bottom_eigendirection() {
    // Translation clouds concentrate along directions the classifier reacts
    // to; at |t| = 2 the mean posterior variation along the top
    // eigen-direction must beat the bottom one, averaged over 64 features
    // and 5 direction-sampling seeds.
    let (p, ds, mut cfg) = trained_small_model();
    cfg.alpha = 0.05;
    let m = p.dims.m;
    let mut top_sum = 0.0;
    let mut bottom_sum = 0.0;
    let mut count = 0.0;
    for cloud_seed in 1..=5u64 {
        cfg.seed = cloud_seed;
        // 64 probe features: ~22 samples x 3 attributes.
        let mut probe_rows: Vec<Vec<f64>> = Vec::new();
        let mut probe_labels = Vec::new();
        for i in 0..22 {
            let idx = (cloud_seed as usize * 100 + i) % ds.len();
            probe_rows.push(ds.input(idx).to_vec());
            probe_labels.push(ds.y.row(idx).to_vec());
        }
        let probe = Dataset::new(
            Matrix::from_rows(&probe_rows).unwrap(),
            labelbal::datagen::LabelMatrix::from_rows(&probe_labels).unwrap(),
            ds.attribute_names.clone(),
        )
        .unwrap();
        let eigens = direction_eigens(&p, &probe, &cfg, 60, m).unwrap();
        for fe in &eigens {
            let trace = forward(&p, probe.input(fe.sample), HeadKind::Cls).unwrap();
            let f = trace.attr_feature(fe.attribute, m);
            let grid = [-2.0, 2.0];
            let top = posterior_sweep(f, &fe.eigenvectors[0], &grid, &p.cls).unwrap();
            let bottom = posterior_sweep(f, &fe.eigenvectors[m - 1], &grid, &p.cls).unwrap();
            for j in 0..grid.len() {
                top_sum += top.values[j][fe.attribute];
                bottom_sum += bottom.values[j][fe.attribute];
                count += 1.0;
            }
        }
    }
    let top_mean = top_sum / count;
    let bottom_mean = bottom_sum / count;
    assert!(
        top_mean > bottom_mean,
        "top direction variation {top_mean} <= bottom {bottom_mean}"
    );
}
