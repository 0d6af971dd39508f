//! Minimal end-to-end run: generate an imbalanced dataset, audit its
//! balanced-sampling feasibility, train the baseline and the feature-
//! resampled arm, and compare their mean accuracy.

use labelbal::cli::{self, Arm, DataSource, RunConfig};
use labelbal::lir;

fn main() -> labelbal::Result<()> {
    let mut cfg = RunConfig::default_benchmark(Arm::Baseline, 1, "unused".into());
    // Shrink the stock benchmark so this example runs in a few seconds.
    if let DataSource::Generate { config } = &mut cfg.source {
        config.n = 4000;
    }
    cfg.train.t1 = 800;
    cfg.train.t2 = 1200;
    cfg.train.lr_decay = None;

    if let DataSource::Generate { config } = &cfg.source {
        let ds = labelbal::datagen::generate_synthetic(config)?;
        let audit = lir::check_lir_feasibility(&ds.y, lir::default_eps(ds.len()))?;
        println!(
            "balanced image re-sampling feasible: {} (max min weight {:.3e})",
            audit.feasible, audit.max_min_weight
        );
    }

    let baseline = cli::run_train(&cfg)?;
    cfg.arm = Arm::Frdl;
    let frdl = cli::run_train(&cfg)?;
    println!(
        "baseline mA {:.4} -> feature-resampled mA {:.4}",
        baseline.report.eval.ma, frdl.report.eval.ma
    );
    for (k, (b, f)) in baseline
        .report
        .eval
        .per_attribute_ma
        .iter()
        .zip(&frdl.report.eval.per_attribute_ma)
        .enumerate()
    {
        let mean = baseline.report.eval_label_stats.label_means[k];
        println!("attr {k} (label mean {mean:.3}): {b:.4} -> {f:.4}");
    }
    Ok(())
}
