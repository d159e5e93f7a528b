use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use strucpca::eval::{emit_csv, emit_plot, linear_fit_r2, LossCurve, SaturationCurve};
use strucpca::polar_mnist::{
    accuracy_vs_samples_sweep, load_mnist, run_polar_pipeline, ClassifierKind, GrayImage, PolarGeometry,
    PolarPipelineConfig,
};
use strucpca::train::flatten_params;
use strucpca::{OptimizerKind, TrainingConfig};

use crate::config::{create_run_dir, usage, RunConfig};
use crate::output::{write_summary, Summary};

/// Directory holding the four IDX files unless `data_dir` is given.
pub const DATA_DIR_ENV: &str = "STRUCPCA_DATA_DIR";

pub fn defaults() -> Vec<(&'static str, String)> {
    let data_dir = std::env::var(DATA_DIR_ENV).unwrap_or_else(|_| "data/mnist".into());
    vec![
        ("data_dir", data_dir),
        ("classifier", "linear".into()),
        ("mlp_widths", "13,7".into()),
        ("radial_bins", "28".into()),
        ("pca_k", "3".into()),
        ("train_samples", "10000".into()),
        ("test_samples", "10000".into()),
        ("epochs", "30".into()),
        ("batch_size", "64".into()),
        ("lr", "0.1".into()),
        ("momentum", "0.9".into()),
        ("seed", "0".into()),
        ("out_dir", "runs".into()),
    ]
}

pub fn saturation_defaults() -> Vec<(&'static str, String)> {
    let mut d = defaults();
    d.retain(|(k, _)| *k != "train_samples");
    d.insert(5, ("counts", "1000,5000,10000,20000".into()));
    d
}

fn pipeline_config(cfg: &RunConfig) -> Result<PolarPipelineConfig> {
    let classifier = match cfg.raw("classifier") {
        "linear" => ClassifierKind::Linear,
        "mlp3" => {
            let w: Vec<usize> = cfg.list("mlp_widths")?;
            let [a, b] = w[..] else {
                return Err(usage(format!("mlp_widths={} needs two widths", cfg.raw("mlp_widths"))));
            };
            ClassifierKind::Mlp3 { widths: (a, b) }
        }
        other => return Err(usage(format!("classifier={other}: expected linear or mlp3"))),
    };
    Ok(PolarPipelineConfig {
        geometry: PolarGeometry::with_bins(cfg.get("radial_bins")?),
        pca_k: cfg.get("pca_k")?,
        classifier,
        training: TrainingConfig {
            seed: cfg.seed(),
            epochs: cfg.get("epochs")?,
            batch_size: cfg.get("batch_size")?,
            learning_rate: cfg.get("lr")?,
            optimizer: OptimizerKind::Sgd {
                momentum: cfg.get("momentum")?,
            },
        },
    })
}

type Split = (Vec<GrayImage>, Vec<u8>);

fn load(dir: &Path, prefix: &str, n: usize) -> Result<Split> {
    let images: PathBuf = dir.join(format!("{prefix}-images-idx3-ubyte"));
    let labels: PathBuf = dir.join(format!("{prefix}-labels-idx1-ubyte"));
    let (mut x, mut y) = load_mnist(&images, &labels)?;
    if n > x.len() {
        bail!("{} holds {} images, {n} requested", images.display(), x.len());
    }
    x.truncate(n);
    y.truncate(n);
    Ok((x, y))
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let pipeline = pipeline_config(cfg)?;
    let dir = cfg.path("data_dir");
    let train = load(&dir, "train", cfg.get("train_samples")?)?;
    let test = load(&dir, "t10k", cfg.get("test_samples")?)?;
    let run_dir = create_run_dir(cfg, "mnist")?;

    let out = run_polar_pipeline((&train.0, &train.1), (&test.0, &test.1), &pipeline)?;
    let r = &out.report;
    let accuracy = r.test_accuracy.unwrap_or(0.0);
    println!("params={}", r.param_count);
    println!("accuracy={accuracy:.4}");
    println!("train_accuracy={:.4}", r.train_accuracy);
    println!("train_seconds={:.3}", r.train_seconds);

    out.bank.save(&run_dir.join("bank.pcb"))?;
    let flat: Vec<u8> = flatten_params(&out.params).iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(run_dir.join("classifier.f64"), flat).context("writing classifier weights")?;
    emit_csv(&LossCurve { losses: r.loss_curve.clone() }, &run_dir.join("loss.csv"))?;
    let mut s = Summary::new();
    s.push("classifier", pipeline.classifier);
    s.push("params", r.param_count);
    s.push("test_accuracy", accuracy);
    s.push("train_accuracy", r.train_accuracy);
    s.push("steps", r.steps);
    s.push("train_seconds", r.train_seconds);
    write_summary(&run_dir, &s)
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let pipeline = pipeline_config(cfg)?;
    let counts: Vec<usize> = cfg.list("counts")?;
    let dir = cfg.path("data_dir");
    let train = load(&dir, "train", counts.last().copied().unwrap_or(0))?;
    let test = load(&dir, "t10k", cfg.get("test_samples")?)?;
    let run_dir = create_run_dir(cfg, "sweep-saturation")?;

    let curve = SaturationCurve {
        points: accuracy_vs_samples_sweep(&counts, (&train.0, &train.1), (&test.0, &test.1), &pipeline)?,
    };
    for p in &curve.points {
        println!("n={} accuracy={:.4} train_seconds={:.3}", p.n_samples, p.accuracy, p.train_seconds);
    }
    emit_csv(&curve, &run_dir.join("saturation.csv"))?;
    emit_plot(&curve, &run_dir.join("saturation.svg"))?;
    if curve.points.len() >= 2 {
        let n: Vec<f64> = curve.points.iter().map(|p| p.n_samples as f64).collect();
        let t: Vec<f64> = curve.points.iter().map(|p| p.train_seconds).collect();
        match linear_fit_r2(&n, &t) {
            Ok(r2) => println!("time_vs_samples_r2={r2:.4}"),
            Err(e) => println!("time_vs_samples_r2=undefined ({e})"),
        }
    }
    Ok(())
}
