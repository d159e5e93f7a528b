use anyhow::{bail, Result};
use strucpca::embedding_io::read_blocks;
use strucpca::eval::{emit_csv, emit_plot, params_vs_depth, reconstruction_curve, MatchPool};
use strucpca::tinyformer::DecoderSpec;

use crate::config::{create_run_dir, RunConfig};

pub fn reconstruction_defaults() -> Vec<(&'static str, String)> {
    vec![
        ("pair", "fixtures/sentence_pair.peb".into()),
        ("ks", "10,20,30,40,50,60,70,80,90,100".into()),
        ("pool", "test".into()),
        ("seed", "0".into()),
        ("out_dir", "runs".into()),
    ]
}

pub fn params_defaults() -> Vec<(&'static str, String)> {
    vec![
        ("depths", "1,2,3,4,5,6,7,8,9,10,11,12".into()),
        ("input_dim", "70".into()),
        ("ffn_hidden", "256".into()),
        ("full_dim", "384".into()),
        ("full_ffn_hidden", "1536".into()),
        ("heads", "2".into()),
        ("vocab_size", "50257".into()),
        ("seed", "0".into()),
        ("out_dir", "runs".into()),
    ]
}

pub fn reconstruction(cfg: &RunConfig) -> Result<()> {
    let ks: Vec<usize> = cfg.list("ks")?;
    let pool: MatchPool = cfg.get("pool")?;
    let pair_path = cfg.path("pair");
    let blocks = read_blocks(&pair_path)?;
    let [reference, test] = &blocks[..] else {
        bail!("{} holds {} blocks, expected a reference and a test block", pair_path.display(), blocks.len());
    };
    let run_dir = create_run_dir(cfg, "sweep-reconstruction")?;

    let curve = reconstruction_curve(reference.embeddings(), test.embeddings(), &ks, pool)?;
    for p in &curve.points {
        println!("k={} match_rate={:.4}", p.k, p.match_rate);
    }
    emit_csv(&curve, &run_dir.join("reconstruction.csv"))?;
    emit_plot(&curve, &run_dir.join("reconstruction.svg"))?;
    Ok(())
}

pub fn params(cfg: &RunConfig) -> Result<()> {
    let depths: Vec<usize> = cfg.list("depths")?;
    let (heads, vocab) = (cfg.get("heads")?, cfg.get("vocab_size")?);
    let compressed = DecoderSpec {
        input_dim: cfg.get("input_dim")?,
        ffn_hidden: cfg.get("ffn_hidden")?,
        heads,
        vocab,
        ..DecoderSpec::default()
    };
    let full = DecoderSpec {
        input_dim: cfg.get("full_dim")?,
        ffn_hidden: cfg.get("full_ffn_hidden")?,
        heads,
        vocab,
        ..DecoderSpec::default()
    };
    let curve = params_vs_depth(&depths, &compressed, &full)?;
    let run_dir = create_run_dir(cfg, "sweep-params")?;
    for p in &curve.points {
        println!(
            "depth={} compressed={} full={} ratio={:.2}",
            p.depth,
            p.params_compressed,
            p.params_full,
            p.params_full as f64 / p.params_compressed as f64
        );
    }
    emit_csv(&curve, &run_dir.join("params.csv"))?;
    emit_plot(&curve, &run_dir.join("params.svg"))?;
    Ok(())
}
