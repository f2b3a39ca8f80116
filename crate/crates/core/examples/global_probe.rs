//! Global channel: compares cluster probing with an exhaustive Hamming scan for
//! increasing probe counts.
//!
//! cargo run --release --example global_probe

use std::collections::BTreeSet;

use i2v_search::global_index::frame_signature;
use i2v_search::global_query::{global_search, GlobalQueryConfig};
use i2v_search::pipeline::{build_global, train_codebooks};
use i2v_search::synth::{generate, SynthConfig};
use i2v_search::EngineConfig;

fn main() -> i2v_search::Result<()> {
    let corpus = generate(&SynthConfig {
        videos: 200,
        frames_per_video: 5,
        queries: 20,
        seed: 5,
        ..Default::default()
    })?;
    let mut cfg = EngineConfig::default();
    cfg.apply_text("d_bow = 64\nd_fk = 16")?;
    let cb = train_codebooks(&corpus.reference_local, &corpus.reference_global, &cfg)?;
    let index = build_global(&corpus.reference_global, &cb)?;
    let queries = corpus
        .query_global
        .iter()
        .map(|q| frame_signature(&q.features, &cb.pca, &cb.gmm))
        .collect::<i2v_search::Result<Vec<_>>>()?;

    let top = |k, brute_force| -> i2v_search::Result<(Vec<BTreeSet<u32>>, usize)> {
        let qcfg = GlobalQueryConfig {
            k_probe: k,
            top_n: 10,
            brute_force,
        };
        let mut sets = Vec::new();
        let mut examined = 0;
        for q in &queries {
            let s = global_search(q, &index, &qcfg)?;
            examined += s.candidates_examined;
            sets.push(s.list.videos().into_iter().collect());
        }
        Ok((sets, examined))
    };
    let (truth, all) = top(1, true)?;
    println!(
        "brute force: {} signatures scanned per query",
        all / queries.len()
    );
    for k in [1, 2, 5, 10, cb.binary.len()] {
        let (sets, examined) = top(k, false)?;
        let recall: f64 = sets
            .iter()
            .zip(&truth)
            .map(|(s, t)| s.intersection(t).count() as f64 / t.len().max(1) as f64)
            .sum::<f64>()
            / queries.len() as f64;
        println!(
            "k_probe={k:>2}: recall@10 {recall:.3}, {:.1}% of signatures examined",
            100.0 * examined as f64 / all as f64
        );
    }
    Ok(())
}
