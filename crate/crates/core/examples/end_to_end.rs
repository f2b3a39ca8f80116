//! Generates a synthetic corpus, trains codebooks, indexes both channels, runs the
//! planted queries and reports local, global and fused accuracy.
//!
//! cargo run --release --example end_to_end [videos] [queries] [seed]

use std::time::Instant;

use i2v_search::pipeline::{
    build_global, build_local, fuse_runs, run_global_queries, run_local_queries, train_codebooks,
};
use i2v_search::synth::{generate, SynthConfig};
use i2v_search::{evaluate, EngineConfig};

fn main() -> i2v_search::Result<()> {
    let args: Vec<u64> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let synth = SynthConfig {
        videos: args.first().copied().unwrap_or(100) as usize,
        queries: args.get(1).copied().unwrap_or(20) as usize,
        seed: args.get(2).copied().unwrap_or(7),
        query_global_noise: std::env::var("QUERY_GLOBAL_NOISE")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0.7),
        ..Default::default()
    };
    let mut cfg = EngineConfig::default();
    cfg.apply_text(
        "d_bow = 512\nd_fk = 16\nmax_local_train = 20000\nmax_global_train = 10000\nkmeans_iters = 15\ngmm_iters = 20",
    )?;
    cfg.seed = synth.seed;

    let t = Instant::now();
    let corpus = generate(&synth)?;
    let cb = train_codebooks(&corpus.reference_local, &corpus.reference_global, &cfg)?;
    println!("trained codebooks in {:.1?}", t.elapsed());
    let local = build_local(&corpus.reference_local, &cb, &cfg)?;
    let global = build_global(&corpus.reference_global, &cb)?;
    println!(
        "indexed {} postings, {} signatures in {:.1?}",
        local.total_postings(),
        global.len(),
        t.elapsed()
    );

    let lrun = run_local_queries(&corpus.query_local, &local, &cb, &cfg)?;
    let grun = run_global_queries(&corpus.query_global, &global, &cb, &cfg.global_query())?;
    let frun = fuse_runs(&lrun, &grun, &cfg.fusion())?;
    for (name, run) in [("local", &lrun), ("global", &grun), ("fused", &frun)] {
        let r = evaluate(run, &corpus.ground_truth, 10)?;
        println!("{name:>6}: mAP@10={:.4} mAP@1={:.4}", r.map, r.map_at_1);
    }
    println!("total {:.1?}", t.elapsed());
    Ok(())
}
