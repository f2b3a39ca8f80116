//! Local channel on its own: every query is a reference frame rotated by 30 degrees
//! and scaled by 1.5. Prints the best video, its score and the planted source.
//!
//! cargo run --release --example local_search

use i2v_search::pipeline::{build_local, run_local_queries, train_codebooks};
use i2v_search::synth::{generate, SynthConfig};
use i2v_search::EngineConfig;

fn main() -> i2v_search::Result<()> {
    let corpus = generate(&SynthConfig {
        videos: 40,
        frames_per_video: 5,
        queries: 8,
        fixed_transform: Some((std::f32::consts::FRAC_PI_6, 1.5f32.log2())),
        seed: 3,
        ..Default::default()
    })?;
    let mut cfg = EngineConfig::default();
    cfg.apply_text("d_bow = 256\nd_fk = 8")?;
    let cb = train_codebooks(&corpus.reference_local, &corpus.reference_global, &cfg)?;
    let index = build_local(&corpus.reference_local, &cb, &cfg)?;
    let run = run_local_queries(&corpus.query_local, &index, &cb, &cfg)?;

    let mut hits = 0;
    for t in &corpus.transforms {
        let list = &run.queries[&t.query_id];
        let (best, score) = list.entries().first().copied().unwrap_or((u32::MAX, 0.0));
        hits += usize::from(best == t.video_id);
        println!(
            "query {}: top video {best} score {score:.3} (planted from video {}, frame {})",
            t.query_id, t.video_id, t.frame_id
        );
    }
    println!(
        "{hits}/{} queries ranked their source first",
        corpus.transforms.len()
    );
    Ok(())
}
