//! Trains the codebook bundle on a small synthetic corpus, saves it and prints the
//! shape of every model it contains.
//!
//! cargo run --release --example train_codebooks [out.bin]

use std::path::PathBuf;

use i2v_search::pipeline::train_codebooks;
use i2v_search::quantize::{fingerprint_hex, CodebookSet};
use i2v_search::synth::{generate, SynthConfig};
use i2v_search::EngineConfig;

fn main() -> i2v_search::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("i2v-codebooks.bin"));
    let corpus = generate(&SynthConfig {
        videos: 30,
        frames_per_video: 5,
        ..Default::default()
    })?;
    let mut cfg = EngineConfig::default();
    cfg.apply_text("d_bow = 256\nd_fk = 8")?;

    let cb = train_codebooks(&corpus.reference_local, &corpus.reference_global, &cfg)?;
    cb.save(&out)?;
    let back = CodebookSet::load(&out)?;
    assert_eq!(back.fingerprint(), cb.fingerprint());

    println!("saved {}", out.display());
    println!("fingerprint  {}", fingerprint_hex(&cb.fingerprint()));
    println!(
        "coarse       {} words x {} dims",
        cb.coarse.k(),
        cb.coarse.dim()
    );
    println!(
        "pq           {} sub-quantizers x {} centers",
        cb.pq.m(),
        cb.pq.ksub()
    );
    println!("pca          {} -> {}", cb.pca.d_in(), cb.pca.d_out());
    println!(
        "gmm          {} components x {} dims",
        cb.gmm.k(),
        cb.gmm.dim()
    );
    println!(
        "binary       {} centers x {} bits",
        cb.binary.len(),
        cb.binary.bits()
    );
    Ok(())
}
