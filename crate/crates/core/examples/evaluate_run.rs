//! Scores a run file against ground truth, from disk or from a built-in sample.
//!
//! cargo run --example evaluate_run [run.tsv gt.tsv [cutoff]]

use std::path::Path;

use i2v_search::{evaluate, Channel, GroundTruth, RunFile};

const SAMPLE_RUN: &str =
    "1\t10\t1\t0.9\n1\t11\t2\t0.8\n1\t12\t3\t0.7\n2\t20\t1\t0.6\n2\t21\t2\t0.5\n";
const SAMPLE_GT: &str = "1\t10\n1\t12\n2\t21\n3\t30\n";

fn main() -> i2v_search::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (run, gt) = match args.as_slice() {
        [run, gt, ..] => (
            RunFile::load(Path::new(run), Channel::Fused)?,
            GroundTruth::load(Path::new(gt))?,
        ),
        _ => (
            RunFile::read_from(SAMPLE_RUN.as_bytes(), Channel::Fused)?,
            GroundTruth::read_from(SAMPLE_GT.as_bytes())?,
        ),
    };
    let cutoff = args.get(2).and_then(|c| c.parse().ok()).unwrap_or(100);
    let report = evaluate(&run, &gt, cutoff)?;
    println!("mAP@{cutoff} = {:.4}", report.map);
    println!("mAP@1   = {:.4}", report.map_at_1);
    println!("queries = {}", report.queries);
    Ok(())
}
