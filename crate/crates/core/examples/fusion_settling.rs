//! Finds the settling point of two score curves and fuses them: a global curve that
//! falls slowly from 0.78 and a local curve with one sharp peak.
//!
//! cargo run --example fusion_settling

use i2v_search::fusion::{fuse, settling_point, FusionConfig};
use i2v_search::{Channel, RankedList};

fn expand(runs: &[(f64, usize)]) -> Vec<f64> {
    runs.iter()
        .flat_map(|&(v, n)| std::iter::repeat_n(v, n))
        .collect()
}

fn main() -> i2v_search::Result<()> {
    let global = expand(&[
        (0.775, 1),
        (0.725, 1),
        (0.719, 1),
        (0.714, 1),
        (0.710, 1),
        (0.708, 1),
        (0.704, 1),
        (0.691, 1),
        (0.687, 1),
        (0.663, 1),
        (0.662, 2),
        (0.661, 1),
        (0.660, 1),
        (0.659, 4),
        (0.658, 2),
        (0.657, 4),
        (0.656, 7),
        (0.655, 3),
        (0.654, 8),
        (0.653, 7),
        (0.652, 2),
    ]);
    let local = expand(&[
        (0.1559, 1),
        (0.054, 1),
        (0.049, 1),
        (0.043, 1),
        (0.042, 9),
        (0.034, 1),
        (0.031, 11),
        (0.028, 3),
        (0.027, 6),
        (0.026, 5),
        (0.025, 1),
        (0.024, 3),
        (0.023, 5),
        (0.022, 2),
    ]);
    let cfg = FusionConfig::default();
    let (gi, gs) = settling_point(&global, &cfg)?;
    let (li, ls) = settling_point(&local, &cfg)?;
    println!("global settles at rank {gi} with score {gs:.3}");
    println!("local settles at rank {li} with score {ls:.3}");

    // Video ids: the global list ranks 0, 1, 2, ...; the local list ranks them backwards.
    let n = global.len() as u32;
    let as_list = |channel, scores: &[f64], rev: bool| {
        RankedList::from_scores(
            channel,
            scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (if rev { n - 1 - i as u32 } else { i as u32 }, s)),
        )
    };
    let fused = fuse(
        &as_list(Channel::Local, &local, true)?,
        &as_list(Channel::Global, &global, false)?,
        &cfg,
    )?;
    println!("fused list keeps {} videos:", fused.len());
    for (v, s) in fused.entries().iter().take(10) {
        println!("  video {v:>2}  {s:.4}");
    }
    Ok(())
}
