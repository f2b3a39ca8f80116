//! Late fusion of the local and global ranked lists.
//!
//! Each list is shifted down by the score at its settling point, where the curve of
//! descending scores flattens out; entries at or below it are dropped. The shifted
//! lists are merged by taking each video's larger score.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ranked::{Channel, RankedList};

#[derive(Clone, Debug, PartialEq)]
pub struct FusionConfig {
    /// Gaps below `epsilon` times the window's score spread count as flat.
    pub epsilon: f64,
    /// Leading positions that can never be the settling point.
    pub warmup: usize,
    /// Number of consecutive flat gaps needed to start a plateau.
    pub hold: usize,
    /// Only the first `window` scores are examined.
    pub window: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            warmup: 10,
            hold: 5,
            window: 50,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon {} must be positive",
                self.epsilon
            )));
        }
        if self.warmup == 0 || self.hold == 0 {
            return Err(Error::InvalidParameter(
                "warmup and hold must be at least 1".into(),
            ));
        }
        if self.window <= self.warmup {
            return Err(Error::InvalidParameter(format!(
                "window {} must exceed warmup {}",
                self.window, self.warmup
            )));
        }
        Ok(())
    }
}

/// Position and score where a descending score sequence settles.
///
/// Within the first `window` scores, a gap `s[j-1] - s[j]` is flat when it is zero or
/// below `epsilon` times `s[warmup] - s[window_end - 1]`. The settling point is the end
/// of the first run of flat gaps that starts after `warmup` and lasts at least `hold`
/// gaps. Without such a run, or for lists no longer than `warmup`, the last position is
/// used.
pub fn settling_point(scores: &[f64], cfg: &FusionConfig) -> Result<(usize, f64)> {
    cfg.validate()?;
    let n = scores.len();
    if n == 0 {
        return Err(Error::EmptyInput("settling point of an empty list".into()));
    }
    let last = (n - 1, scores[n - 1]);
    if n <= cfg.warmup {
        return Ok(last);
    }
    let end = n.min(cfg.window);
    let spread = scores[cfg.warmup] - scores[end - 1];
    let flat = |j: usize| {
        let gap = scores[j - 1] - scores[j];
        gap == 0.0 || gap < cfg.epsilon * spread
    };
    let mut i = cfg.warmup;
    while i + cfg.hold < end {
        if (i + 1..=i + cfg.hold).all(flat) {
            let mut k = i + cfg.hold;
            while k + 1 < end && flat(k + 1) {
                k += 1;
            }
            return Ok((k, scores[k]));
        }
        i += 1;
    }
    Ok(last)
}

/// Subtracts the settling score and drops entries that end up at or below zero.
pub fn normalize_list(list: &RankedList, cfg: &FusionConfig) -> Result<RankedList> {
    let (_, settle) = settling_point(&list.scores(), cfg)?;
    let entries = list
        .entries()
        .iter()
        .map(|&(v, s)| (v, s - settle))
        .filter(|e| e.1 > 0.0);
    Ok(RankedList::from_scores(list.channel(), entries)?.mark_normalized())
}

/// Per-video maximum of the two normalized lists; a video missing from one list
/// counts as zero there. Raw lists are normalized first.
pub fn fuse(local: &RankedList, global: &RankedList, cfg: &FusionConfig) -> Result<RankedList> {
    cfg.validate()?;
    let mut best: BTreeMap<u32, f64> = BTreeMap::new();
    for list in [local, global] {
        if list.is_empty() {
            continue;
        }
        let normalized;
        let list = if list.is_normalized() {
            list
        } else {
            normalized = normalize_list(list, cfg)?;
            &normalized
        };
        for &(v, s) in list.entries() {
            let e = best.entry(v).or_insert(0.0);
            *e = e.max(s);
        }
    }
    Ok(
        RankedList::from_scores(Channel::Fused, best.into_iter().filter(|e| e.1 > 0.0))?
            .mark_normalized(),
    )
}
