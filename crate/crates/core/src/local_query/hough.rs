//! Similarity-transform voting over matched keypoint pairs.
//!
//! Each match votes for (rotation, log₂ scale ratio, normalized translation). The
//! histogram is evaluated on eight grids, shifted by half a bin along each axis, and
//! the best bin over all of them wins. Near-identity transforms sit on the edges of
//! the unshifted grid, so a single grid would split them.

use std::f64::consts::PI;

use super::MatchCandidate;
use crate::error::{Error, Result};
use crate::local_index::geometry::wrap_angle;

#[derive(Clone, Debug, PartialEq)]
pub struct HoughConfig {
    pub n_theta_bins: usize,
    pub n_scale_bins: usize,
    pub scale_range: (f64, f64),
    pub n_trans_bins: usize,
    pub trans_range: (f64, f64),
}

impl Default for HoughConfig {
    fn default() -> Self {
        Self {
            n_theta_bins: 16,
            n_scale_bins: 8,
            scale_range: (-4.0, 4.0),
            n_trans_bins: 16,
            trans_range: (-2.0, 2.0),
        }
    }
}

impl HoughConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_theta_bins < 2 || self.n_scale_bins < 2 || self.n_trans_bins < 2 {
            return Err(Error::InvalidParameter(
                "every Hough axis needs at least 2 bins".into(),
            ));
        }
        if !(self.scale_range.0 < self.scale_range.1 && self.trans_range.0 < self.trans_range.1) {
            return Err(Error::InvalidParameter("empty Hough range".into()));
        }
        Ok(())
    }
}

/// Transform parameters implied by one match: rotation in [-π, π), log₂ scale
/// ratio, and `(t_x + t_y) / (ŝ · diag)`.
pub fn vote_params(c: &MatchCandidate, query_diag: f32) -> (f64, f64, f64) {
    let (q, r) = (&c.query, &c.reference);
    let theta = wrap_angle(q.theta - r.theta) as f64;
    let log_ratio = q.log_scale as f64 - r.log_scale as f64;
    let s = log_ratio.exp2();
    let (sin, cos) = theta.sin_cos();
    let (xr, yr) = (r.x as f64, r.y as f64);
    let tx = q.x as f64 - s * (cos * xr - sin * yr);
    let ty = q.y as f64 - s * (sin * xr + cos * yr);
    (theta, log_ratio, (tx + ty) / (s * query_diag as f64))
}

/// Winning bin of a frame's votes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HoughVote {
    pub score: f64,
    /// Indices of the candidates counted in the winning bin.
    pub members: Vec<usize>,
}

fn linear_bin(v: f64, (lo, hi): (f64, f64), n: usize, offset: f64) -> u32 {
    let u = ((v - lo) / (hi - lo) * n as f64 + offset).floor();
    let top = if offset > 0.0 { n } else { n - 1 };
    u.clamp(0.0, top as f64) as u32
}

fn angle_bin(theta: f64, n: usize, offset: f64) -> u32 {
    let u = ((theta + PI) / (2.0 * PI) * n as f64 + offset).floor() as i64;
    u.rem_euclid(n as i64) as u32
}

/// Best bin total over all candidates of one reference frame. A query keypoint
/// adds at most its best score to any single bin.
pub fn hough_verify(
    candidates: &[MatchCandidate],
    query_diag: f32,
    cfg: &HoughConfig,
) -> HoughVote {
    if candidates.is_empty() {
        return HoughVote::default();
    }
    let params: Vec<(f64, f64, f64)> = candidates
        .iter()
        .map(|c| vote_params(c, query_diag))
        .collect();
    let (ns, nt) = (cfg.n_scale_bins as u32 + 1, cfg.n_trans_bins as u32 + 1);
    let mut best = HoughVote::default();
    let mut votes: Vec<(u32, u32, f32, usize)> = Vec::with_capacity(candidates.len());
    for grid in 0..8u32 {
        let off = |axis: u32| if grid >> axis & 1 == 1 { 0.5 } else { 0.0 };
        votes.clear();
        for (i, (c, &(t, s, tr))) in candidates.iter().zip(&params).enumerate() {
            let key = (angle_bin(t, cfg.n_theta_bins, off(0)) * ns
                + linear_bin(s, cfg.scale_range, cfg.n_scale_bins, off(1)))
                * nt
                + linear_bin(tr, cfg.trans_range, cfg.n_trans_bins, off(2));
            votes.push((key, c.query_index, c.score, i));
        }
        votes.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(b.2.total_cmp(&a.2))
                .then(a.3.cmp(&b.3))
        });
        let mut start = 0;
        while start < votes.len() {
            let key = votes[start].0;
            let mut end = start;
            let mut total = 0f64;
            let mut members = Vec::new();
            let mut last_q = None;
            while end < votes.len() && votes[end].0 == key {
                if last_q != Some(votes[end].1) {
                    last_q = Some(votes[end].1);
                    total += votes[end].2 as f64;
                    members.push(votes[end].3);
                }
                end += 1;
            }
            if total > best.score {
                members.sort_unstable();
                best = HoughVote {
                    score: total,
                    members,
                };
            }
            start = end;
        }
    }
    best
}
