//! Ranking quality: average precision, truncated mean average precision, mAP@1.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ranked::RunFile;

/// Relevant videos per query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub relevant: BTreeMap<u32, BTreeSet<u32>>,
}

impl GroundTruth {
    pub fn insert(&mut self, query: u32, video: u32) {
        self.relevant.entry(query).or_default().insert(video);
    }

    /// Text lines `query<TAB>video`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for (q, vs) in &self.relevant {
            for v in vs {
                writeln!(w, "{q}\t{v}")?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut gt = GroundTruth::default();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Malformed(format!("ground truth line {}: {line:?}", n + 1));
            let mut f = line.split('\t');
            let q = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let v = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if f.next().is_some() {
                return Err(bad());
            }
            gt.insert(q, v);
        }
        Ok(gt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::from(e).at(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::from(e).at(path))?;
        Self::read_from(std::io::BufReader::new(f)).map_err(|e| e.at(path))
    }
}

/// Non-interpolated average precision; relevant videos never retrieved count as
/// misses. `None` for an empty relevant set.
pub fn average_precision(ranked: &[u32], relevant: &BTreeSet<u32>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    let mut seen = BTreeSet::new();
    for (i, v) in ranked.iter().enumerate() {
        if relevant.contains(v) && seen.insert(*v) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub map: f64,
    pub map_at_1: f64,
    pub queries: usize,
}

fn evaluated(gt: &GroundTruth) -> Result<impl Iterator<Item = (&u32, &BTreeSet<u32>)>> {
    let mut it = gt.relevant.iter().filter(|(q, r)| {
        if r.is_empty() {
            log::warn!("query {q} has no relevant videos; skipped");
        }
        !r.is_empty()
    });
    if gt.relevant.values().all(BTreeSet::is_empty) {
        return Err(Error::EmptyInput("ground truth has no queries".into()));
    }
    Ok(std::iter::from_fn(move || it.next()))
}

fn ranked_for(run: &RunFile, q: u32, cutoff: usize) -> Vec<u32> {
    match run.queries.get(&q) {
        Some(list) => list.videos().into_iter().take(cutoff).collect(),
        None => {
            log::warn!("query {q} missing from run; scored as 0");
            Vec::new()
        }
    }
}

/// Mean over ground-truth queries of AP on the top `cutoff` results.
pub fn mean_ap(run: &RunFile, gt: &GroundTruth, cutoff: usize) -> Result<f64> {
    let aps: Vec<f64> = evaluated(gt)?
        .map(|(&q, rel)| average_precision(&ranked_for(run, q, cutoff), rel).unwrap_or(0.0))
        .collect();
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Fraction of ground-truth queries whose first result is relevant.
pub fn map_at_1(run: &RunFile, gt: &GroundTruth) -> Result<f64> {
    let hits: Vec<bool> = evaluated(gt)?
        .map(|(&q, rel)| {
            ranked_for(run, q, 1)
                .first()
                .is_some_and(|v| rel.contains(v))
        })
        .collect();
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

pub fn evaluate(run: &RunFile, gt: &GroundTruth, cutoff: usize) -> Result<EvalReport> {
    Ok(EvalReport {
        map: mean_ap(run, gt, cutoff)?,
        map_at_1: map_at_1(run, gt)?,
        queries: evaluated(gt)?.count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranked::{Channel, RankedList};

    fn set(v: &[u32]) -> BTreeSet<u32> {
        v.iter().copied().collect()
    }

    #[test]
    fn hand_cases() {
        assert_eq!(average_precision(&[1, 2, 3], &set(&[1, 2])), Some(1.0));
        assert_eq!(average_precision(&[5, 1, 3], &set(&[1])), Some(0.5));
        let ap = average_precision(&[1, 9, 2, 8], &set(&[1, 2])).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
        assert_eq!(average_precision(&[4], &set(&[1, 2])), Some(0.0));
        assert_eq!(average_precision(&[4], &set(&[])), None);
    }

    fn run_of(lists: &[(u32, &[u32])]) -> RunFile {
        let mut run = RunFile::default();
        for &(q, vs) in lists {
            let l = RankedList::from_ranked(
                Channel::Fused,
                vs.iter()
                    .enumerate()
                    .map(|(i, &v)| (v, 1.0 - i as f64 * 0.01))
                    .collect(),
            )
            .unwrap();
            run.queries.insert(q, l);
        }
        run
    }

    #[test]
    fn mean_and_at_one() {
        let mut gt = GroundTruth::default();
        gt.insert(1, 10);
        gt.insert(2, 20);
        gt.insert(2, 21);
        let perfect = run_of(&[(1, &[10, 3]), (2, &[21, 20])]);
        assert_eq!(
            evaluate(&perfect, &gt, 100).unwrap(),
            EvalReport {
                map: 1.0,
                map_at_1: 1.0,
                queries: 2
            }
        );
        let run = run_of(&[(1, &[3, 4, 5, 6, 10]), (2, &[21])]);
        assert!((mean_ap(&run, &gt, 100).unwrap() - (0.2 + 0.5) / 2.0).abs() < 1e-12);
        assert!((mean_ap(&run, &gt, 4).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(map_at_1(&run, &gt).unwrap(), 0.5);
        let missing = run_of(&[(1, &[10])]);
        assert_eq!(mean_ap(&missing, &gt, 100).unwrap(), 0.5);
        assert!(mean_ap(&run, &GroundTruth::default(), 10).is_err());
    }

    #[test]
    fn moving_a_relevant_item_up_never_hurts() {
        let rel = set(&[3, 7]);
        let base = [1, 3, 4, 5, 7, 9, 8];
        let ap0 = average_precision(&base, &rel).unwrap();
        let mut up = base;
        up.swap(3, 4);
        assert!(average_precision(&up, &rel).unwrap() > ap0);
        let mut below = base;
        below.swap(5, 6);
        assert_eq!(average_precision(&below, &rel).unwrap(), ap0);
    }

    #[test]
    fn ground_truth_round_trip() {
        let gt = GroundTruth::read_from("# q v\n1\t5\n1\t2\n3\t4\n".as_bytes()).unwrap();
        let mut buf = Vec::new();
        gt.write_to(&mut buf).unwrap();
        assert_eq!(buf, b"1\t2\n1\t5\n3\t4\n");
        assert!(GroundTruth::read_from("1 5\n".as_bytes()).is_err());
    }
}
