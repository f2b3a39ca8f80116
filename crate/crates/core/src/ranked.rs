//! Per-query ranked lists of videos and the run-file text format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Local,
    Global,
    Fused,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Local => "local",
            Channel::Global => "global",
            Channel::Fused => "fused",
        })
    }
}

/// Videos in descending score order, ties by ascending id, no duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    channel: Channel,
    normalized: bool,
    entries: Vec<(u32, f64)>,
}

impl RankedList {
    pub fn empty(channel: Channel) -> Self {
        Self {
            channel,
            normalized: false,
            entries: Vec::new(),
        }
    }

    /// Sorts arbitrary (video, score) pairs into a ranked list.
    pub fn from_scores(
        channel: Channel,
        scores: impl IntoIterator<Item = (u32, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(u32, f64)> = scores.into_iter().collect();
        if let Some(&(v, s)) = entries.iter().find(|e| !e.1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "video {v} has non-finite score {s}"
            )));
        }
        sort_entries(&mut entries);
        if has_duplicates(&entries) {
            return Err(Error::InvalidParameter(
                "duplicate video in ranked list".into(),
            ));
        }
        Ok(Self {
            channel,
            normalized: false,
            entries,
        })
    }

    /// Wraps entries already in ranked order, checking the ordering invariants.
    pub fn from_ranked(channel: Channel, entries: Vec<(u32, f64)>) -> Result<Self> {
        if entries
            .windows(2)
            .any(|w| w[1].1 > w[0].1 || (w[1].1 == w[0].1 && w[1].0 < w[0].0))
        {
            return Err(Error::InvalidParameter(
                "ranked list scores are not in descending order".into(),
            ));
        }
        if entries.iter().any(|e| !e.1.is_finite()) {
            return Err(Error::InvalidParameter(
                "ranked list has a non-finite score".into(),
            ));
        }
        if has_duplicates(&entries) {
            return Err(Error::InvalidParameter(
                "duplicate video in ranked list".into(),
            ));
        }
        Ok(Self {
            channel,
            normalized: false,
            entries,
        })
    }

    /// Marks the scores as already settling-normalized, so fusion uses them as is.
    pub fn mark_normalized(mut self) -> Self {
        self.normalized = true;
        self
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn videos(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn score_of(&self, video: u32) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == video).map(|e| e.1)
    }

    pub fn truncate(&mut self, n: usize) {
        self.entries.truncate(n);
    }
}

pub(crate) fn sort_entries(entries: &mut [(u32, f64)]) {
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
}

fn has_duplicates(entries: &[(u32, f64)]) -> bool {
    let mut seen = BTreeSet::new();
    entries.iter().any(|e| !seen.insert(e.0))
}

/// Ranked lists for a batch of queries, keyed by query id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunFile {
    pub queries: BTreeMap<u32, RankedList>,
}

impl RunFile {
    /// Text lines `query<TAB>video<TAB>rank<TAB>score`, ranks from 1, scores to 6 decimals.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for (q, list) in &self.queries {
            for (rank, (v, s)) in list.entries().iter().enumerate() {
                writeln!(w, "{q}\t{v}\t{}\t{s:.6}", rank + 1)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R, channel: Channel) -> Result<Self> {
        let mut rows: BTreeMap<u32, Vec<(usize, u32, f64)>> = BTreeMap::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Malformed(format!("run file line {}: {line:?}", n + 1));
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let q: u32 = f[0].parse().map_err(|_| bad())?;
            let v: u32 = f[1].parse().map_err(|_| bad())?;
            let rank: usize = f[2].parse().map_err(|_| bad())?;
            let s: f64 = f[3].parse().map_err(|_| bad())?;
            rows.entry(q).or_default().push((rank, v, s));
        }
        let mut queries = BTreeMap::new();
        for (q, mut recs) in rows {
            recs.sort_by_key(|r| r.0);
            if recs.iter().enumerate().any(|(i, r)| r.0 != i + 1) {
                return Err(Error::Malformed(format!(
                    "query {q}: ranks are not contiguous from 1"
                )));
            }
            if recs.windows(2).any(|w| w[1].2 > w[0].2) {
                return Err(Error::Malformed(format!(
                    "query {q}: scores increase with rank"
                )));
            }
            let mut seen = BTreeSet::new();
            if recs.iter().any(|r| !seen.insert(r.1)) {
                return Err(Error::Malformed(format!("query {q}: duplicate video")));
            }
            let list = RankedList {
                channel,
                normalized: false,
                entries: recs.into_iter().map(|r| (r.1, r.2)).collect(),
            };
            queries.insert(q, list);
        }
        Ok(Self { queries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::from(e).at(path))
    }

    pub fn load(path: &Path, channel: Channel) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::from(e).at(path))?;
        Self::read_from(std::io::BufReader::new(f), channel).map_err(|e| e.at(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorting_and_ties() {
        let l = RankedList::from_scores(Channel::Local, [(5, 0.2), (3, 0.5), (1, 0.2)]).unwrap();
        assert_eq!(l.videos(), vec![3, 1, 5]);
        assert!(RankedList::from_scores(Channel::Local, [(1, 0.2), (1, 0.3)]).is_err());
        assert!(RankedList::from_ranked(Channel::Local, vec![(1, 0.2), (2, 0.3)]).is_err());
        assert!(RankedList::from_ranked(Channel::Local, vec![(2, 0.3), (1, 0.3)]).is_err());
    }

    #[test]
    fn run_file_round_trip() {
        let mut run = RunFile::default();
        run.queries.insert(
            7,
            RankedList::from_scores(Channel::Fused, [(1, 0.5), (2, 0.25)]).unwrap(),
        );
        run.queries.insert(
            3,
            RankedList::from_scores(Channel::Fused, [(9, 1.0)]).unwrap(),
        );
        let mut buf = Vec::new();
        run.write_to(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "3\t9\t1\t1.000000\n7\t1\t1\t0.500000\n7\t2\t2\t0.250000\n"
        );
        let back = RunFile::read_from(buf.as_slice(), Channel::Fused).unwrap();
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn run_file_rejects_bad_ranks() {
        assert!(RunFile::read_from("1\t2\t2\t0.5\n".as_bytes(), Channel::Local).is_err());
        assert!(
            RunFile::read_from("1\t2\t1\t0.5\n1\t3\t2\t0.6\n".as_bytes(), Channel::Local).is_err()
        );
        assert!(
            RunFile::read_from("1\t2\t1\t0.5\n1\t2\t2\t0.4\n".as_bytes(), Channel::Local).is_err()
        );
        assert!(RunFile::read_from("1 2 1 0.5\n".as_bytes(), Channel::Local).is_err());
    }
}
