//! End-to-end steps shared by the command-line tool, the examples and the tests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionConfig};
use crate::global_index::gdsc::load_global_frames;
use crate::global_index::{
    build_global_index, compute_signatures, frame_signature, GlobalIndex, GlobalRawFrame,
};
use crate::global_query::{global_rank, GlobalQueryConfig};
use crate::local_index::ldsc::load_local_frames;
use crate::local_index::{
    build_local_index, encode_frames, LocalFrame, LocalIndex, LocalIndexParams,
};
use crate::local_query::{local_rank, LocalQuery, PqScorer};
use crate::matrix::Matrix;
use crate::quantize::{
    binary_centers_train, gmm_train, kmeans_train, pca_fit, pq_train, CodebookSet,
};
use crate::ranked::{Channel, RankedList, RunFile};

/// Up to `cap` row indices out of `n`, sorted, chosen by `seed`.
fn sample_indices(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, cap).into_vec();
    idx.sort_unstable();
    idx
}

fn gather(rows: &[&[f32]], pick: &[usize]) -> Result<Matrix> {
    let picked: Vec<&[f32]> = pick.iter().map(|&i| rows[i]).collect();
    Matrix::from_rows(&picked)
}

/// Trains every model of the codebook from reference descriptors and dense features.
pub fn train_codebooks(
    local: &[LocalFrame],
    global: &[GlobalRawFrame],
    cfg: &EngineConfig,
) -> Result<CodebookSet> {
    cfg.validate()?;
    let seed = cfg.seed;
    let descriptors: Vec<&[f32]> = local
        .iter()
        .flat_map(|f| f.records.iter().map(|r| r.descriptor.as_slice()))
        .collect();
    if descriptors.is_empty() {
        return Err(Error::EmptyInput("no local descriptors to train on".into()));
    }
    let sample = gather(
        &descriptors,
        &sample_indices(descriptors.len(), cfg.max_local_train, seed ^ 0x10ca1),
    )?;
    log::info!(
        "coarse quantizer: {} words from {} descriptors",
        cfg.d_bow,
        sample.rows()
    );
    let coarse = kmeans_train(&sample, cfg.d_bow, cfg.kmeans_iters, seed)?;
    let residuals: Vec<Vec<f32>> = sample
        .iter_rows()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|r| coarse.assign(r).map(|a| a.1))
        .collect::<Result<_>>()?;
    let residuals = Matrix::from_rows(&residuals)?;
    if residuals.cols() % cfg.m != 0 {
        return Err(Error::InvalidParameter(format!(
            "m = {} does not divide descriptor dimension {}",
            cfg.m,
            residuals.cols()
        )));
    }
    log::info!("product quantizer: {} x {}", cfg.m, cfg.d_pq);
    let pq = pq_train(
        &residuals,
        cfg.m,
        cfg.d_pq,
        cfg.pq_iters,
        seed.wrapping_add(1),
    )?;

    let dense: Vec<&[f32]> = global.iter().flat_map(|f| f.features.iter_rows()).collect();
    if dense.is_empty() {
        return Err(Error::EmptyInput("no global features to train on".into()));
    }
    let dense = gather(
        &dense,
        &sample_indices(dense.len(), cfg.max_global_train, seed ^ 0x910ba1),
    )?;
    log::info!(
        "PCA {} -> {} on {} features",
        dense.cols(),
        cfg.pca_dim,
        dense.rows()
    );
    let pca = pca_fit(&dense, cfg.pca_dim)?;
    let projected = pca.project_all(&dense)?;
    log::info!("mixture: {} components", cfg.d_fk);
    let gmm = gmm_train(&projected, cfg.d_fk, cfg.gmm_iters, seed.wrapping_add(2))?;
    let codes: Vec<_> = compute_signatures(global, &pca, &gmm)?
        .into_iter()
        .map(|s| s.bits)
        .collect();
    log::info!(
        "binary centers: {} over {} signatures",
        cfg.binary_clusters,
        codes.len()
    );
    let binary = binary_centers_train(
        &codes,
        cfg.binary_clusters,
        cfg.binary_iters,
        seed.wrapping_add(3),
    )?;
    CodebookSet::new(coarse, pq, pca, gmm, binary)
}

pub fn build_local(
    frames: &[LocalFrame],
    cb: &CodebookSet,
    cfg: &EngineConfig,
) -> Result<LocalIndex> {
    cfg.validate()?;
    let encoded = encode_frames(frames, &cb.coarse, &cb.pq, cfg.frame())?;
    let params = LocalIndexParams {
        d_bow: cb.coarse.k(),
        m: cb.pq.m(),
        ksub: cb.pq.ksub(),
        prune_fraction: cfg.prune_fraction,
        frame: cfg.frame(),
        codebook: cb.fingerprint(),
    };
    build_local_index(&encoded, params)
}

pub fn build_global(frames: &[GlobalRawFrame], cb: &CodebookSet) -> Result<GlobalIndex> {
    let sigs = compute_signatures(frames, &cb.pca, &cb.gmm)?;
    build_global_index(sigs, cb.binary.clone(), cb.gmm.k(), cb.fingerprint())
}

fn collect_run(results: Vec<Result<(u32, RankedList)>>) -> Result<RunFile> {
    let mut queries = BTreeMap::new();
    for r in results {
        let (q, list) = r?;
        if queries.insert(q, list).is_some() {
            return Err(Error::InvalidParameter(format!("query {q} appears twice")));
        }
    }
    Ok(RunFile { queries })
}

/// Ranks every local query frame; the query id is the frame id.
pub fn run_local_queries(
    queries: &[LocalFrame],
    index: &LocalIndex,
    cb: &CodebookSet,
    cfg: &EngineConfig,
) -> Result<RunFile> {
    cfg.validate()?;
    index.check_codebook(&cb.fingerprint())?;
    let scorer = PqScorer::new(&cb.pq);
    let qcfg = cfg.local_query();
    let results = queries
        .par_iter()
        .map(|f| {
            let q = LocalQuery::encode(f, &cb.coarse, &cb.pq, cfg.frame())?;
            Ok((f.frame_id, local_rank(&q, index, &cb.pq, &scorer, &qcfg)?))
        })
        .collect();
    collect_run(results)
}

pub fn run_global_queries(
    queries: &[GlobalRawFrame],
    index: &GlobalIndex,
    cb: &CodebookSet,
    qcfg: &GlobalQueryConfig,
) -> Result<RunFile> {
    index.check_codebook(&cb.fingerprint())?;
    let results = queries
        .par_iter()
        .map(|f| {
            let bits = frame_signature(&f.features, &cb.pca, &cb.gmm)?;
            Ok((f.frame_id, global_rank(&bits, index, qcfg)?))
        })
        .collect();
    collect_run(results)
}

/// Fuses the two runs query by query; a query missing from one run fuses with an
/// empty list.
pub fn fuse_runs(local: &RunFile, global: &RunFile, cfg: &FusionConfig) -> Result<RunFile> {
    let ids: Vec<u32> = local
        .queries
        .keys()
        .chain(global.queries.keys())
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let empty_l = RankedList::empty(Channel::Local);
    let empty_g = RankedList::empty(Channel::Global);
    let results = ids
        .par_iter()
        .map(|q| {
            let l = local.queries.get(q).unwrap_or(&empty_l);
            let g = global.queries.get(q).unwrap_or(&empty_g);
            Ok((*q, fuse(l, g, cfg)?))
        })
        .collect();
    collect_run(results)
}

/// Files under `path` with one of the given extensions, sorted by name; `path` itself
/// if it is a file.
pub fn input_files(path: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(path).map_err(|e| Error::from(e).at(path))?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(path).map_err(|e| Error::from(e).at(path))? {
        let p = entry.map_err(|e| Error::from(e).at(path))?.path();
        let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
        if p.is_file() && extensions.contains(&ext) {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyInput("no input files".into()).at(path));
    }
    Ok(files)
}

/// Local descriptor frames from a file or from every `.ldsc` / `.txt` file of a directory.
pub fn load_local_inputs(path: &Path) -> Result<Vec<LocalFrame>> {
    let mut out = Vec::new();
    for f in input_files(path, &["ldsc", "txt"])? {
        out.extend(load_local_frames(&f)?);
    }
    Ok(out)
}

/// Dense feature frames from a file or from every `.gdsc` file of a directory.
pub fn load_global_inputs(path: &Path) -> Result<Vec<GlobalRawFrame>> {
    let mut out = Vec::new();
    for f in input_files(path, &["gdsc"])? {
        out.extend(load_global_frames(&f)?);
    }
    Ok(out)
}
