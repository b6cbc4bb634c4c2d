//! Versioned binary persistence for built indexes.
//!
//! Layout: magic + version, a header binding the file to its dataset (dtype,
//! metric, shape, build seed, dataset SHA-256), the structure section, and a
//! trailing SHA-256 of everything before it. Loads refuse anything that does
//! not match byte-for-byte: wrong version, wrong element type, wrong dataset,
//! or a corrupted body.

use std::io::{Cursor, Read};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::index::{
    BruteForceIndex, Dataset, HnswLiteIndex, IndexHandle, IvfFlatIndex, Metric,
};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"LKIX";
const VERSION: u32 = 1;

const KIND_BRUTE: u8 = 0;
const KIND_HNSW: u8 = 1;
const KIND_IVF: u8 = 2;

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Serialize an index (not its dataset) to `path`.
///
/// The dataset itself is not duplicated into the file; the header pins its
/// checksum so the load side can verify it was handed the same data.
pub fn save_index<T: Scalar>(idx: &IndexHandle<T>, path: &Path) -> Result<()> {
    let ds = idx.dataset();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LittleEndian>(VERSION)?;
    let (kind, seed) = match idx {
        IndexHandle::BruteForce(_) => (KIND_BRUTE, 0),
        IndexHandle::HnswLite(h) => (KIND_HNSW, h.rng_seed()),
        IndexHandle::IvfFlat(v) => (KIND_IVF, v.rng_seed()),
    };
    buf.push(kind);
    buf.push(T::DTYPE);
    buf.push(ds.metric().tag());
    buf.push(0); // reserved
    buf.write_u32::<LittleEndian>(ds.dim() as u32)?;
    buf.write_u64::<LittleEndian>(ds.len() as u64)?;
    buf.write_u64::<LittleEndian>(seed)?;
    buf.extend_from_slice(&ds.checksum());

    match idx {
        IndexHandle::BruteForce(_) => {}
        IndexHandle::HnswLite(h) => {
            buf.write_u32::<LittleEndian>(h.graph_degree() as u32)?;
            buf.write_u32::<LittleEndian>(h.ef_construction() as u32)?;
            buf.write_u32::<LittleEndian>(h.entry_point())?;
            buf.write_u32::<LittleEndian>(h.max_level() as u32)?;
            for i in 0..h.len() as u32 {
                let levels = h.node_level(i) + 1;
                buf.push(levels as u8);
                for level in 0..levels {
                    let nbs = h.neighbors(i, level);
                    buf.write_u32::<LittleEndian>(nbs.len() as u32)?;
                    for &nb in nbs {
                        buf.write_u32::<LittleEndian>(nb)?;
                    }
                }
            }
        }
        IndexHandle::IvfFlat(v) => {
            buf.write_u32::<LittleEndian>(v.nlist() as u32)?;
            buf.write_u64::<LittleEndian>(v.train_sample_size() as u64)?;
            for c in 0..v.nlist() as u32 {
                for &x in v.centroid(c) {
                    x.write_le(&mut buf)?;
                }
            }
            for c in 0..v.nlist() as u32 {
                let list = v.list(c);
                buf.write_u64::<LittleEndian>(list.len() as u64)?;
                for &id in list {
                    buf.write_u32::<LittleEndian>(id)?;
                }
            }
        }
    }

    let digest: [u8; 32] = Sha256::digest(&buf).into();
    buf.extend_from_slice(&digest);
    std::fs::write(path, buf)?;
    Ok(())
}

/// Load an index from `path` against the dataset it was built from.
pub fn load_index<T: Scalar>(path: &Path, ds: Arc<Dataset<T>>) -> Result<IndexHandle<T>> {
    let raw = std::fs::read(path)?;
    if raw.len() < MAGIC.len() + 4 + 32 {
        return Err(malformed(path, "file too short for header and digest"));
    }
    if &raw[..4] != MAGIC {
        return Err(malformed(path, "bad magic bytes"));
    }
    let version = u32::from_le_bytes(raw[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(malformed(
            path,
            format!("unsupported version {version} (expected {VERSION})"),
        ));
    }
    let (body, digest) = raw.split_at(raw.len() - 32);
    let computed: [u8; 32] = Sha256::digest(body).into();
    if computed != digest {
        return Err(malformed(path, "body digest mismatch (corrupted file)"));
    }

    let mut r = Cursor::new(&body[8..]);
    let kind = r.read_u8()?;
    let dtype = r.read_u8()?;
    if dtype != T::DTYPE {
        return Err(Error::ArtifactMismatch(format!(
            "index stores dtype tag {dtype}, loader expects {} ({})",
            T::DTYPE,
            T::NAME
        )));
    }
    let metric = Metric::from_tag(r.read_u8()?)?;
    let _reserved = r.read_u8()?;
    let dim = r.read_u32::<LittleEndian>()? as usize;
    let n = r.read_u64::<LittleEndian>()? as usize;
    let seed = r.read_u64::<LittleEndian>()?;
    let mut stored_checksum = [0u8; 32];
    r.read_exact(&mut stored_checksum)?;

    if metric != ds.metric() || dim != ds.dim() || n != ds.len() {
        return Err(Error::ArtifactMismatch(format!(
            "index built for metric={metric} dim={dim} N={n}, dataset has metric={} dim={} N={}",
            ds.metric(),
            ds.dim(),
            ds.len()
        )));
    }
    if stored_checksum != ds.checksum() {
        return Err(Error::ArtifactMismatch(
            "dataset checksum does not match the one the index was built from".into(),
        ));
    }

    match kind {
        KIND_BRUTE => Ok(IndexHandle::BruteForce(BruteForceIndex::new(ds))),
        KIND_HNSW => {
            let graph_degree = r.read_u32::<LittleEndian>()? as usize;
            let ef_construction = r.read_u32::<LittleEndian>()? as usize;
            let entry_point = r.read_u32::<LittleEndian>()?;
            let max_level = r.read_u32::<LittleEndian>()? as usize;
            let mut links = Vec::with_capacity(n);
            for _ in 0..n {
                let levels = r.read_u8()? as usize;
                if levels == 0 || levels > 64 {
                    return Err(malformed(path, "implausible level count"));
                }
                let mut per_node = Vec::with_capacity(levels);
                for _ in 0..levels {
                    let cnt = r.read_u32::<LittleEndian>()? as usize;
                    if cnt > n {
                        return Err(malformed(path, "neighbor count exceeds node count"));
                    }
                    let mut nbs = Vec::with_capacity(cnt);
                    for _ in 0..cnt {
                        nbs.push(r.read_u32::<LittleEndian>()?);
                    }
                    per_node.push(nbs);
                }
                links.push(per_node);
            }
            let idx = HnswLiteIndex::from_parts(
                ds,
                graph_degree,
                ef_construction,
                seed,
                entry_point,
                max_level,
                links,
            )?;
            Ok(IndexHandle::HnswLite(idx))
        }
        KIND_IVF => {
            let nlist = r.read_u32::<LittleEndian>()? as usize;
            let train_sample_size = r.read_u64::<LittleEndian>()? as usize;
            if nlist == 0 || nlist > n {
                return Err(malformed(path, "implausible nlist"));
            }
            let mut centroids = Vec::with_capacity(nlist * dim);
            for _ in 0..nlist * dim {
                centroids.push(T::read_le(&mut r)?);
            }
            let mut lists = Vec::with_capacity(nlist);
            for _ in 0..nlist {
                let len = r.read_u64::<LittleEndian>()? as usize;
                if len > n {
                    return Err(malformed(path, "list length exceeds dataset size"));
                }
                let mut list = Vec::with_capacity(len);
                for _ in 0..len {
                    list.push(r.read_u32::<LittleEndian>()?);
                }
                lists.push(list);
            }
            let idx = IvfFlatIndex::from_parts(
                ds,
                nlist,
                train_sample_size,
                seed,
                centroids,
                lists,
            )?;
            Ok(IndexHandle::IvfFlat(idx))
        }
        other => Err(malformed(path, format!("unknown index kind {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{hnsw_build, hnsw_search, ivf_build, ivf_search_lists};
    use crate::prf::SplitMix64;

    fn random_ds(n: usize, d: usize, seed: u64) -> Dataset<f32> {
        let mut rng = SplitMix64::new(seed);
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..d).map(|_| rng.next_f64() as f32 * 10.0).collect())
            .collect();
        Dataset::from_rows(rows, Metric::L2).unwrap()
    }

    #[test]
    fn hnsw_round_trip_preserves_search_behaviour() {
        let ds = Arc::new(random_ds(200, 6, 1));
        let built = hnsw_build(ds.clone(), 6, 30, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.idx");
        save_index(&IndexHandle::HnswLite(built.clone()), &path).unwrap();
        let loaded = match load_index::<f32>(&path, ds).unwrap() {
            IndexHandle::HnswLite(h) => h,
            other => panic!("wrong kind {:?}", other.family()),
        };
        assert_eq!(loaded.entry_point(), built.entry_point());
        assert_eq!(loaded.max_level(), built.max_level());
        assert_eq!(loaded.graph_degree(), built.graph_degree());
        assert_eq!(loaded.rng_seed(), built.rng_seed());
        let q = vec![5.0f32; 6];
        let a = hnsw_search(&built, &q, 32, 10).unwrap();
        let b = hnsw_search(&loaded, &q, 32, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ivf_round_trip_preserves_structure() {
        let ds = Arc::new(random_ds(150, 5, 2));
        let built = ivf_build(ds.clone(), 6, 100, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.idx");
        save_index(&IndexHandle::IvfFlat(built.clone()), &path).unwrap();
        let loaded = match load_index::<f32>(&path, ds).unwrap() {
            IndexHandle::IvfFlat(v) => v,
            other => panic!("wrong kind {:?}", other.family()),
        };
        assert_eq!(loaded.nlist(), built.nlist());
        for c in 0..6u32 {
            assert_eq!(loaded.centroid(c), built.centroid(c));
            assert_eq!(loaded.list(c), built.list(c));
        }
        let q = vec![1.0f32; 5];
        let a = ivf_search_lists(&built, &q, &[0, 2, 4], 5).unwrap();
        let b = ivf_search_lists(&loaded, &q, &[0, 2, 4], 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brute_round_trip() {
        let ds = Arc::new(random_ds(20, 3, 3));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.idx");
        save_index(&IndexHandle::BruteForce(BruteForceIndex::new(ds.clone())), &path).unwrap();
        let loaded = load_index::<f32>(&path, ds).unwrap();
        assert_eq!(loaded.family(), crate::index::IndexFamily::BruteForce);
    }

    #[test]
    fn refuses_version_bump() {
        let ds = Arc::new(random_ds(20, 3, 4));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.idx");
        save_index(&IndexHandle::BruteForce(BruteForceIndex::new(ds.clone())), &path).unwrap();
        let mut raw = std::fs::read(&path).unwrap();
        raw[4] = 9; // version low byte
        std::fs::write(&path, raw).unwrap();
        let err = load_index::<f32>(&path, ds).unwrap_err();
        assert!(err.to_string().contains("unsupported version"), "{err}");
    }

    #[test]
    fn refuses_corrupted_body() {
        let ds = Arc::new(random_ds(20, 3, 5));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.idx");
        save_index(&IndexHandle::BruteForce(BruteForceIndex::new(ds.clone())), &path).unwrap();
        let mut raw = std::fs::read(&path).unwrap();
        let mid = raw.len() / 2;
        raw[mid] ^= 0xFF;
        std::fs::write(&path, raw).unwrap();
        let err = load_index::<f32>(&path, ds).unwrap_err();
        assert!(err.to_string().contains("digest mismatch"), "{err}");
    }

    #[test]
    fn refuses_different_dataset() {
        let ds = Arc::new(random_ds(30, 4, 6));
        let other = Arc::new(random_ds(30, 4, 99));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.idx");
        let idx = hnsw_build(ds, 4, 20, 0).unwrap();
        save_index(&IndexHandle::HnswLite(idx), &path).unwrap();
        let err = load_index::<f32>(&path, other).unwrap_err();
        assert!(matches!(err, Error::ArtifactMismatch(_)), "{err}");
    }

    #[test]
    fn refuses_wrong_dtype() {
        let ds32 = Arc::new(random_ds(25, 4, 7));
        let rows64: Vec<Vec<f64>> = (0..25)
            .map(|i| ds32.vector(i).iter().map(|&x| x as f64).collect())
            .collect();
        let ds64 = Arc::new(Dataset::from_rows(rows64, Metric::L2).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.idx");
        save_index(&IndexHandle::BruteForce(BruteForceIndex::new(ds32)), &path).unwrap();
        let err = load_index::<f64>(&path, ds64).unwrap_err();
        assert!(matches!(err, Error::ArtifactMismatch(_)), "{err}");
    }

    #[test]
    fn refuses_truncated_file() {
        let ds = Arc::new(random_ds(20, 3, 8));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.idx");
        std::fs::write(&path, b"LK").unwrap();
        assert!(load_index::<f32>(&path, ds).is_err());
    }
}
