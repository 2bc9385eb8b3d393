//! Per-segment embedding vectors: backends, caching and JSONL storage.

mod backend;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{EmbeddingBackend, HttpEmbeddingBackend, MockEmbeddingBackend};

use crate::cache::{cache_key, DiskCache};
use crate::http::BackendError;
use crate::retry::{Attempt, RetryPolicy};
use crate::scalar::Real;

/// Owner id of a recall segment: `participant/narrative`.
pub fn recall_owner(participant_id: &str, narrative_id: &str) -> String {
    format!("{participant_id}/{narrative_id}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRecord {
    /// A narrative id, or [`recall_owner`] for a participant's recall.
    pub owner_id: String,
    pub event_index: usize,
    pub text: String,
}

impl SegmentRecord {
    pub fn new(owner_id: impl Into<String>, event_index: usize, text: impl Into<String>) -> Self {
        Self { owner_id: owner_id.into(), event_index, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real"))]
pub struct EmbeddingVector<T> {
    pub owner_id: String,
    pub event_index: usize,
    pub model_id: String,
    pub values: Vec<T>,
}

impl<T: Real> EmbeddingVector<T> {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no segments to embed")]
    NoSegments,
    #[error("segment {owner_id}#{event_index} has empty text")]
    EmptyText { owner_id: String, event_index: usize },
    #[error("gave up after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend rejected the request (HTTP {status}): {message}")]
    Config { status: u16, message: String },
    #[error("integrity: {0}")]
    Integrity(String),
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("io on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

impl From<(BackendError, u32)> for EmbedError {
    fn from((e, attempts): (BackendError, u32)) -> Self {
        match e {
            BackendError::Status { status, body } if !(status == 429 || status >= 500) => {
                EmbedError::Config { status, message: body }
            }
            other => EmbedError::Transport { attempts, message: other.to_string() },
        }
    }
}

/// Checks shared by every ingestion path: one dimension per model, at least
/// two components, no constant vectors, no duplicate segment references.
pub fn validate_vectors<T: Real>(vectors: &[EmbeddingVector<T>]) -> Result<(), EmbedError> {
    let mut dims: HashMap<&str, usize> = HashMap::new();
    let mut seen = HashSet::new();
    for v in vectors {
        let label = || format!("{}#{} ({})", v.owner_id, v.event_index, v.model_id);
        if v.dim() < 2 {
            return Err(EmbedError::Integrity(format!("{} has dimension {}", label(), v.dim())));
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::Integrity(format!("{} has non-finite values", label())));
        }
        if v.is_constant() {
            return Err(EmbedError::Integrity(format!("{} is constant", label())));
        }
        let d = *dims.entry(&v.model_id).or_insert(v.dim());
        if d != v.dim() {
            return Err(EmbedError::Integrity(format!("{} has dimension {} but the model uses {d}", label(), v.dim())));
        }
        if !seen.insert((&v.model_id, &v.owner_id, v.event_index)) {
            return Err(EmbedError::Integrity(format!("duplicate segment {}", label())));
        }
    }
    Ok(())
}

/// Backend plus per-text cache and retry.
#[derive(Clone)]
pub struct EmbedGateway {
    backend: Arc<dyn EmbeddingBackend>,
    cache: Option<DiskCache>,
    retry: RetryPolicy,
    batch_size: usize,
}

impl EmbedGateway {
    pub fn new(backend: Arc<dyn EmbeddingBackend>) -> Self {
        Self { backend, cache: None, retry: RetryPolicy::default(), batch_size: 64 }
    }

    pub fn with_cache(mut self, cache: DiskCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    fn key(model_id: &str, text: &str) -> String {
        cache_key(&[b"embedding", model_id.as_bytes(), text.as_bytes()])
    }

    fn fetch(&self, model_id: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let out = self.retry.run(|_| {
            self.backend
                .embed(model_id, texts)
                .map_err(|e| if e.is_transient() { Attempt::Retry(e) } else { Attempt::Fail(e) })
        })?;
        if out.len() != texts.len() {
            return Err(EmbedError::Integrity(format!("backend returned {} vectors for {} texts", out.len(), texts.len())));
        }
        Ok(out)
    }

    /// One vector per segment, in input order. Each distinct text is requested once.
    pub fn embed_texts<T: Real>(&self, segments: &[SegmentRecord], model_id: &str) -> Result<Vec<EmbeddingVector<T>>, EmbedError> {
        if segments.is_empty() {
            return Err(EmbedError::NoSegments);
        }
        if let Some(s) = segments.iter().find(|s| s.text.trim().is_empty()) {
            return Err(EmbedError::EmptyText { owner_id: s.owner_id.clone(), event_index: s.event_index });
        }
        let mut known: HashMap<&str, Vec<f64>> = HashMap::new();
        let mut missing: Vec<String> = Vec::new();
        for s in segments {
            if known.contains_key(s.text.as_str()) || missing.contains(&s.text) {
                continue;
            }
            let cached = match &self.cache {
                Some(c) => c.get(&Self::key(model_id, &s.text))?,
                None => None,
            };
            match cached.map(|c| serde_json::from_str::<Vec<f64>>(&c)) {
                Some(Ok(v)) => {
                    known.insert(&s.text, v);
                }
                Some(Err(e)) => {
                    log::warn!("discarding unreadable cached embedding: {e}");
                    missing.push(s.text.clone());
                }
                None => missing.push(s.text.clone()),
            }
        }
        let mut fetched: HashMap<String, Vec<f64>> = HashMap::new();
        for batch in missing.chunks(self.batch_size) {
            for (text, v) in batch.iter().zip(self.fetch(model_id, batch)?) {
                if let Some(c) = &self.cache {
                    c.put(&Self::key(model_id, text), &serde_json::to_string(&v).expect("vector serializes"))?;
                }
                fetched.insert(text.clone(), v);
            }
        }
        let vectors: Vec<EmbeddingVector<T>> = segments
            .iter()
            .map(|s| {
                let v = known.get(s.text.as_str()).or_else(|| fetched.get(&s.text)).expect("every text resolved");
                EmbeddingVector {
                    owner_id: s.owner_id.clone(),
                    event_index: s.event_index,
                    model_id: model_id.to_string(),
                    values: v.iter().map(|&x| T::of(x)).collect(),
                }
            })
            .collect();
        validate_vectors(&vectors)?;
        Ok(vectors)
    }
}

/// Reads `{owner_id, event_index, model_id, values}` lines; blank lines are skipped.
pub fn import_vectors<T: Real>(path: &Path) -> Result<Vec<EmbeddingVector<T>>, EmbedError> {
    let io = |source| EmbedError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let v: EmbeddingVector<T> = serde_json::from_str(&line).map_err(|e| EmbedError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(v);
        validate_vectors(&out).map_err(|e| match e {
            EmbedError::Integrity(m) => EmbedError::Integrity(format!("{}:{}: {m}", path.display(), i + 1)),
            other => other,
        })?;
    }
    Ok(out)
}

pub fn export_vectors<T: Real>(path: &Path, vectors: &[EmbeddingVector<T>]) -> Result<(), EmbedError> {
    let io = |source| EmbedError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for v in vectors {
        serde_json::to_writer(&mut w, v).expect("vector serializes");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Vectors grouped by (model, owner) and ordered by event index.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore<T> {
    groups: BTreeMap<(String, String), Vec<EmbeddingVector<T>>>,
}

impl<T: Real> EmbeddingStore<T> {
    pub fn new() -> Self {
        Self { groups: BTreeMap::new() }
    }

    pub fn from_vectors(vectors: Vec<EmbeddingVector<T>>) -> Result<Self, EmbedError> {
        let mut store = Self::new();
        store.insert_all(vectors)?;
        Ok(store)
    }

    pub fn insert_all(&mut self, vectors: Vec<EmbeddingVector<T>>) -> Result<(), EmbedError> {
        let mut all: Vec<EmbeddingVector<T>> = self.groups.values().flatten().cloned().collect();
        all.extend(vectors);
        validate_vectors(&all)?;
        self.groups.clear();
        for v in all {
            self.groups.entry((v.model_id.clone(), v.owner_id.clone())).or_default().push(v);
        }
        for g in self.groups.values_mut() {
            g.sort_by_key(|v| v.event_index);
        }
        Ok(())
    }

    pub fn get(&self, model_id: &str, owner_id: &str) -> Option<&[EmbeddingVector<T>]> {
        self.groups.get(&(model_id.to_string(), owner_id.to_string())).map(Vec::as_slice)
    }

    pub fn models(&self) -> Vec<String> {
        let mut m: Vec<String> = self.groups.keys().map(|k| k.0.clone()).collect();
        m.dedup();
        m
    }

    pub fn owners(&self, model_id: &str) -> Vec<String> {
        self.groups.keys().filter(|k| k.0 == model_id).map(|k| k.1.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EmbeddingVector<T>> {
        self.groups.values().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn v(owner: &str, idx: usize, model: &str, values: Vec<f64>) -> EmbeddingVector<f64> {
        EmbeddingVector { owner_id: owner.into(), event_index: idx, model_id: model.into(), values }
    }

    struct Counting {
        inner: MockEmbeddingBackend,
        texts: AtomicUsize,
    }

    impl EmbeddingBackend for Counting {
        fn embed(&self, model_id: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError> {
            self.texts.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.embed(model_id, texts)
        }
        fn name(&self) -> &str {
            "counting"
        }
    }

    #[test]
    fn identical_texts_share_a_vector() {
        let dir = tempfile::tempdir().unwrap();
        let backend = Arc::new(Counting { inner: MockEmbeddingBackend::new(16, 1), texts: AtomicUsize::new(0) });
        let gw = EmbedGateway::new(backend.clone()).with_cache(DiskCache::open(dir.path()).unwrap());
        let segs = vec![
            SegmentRecord::new("n", 0, "the cat sat"),
            SegmentRecord::new("n", 1, "a dog ran"),
            SegmentRecord::new("p/n", 0, "the cat sat"),
        ];
        let a: Vec<EmbeddingVector<f64>> = gw.embed_texts(&segs, "mock").unwrap();
        assert_eq!(a[0].values, a[2].values);
        assert_eq!(backend.texts.load(Ordering::SeqCst), 2);
        let b: Vec<EmbeddingVector<f64>> = gw.embed_texts(&segs, "mock").unwrap();
        assert_eq!(a, b);
        assert_eq!(backend.texts.load(Ordering::SeqCst), 2);
        let owners: Vec<&str> = b.iter().map(|x| x.owner_id.as_str()).collect();
        assert_eq!(owners, ["n", "n", "p/n"]);
    }

    #[test]
    fn f32_vectors() {
        let gw = EmbedGateway::new(Arc::new(MockEmbeddingBackend::new(8, 0)));
        let out: Vec<EmbeddingVector<f32>> = gw.embed_texts(&[SegmentRecord::new("n", 0, "hello there")], "m").unwrap();
        assert_eq!(out[0].dim(), 8);
    }

    #[test]
    fn empty_inputs_rejected() {
        let gw = EmbedGateway::new(Arc::new(MockEmbeddingBackend::new(8, 0)));
        assert!(matches!(gw.embed_texts::<f64>(&[], "m"), Err(EmbedError::NoSegments)));
        assert!(matches!(gw.embed_texts::<f64>(&[SegmentRecord::new("n", 0, "  ")], "m"), Err(EmbedError::EmptyText { .. })));
    }

    #[test]
    fn validation_rules() {
        assert!(validate_vectors(&[v("a", 0, "m", vec![1.0, 2.0]), v("a", 1, "m", vec![1.0, 2.0, 3.0])]).is_err());
        assert!(validate_vectors(&[v("a", 0, "m", vec![1.0, 2.0]), v("a", 0, "m", vec![2.0, 1.0])]).is_err());
        assert!(validate_vectors(&[v("a", 0, "m", vec![3.0, 3.0])]).is_err());
        assert!(validate_vectors(&[v("a", 0, "m", vec![1.0, 2.0]), v("a", 0, "k", vec![1.0, 2.0, 3.0])]).is_ok());
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn import_examples() {
        let dir = tempfile::tempdir().unwrap();
        let line = |i: usize, vals: &str| format!(r#"{{"owner_id":"n","event_index":{i},"model_id":"m","values":[{vals}]}}"#);
        let ok = write(dir.path(), "ok.jsonl", &[line(0, "1,2,3,4"), line(1, "4,3,2,1"), line(2, "0.5,1,2,3")].join("\n"));
        assert_eq!(import_vectors::<f64>(&ok).unwrap().len(), 3);
        let mixed = write(dir.path(), "mixed.jsonl", &[line(0, "1,2,3,4"), line(1, "1,2,3,4,5")].join("\n"));
        match import_vectors::<f64>(&mixed) {
            Err(EmbedError::Integrity(m)) => assert!(m.contains(":2:"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
        let empty = write(dir.path(), "empty.jsonl", "");
        assert!(import_vectors::<f64>(&empty).unwrap().is_empty());
        let bad = write(dir.path(), "bad.jsonl", &format!("{}\n{{oops", line(0, "1,2")));
        assert!(matches!(import_vectors::<f64>(&bad), Err(EmbedError::Malformed { line: 2, .. })));
    }

    proptest::proptest! {
        #[test]
        fn export_import_is_bit_exact(rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 4), 1..6)) {
            let vs: Vec<EmbeddingVector<f64>> = rows.into_iter().enumerate()
                .filter(|(_, r)| r.windows(2).any(|w| w[0] != w[1]))
                .map(|(i, r)| v("p/n", i, "m", r)).collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("v.jsonl");
            export_vectors(&p, &vs).unwrap();
            let back: Vec<EmbeddingVector<f64>> = import_vectors(&p).unwrap();
            proptest::prop_assert_eq!(
                back.iter().flat_map(|x| x.values.iter().map(|f| f.to_bits())).collect::<Vec<_>>(),
                vs.iter().flat_map(|x| x.values.iter().map(|f| f.to_bits())).collect::<Vec<_>>()
            );
        }

        #[test]
        fn export_import_f32(rows in proptest::collection::vec(proptest::collection::vec(-1e3f32..1e3, 3), 1..4)) {
            let vs: Vec<EmbeddingVector<f32>> = rows.into_iter().enumerate()
                .filter(|(_, r)| r.windows(2).any(|w| w[0] != w[1]))
                .map(|(i, r)| EmbeddingVector { owner_id: "n".into(), event_index: i, model_id: "m".into(), values: r }).collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("v.jsonl");
            export_vectors(&p, &vs).unwrap();
            proptest::prop_assert_eq!(import_vectors::<f32>(&p).unwrap(), vs);
        }
    }

    #[test]
    fn store_groups_by_owner() {
        let store = EmbeddingStore::from_vectors(vec![
            v("n", 1, "m", vec![1.0, 2.0]),
            v("n", 0, "m", vec![2.0, 1.0]),
            v("p/n", 0, "m", vec![1.0, 3.0]),
        ])
        .unwrap();
        let n = store.get("m", "n").unwrap();
        assert_eq!(n.iter().map(|x| x.event_index).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(store.owners("m"), vec!["n".to_string(), "p/n".to_string()]);
        assert_eq!(store.models(), vec!["m".to_string()]);
        assert_eq!(store.len(), 3);
    }
}
