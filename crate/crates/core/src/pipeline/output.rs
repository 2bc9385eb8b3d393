//! Artifact writers. Every file carries the tool version, config hash and seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `%g`-style formatting with `digits` significant digits and no trailing zeros.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV float cell: nine significant digits; undefined values are empty.
pub fn csv_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| fmt_sig(v, 9))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self { tool: TOOL.into(), version: VERSION.into(), config_hash: config_hash.into(), seed }
    }

    pub fn header_line(&self) -> String {
        format!("{} {} config={} seed={}", self.tool, self.version, self.config_hash, self.seed)
    }
}

/// Writes artifacts under one output root and remembers what it wrote.
#[derive(Debug)]
pub struct Writer {
    pub root: PathBuf,
    pub meta: Meta,
}

impl Writer {
    pub fn new(root: impl Into<PathBuf>, meta: Meta) -> Self {
        Self { root: root.into(), meta }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn create(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }

    /// CSV with a leading `# tool version config=… seed=…` comment line.
    pub fn csv(&self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let p = self.create(rel)?;
        let mut buf = format!("# {}\n", self.meta.header_line()).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        fs::write(&p, buf).with_context(|| format!("writing {}", p.display()))
    }

    /// JSON object with a `meta` member; non-object values go under `records`.
    pub fn json<T: Serialize>(&self, rel: &str, value: &T) -> Result<()> {
        let p = self.create(rel)?;
        let body = serde_json::to_value(value)?;
        let mut obj = serde_json::Map::new();
        obj.insert("meta".into(), serde_json::to_value(&self.meta)?);
        match body {
            serde_json::Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("records".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(obj))?;
        text.push('\n');
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    pub fn text(&self, rel: &str, contents: &str) -> Result<()> {
        let p = self.create(rel)?;
        let mut f = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
        f.write_all(contents.as_bytes())?;
        Ok(())
    }
}

/// Reads back a JSON artifact written by [`Writer::json`], dropping `meta`.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let obj = v.as_object_mut().with_context(|| format!("{} is not a JSON object", path.display()))?;
    obj.remove("meta");
    let body = match obj.remove("records") {
        Some(r) if obj.is_empty() => r,
        Some(r) => {
            obj.insert("records".into(), r);
            v
        }
        None => v,
    };
    serde_json::from_value(body).with_context(|| format!("decoding {}", path.display()))
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    meta: &'a Meta,
    files: Vec<ManifestEntry>,
}

fn collect(root: &Path, dir: &Path, skip: &[&str], out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        let rel = p.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
        if skip.iter().any(|s| rel == *s || rel.starts_with(&format!("{s}/"))) {
            continue;
        }
        if p.is_dir() {
            collect(root, &p, skip, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// `manifest.json` listing every file under the root except `skip` prefixes, sorted by path.
pub fn write_manifest(w: &Writer, skip: &[&str]) -> Result<()> {
    let mut files = Vec::new();
    let mut skip: Vec<&str> = skip.to_vec();
    skip.push("manifest.json");
    collect(&w.root, &w.root, &skip, &mut files)?;
    let mut entries: Vec<ManifestEntry> = files
        .iter()
        .map(|p| {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ManifestEntry {
                path: p.strip_prefix(&w.root).expect("under root").to_string_lossy().replace('\\', "/"),
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let mut text = serde_json::to_string_pretty(&Manifest { meta: &w.meta, files: entries })?;
    text.push('\n');
    fs::write(w.path("manifest.json"), text).context("writing manifest.json")
}
