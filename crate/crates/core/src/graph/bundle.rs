use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use serde::{Deserialize, Serialize};

use super::{FeatureKind, Graph, GraphParts};
use crate::error::{Error, Result};
use crate::tensor::DenseMatrix;

const BUNDLE_VERSION: u64 = 1;
const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// One sparse feature entry: `[col, value]`, or `[col]` / bare `col` for a 1.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Bare(usize),
    One([usize; 1]),
    Pair((usize, f64)),
}

#[derive(Debug, Serialize, Deserialize)]
struct Bundle {
    version: u64,
    name: String,
    num_nodes: usize,
    num_features: usize,
    num_classes: usize,
    feature_kind: FeatureKind,
    features: Vec<Vec<Entry>>,
    edges: Vec<[usize; 2]>,
    labels: Vec<Option<usize>>,
    train_mask: Vec<usize>,
    val_mask: Vec<usize>,
    test_mask: Vec<usize>,
}

/// Reads a bundle file (plain or gzip-compressed JSON) and validates it.
pub fn load_bundle(path: impl AsRef<Path>) -> Result<Graph> {
    let raw = fs::read(path.as_ref())?;
    let text = if raw.starts_with(&GZIP_MAGIC) {
        let mut s = String::new();
        GzDecoder::new(raw.as_slice())
            .read_to_string(&mut s)
            .map_err(|e| Error::Parse(format!("gzip: {e}")))?;
        s
    } else {
        String::from_utf8(raw).map_err(|e| Error::Parse(format!("not UTF-8: {e}")))?
    };
    parse_bundle(&text)
}

pub fn parse_bundle(text: &str) -> Result<Graph> {
    let b: Bundle = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if b.version != BUNDLE_VERSION {
        return Err(Error::Parse(format!("unsupported bundle version {}", b.version)));
    }
    if b.features.len() != b.num_nodes {
        return Err(Error::validation(
            "feature-rows",
            format!("{} feature rows for {} nodes", b.features.len(), b.num_nodes),
        ));
    }
    let d = b.num_features;
    let mut x = DenseMatrix::zeros(b.num_nodes, d);
    for (v, row) in b.features.iter().enumerate() {
        for e in row {
            let (col, val) = match *e {
                Entry::Bare(c) | Entry::One([c]) => (c, 1.0),
                Entry::Pair((c, val)) => (c, val),
            };
            if col >= d {
                return Err(Error::validation(
                    "feature-column-range",
                    format!("node {v} column {col} with {d} features"),
                ));
            }
            x.set(v, col, val);
        }
    }
    Graph::new(GraphParts {
        name: b.name,
        features: x,
        num_classes: b.num_classes,
        feature_kind: b.feature_kind,
        edges: b.edges.into_iter().map(|[u, v]| (u, v)).collect(),
        labels: b.labels,
        train: b.train_mask,
        val: b.val_mask,
        test: b.test_mask,
    })
}

pub fn to_bundle_json(g: &Graph) -> Result<String> {
    let binary = g.feature_kind() == FeatureKind::Binary;
    let features = (0..g.num_nodes())
        .map(|v| {
            g.features()
                .row(v)
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(c, &x)| if binary { Entry::One([c]) } else { Entry::Pair((c, x)) })
                .collect()
        })
        .collect();
    let b = Bundle {
        version: BUNDLE_VERSION,
        name: g.name().to_string(),
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
        feature_kind: g.feature_kind(),
        features,
        edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
        labels: g.labels().to_vec(),
        train_mask: g.train_mask().to_vec(),
        val_mask: g.val_mask().to_vec(),
        test_mask: g.test_mask().to_vec(),
    };
    Ok(serde_json::to_string(&b)?)
}

/// Writes a bundle; a `.gz` extension selects gzip compression.
pub fn save_bundle(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = to_bundle_json(g)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(fs::File::create(path)?, flate2::Compression::default());
        enc.write_all(json.as_bytes())?;
        enc.finish()?;
    } else {
        fs::write(path, json)?;
    }
    Ok(())
}
