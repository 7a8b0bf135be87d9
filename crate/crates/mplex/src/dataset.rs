//! On-disk dataset directories.
//!
//! A dataset is a directory of plain-text files: `meta.json` with the sizes
//! and relation names, `features.tsv` and `labels.tsv` keyed by node id,
//! one `edges_<relation>.tsv` per relation, optional `cross_<r>_<s>.tsv`
//! files keyed by relation names, and an optional `splits.json` pinning the
//! train/val/test node sets. Floats are written in shortest round-trip form,
//! so save followed by load reproduces every matrix bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use mplex_core::graph::{GraphError, MultiplexGraph, Split};
use mplex_core::tensor::{DenseMatrix, SparseMatrix};
use mplex_core::Real;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("dataset is missing {name}")]
    MissingFile { name: String },
    #[error("{file} line {line}: {what}")]
    Parse {
        file: String,
        line: usize,
        what: String,
    },
    #[error("{file}: {what}")]
    BadJson { file: String, what: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// `meta.json` contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Meta {
    num_nodes: usize,
    num_features: usize,
    num_labels: usize,
    relations: Vec<String>,
    multi_label: bool,
}

fn read_file(dir: &Path, name: &str) -> Result<String, DatasetError> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(DatasetError::MissingFile {
            name: name.to_string(),
        });
    }
    std::fs::read_to_string(&path).map_err(|source| DatasetError::Io { path, source })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), DatasetError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| DatasetError::Io { path, source })
}

fn parse_err(file: &str, line: usize, what: impl Into<String>) -> DatasetError {
    DatasetError::Parse {
        file: file.to_string(),
        line,
        what: what.into(),
    }
}

/// Non-blank lines with their 1-based numbers.
fn lines(contents: &str) -> impl Iterator<Item = (usize, &str)> {
    contents
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_node_id(file: &str, line: usize, token: &str, num_nodes: usize) -> Result<usize, DatasetError> {
    let id: usize = token
        .parse()
        .map_err(|_| parse_err(file, line, format!("bad node id `{token}`")))?;
    if id >= num_nodes {
        return Err(parse_err(
            file,
            line,
            format!("node id {id} out of range (num_nodes = {num_nodes})"),
        ));
    }
    Ok(id)
}

fn parse_real(file: &str, line: usize, token: &str) -> Result<Real, DatasetError> {
    token
        .parse()
        .map_err(|_| parse_err(file, line, format!("bad number `{token}`")))
}

fn load_features(dir: &Path, meta: &Meta) -> Result<DenseMatrix, DatasetError> {
    let name = "features.tsv";
    let contents = read_file(dir, name)?;
    let mut features = DenseMatrix::zeros(meta.num_nodes, meta.num_features);
    for (line_no, line) in lines(&contents) {
        let mut fields = line.split('\t');
        let id = parse_node_id(name, line_no, fields.next().unwrap(), meta.num_nodes)?;
        let values: Vec<&str> = fields.collect();
        if values.len() != meta.num_features {
            return Err(parse_err(
                name,
                line_no,
                format!("expected {} feature values, found {}", meta.num_features, values.len()),
            ));
        }
        for (f, token) in values.into_iter().enumerate() {
            features[(id, f)] = parse_real(name, line_no, token)?;
        }
    }
    Ok(features)
}

fn load_labels(
    dir: &Path,
    meta: &Meta,
) -> Result<(DenseMatrix, BTreeSet<usize>), DatasetError> {
    let name = "labels.tsv";
    let contents = read_file(dir, name)?;
    let mut labels = DenseMatrix::zeros(meta.num_nodes, meta.num_labels);
    let mut labeled = BTreeSet::new();
    for (line_no, line) in lines(&contents) {
        let mut fields = line.split('\t');
        let id = parse_node_id(name, line_no, fields.next().unwrap(), meta.num_nodes)?;
        if !labeled.insert(id) {
            return Err(parse_err(name, line_no, format!("node {id} listed twice")));
        }
        let mut any = false;
        for token in fields {
            let q: usize = token
                .parse()
                .map_err(|_| parse_err(name, line_no, format!("bad label index `{token}`")))?;
            if q >= meta.num_labels {
                return Err(parse_err(
                    name,
                    line_no,
                    format!("label index {q} out of range (num_labels = {})", meta.num_labels),
                ));
            }
            labels[(id, q)] = 1.0;
            any = true;
        }
        if !any {
            return Err(parse_err(name, line_no, format!("node {id} has no label indices")));
        }
    }
    Ok((labels, labeled))
}

/// Parses an edge file into a directed weight map. Lines are
/// `src\tdst[\tweight]`; a missing weight means 1.0.
fn load_edge_map(
    dir: &Path,
    name: &str,
    num_nodes: usize,
) -> Result<BTreeMap<(usize, usize), Real>, DatasetError> {
    let contents = read_file(dir, name)?;
    let mut edges = BTreeMap::new();
    for (line_no, line) in lines(&contents) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(parse_err(name, line_no, "expected `src\\tdst[\\tweight]`"));
        }
        let src = parse_node_id(name, line_no, fields[0], num_nodes)?;
        let dst = parse_node_id(name, line_no, fields[1], num_nodes)?;
        let weight = match fields.get(2) {
            Some(token) => parse_real(name, line_no, token)?,
            None => 1.0,
        };
        if edges.insert((src, dst), weight).is_some() {
            return Err(parse_err(name, line_no, format!("duplicate edge {src} -> {dst}")));
        }
    }
    Ok(edges)
}

/// Symmetrizes a directed weight map by keeping the larger direction.
fn symmetrize_max(edges: &BTreeMap<(usize, usize), Real>) -> BTreeMap<(usize, usize), Real> {
    let mut sym = BTreeMap::new();
    for (&(i, j), &w) in edges {
        let strongest = match edges.get(&(j, i)) {
            Some(&opposite) => w.max(opposite),
            None => w,
        };
        sym.insert((i, j), strongest);
        sym.insert((j, i), strongest);
    }
    sym
}

fn to_sparse(
    edges: &BTreeMap<(usize, usize), Real>,
    num_nodes: usize,
) -> Result<SparseMatrix, GraphError> {
    let triplets: Vec<(usize, usize, Real)> =
        edges.iter().map(|(&(i, j), &w)| (i, j, w)).collect();
    Ok(SparseMatrix::from_triplets(num_nodes, num_nodes, &triplets)
        .map_err(GraphError::from)?)
}

fn cross_file_name(relations: &[String], r: usize, s: usize) -> String {
    format!("cross_{}_{}.tsv", relations[r], relations[s])
}

/// Loads a dataset directory into a validated graph.
///
/// Directed intra-layer edge lists are symmetrized by keeping the larger of
/// the two directions; cross files are optional and kept as stored. Files
/// other than the expected ones are ignored.
pub fn load_dataset(dir: &Path) -> Result<MultiplexGraph, DatasetError> {
    let meta_raw = read_file(dir, "meta.json")?;
    let meta: Meta = serde_json::from_str(&meta_raw).map_err(|e| DatasetError::BadJson {
        file: "meta.json".to_string(),
        what: e.to_string(),
    })?;

    let features = load_features(dir, &meta)?;
    let (labels, labeled) = load_labels(dir, &meta)?;

    let mut intra = Vec::with_capacity(meta.relations.len());
    for name in &meta.relations {
        let file = format!("edges_{name}.tsv");
        let directed = load_edge_map(dir, &file, meta.num_nodes)?;
        intra.push(to_sparse(&symmetrize_max(&directed), meta.num_nodes)?);
    }

    let mut cross = BTreeMap::new();
    for r in 0..meta.relations.len() {
        for s in 0..meta.relations.len() {
            if r == s {
                continue;
            }
            let file = cross_file_name(&meta.relations, r, s);
            if dir.join(&file).is_file() {
                let edges = load_edge_map(dir, &file, meta.num_nodes)?;
                cross.insert((r, s), to_sparse(&edges, meta.num_nodes)?);
            }
        }
    }

    Ok(MultiplexGraph::new(
        meta.num_nodes,
        meta.relations,
        intra,
        cross,
        features,
        labels,
        labeled,
        meta.multi_label,
    )?)
}

fn format_real(value: Real) -> String {
    // `Display` for floats prints the shortest string that parses back to
    // the same bits, which keeps the files diffable and the round trip exact.
    format!("{value}")
}

fn edges_tsv(matrix: &SparseMatrix) -> String {
    let mut out = String::new();
    for (i, j, w) in matrix.iter() {
        let _ = writeln!(out, "{i}\t{j}\t{}", format_real(w));
    }
    out
}

/// Writes a graph as a dataset directory (creating it if needed).
///
/// Only rows of labeled nodes appear in `labels.tsv`; label bits of
/// unlabeled nodes, if any, are not representable on disk.
pub fn save_dataset(dir: &Path, g: &MultiplexGraph) -> Result<(), DatasetError> {
    std::fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let meta = Meta {
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_labels: g.num_labels(),
        relations: g.relations().to_vec(),
        multi_label: g.multi_label(),
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write_file(dir, "meta.json", &format!("{meta_json}\n"))?;

    let mut features = String::new();
    for i in 0..g.num_nodes() {
        let _ = write!(features, "{i}");
        for &v in g.features().row(i) {
            let _ = write!(features, "\t{}", format_real(v));
        }
        features.push('\n');
    }
    write_file(dir, "features.tsv", &features)?;

    let mut labels = String::new();
    for &i in g.labeled_nodes() {
        let _ = write!(labels, "{i}");
        for (q, &bit) in g.labels().row(i).iter().enumerate() {
            if bit != 0.0 {
                let _ = write!(labels, "\t{q}");
            }
        }
        labels.push('\n');
    }
    write_file(dir, "labels.tsv", &labels)?;

    for (r, name) in g.relations().iter().enumerate() {
        write_file(dir, &format!("edges_{name}.tsv"), &edges_tsv(g.intra(r)))?;
    }
    for (r, s) in g.cross_pairs() {
        let file = cross_file_name(g.relations(), r, s);
        let matrix = g.cross(r, s).expect("pair comes from the stored map");
        write_file(dir, &file, &edges_tsv(matrix))?;
    }
    Ok(())
}

/// Reads `splits.json` if the dataset pins one.
pub fn load_split_file(dir: &Path) -> Result<Option<Split>, DatasetError> {
    let path = dir.join("splits.json");
    if !path.is_file() {
        return Ok(None);
    }
    let raw = std::fs::read_to_string(&path).map_err(|source| DatasetError::Io { path, source })?;
    let split = serde_json::from_str(&raw).map_err(|e| DatasetError::BadJson {
        file: "splits.json".to_string(),
        what: e.to_string(),
    })?;
    Ok(Some(split))
}

/// Writes `splits.json` into the dataset directory.
pub fn save_split_file(dir: &Path, split: &Split) -> Result<(), DatasetError> {
    let json = serde_json::to_string_pretty(split).expect("split serializes");
    write_file(dir, "splits.json", &format!("{json}\n"))
}
