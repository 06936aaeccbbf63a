//! Dataset, network and embedding files; negative sampling and splits.
//!
//! File formats:
//!
//! * edge list: first line `# kind=<kind>`, then `row_id<TAB>col_id` per line;
//! * text embeddings: `entity_id<TAB>v1<TAB>…<TAB>vd` per line, or the `EMB1`
//!   binary layout (magic `EMB1`, `u32` row count, `u32` dimension, then
//!   row-major `f64`, all little-endian) with the ids one per line in a
//!   sidecar `<file>.ids`;
//! * datasets: `drug_id<TAB>protein_id<TAB>label[<TAB>split]`.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entity::Side;
use crate::error::{Error, Result};
use crate::graph_features::{AssociationNetwork, NetworkKind};
use crate::numkit::{Matrix, RandomStream};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";

/// Per-entity text embedding matrix, rows in `entity_ids` order.
#[derive(Clone, Debug)]
pub struct TextEmbedding {
    pub side: Side,
    pub entity_ids: Vec<String>,
    pub embedding: Matrix,
    pub provenance: String,
}

impl TextEmbedding {
    pub fn dim(&self) -> usize {
        self.embedding.cols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Input(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub drug: String,
    pub protein: String,
    pub label: u8,
}

/// Labelled drug–protein pairs with an optional split assignment per pair.
#[derive(Clone, Debug, Default)]
pub struct InteractionDataset {
    pub pairs: Vec<LabeledPair>,
    pub split: Vec<Option<Split>>,
    pub seed: u64,
}

impl InteractionDataset {
    pub fn new(pairs: Vec<LabeledPair>, seed: u64) -> Result<Self> {
        let split = vec![None; pairs.len()];
        Self::with_splits(pairs, split, seed)
    }

    pub fn with_splits(
        pairs: Vec<LabeledPair>,
        split: Vec<Option<Split>>,
        seed: u64,
    ) -> Result<Self> {
        if split.len() != pairs.len() {
            return Err(Error::Contract(format!(
                "{} split entries for {} pairs",
                split.len(),
                pairs.len()
            )));
        }
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if p.label > 1 {
                return Err(Error::Input(format!(
                    "label {} for ({}, {}) is not 0/1",
                    p.label, p.drug, p.protein
                )));
            }
            if !seen.insert((p.drug.as_str(), p.protein.as_str())) {
                return Err(Error::Input(format!(
                    "duplicate pair ({}, {})",
                    p.drug, p.protein
                )));
            }
        }
        Ok(InteractionDataset { pairs, split, seed })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Indices of the pairs assigned to `split`.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.pairs.len())
            .filter(|&i| self.split[i] == Some(split))
            .collect()
    }

    pub fn positives(&self) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .filter(|p| p.label == 1)
            .map(|p| (p.drug.clone(), p.protein.clone()))
            .collect()
    }

    pub fn count_labels(&self, idx: &[usize]) -> (usize, usize) {
        let pos = idx.iter().filter(|&&i| self.pairs[i].label == 1).count();
        (pos, idx.len() - pos)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Kind named in an edge-list header, without reading the edges.
pub fn peek_network_kind(path: &Path) -> Result<NetworkKind> {
    let text = read_text(path)?;
    let header = text.lines().next().unwrap_or("");
    parse_kind_header(path, header)
}

fn parse_kind_header(path: &Path, header: &str) -> Result<NetworkKind> {
    let kind = header
        .trim()
        .strip_prefix('#')
        .map(str::trim)
        .and_then(|h| h.strip_prefix("kind="))
        .ok_or_else(|| parse_err(path, 1, "expected header `# kind=<kind>`"))?;
    NetworkKind::from_str(kind.trim()).map_err(|e| parse_err(path, 1, e.to_string()))
}

pub fn load_network(path: &Path, kind: NetworkKind) -> Result<AssociationNetwork> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    let found = parse_kind_header(path, header)?;
    if found != kind {
        return Err(Error::Input(format!(
            "{} declares kind `{found}`, expected `{kind}`",
            path.display()
        )));
    }
    let mut edges = Vec::new();
    for (n, line) in lines.enumerate() {
        let line_no = n + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(parse_err(
                path,
                line_no,
                format!("expected `row_id<TAB>col_id`, got `{line}`"),
            ));
        }
        edges.push((fields[0].to_owned(), fields[1].to_owned()));
    }
    Ok(AssociationNetwork::from_edges(kind, &edges))
}

/// Writes the edge list; unipartite networks list each undirected edge once.
pub fn write_network(path: &Path, net: &AssociationNetwork) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# kind={}\n", net.kind));
    for (i, r) in net.row_ids.iter().enumerate() {
        for (j, c) in net.col_ids.iter().enumerate() {
            if net.adjacency.get(i, j) != 0.0 && !(net.kind.is_unipartite() && j < i) {
                out.push_str(&format!("{r}\t{c}\n"));
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads a TSV or `EMB1` embedding file (detected by its magic bytes).
pub fn load_text_embeddings(path: &Path, side: Side) -> Result<TextEmbedding> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (entity_ids, embedding) = if bytes.starts_with(EMB1_MAGIC) {
        let matrix = decode_emb1(path, &bytes)?;
        let ids = read_ids_sidecar(path)?;
        if ids.len() != matrix.rows() {
            return Err(Error::Input(format!(
                "{} has {} rows but its id sidecar lists {} ids",
                path.display(),
                matrix.rows(),
                ids.len()
            )));
        }
        (ids, matrix)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| parse_err(path, 1, "not UTF-8 text and no EMB1 magic"))?;
        parse_embedding_tsv(path, &text)?
    };
    let mut seen = HashSet::new();
    if let Some(dup) = entity_ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::Input(format!(
            "{}: duplicate entity id `{dup}`",
            path.display()
        )));
    }
    Ok(TextEmbedding {
        side,
        entity_ids,
        embedding,
        provenance: path.display().to_string(),
    })
}

fn parse_embedding_tsv(path: &Path, text: &str) -> Result<(Vec<String>, Matrix)> {
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or("").to_owned();
        if id.is_empty() {
            return Err(parse_err(path, line_no, "missing entity id"));
        }
        let mut count = 0;
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::Input(format!(
                    "{}:{line_no}: non-finite value for entity `{id}`",
                    path.display()
                )));
            }
            data.push(v);
            count += 1;
        }
        match dim {
            None if count == 0 => {
                return Err(parse_err(path, line_no, "row has no values"));
            }
            None => dim = Some(count),
            Some(d) if d != count => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("row has {count} values, expected {d}"),
                ));
            }
            Some(_) => {}
        }
        ids.push(id);
    }
    let dim = dim.ok_or_else(|| parse_err(path, 1, "no embedding rows"))?;
    let m = Matrix::from_vec(ids.len(), dim, data)?;
    Ok((ids, m))
}

pub fn write_text_embeddings_tsv(path: &Path, ids: &[String], m: &Matrix) -> Result<()> {
    if ids.len() != m.rows() {
        return Err(Error::Contract(format!(
            "{} ids for {} embedding rows",
            ids.len(),
            m.rows()
        )));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, row) in ids.iter().zip(m.row_iter()) {
        let mut line = id.clone();
        for v in row {
            line.push('\t');
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn encode_emb1(m: &Matrix) -> Result<Vec<u8>> {
    let rows =
        u32::try_from(m.rows()).map_err(|_| Error::Parameter("too many rows for EMB1".into()))?;
    let cols = u32::try_from(m.cols())
        .map_err(|_| Error::Parameter("too many columns for EMB1".into()))?;
    let mut out = Vec::with_capacity(12 + 8 * m.len());
    out.extend_from_slice(EMB1_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Decodes one `EMB1` block from the start of `bytes`; returns the matrix
/// and the number of bytes consumed.
pub fn decode_emb1_prefix(path: &Path, bytes: &[u8]) -> Result<(Matrix, usize)> {
    let bad = |msg: &str| parse_err(path, 1, msg);
    if bytes.len() < 12 || &bytes[..4] != EMB1_MAGIC {
        return Err(bad("missing EMB1 header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let end = 12 + 8 * rows * cols;
    if bytes.len() < end {
        return Err(bad("EMB1 payload shorter than its header declares"));
    }
    let data: Vec<f64> = bytes[12..end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let m = Matrix::from_vec(rows, cols, data)
        .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    Ok((m, end))
}

fn decode_emb1(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    let (m, used) = decode_emb1_prefix(path, bytes)?;
    if used != bytes.len() {
        return Err(parse_err(path, 1, "trailing bytes after EMB1 payload"));
    }
    Ok(m)
}

pub fn ids_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

fn read_ids_sidecar(path: &Path) -> Result<Vec<String>> {
    let side = ids_sidecar(path);
    Ok(read_text(&side)?
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Writes `m` as `EMB1` and, when ids are given, the `<path>.ids` sidecar.
pub fn write_emb1(path: &Path, ids: Option<&[String]>, m: &Matrix) -> Result<()> {
    fs::write(path, encode_emb1(m)?).map_err(|e| Error::io(path, e))?;
    if let Some(ids) = ids {
        let side = ids_sidecar(path);
        let mut text = ids.join("\n");
        text.push('\n');
        fs::write(&side, text).map_err(|e| Error::io(side, e))?;
    }
    Ok(())
}

pub fn read_emb1(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_emb1(path, &bytes)
}

pub fn load_dataset(path: &Path) -> Result<InteractionDataset> {
    let text = read_text(path)?;
    let mut pairs = Vec::new();
    let mut split = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 && f.len() != 4 {
            return Err(parse_err(
                path,
                line_no,
                "expected `drug_id<TAB>protein_id<TAB>label[<TAB>split]`",
            ));
        }
        let label = match f[2].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("label `{other}` is not 0/1"),
                ))
            }
        };
        pairs.push(LabeledPair {
            drug: f[0].to_owned(),
            protein: f[1].to_owned(),
            label,
        });
        split.push(match f.get(3) {
            Some(s) => Some(
                s.trim()
                    .parse()
                    .map_err(|e: Error| parse_err(path, line_no, e.to_string()))?,
            ),
            None => None,
        });
    }
    InteractionDataset::with_splits(pairs, split, 0)
}

pub fn write_dataset(path: &Path, ds: &InteractionDataset) -> Result<()> {
    let mut out = String::new();
    for (p, s) in ds.pairs.iter().zip(&ds.split) {
        out.push_str(&format!("{}\t{}\t{}", p.drug, p.protein, p.label));
        if let Some(s) = s {
            out.push('\t');
            out.push_str(s.as_str());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Latent factors planted into synthetic embeddings: each row becomes
/// `factors[i] · loading + noise · N(0, 1)`.
#[derive(Clone, Debug)]
pub struct PlantedFactors {
    pub factors: Matrix,
    pub noise: f64,
}

/// Gaussian embedding matrix, optionally carrying planted latent structure.
/// The loading matrix is drawn from `stream` before the noise.
pub fn synth_embeddings(
    stream: &mut RandomStream,
    side: Side,
    n: usize,
    d: usize,
    planted: Option<&PlantedFactors>,
) -> Result<TextEmbedding> {
    if n == 0 || d == 0 {
        return Err(Error::Parameter(format!(
            "synthetic embedding needs n, d >= 1 (got {n}, {d})"
        )));
    }
    let embedding = match planted {
        None => Matrix::from_fn(n, d, |_, _| stream.gaussian()),
        Some(p) => {
            if p.factors.rows() != n {
                return Err(Error::Shape {
                    op: "synth_embeddings",
                    left: p.factors.shape(),
                    right: (n, d),
                });
            }
            let loading = Matrix::from_fn(p.factors.cols(), d, |_, _| stream.gaussian());
            let mut m = p.factors.matmul(&loading)?;
            if p.noise != 0.0 {
                m.map_inplace(|v| v + p.noise * stream.gaussian());
            }
            m
        }
    };
    let prefix = match side {
        Side::Drug => "D",
        Side::Protein => "P",
    };
    Ok(TextEmbedding {
        side,
        entity_ids: (0..n).map(|i| format!("{prefix}{i}")).collect(),
        embedding,
        provenance: format!("synthetic(seed={})", stream.seed()),
    })
}

/// Positives plus `ratio × |positives|` negatives drawn uniformly without
/// replacement from the pairs of `universe` that are not positive.
pub fn sample_negatives(
    positives: &[(String, String)],
    ratio: usize,
    stream: &mut RandomStream,
    universe: (&[String], &[String]),
) -> Result<InteractionDataset> {
    if ratio == 0 {
        return Err(Error::Parameter("negative ratio must be at least 1".into()));
    }
    let (drugs, proteins) = universe;
    let drug_idx = crate::entity::EntityIndex::new(drugs.to_vec())?;
    let prot_idx = crate::entity::EntityIndex::new(proteins.to_vec())?;
    let mut positive_set = HashSet::with_capacity(positives.len());
    for (d, p) in positives {
        let i = drug_idx.require(d, "drug")?;
        let j = prot_idx.require(p, "protein")?;
        if !positive_set.insert(i * proteins.len() + j) {
            return Err(Error::Input(format!("duplicate positive pair ({d}, {p})")));
        }
    }
    let need = ratio * positives.len();
    let total = drugs.len() * proteins.len();
    let available = total - positive_set.len();
    if need > available {
        return Err(Error::Input(format!(
            "cannot draw {need} negatives: only {available} non-positive pairs among {} drugs x {} proteins",
            drugs.len(),
            proteins.len()
        )));
    }
    let mut candidates: Vec<usize> = (0..total).filter(|c| !positive_set.contains(c)).collect();
    // partial Fisher-Yates
    for k in 0..need {
        let pick = k + stream.index(candidates.len() - k);
        candidates.swap(k, pick);
    }
    let mut pairs: Vec<LabeledPair> = positives
        .iter()
        .map(|(d, p)| LabeledPair {
            drug: d.clone(),
            protein: p.clone(),
            label: 1,
        })
        .collect();
    pairs.extend(candidates[..need].iter().map(|&c| LabeledPair {
        drug: drugs[c / proteins.len()].clone(),
        protein: proteins[c % proteins.len()].clone(),
        label: 0,
    }));
    InteractionDataset::new(pairs, stream.seed())
}

/// Stratified train/valid/test assignment.
pub fn make_splits(
    ds: &InteractionDataset,
    fractions: (f64, f64, f64),
    stream: &mut RandomStream,
) -> Result<InteractionDataset> {
    let (ft, fv, fs) = fractions;
    if !(ft > 0.0 && fv > 0.0 && fs > 0.0) || (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!(
            "split fractions {fractions:?} must be positive and sum to 1"
        )));
    }
    let mut split = vec![None; ds.len()];
    for label in [1u8, 0] {
        let mut idx: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.pairs[i].label == label)
            .collect();
        stream.shuffle(&mut idx);
        let n = idx.len();
        let n_train = ((ft * n as f64).round() as usize).min(n);
        let n_valid = ((fv * n as f64).round() as usize).min(n - n_train);
        for (k, &i) in idx.iter().enumerate() {
            split[i] = Some(if k < n_train {
                Split::Train
            } else if k < n_train + n_valid {
                Split::Valid
            } else {
                Split::Test
            });
        }
    }
    for s in [Split::Train, Split::Valid, Split::Test] {
        if !split.contains(&Some(s)) {
            return Err(Error::Input(format!(
                "{} split is empty for {} pairs at fractions {fractions:?}",
                s.as_str(),
                ds.len()
            )));
        }
    }
    InteractionDataset::with_splits(ds.pairs.clone(), split, stream.seed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::seeded_stream;
    use proptest::prelude::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn network_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.tsv",
            "# kind=drug-disease\nd1\tc1\nd1\tc2\nd2\tc1\n",
        );
        let net = load_network(&p, NetworkKind::DrugDisease).unwrap();
        assert_eq!(net.edge_count(), 3);

        let p = write(
            dir.path(),
            "b.tsv",
            "# kind=drug-drug\nd1\td2\nd2\td3\nd1\td3\n",
        );
        assert_eq!(
            load_network(&p, NetworkKind::DrugDrug)
                .unwrap()
                .edge_count(),
            6
        );

        let p = write(
            dir.path(),
            "c.tsv",
            "# kind=drug-drug\nd1\td2\nd1\td2\nd2\td1\n",
        );
        assert_eq!(
            load_network(&p, NetworkKind::DrugDrug)
                .unwrap()
                .edge_count(),
            2
        );

        let p = write(dir.path(), "d.tsv", "# kind=protein-disease\n");
        let net = load_network(&p, NetworkKind::ProteinDisease).unwrap();
        assert_eq!(net.edge_count(), 0);
        assert!(net.row_ids.is_empty());
    }

    #[test]
    fn network_errors_are_located() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.tsv", "# kind=drug-disease\nd1\tc1\nd1 c2\n");
        match load_network(&p, NetworkKind::DrugDisease) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let p = write(dir.path(), "b.tsv", "# kind=drug-drug\n");
        assert!(matches!(
            load_network(&p, NetworkKind::ProteinProtein),
            Err(Error::Input(_))
        ));
        let p = write(dir.path(), "c.tsv", "d1\tc1\n");
        assert!(matches!(
            load_network(&p, NetworkKind::DrugDisease),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn network_write_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let net = AssociationNetwork::from_edges(
            NetworkKind::ProteinProtein,
            &[("p1", "p2"), ("p2", "p3"), ("p3", "p3")],
        );
        let p = dir.path().join("pp.tsv");
        write_network(&p, &net).unwrap();
        let back = load_network(&p, NetworkKind::ProteinProtein).unwrap();
        assert_eq!(back.adjacency, net.adjacency);
        assert_eq!(back.row_ids, net.row_ids);
    }

    #[test]
    fn embedding_tsv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.tsv", "a\t1\t2\t3\t4\nb\t0.5\t-1\t0\t2e-3\n");
        let e = load_text_embeddings(&p, Side::Drug).unwrap();
        assert_eq!(e.embedding.shape(), (2, 4));
        assert_eq!(e.entity_ids, vec!["a", "b"]);

        let p = write(dir.path(), "r.tsv", "a\t1\t2\nb\t1\n");
        assert!(matches!(
            load_text_embeddings(&p, Side::Drug),
            Err(Error::Parse { line: 2, .. })
        ));
        let p = write(dir.path(), "n.tsv", "a\t1\t2\nbad\tNaN\t1\n");
        let err = load_text_embeddings(&p, Side::Drug).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn embedding_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = seeded_stream(5);
        let m = Matrix::from_fn(6, 5, |_, _| rng.gaussian() * 1e3);
        let names = ids("x", 6);
        let tsv = dir.path().join("e.tsv");
        write_text_embeddings_tsv(&tsv, &names, &m).unwrap();
        assert_eq!(
            load_text_embeddings(&tsv, Side::Protein).unwrap().embedding,
            m
        );
        let bin = dir.path().join("e.emb");
        write_emb1(&bin, Some(&names), &m).unwrap();
        let back = load_text_embeddings(&bin, Side::Protein).unwrap();
        assert_eq!(back.embedding, m);
        assert_eq!(back.entity_ids, names);
    }

    #[test]
    fn emb1_layout_is_exact() {
        let m = Matrix::from_rows(&[vec![1.0, -2.0]]).unwrap();
        let bytes = encode_emb1(&m).unwrap();
        let mut expect = b"EMB1".to_vec();
        expect.extend_from_slice(&1u32.to_le_bytes());
        expect.extend_from_slice(&2u32.to_le_bytes());
        expect.extend_from_slice(&1.0f64.to_le_bytes());
        expect.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(bytes, expect);
    }

    #[test]
    fn dataset_roundtrip_with_splits() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "ds.tsv",
            "d1\tp1\t1\ttrain\nd1\tp2\t0\ttest\nd2\tp1\t0\tvalid\n",
        );
        let ds = load_dataset(&p).unwrap();
        assert_eq!(ds.indices(Split::Test), vec![1]);
        let out = dir.path().join("out.tsv");
        write_dataset(&out, &ds).unwrap();
        assert_eq!(
            fs::read_to_string(&out).unwrap(),
            fs::read_to_string(&p).unwrap()
        );
        let p = write(dir.path(), "dup.tsv", "d1\tp1\t1\nd1\tp1\t0\n");
        assert!(matches!(load_dataset(&p), Err(Error::Input(_))));
    }

    #[test]
    fn synthetic_embeddings() {
        let a = synth_embeddings(&mut seeded_stream(3), Side::Drug, 5, 4, None).unwrap();
        let b = synth_embeddings(&mut seeded_stream(3), Side::Drug, 5, 4, None).unwrap();
        assert_eq!(a.embedding, b.embedding);

        let mut rng = seeded_stream(8);
        let factors = Matrix::from_fn(20, 2, |_, _| rng.gaussian());
        let planted = PlantedFactors {
            factors,
            noise: 0.0,
        };
        let e =
            synth_embeddings(&mut seeded_stream(4), Side::Drug, 20, 10, Some(&planted)).unwrap();
        let gram = e.embedding.t_matmul(&e.embedding).unwrap();
        let eig = crate::numkit::eigh_topk(&gram.symmetrize().unwrap(), 10).unwrap();
        let rank = eig
            .values
            .iter()
            .filter(|&&v| v > 1e-9 * eig.values[0])
            .count();
        assert_eq!(rank, 2);

        let big = synth_embeddings(&mut seeded_stream(10), Side::Drug, 1000, 100, None).unwrap();
        let mean = big.embedding.sum() / big.embedding.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    fn toy_positives() -> (Vec<(String, String)>, Vec<String>, Vec<String>) {
        let drugs = ids("d", 10);
        let prots = ids("p", 12);
        let pos = (0..10)
            .map(|i| (drugs[i].clone(), prots[(i * 5) % 12].clone()))
            .collect();
        (pos, drugs, prots)
    }

    #[test]
    fn negative_sampling_contract() {
        let (pos, drugs, prots) = toy_positives();
        let ds = sample_negatives(&pos, 1, &mut seeded_stream(1), (&drugs, &prots)).unwrap();
        assert_eq!(
            ds.count_labels(&(0..ds.len()).collect::<Vec<_>>()),
            (10, 10)
        );
        let ds10 = sample_negatives(&pos, 10, &mut seeded_stream(1), (&drugs, &prots)).unwrap();
        assert_eq!(ds10.len(), 110);
        let again = sample_negatives(&pos, 10, &mut seeded_stream(1), (&drugs, &prots)).unwrap();
        assert_eq!(ds10.pairs, again.pairs);
        let err = sample_negatives(&pos, 12, &mut seeded_stream(1), (&drugs, &prots)).unwrap_err();
        assert!(err.to_string().contains("110 non-positive"), "{err}");
    }

    #[test]
    fn negatives_never_hit_positives() {
        let (pos, drugs, prots) = toy_positives();
        let positive: HashSet<_> = pos.iter().cloned().collect();
        for seed in 0..1000 {
            let ds = sample_negatives(&pos, 3, &mut seeded_stream(seed), (&drugs, &prots)).unwrap();
            for p in ds.pairs.iter().filter(|p| p.label == 0) {
                assert!(!positive.contains(&(p.drug.clone(), p.protein.clone())));
            }
        }
    }

    #[test]
    fn split_sizes_and_errors() {
        let pairs: Vec<LabeledPair> = (0..100)
            .map(|i| LabeledPair {
                drug: format!("d{i}"),
                protein: "p".into(),
                label: (i % 2) as u8,
            })
            .collect();
        let ds = InteractionDataset::new(pairs, 0).unwrap();
        let s = make_splits(&ds, (0.7, 0.1, 0.2), &mut seeded_stream(2)).unwrap();
        let sizes: Vec<usize> = [Split::Train, Split::Valid, Split::Test]
            .iter()
            .map(|&x| s.indices(x).len())
            .collect();
        assert_eq!(sizes, vec![70, 10, 20]);
        for (x, n) in [(Split::Train, 70), (Split::Valid, 10), (Split::Test, 20)] {
            let (pos, _) = s.count_labels(&s.indices(x));
            assert!((pos as f64 - n as f64 / 2.0).abs() <= 1.0);
        }
        let again = make_splits(&ds, (0.7, 0.1, 0.2), &mut seeded_stream(2)).unwrap();
        assert_eq!(s.split, again.split);
        assert!(make_splits(&ds, (1.0, 0.0, 0.0), &mut seeded_stream(2)).is_err());
        assert!(make_splits(&ds, (0.5, 0.1, 0.2), &mut seeded_stream(2)).is_err());
    }

    proptest! {
        #[test]
        fn splits_partition_pairs(n in 10usize..200, seed in 0u64..500) {
            let pairs: Vec<LabeledPair> = (0..n)
                .map(|i| LabeledPair { drug: format!("d{i}"), protein: "p".into(), label: (i % 3 == 0) as u8 })
                .collect();
            let ds = InteractionDataset::new(pairs, 0).unwrap();
            if let Ok(s) = make_splits(&ds, (0.6, 0.2, 0.2), &mut seeded_stream(seed)) {
                let total: usize = [Split::Train, Split::Valid, Split::Test].iter().map(|&x| s.indices(x).len()).sum();
                prop_assert_eq!(total, n);
                prop_assert!(s.split.iter().all(Option::is_some));
            }
        }
    }
}
