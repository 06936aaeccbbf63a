//! Structural topology embeddings from association networks.
//!
//! Drugs are described by drug–drug Jaccard similarity plus random walks with
//! restart over the drug–disease and drug–side-effect networks; proteins by
//! protein–protein similarity plus walks over the protein–disease network.
//! Diffusion component analysis (log-transformed diffusion states, then a
//! spectral factorisation of their Gram matrix) compresses the result to a
//! fixed dimension.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entity::Side;
use crate::error::{Error, Result};
use crate::numkit::{eigh_topk, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NetworkKind {
    DrugDrug,
    ProteinProtein,
    DrugDisease,
    DrugSideEffect,
    ProteinDisease,
    DrugProtein,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 6] = [
        NetworkKind::DrugDrug,
        NetworkKind::ProteinProtein,
        NetworkKind::DrugDisease,
        NetworkKind::DrugSideEffect,
        NetworkKind::ProteinDisease,
        NetworkKind::DrugProtein,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::DrugDrug => "drug-drug",
            NetworkKind::ProteinProtein => "protein-protein",
            NetworkKind::DrugDisease => "drug-disease",
            NetworkKind::DrugSideEffect => "drug-sideeffect",
            NetworkKind::ProteinDisease => "protein-disease",
            NetworkKind::DrugProtein => "drug-protein",
        }
    }

    pub fn is_unipartite(self) -> bool {
        matches!(self, NetworkKind::DrugDrug | NetworkKind::ProteinProtein)
    }

    /// Entity type of the adjacency rows.
    pub fn row_side(self) -> Side {
        match self {
            NetworkKind::ProteinProtein | NetworkKind::ProteinDisease => Side::Protein,
            _ => Side::Drug,
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NetworkKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown network kind `{s}`")))
    }
}

/// Binary adjacency between two ordered identifier sets.
#[derive(Clone, Debug)]
pub struct AssociationNetwork {
    pub kind: NetworkKind,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
    pub adjacency: Matrix,
}

impl AssociationNetwork {
    pub fn new(
        kind: NetworkKind,
        row_ids: Vec<String>,
        col_ids: Vec<String>,
        adjacency: Matrix,
    ) -> Result<Self> {
        if adjacency.shape() != (row_ids.len(), col_ids.len()) {
            return Err(Error::Shape {
                op: "AssociationNetwork::new",
                left: adjacency.shape(),
                right: (row_ids.len(), col_ids.len()),
            });
        }
        if adjacency.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Input(format!("{kind} adjacency is not binary")));
        }
        if kind.is_unipartite() {
            if row_ids != col_ids {
                return Err(Error::Input(format!(
                    "{kind} network must use the same ids for rows and columns"
                )));
            }
            if adjacency != adjacency.transpose() {
                return Err(Error::Input(format!("{kind} adjacency is not symmetric")));
            }
        }
        Ok(AssociationNetwork {
            kind,
            row_ids,
            col_ids,
            adjacency,
        })
    }

    /// Builds the network over the sorted unique ids of an edge list.
    /// Unipartite kinds get symmetric completion.
    pub fn from_edges<S: AsRef<str>>(kind: NetworkKind, edges: &[(S, S)]) -> Self {
        let (row_ids, col_ids) = if kind.is_unipartite() {
            let ids: BTreeSet<&str> = edges
                .iter()
                .flat_map(|(a, b)| [a.as_ref(), b.as_ref()])
                .collect();
            let ids: Vec<String> = ids.into_iter().map(str::to_owned).collect();
            (ids.clone(), ids)
        } else {
            let rows: BTreeSet<&str> = edges.iter().map(|(a, _)| a.as_ref()).collect();
            let cols: BTreeSet<&str> = edges.iter().map(|(_, b)| b.as_ref()).collect();
            (
                rows.into_iter().map(str::to_owned).collect(),
                cols.into_iter().map(str::to_owned).collect(),
            )
        };
        let row_pos: HashMap<&str, usize> = row_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let col_pos: HashMap<&str, usize> = col_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut adjacency = Matrix::zeros(row_ids.len(), col_ids.len());
        for (a, b) in edges {
            let (i, j) = (row_pos[a.as_ref()], col_pos[b.as_ref()]);
            adjacency.set(i, j, 1.0);
            if kind.is_unipartite() {
                adjacency.set(j, i, 1.0);
            }
        }
        AssociationNetwork {
            kind,
            row_ids,
            col_ids,
            adjacency,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency
            .as_slice()
            .iter()
            .filter(|&&v| v != 0.0)
            .count()
    }

    /// Re-expresses the rows (and, for unipartite kinds, the columns) over a
    /// larger ordered universe. Entities absent from the network get empty rows.
    pub fn over_universe(&self, universe: &[String]) -> Result<AssociationNetwork> {
        let pos: HashMap<&str, usize> = universe
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let map_ids = |ids: &[String]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|id| {
                    pos.get(id.as_str()).copied().ok_or_else(|| {
                        Error::Input(format!("{} id `{id}` missing from universe", self.kind))
                    })
                })
                .collect()
        };
        let rows = map_ids(&self.row_ids)?;
        let (col_ids, cols) = if self.kind.is_unipartite() {
            (universe.to_vec(), rows.clone())
        } else {
            (self.col_ids.clone(), (0..self.col_ids.len()).collect())
        };
        let mut adjacency = Matrix::zeros(universe.len(), col_ids.len());
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &cj) in cols.iter().enumerate() {
                if self.adjacency.get(i, j) != 0.0 {
                    adjacency.set(ri, cj, 1.0);
                }
            }
        }
        Ok(AssociationNetwork {
            kind: self.kind,
            row_ids: universe.to_vec(),
            col_ids,
            adjacency,
        })
    }
}

/// Pairwise Jaccard similarity between the association sets of the rows.
///
/// The diagonal is 1; two empty rows have similarity 0.
pub fn jaccard_similarity(net: &AssociationNetwork) -> Matrix {
    let a = &net.adjacency;
    let n = a.rows();
    // counts are small integers, exact in f64
    let inter = a.matmul_t(a).expect("A·Aᵀ is always defined");
    let sizes: Vec<f64> = a.row_iter().map(|r| r.iter().sum()).collect();
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            return 1.0;
        }
        let union = sizes[i] + sizes[j] - inter.get(i, j);
        if union == 0.0 {
            0.0
        } else {
            inter.get(i, j) / union
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwrConfig {
    pub restart: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RwrConfig {
    fn default() -> Self {
        RwrConfig {
            restart: 0.5,
            max_iter: 1000,
            tol: 1e-12,
        }
    }
}

/// Stationary random-walk-with-restart distributions.
///
/// `states` has one row per walk node and one column per start node; column
/// `j` is the distribution for a walk restarting at `node_ids[j]`.
/// `feature_rows` lists the walk nodes used as features downstream: all nodes
/// of a unipartite network, the partner side of a bipartite one.
#[derive(Clone, Debug)]
pub struct DiffusionStateMatrix {
    pub side: Side,
    pub node_ids: Vec<String>,
    pub walk_ids: Vec<String>,
    pub states: Matrix,
    pub feature_rows: Vec<usize>,
    pub restart: f64,
}

/// Random walk with restart from every row entity of `net`.
///
/// Bipartite networks are walked on their symmetrised union graph. Nodes
/// without edges get a self-loop so the transition matrix stays
/// column-stochastic.
pub fn rwr(net: &AssociationNetwork, cfg: &RwrConfig) -> Result<DiffusionStateMatrix> {
    if !(cfg.restart > 0.0 && cfg.restart <= 1.0) {
        return Err(Error::Parameter(format!(
            "restart probability must lie in (0, 1], got {}",
            cfg.restart
        )));
    }
    let n_rows = net.row_ids.len();
    let (walk_ids, incoming, feature_rows) = if net.kind.is_unipartite() {
        let incoming: Vec<Vec<usize>> = (0..n_rows)
            .map(|i| {
                (0..n_rows)
                    .filter(|&j| net.adjacency.get(i, j) != 0.0)
                    .collect()
            })
            .collect();
        (
            net.row_ids.clone(),
            incoming,
            (0..n_rows).collect::<Vec<_>>(),
        )
    } else {
        let n_cols = net.col_ids.len();
        let mut incoming = vec![Vec::new(); n_rows + n_cols];
        for i in 0..n_rows {
            for j in 0..n_cols {
                if net.adjacency.get(i, j) != 0.0 {
                    incoming[i].push(n_rows + j);
                    incoming[n_rows + j].push(i);
                }
            }
        }
        let walk_ids = net.row_ids.iter().chain(&net.col_ids).cloned().collect();
        (walk_ids, incoming, (n_rows..n_rows + n_cols).collect())
    };
    let states = diffuse(&incoming, n_rows, cfg)?;
    Ok(DiffusionStateMatrix {
        side: net.kind.row_side(),
        node_ids: net.row_ids.clone(),
        walk_ids,
        states,
        feature_rows,
        restart: cfg.restart,
    })
}

/// Power iteration `s ← (1−r)·W·s + r·e_j` for start nodes `0..n_starts`.
///
/// `incoming[i]` lists the nodes `j` with an edge `j → i`.
fn diffuse(incoming: &[Vec<usize>], n_starts: usize, cfg: &RwrConfig) -> Result<Matrix> {
    let n = incoming.len();
    let mut incoming = incoming.to_vec();
    let mut out_degree = vec![0usize; n];
    for sources in &incoming {
        for &j in sources {
            out_degree[j] += 1;
        }
    }
    for j in 0..n {
        if out_degree[j] == 0 {
            incoming[j].push(j);
            out_degree[j] = 1;
        }
    }
    let inv_degree: Vec<f64> = out_degree.iter().map(|&d| 1.0 / d as f64).collect();
    let r = cfg.restart;

    let mut states = Matrix::zeros(n, n_starts);
    let mut s = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut flow = vec![0.0; n];
    for start in 0..n_starts {
        s.iter_mut().for_each(|v| *v = 0.0);
        s[start] = 1.0;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..cfg.max_iter {
            for j in 0..n {
                flow[j] = s[j] * inv_degree[j];
            }
            residual = 0.0;
            for i in 0..n {
                let mut acc: f64 = incoming[i].iter().map(|&j| flow[j]).sum();
                acc *= 1.0 - r;
                if i == start {
                    acc += r;
                }
                next[i] = acc;
                residual = f64::max(residual, (acc - s[i]).abs());
            }
            std::mem::swap(&mut s, &mut next);
            if residual <= cfg.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Convergence {
                what: "random walk with restart",
                iterations: cfg.max_iter,
                residual,
            });
        }
        for i in 0..n {
            states.set(i, start, s[i]);
        }
    }
    Ok(states)
}

/// Per-entity embedding matrix, one row per entity.
#[derive(Clone, Debug)]
pub struct TopologyEmbedding {
    pub side: Side,
    pub entity_ids: Vec<String>,
    pub embedding: Matrix,
    pub warnings: Vec<String>,
}

/// Eigenvalues at or below this fraction of the largest are treated as zero.
const POSITIVE_EIGEN_RTOL: f64 = 1e-12;

/// Diffusion component analysis over one or more diffusion-state matrices
/// and a similarity matrix sharing the same entity order.
///
/// Each diffusion block contributes `ln(s + 1/n)` features, `n` being the
/// number of walk nodes; the similarity matrix is appended as-is. Row `i` of
/// the result is `V_i · diag(√λ)` over the top-`dim` eigenpairs of the
/// feature Gram matrix; non-positive eigenvalues yield zero columns and a
/// warning.
pub fn dca_reduce(
    diffusions: &[DiffusionStateMatrix],
    similarity: &Matrix,
    dim: usize,
) -> Result<TopologyEmbedding> {
    let first = diffusions.first().ok_or_else(|| {
        Error::Parameter("diffusion component analysis needs at least one diffusion matrix".into())
    })?;
    let n = first.node_ids.len();
    if let Some(d) = diffusions.iter().find(|d| d.node_ids != first.node_ids) {
        return Err(Error::Input(format!(
            "diffusion matrices disagree on node order ({} vs {} nodes)",
            n,
            d.node_ids.len()
        )));
    }
    if similarity.shape() != (n, n) {
        return Err(Error::Shape {
            op: "dca_reduce",
            left: similarity.shape(),
            right: (n, n),
        });
    }
    if dim == 0 || dim > n {
        return Err(Error::Parameter(format!(
            "embedding dimension {dim} must lie in 1..={n}"
        )));
    }

    let mut blocks: Vec<Matrix> = diffusions.iter().map(log_diffusion_features).collect();
    blocks.push(similarity.clone());
    let refs: Vec<&Matrix> = blocks.iter().collect();
    let features = Matrix::hcat(&refs)?;
    let gram = features.matmul_t(&features)?.symmetrize()?;

    let eig = eigh_topk(&gram, dim)?;
    let floor = POSITIVE_EIGEN_RTOL * eig.values[0].abs();
    let mut embedding = Matrix::zeros(n, dim);
    let mut positive = 0;
    for (c, &lambda) in eig.values.iter().enumerate() {
        if lambda > floor && lambda > 0.0 {
            positive += 1;
            let root = lambda.sqrt();
            for i in 0..n {
                embedding.set(i, c, eig.vectors.get(i, c) * root);
            }
        }
    }
    let mut warnings = Vec::new();
    if positive < dim {
        warnings.push(format!(
            "{} embedding: only {positive} positive eigenvalues for dimension {dim}; \
             remaining columns are zero",
            first.side
        ));
    }
    Ok(TopologyEmbedding {
        side: first.side,
        entity_ids: first.node_ids.clone(),
        embedding,
        warnings,
    })
}

/// `n_starts × n_features` block of `ln(s + 1/n_walk)`.
fn log_diffusion_features(d: &DiffusionStateMatrix) -> Matrix {
    let eps = 1.0 / d.walk_ids.len() as f64;
    Matrix::from_fn(d.node_ids.len(), d.feature_rows.len(), |i, f| {
        (d.states.get(d.feature_rows[f], i) + eps).ln()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub rwr: RwrConfig,
    pub drug_dim: usize,
    pub protein_dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            rwr: RwrConfig::default(),
            drug_dim: 100,
            protein_dim: 100,
        }
    }
}

/// Drug and protein topology embeddings from the five feature networks.
///
/// Entity universes are the sorted union of ids seen on each side, including
/// those of an optional drug–protein network (whose edges are not used).
pub fn build_topology_embeddings(
    networks: &[AssociationNetwork],
    cfg: &FeatureConfig,
) -> Result<(TopologyEmbedding, TopologyEmbedding)> {
    let find = |kind: NetworkKind| -> Result<&AssociationNetwork> {
        let mut hits = networks.iter().filter(|n| n.kind == kind);
        let net = hits
            .next()
            .ok_or_else(|| Error::Input(format!("missing required network `{kind}`")))?;
        if hits.next().is_some() {
            return Err(Error::Input(format!("network `{kind}` supplied twice")));
        }
        Ok(net)
    };
    let drug_drug = find(NetworkKind::DrugDrug)?;
    let prot_prot = find(NetworkKind::ProteinProtein)?;
    let drug_disease = find(NetworkKind::DrugDisease)?;
    let drug_se = find(NetworkKind::DrugSideEffect)?;
    let prot_disease = find(NetworkKind::ProteinDisease)?;
    let dti = networks.iter().find(|n| n.kind == NetworkKind::DrugProtein);

    let mut drug_ids: BTreeSet<&String> = BTreeSet::new();
    let mut prot_ids: BTreeSet<&String> = BTreeSet::new();
    for net in [drug_drug, drug_disease, drug_se] {
        drug_ids.extend(&net.row_ids);
    }
    for net in [prot_prot, prot_disease] {
        prot_ids.extend(&net.row_ids);
    }
    if let Some(dti) = dti {
        drug_ids.extend(&dti.row_ids);
        prot_ids.extend(&dti.col_ids);
    }
    if let Some(id) = drug_ids.intersection(&prot_ids).next() {
        return Err(Error::Input(format!(
            "id `{id}` is used both as a drug and as a protein"
        )));
    }
    for net in [drug_disease, drug_se, prot_disease] {
        let rows: BTreeSet<&String> = net.row_ids.iter().collect();
        if let Some(id) = net.col_ids.iter().find(|c| rows.contains(c)) {
            return Err(Error::Input(format!(
                "{} network uses id `{id}` on both sides",
                net.kind
            )));
        }
    }
    let drug_ids: Vec<String> = drug_ids.into_iter().cloned().collect();
    let prot_ids: Vec<String> = prot_ids.into_iter().cloned().collect();

    let side_embedding = |ids: &[String],
                          similarity_net: &AssociationNetwork,
                          walk_nets: &[&AssociationNetwork],
                          dim: usize|
     -> Result<TopologyEmbedding> {
        let sim = jaccard_similarity(&similarity_net.over_universe(ids)?);
        let diffusions = walk_nets
            .iter()
            .map(|net| rwr(&net.over_universe(ids)?, &cfg.rwr))
            .collect::<Result<Vec<_>>>()?;
        dca_reduce(&diffusions, &sim, dim)
    };

    let drugs = side_embedding(&drug_ids, drug_drug, &[drug_disease, drug_se], cfg.drug_dim)?;
    let proteins = side_embedding(&prot_ids, prot_prot, &[prot_disease], cfg.protein_dim)?;
    Ok((drugs, proteins))
}
