//! Planted-cluster benchmark with complementary text and structure signal.
//!
//! Every drug and protein gets a text cluster and an independent structure
//! cluster. A pair interacts exactly when both clusters agree, so neither
//! modality alone identifies the positives. Text embeddings carry the text
//! cluster plus Gaussian noise; the association networks carry the structure
//! cluster through cluster-specific diseases and side effects.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_io::{
    synth_embeddings, write_dataset, write_network, write_text_embeddings_tsv, InteractionDataset,
    LabeledPair, PlantedFactors, TextEmbedding,
};
use crate::entity::Side;
use crate::error::{Error, Result};
use crate::evaluation::protocol::ProtocolData;
use crate::graph_features::{
    build_topology_embeddings, AssociationNetwork, FeatureConfig, NetworkKind,
};
use crate::numkit::{seeded_stream, Matrix, RandomStream};
use crate::training::FeatureSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_drugs: usize,
    pub n_proteins: usize,
    pub text_clusters: usize,
    pub struct_clusters: usize,
    pub text_dim: usize,
    pub text_noise: f64,
    /// Diseases (and side effects) tied to each structure cluster.
    pub terms_per_cluster: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub sim_p_in: f64,
    pub sim_p_out: f64,
    pub seed: u64,
}

/// Topology embedding width used with the default fixture.
pub const FIXTURE_TOPOLOGY_DIM: usize = 24;

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_drugs: 100,
            n_proteins: 150,
            text_clusters: 6,
            struct_clusters: 6,
            text_dim: 32,
            text_noise: 0.5,
            terms_per_cluster: 10,
            p_in: 0.5,
            p_out: 0.02,
            sim_p_in: 0.3,
            sim_p_out: 0.01,
            seed: 2024,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticBenchmark {
    pub config: SyntheticConfig,
    pub drug_ids: Vec<String>,
    pub protein_ids: Vec<String>,
    /// `(text cluster, structure cluster)` per entity.
    pub drug_clusters: Vec<(usize, usize)>,
    pub protein_clusters: Vec<(usize, usize)>,
    pub networks: Vec<AssociationNetwork>,
    pub drug_text: TextEmbedding,
    pub protein_text: TextEmbedding,
    /// Pure-noise text of the same shape, for the text ablation.
    pub noise_drug_text: TextEmbedding,
    pub noise_protein_text: TextEmbedding,
    pub positives: Vec<(String, String)>,
}

/// Cluster pairs dealt round-robin over a shuffled order, so every
/// combination occurs once there are enough entities.
fn assign_clusters(
    stream: &mut RandomStream,
    n: usize,
    kt: usize,
    ks: usize,
) -> Vec<(usize, usize)> {
    let order = stream.permutation(n);
    let mut out = vec![(0, 0); n];
    for (slot, &i) in order.iter().enumerate() {
        let c = slot % (kt * ks);
        out[i] = (c / ks, c % ks);
    }
    out
}

fn onehot(clusters: &[(usize, usize)], k: usize) -> Matrix {
    Matrix::from_fn(clusters.len(), k, |i, j| {
        f64::from(u8::from(clusters[i].0 == j))
    })
}

fn bipartite(
    kind: NetworkKind,
    stream: &mut RandomStream,
    rows: &[String],
    clusters: &[(usize, usize)],
    terms: &[String],
    per_cluster: usize,
    p_in: f64,
    p_out: f64,
) -> AssociationNetwork {
    let mut edges = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut any = false;
        for (j, t) in terms.iter().enumerate() {
            let p = if j / per_cluster == clusters[i].1 {
                p_in
            } else {
                p_out
            };
            if stream.bernoulli(p) {
                edges.push((r.clone(), t.clone()));
                any = true;
            }
        }
        if !any {
            // keep every entity in the network's id set
            let j = clusters[i].1 * per_cluster + stream.index(per_cluster);
            edges.push((r.clone(), terms[j].clone()));
        }
    }
    AssociationNetwork::from_edges(kind, &edges)
}

fn similarity(
    kind: NetworkKind,
    stream: &mut RandomStream,
    ids: &[String],
    clusters: &[(usize, usize)],
    p_in: f64,
    p_out: f64,
) -> AssociationNetwork {
    let mut edges: Vec<(String, String)> = ids.iter().map(|i| (i.clone(), i.clone())).collect();
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            let p = if clusters[a].1 == clusters[b].1 {
                p_in
            } else {
                p_out
            };
            if stream.bernoulli(p) {
                edges.push((ids[a].clone(), ids[b].clone()));
            }
        }
    }
    AssociationNetwork::from_edges(kind, &edges)
}

fn with_ids(mut e: TextEmbedding, ids: &[String], provenance: &str) -> TextEmbedding {
    e.entity_ids = ids.to_vec();
    e.provenance = provenance.to_owned();
    e
}

pub fn generate_benchmark(cfg: &SyntheticConfig) -> Result<SyntheticBenchmark> {
    let (kt, ks) = (cfg.text_clusters, cfg.struct_clusters);
    if kt == 0 || ks == 0 || cfg.terms_per_cluster == 0 || cfg.n_drugs == 0 || cfg.n_proteins == 0 {
        return Err(Error::Parameter("synthetic sizes must all be >= 1".into()));
    }
    for p in [cfg.p_in, cfg.p_out, cfg.sim_p_in, cfg.sim_p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!(
                "edge probability {p} outside [0,1]"
            )));
        }
    }
    let root = seeded_stream(cfg.seed);
    let drug_ids: Vec<String> = (0..cfg.n_drugs)
        .map(|i| format!("DB{:05}", i + 1))
        .collect();
    let protein_ids: Vec<String> = (0..cfg.n_proteins)
        .map(|i| format!("P{:05}", i + 1))
        .collect();
    let drug_clusters = assign_clusters(&mut root.fork("drug-clusters"), cfg.n_drugs, kt, ks);
    let protein_clusters =
        assign_clusters(&mut root.fork("protein-clusters"), cfg.n_proteins, kt, ks);

    let n_terms = ks * cfg.terms_per_cluster;
    let diseases: Vec<String> = (0..n_terms).map(|i| format!("C{:04}", i + 1)).collect();
    let side_effects: Vec<String> = (0..n_terms).map(|i| format!("SE{:04}", i + 1)).collect();
    let networks = vec![
        similarity(
            NetworkKind::DrugDrug,
            &mut root.fork("drug-drug"),
            &drug_ids,
            &drug_clusters,
            cfg.sim_p_in,
            cfg.sim_p_out,
        ),
        similarity(
            NetworkKind::ProteinProtein,
            &mut root.fork("protein-protein"),
            &protein_ids,
            &protein_clusters,
            cfg.sim_p_in,
            cfg.sim_p_out,
        ),
        bipartite(
            NetworkKind::DrugDisease,
            &mut root.fork("drug-disease"),
            &drug_ids,
            &drug_clusters,
            &diseases,
            cfg.terms_per_cluster,
            cfg.p_in,
            cfg.p_out,
        ),
        bipartite(
            NetworkKind::DrugSideEffect,
            &mut root.fork("drug-sideeffect"),
            &drug_ids,
            &drug_clusters,
            &side_effects,
            cfg.terms_per_cluster,
            cfg.p_in,
            cfg.p_out,
        ),
        bipartite(
            NetworkKind::ProteinDisease,
            &mut root.fork("protein-disease"),
            &protein_ids,
            &protein_clusters,
            &diseases,
            cfg.terms_per_cluster,
            cfg.p_in,
            cfg.p_out,
        ),
    ];

    let planted = |clusters: &[(usize, usize)]| PlantedFactors {
        factors: onehot(clusters, kt),
        noise: cfg.text_noise,
    };
    let d = cfg.text_dim;
    let drug_text = synth_embeddings(
        &mut root.fork("drug-text"),
        Side::Drug,
        cfg.n_drugs,
        d,
        Some(&planted(&drug_clusters)),
    )?;
    let protein_text = synth_embeddings(
        &mut root.fork("protein-text"),
        Side::Protein,
        cfg.n_proteins,
        d,
        Some(&planted(&protein_clusters)),
    )?;
    let noise_drug_text = synth_embeddings(
        &mut root.fork("drug-noise"),
        Side::Drug,
        cfg.n_drugs,
        d,
        None,
    )?;
    let noise_protein_text = synth_embeddings(
        &mut root.fork("protein-noise"),
        Side::Protein,
        cfg.n_proteins,
        d,
        None,
    )?;

    let mut positives = Vec::new();
    for (i, dc) in drug_clusters.iter().enumerate() {
        for (j, pc) in protein_clusters.iter().enumerate() {
            if dc == pc {
                positives.push((drug_ids[i].clone(), protein_ids[j].clone()));
            }
        }
    }
    Ok(SyntheticBenchmark {
        config: cfg.clone(),
        drug_text: with_ids(drug_text, &drug_ids, "synthetic planted text"),
        protein_text: with_ids(protein_text, &protein_ids, "synthetic planted text"),
        noise_drug_text: with_ids(noise_drug_text, &drug_ids, "synthetic noise text"),
        noise_protein_text: with_ids(noise_protein_text, &protein_ids, "synthetic noise text"),
        drug_ids,
        protein_ids,
        drug_clusters,
        protein_clusters,
        networks,
        positives,
    })
}

impl SyntheticBenchmark {
    pub fn feature_config() -> FeatureConfig {
        FeatureConfig {
            drug_dim: FIXTURE_TOPOLOGY_DIM,
            protein_dim: FIXTURE_TOPOLOGY_DIM,
            ..FeatureConfig::default()
        }
    }

    /// Topology features, text and noise text assembled for training.
    pub fn protocol_data(&self, features: &FeatureConfig) -> Result<ProtocolData> {
        let (drug_topo, prot_topo) = build_topology_embeddings(&self.networks, features)?;
        let fs = FeatureSet::assemble(
            &drug_topo,
            &prot_topo,
            &self.drug_text,
            &self.protein_text,
            Some((&self.noise_drug_text, &self.noise_protein_text)),
            true,
        )?;
        Ok(ProtocolData::from_positives(fs, self.positives.clone()))
    }

    /// Writes `networks/<kind>.tsv`, `text/{drug,protein}.tsv`,
    /// `text/{drug,protein}_noise.tsv` and `positives.tsv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let nets = dir.join("networks");
        let text = dir.join("text");
        for d in [&nets, &text] {
            fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        for n in &self.networks {
            write_network(&nets.join(format!("{}.tsv", n.kind)), n)?;
        }
        for (name, e) in [
            ("drug.tsv", &self.drug_text),
            ("protein.tsv", &self.protein_text),
            ("drug_noise.tsv", &self.noise_drug_text),
            ("protein_noise.tsv", &self.noise_protein_text),
        ] {
            write_text_embeddings_tsv(&text.join(name), &e.entity_ids, &e.embedding)?;
        }
        let pairs = self
            .positives
            .iter()
            .map(|(d, p)| LabeledPair {
                drug: d.clone(),
                protein: p.clone(),
                label: 1,
            })
            .collect();
        write_dataset(
            &dir.join("positives.tsv"),
            &InteractionDataset::new(pairs, self.config.seed)?,
        )
    }
}
