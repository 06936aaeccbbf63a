use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use dti_core::data_io::{
    ids_sidecar, load_dataset, load_network, load_text_embeddings, peek_network_kind,
    write_dataset, write_emb1, Split, TextEmbedding,
};
use dti_core::evaluation::protocol::{
    coldstart_group, metric_values, run_ablation, run_coldstart, run_once, summarize, welch_matrix,
    GroupSummary, PairwiseTest, ProtocolData, SeedRun,
};
use dti_core::evaluation::{
    case_study_report, case_study_split, evaluate, write_case_study, write_representations,
    DEFAULT_THRESHOLD, METRIC_NAMES,
};
use dti_core::fusion_net::{load_checkpoint, save_checkpoint};
use dti_core::graph_features::{
    build_topology_embeddings, AssociationNetwork, FeatureConfig, RwrConfig, TopologyEmbedding,
};
use dti_core::numkit::seeded_stream;
use dti_core::synthetic::{generate_benchmark, SyntheticConfig};
use dti_core::training::{train, FeatureSet, LossName, TrainConfig, Variant};
use dti_core::Side;

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult};

pub const OUTPUT_ROOT_ENV: &str = "DTI_OUTPUT_ROOT";

/// Runs `command` and returns its output directory.
pub fn execute(command: Command, cfg: &RunConfig) -> CliResult<PathBuf> {
    let inputs = validate_inputs(command, cfg)?;
    let settings = Settings::from_config(command, cfg)?;
    let out = output_dir(command, cfg, &settings)?;
    write_snapshot(&out, cfg, &inputs)?;
    match command {
        Command::Synth => cmd_synth(&out, cfg)?,
        Command::Features => cmd_features(&out, cfg, &settings)?,
        _ => {
            let data = load_protocol_data(cfg, &settings)?;
            match command {
                Command::Train => cmd_train(&out, &data, &settings)?,
                Command::Evaluate => cmd_evaluate(&out, cfg, &data, &settings)?,
                Command::Ablate => cmd_ablate(&out, cfg, &data, &settings)?,
                Command::Coldstart => cmd_coldstart(&out, cfg, &data, &settings)?,
                Command::Casestudy => cmd_casestudy(&out, cfg, &data, &settings)?,
                Command::Sweep => cmd_sweep(&out, cfg, &data, &settings)?,
                Command::Synth | Command::Features => unreachable!(),
            }
        }
    }
    Ok(out)
}

/// Typed values shared by most commands.
struct Settings {
    seeds: Vec<u64>,
    train: TrainConfig,
    features: FeatureConfig,
    standardize: bool,
    neg_ratio: usize,
    fractions: (f64, f64, f64),
}

impl Settings {
    fn from_config(command: Command, cfg: &RunConfig) -> CliResult<Self> {
        let seeds = if command.multi_seed() {
            cfg.list("seeds")?
        } else {
            vec![cfg.get("seed")?]
        };
        if seeds.is_empty() {
            return Err(CliError::Config("`seeds` is empty".into()));
        }
        let train = TrainConfig {
            epochs: cfg.get("train.epochs")?,
            batch_size: cfg.get("train.batch_size")?,
            lr: cfg.get("train.lr")?,
            weight_decay: cfg.get("train.weight_decay")?,
            hidden_dim: cfg.get("train.hidden_dim")?,
            loss: cfg.get("train.loss")?,
            focal_gamma: cfg.get("train.focal_gamma")?,
            focal_alpha: cfg.get("train.focal_alpha")?,
            seed: seeds[0],
            variant: cfg.get("train.variant")?,
        };
        train.validate()?;
        let fr: Vec<f64> = cfg.list("data.fractions")?;
        let fractions = match fr[..] {
            [a, b, c] => (a, b, c),
            _ => {
                return Err(CliError::Config(
                    "`data.fractions` needs three values".into(),
                ))
            }
        };
        Ok(Settings {
            seeds,
            train,
            features: FeatureConfig {
                rwr: RwrConfig {
                    restart: cfg.get("rwr.restart")?,
                    max_iter: cfg.get("rwr.max_iter")?,
                    tol: cfg.get("rwr.tol")?,
                },
                drug_dim: cfg.get("dca.dim.drug")?,
                protein_dim: cfg.get("dca.dim.protein")?,
            },
            standardize: cfg.get("features.standardize")?,
            neg_ratio: cfg.get("data.neg_ratio")?,
            fractions,
        })
    }
}

/// Checks every input path the command will read and returns them, with
/// sidecars, keyed for hashing.
fn validate_inputs(command: Command, cfg: &RunConfig) -> CliResult<Vec<(String, PathBuf)>> {
    let mut keys: Vec<&str> = Vec::new();
    match command {
        Command::Synth => {}
        Command::Features => keys.push("networks.dir"),
        _ => {
            if cfg.path("topo.drug").is_some() || cfg.path("topo.protein").is_some() {
                keys.extend(["topo.drug", "topo.protein"]);
            } else {
                keys.push("networks.dir");
            }
            keys.extend(["text.drug", "text.protein", "data.interactions"]);
            if command == Command::Evaluate {
                keys.push("model.checkpoint");
            }
        }
    }
    let mut files = Vec::new();
    for k in keys {
        let p = cfg
            .path(k)
            .ok_or_else(|| CliError::Config(format!("`{k}` must be set for `{command}`")))?;
        if k == "networks.dir" {
            for f in network_files(&p)? {
                files.push((
                    format!(
                        "{k}/{}",
                        f.file_name().unwrap_or_default().to_string_lossy()
                    ),
                    f,
                ));
            }
        } else {
            files.push((k.to_owned(), p));
        }
    }
    for k in ["text.alt_drug", "text.alt_protein"] {
        if let Some(p) = cfg.path(k) {
            if command != Command::Synth && command != Command::Features {
                files.push((k.to_owned(), p));
            }
        }
    }
    let mut out = Vec::new();
    for (k, p) in files {
        if !p.is_file() {
            return Err(missing(&p));
        }
        let side = ids_sidecar(&p);
        out.push((k.clone(), p));
        if side.is_file() {
            out.push((format!("{k}.ids"), side));
        }
    }
    Ok(out)
}

fn missing(p: &Path) -> CliError {
    dti_core::Error::io(
        p,
        std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
    )
    .into()
}

fn network_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| dti_core::Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(
            dti_core::Error::Input(format!("no .tsv networks in {}", dir.display())).into(),
        );
    }
    Ok(files)
}

fn unix_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn output_dir(command: Command, cfg: &RunConfig, s: &Settings) -> CliResult<PathBuf> {
    let dir = match cfg.path("output.dir") {
        Some(d) => d,
        None => {
            let root = std::env::var_os(OUTPUT_ROOT_ENV)
                .map_or_else(|| PathBuf::from("runs"), PathBuf::from);
            let seeds: Vec<String> = s.seeds.iter().map(u64::to_string).collect();
            let stem = if command.multi_seed() {
                format!("{command}_seeds{}_{}", seeds.join("-"), unix_secs())
            } else {
                format!("{command}_seed{}_{}", seeds[0], unix_secs())
            };
            let mut dir = root.join(&stem);
            let mut n = 1;
            while dir.exists() {
                n += 1;
                dir = root.join(format!("{stem}_{n}"));
            }
            dir
        }
    };
    fs::create_dir_all(&dir).map_err(|e| dti_core::Error::io(&dir, e))?;
    Ok(dir)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    bytes: u64,
    sha256: String,
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| dti_core::Error::io(path, e).into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    write_text(path, &s)
}

fn write_snapshot(out: &Path, cfg: &RunConfig, inputs: &[(String, PathBuf)]) -> CliResult<()> {
    write_text(&out.join("config.txt"), &cfg.snapshot())?;
    let mut records = BTreeMap::new();
    for (k, p) in inputs {
        let bytes = fs::read(p).map_err(|e| dti_core::Error::io(p, e))?;
        records.insert(
            k.clone(),
            InputRecord {
                path: p.display().to_string(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(&bytes),
            },
        );
    }
    write_json(&out.join("inputs.json"), &records)
}

fn load_networks(dir: &Path) -> CliResult<Vec<AssociationNetwork>> {
    network_files(dir)?
        .iter()
        .map(|f| Ok(load_network(f, peek_network_kind(f)?)?))
        .collect()
}

fn load_topology(
    cfg: &RunConfig,
    s: &Settings,
) -> CliResult<(TopologyEmbedding, TopologyEmbedding)> {
    if let Some(dir) = cfg.path("networks.dir") {
        if cfg.path("topo.drug").is_none() {
            let (d, p) = build_topology_embeddings(&load_networks(&dir)?, &s.features)?;
            for w in d.warnings.iter().chain(&p.warnings) {
                eprintln!("warning: {w}");
            }
            return Ok((d, p));
        }
    }
    let load = |key: &str, side: Side| -> CliResult<TopologyEmbedding> {
        let e = load_text_embeddings(&cfg.require_path(key)?, side)?;
        Ok(TopologyEmbedding {
            side,
            entity_ids: e.entity_ids,
            embedding: e.embedding,
            warnings: Vec::new(),
        })
    };
    Ok((
        load("topo.drug", Side::Drug)?,
        load("topo.protein", Side::Protein)?,
    ))
}

fn load_protocol_data(cfg: &RunConfig, s: &Settings) -> CliResult<ProtocolData> {
    let (drug_topo, prot_topo) = load_topology(cfg, s)?;
    let text = |key: &str, side: Side| -> CliResult<TextEmbedding> {
        Ok(load_text_embeddings(&cfg.require_path(key)?, side)?)
    };
    let drug_text = text("text.drug", Side::Drug)?;
    let prot_text = text("text.protein", Side::Protein)?;
    let alt = match (cfg.path("text.alt_drug"), cfg.path("text.alt_protein")) {
        (Some(_), Some(_)) => Some((
            text("text.alt_drug", Side::Drug)?,
            text("text.alt_protein", Side::Protein)?,
        )),
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "set both `text.alt_drug` and `text.alt_protein`, or neither".into(),
            ))
        }
    };
    let features = FeatureSet::assemble(
        &drug_topo,
        &prot_topo,
        &drug_text,
        &prot_text,
        alt.as_ref().map(|(d, p)| (d, p)),
        s.standardize,
    )?;
    let ds = load_dataset(&cfg.require_path("data.interactions")?)?;
    Ok(ProtocolData::from_dataset(features, ds))
}

fn cmd_synth(out: &Path, cfg: &RunConfig) -> CliResult<()> {
    let sc = SyntheticConfig {
        n_drugs: cfg.get("synth.n_drugs")?,
        n_proteins: cfg.get("synth.n_proteins")?,
        text_clusters: cfg.get("synth.text_clusters")?,
        struct_clusters: cfg.get("synth.struct_clusters")?,
        text_dim: cfg.get("synth.text_dim")?,
        text_noise: cfg.get("synth.text_noise")?,
        terms_per_cluster: cfg.get("synth.terms_per_cluster")?,
        p_in: cfg.get("synth.p_in")?,
        p_out: cfg.get("synth.p_out")?,
        sim_p_in: cfg.get("synth.sim_p_in")?,
        sim_p_out: cfg.get("synth.sim_p_out")?,
        seed: cfg.get("synth.seed")?,
    };
    let bench = generate_benchmark(&sc)?;
    bench.write_dir(out)?;
    let dim = dti_core::synthetic::FIXTURE_TOPOLOGY_DIM;
    write_text(
        &out.join("run.conf"),
        &format!(
            "networks.dir = networks\n\
             text.drug = text/drug.tsv\n\
             text.protein = text/protein.tsv\n\
             text.alt_drug = text/drug_noise.tsv\n\
             text.alt_protein = text/protein_noise.tsv\n\
             data.interactions = positives.tsv\n\
             dca.dim.drug = {dim}\n\
             dca.dim.protein = {dim}\n"
        ),
    )
}

#[derive(Serialize)]
struct FeatureProvenance<'a> {
    features: &'a FeatureConfig,
    networks: Vec<NetworkRecord>,
    drug: EmbeddingRecord,
    protein: EmbeddingRecord,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct NetworkRecord {
    kind: String,
    file: String,
    rows: usize,
    cols: usize,
    edges: usize,
    sha256: String,
}

#[derive(Serialize)]
struct EmbeddingRecord {
    file: String,
    rows: usize,
    dim: usize,
}

fn cmd_features(out: &Path, cfg: &RunConfig, s: &Settings) -> CliResult<()> {
    let dir = cfg.require_path("networks.dir")?;
    let mut networks = Vec::new();
    let mut records = Vec::new();
    for f in network_files(&dir)? {
        let net = load_network(&f, peek_network_kind(&f)?)?;
        let bytes = fs::read(&f).map_err(|e| dti_core::Error::io(&f, e))?;
        records.push(NetworkRecord {
            kind: net.kind.to_string(),
            file: f
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
            rows: net.row_ids.len(),
            cols: net.col_ids.len(),
            edges: net.edge_count(),
            sha256: sha256_hex(&bytes),
        });
        networks.push(net);
    }
    let (drug, protein) = build_topology_embeddings(&networks, &s.features)?;
    let record = |e: &TopologyEmbedding, file: &str| -> CliResult<EmbeddingRecord> {
        write_emb1(&out.join(file), Some(&e.entity_ids), &e.embedding)?;
        Ok(EmbeddingRecord {
            file: file.to_owned(),
            rows: e.embedding.rows(),
            dim: e.embedding.cols(),
        })
    };
    let prov = FeatureProvenance {
        features: &s.features,
        networks: records,
        drug: record(&drug, "drug_topology.emb1")?,
        protein: record(&protein, "protein_topology.emb1")?,
        warnings: drug
            .warnings
            .iter()
            .chain(&protein.warnings)
            .cloned()
            .collect(),
    };
    write_json(&out.join("provenance.json"), &prov)
}

fn write_run(dir: &Path, run: &SeedRun) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| dti_core::Error::io(dir, e))?;
    write_text(&dir.join("metrics.json"), &(run.report.to_json() + "\n"))?;
    write_text(&dir.join("history.jsonl"), &run.history.to_jsonl())?;
    save_checkpoint(&dir.join("model.ckpt"), &run.params)?;
    save_checkpoint(&dir.join("last.ckpt"), &run.last_params)?;
    Ok(())
}

fn log_run(run: &SeedRun) {
    let fmt = |v: Option<f64>| v.map_or("undefined".to_owned(), |v| format!("{v:.4}"));
    eprintln!(
        "{} seed {}: auroc {} aupr {} f1 {:.4}",
        run.group,
        run.seed,
        fmt(run.report.auroc),
        fmt(run.report.aupr),
        run.report.f1
    );
}

fn dir_name(group: &str) -> String {
    group
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Serialize)]
struct Summary {
    seeds: Vec<u64>,
    groups: Vec<GroupSummary>,
    welch: BTreeMap<String, Vec<PairwiseTest>>,
}

/// Per-run files under `runs/<group>/seed<k>/` plus `summary.json`.
fn write_protocol(out: &Path, runs: &[SeedRun], seeds: &[u64]) -> CliResult<()> {
    for r in runs {
        write_run(
            &out.join("runs")
                .join(dir_name(&r.group))
                .join(format!("seed{}", r.seed)),
            r,
        )?;
    }
    let summary = Summary {
        seeds: seeds.to_vec(),
        groups: summarize(runs),
        welch: METRIC_NAMES
            .iter()
            .map(|&m| (m.to_owned(), welch_matrix(runs, m)))
            .collect(),
    };
    write_json(&out.join("summary.json"), &summary)
}

fn cmd_train(out: &Path, data: &ProtocolData, s: &Settings) -> CliResult<()> {
    let ds = data.benchmark_dataset(s.neg_ratio, s.train.seed, s.fractions)?;
    write_dataset(&out.join("dataset.tsv"), &ds)?;
    let run = run_once(s.train.variant.as_str(), &ds, &data.features, &s.train)?;
    log_run(&run);
    write_run(out, &run)
}

fn cmd_evaluate(out: &Path, cfg: &RunConfig, data: &ProtocolData, s: &Settings) -> CliResult<()> {
    let params = load_checkpoint(&cfg.require_path("model.checkpoint")?)?;
    let ds = data.benchmark_dataset(s.neg_ratio, s.train.seed, s.fractions)?;
    let split: Split = cfg.get("evaluate.split")?;
    let dump: bool = cfg.get("evaluate.dump_representations")?;
    let eval = evaluate(&params, &ds, split, &data.features, s.train.variant, dump)?;
    write_text(&out.join("metrics.json"), &(eval.report.to_json() + "\n"))?;
    if dump {
        write_representations(&out.join("representations.emb1"), &ds, &eval)?;
    }
    Ok(())
}

fn cmd_ablate(out: &Path, cfg: &RunConfig, data: &ProtocolData, s: &Settings) -> CliResult<()> {
    let variants: Vec<Variant> = cfg.list("ablate.variants")?;
    if variants.is_empty() {
        return Err(CliError::Config("`ablate.variants` is empty".into()));
    }
    let runs = run_ablation(data, &s.train, &variants, &s.seeds)?;
    runs.iter().for_each(log_run);
    write_protocol(out, &runs, &s.seeds)
}

fn cmd_coldstart(out: &Path, cfg: &RunConfig, data: &ProtocolData, s: &Settings) -> CliResult<()> {
    let side: Side = cfg.get("coldstart.side")?;
    let fractions: Vec<f64> = cfg.list("coldstart.fractions")?;
    if fractions.is_empty() {
        return Err(CliError::Config("`coldstart.fractions` is empty".into()));
    }
    let runs = run_coldstart(data, &s.train, side, &fractions, &s.seeds)?;
    runs.iter().for_each(log_run);
    write_protocol(out, &runs, &s.seeds)?;
    let mut table = String::from("fraction\tauroc_mean\tauroc_std\taupr_mean\taupr_std\n");
    for summary in summarize(&runs) {
        let f = fractions
            .iter()
            .find(|&&f| coldstart_group(side, f) == summary.group)
            .copied()
            .unwrap_or(f64::NAN);
        let cell = |m: &str| {
            summary.metrics.get(m).map_or("NA\tNA".to_owned(), |v| {
                format!("{:.6}\t{:.6}", v.mean, v.std)
            })
        };
        table.push_str(&format!("{f}\t{}\t{}\n", cell("auroc"), cell("aupr")));
    }
    write_text(&out.join("coldstart.tsv"), &table)
}

fn cmd_casestudy(out: &Path, cfg: &RunConfig, data: &ProtocolData, s: &Settings) -> CliResult<()> {
    let holdout: Vec<String> = cfg.list("casestudy.holdout")?;
    let stream = seeded_stream(s.train.seed);
    let ds = data.labeled_dataset(s.neg_ratio, &stream)?;
    let (train_ds, eval_ds) = case_study_split(&ds, &holdout, &mut stream.fork("casestudy"))?;
    let mut outcome = train(&train_ds, &data.features, &s.train)?;
    let eval = evaluate(
        &outcome.params,
        &eval_ds,
        Split::Test,
        &data.features,
        s.train.variant,
        false,
    )?;
    outcome.history.test = Some(eval.report.clone());
    let run = SeedRun {
        group: s.train.variant.as_str().to_owned(),
        seed: s.train.seed,
        report: eval.report.clone(),
        history: outcome.history,
        params: outcome.params,
        last_params: outcome.last_params,
    };
    log_run(&run);
    write_run(out, &run)?;
    let rows = case_study_report(&eval_ds, &eval.rows, &eval.scores, DEFAULT_THRESHOLD)?;
    write_case_study(&out.join("case_study.tsv"), &rows)?;
    Ok(())
}

/// One axis of a sweep grid.
enum Axis {
    NegRatio(Vec<usize>),
    Loss(Vec<LossName>),
    BatchSize(Vec<usize>),
    Lr(Vec<f64>),
    HiddenDim(Vec<usize>),
}

impl Axis {
    fn len(&self) -> usize {
        match self {
            Axis::NegRatio(v) | Axis::BatchSize(v) | Axis::HiddenDim(v) => v.len(),
            Axis::Loss(v) => v.len(),
            Axis::Lr(v) => v.len(),
        }
    }

    /// Applies value `i` and returns its `name=value` label.
    fn apply(&self, i: usize, ratio: &mut usize, c: &mut TrainConfig) -> String {
        match self {
            Axis::NegRatio(v) => {
                *ratio = v[i];
                format!("neg_ratio={}", v[i])
            }
            Axis::Loss(v) => {
                c.loss = v[i];
                format!(
                    "loss={}",
                    if v[i] == LossName::Focal {
                        "focal"
                    } else {
                        "bce"
                    }
                )
            }
            Axis::BatchSize(v) => {
                c.batch_size = v[i];
                format!("batch_size={}", v[i])
            }
            Axis::Lr(v) => {
                c.lr = v[i];
                format!("lr={}", v[i])
            }
            Axis::HiddenDim(v) => {
                c.hidden_dim = v[i];
                format!("hidden_dim={}", v[i])
            }
        }
    }
}

fn cmd_sweep(out: &Path, cfg: &RunConfig, data: &ProtocolData, s: &Settings) -> CliResult<()> {
    let axes: Vec<Axis> = [
        Axis::NegRatio(cfg.list("sweep.neg_ratio")?),
        Axis::Loss(cfg.list("sweep.loss")?),
        Axis::BatchSize(cfg.list("sweep.batch_size")?),
        Axis::Lr(cfg.list("sweep.lr")?),
        Axis::HiddenDim(cfg.list("sweep.hidden_dim")?),
    ]
    .into_iter()
    .filter(|a| a.len() > 0)
    .collect();
    if axes.is_empty() {
        return Err(CliError::Config(
            "sweep needs at least one non-empty `sweep.*` grid".into(),
        ));
    }
    if data.labeled.is_some() && matches!(axes[0], Axis::NegRatio(_)) {
        return Err(CliError::Config(
            "`sweep.neg_ratio` needs a positives-only interaction file".into(),
        ));
    }
    let total: usize = axes.iter().map(Axis::len).product();
    let mut runs = Vec::new();
    for combo in 0..total {
        let mut ratio = s.neg_ratio;
        let mut c = s.train.clone();
        let mut rest = combo;
        let mut labels = Vec::new();
        for a in axes.iter().rev() {
            labels.push(a.apply(rest % a.len(), &mut ratio, &mut c));
            rest /= a.len();
        }
        labels.reverse();
        c.validate()?;
        let group = labels.join(",");
        for &seed in &s.seeds {
            let ds = data.benchmark_dataset(ratio, seed, s.fractions)?;
            let run = run_once(
                &group,
                &ds,
                &data.features,
                &TrainConfig { seed, ..c.clone() },
            )?;
            log_run(&run);
            runs.push(run);
        }
    }
    write_protocol(out, &runs, &s.seeds)
}

/// Mean of `metric` per group, in group order.
pub fn group_means(runs: &[SeedRun], metric: &str) -> Vec<(String, f64)> {
    summarize(runs)
        .into_iter()
        .map(|g| {
            let v = metric_values(runs, &g.group, metric);
            (g.group, v.iter().sum::<f64>() / v.len().max(1) as f64)
        })
        .collect()
}
