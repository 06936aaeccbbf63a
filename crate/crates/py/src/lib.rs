//! Python bindings: synthetic or file-backed experiments, trained models,
//! metrics, losses and graph diffusion.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dti_core::data_io::{load_dataset, load_network, load_text_embeddings, peek_network_kind};
use dti_core::evaluation::protocol::{ProtocolData, DEFAULT_FRACTIONS};
use dti_core::evaluation::{self as eval, evaluate, MetricsReport, DEFAULT_THRESHOLD};
use dti_core::fusion_net::{
    self as net, load_checkpoint, save_checkpoint, ModelParams, TENSOR_NAMES,
};
use dti_core::graph_features::{
    build_topology_embeddings, jaccard_similarity as jaccard, AssociationNetwork, FeatureConfig,
    NetworkKind, RwrConfig,
};
use dti_core::numkit::Matrix;
use dti_core::synthetic::{generate_benchmark, SyntheticBenchmark, SyntheticConfig};
use dti_core::training::{
    make_variant, score_pairs, train, FeatureSet, LossName, TrainConfig, Variant,
};
use dti_core::{Error, Side};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Parameter(_) | Error::Input(_) | Error::Parse { .. } | Error::Shape { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for dti_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).py()
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(<[f64]>::to_vec).collect()
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for name in eval::METRIC_NAMES {
        d.set_item(name, r.get(name))?;
    }
    d.set_item("threshold", r.threshold)?;
    d.set_item("n_pos", r.n_pos)?;
    d.set_item("n_neg", r.n_neg)?;
    Ok(d)
}

/// Features plus known interactions, ready for training.
#[pyclass(module = "dti")]
struct Experiment {
    data: ProtocolData,
}

#[pymethods]
impl Experiment {
    /// Planted-cluster benchmark (100 drugs × 150 proteins by default).
    #[staticmethod]
    #[pyo3(signature = (seed=2024, text_noise=0.5, topology_dim=24))]
    fn synthetic(seed: u64, text_noise: f64, topology_dim: usize) -> PyResult<Self> {
        let bench = generate_benchmark(&SyntheticConfig {
            seed,
            text_noise,
            ..SyntheticConfig::default()
        })
        .py()?;
        let fc = FeatureConfig {
            drug_dim: topology_dim,
            protein_dim: topology_dim,
            ..SyntheticBenchmark::feature_config()
        };
        Ok(Experiment {
            data: bench.protocol_data(&fc).py()?,
        })
    }

    /// Loads every `*.tsv` network in `networks_dir`, the two text
    /// embedding files and an interaction file.
    #[staticmethod]
    #[pyo3(signature = (networks_dir, text_drug, text_protein, interactions, drug_dim=100, protein_dim=100, restart=0.5, standardize=true))]
    #[allow(clippy::too_many_arguments)]
    fn from_files(
        networks_dir: PathBuf,
        text_drug: PathBuf,
        text_protein: PathBuf,
        interactions: PathBuf,
        drug_dim: usize,
        protein_dim: usize,
        restart: f64,
        standardize: bool,
    ) -> PyResult<Self> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(&networks_dir)
            .map_err(|e| PyIOError::new_err(format!("{}: {e}", networks_dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
            .collect();
        files.sort();
        let networks = files
            .iter()
            .map(|f| load_network(f, peek_network_kind(f)?))
            .collect::<dti_core::Result<Vec<_>>>()
            .py()?;
        let fc = FeatureConfig {
            rwr: RwrConfig {
                restart,
                ..RwrConfig::default()
            },
            drug_dim,
            protein_dim,
        };
        let (d, p) = build_topology_embeddings(&networks, &fc).py()?;
        let features = FeatureSet::assemble(
            &d,
            &p,
            &load_text_embeddings(&text_drug, Side::Drug).py()?,
            &load_text_embeddings(&text_protein, Side::Protein).py()?,
            None,
            standardize,
        )
        .py()?;
        let ds = load_dataset(&interactions).py()?;
        Ok(Experiment {
            data: ProtocolData::from_dataset(features, ds),
        })
    }

    #[getter]
    fn drug_ids(&self) -> Vec<String> {
        self.data.features.drugs.ids().to_vec()
    }

    #[getter]
    fn protein_ids(&self) -> Vec<String> {
        self.data.features.proteins.ids().to_vec()
    }

    #[getter]
    fn n_positives(&self) -> usize {
        self.data.positives.len()
    }

    /// Trains one model on a seeded split and scores it on the test pairs.
    #[pyo3(signature = (variant="full", seed=0, epochs=100, loss="bce", neg_ratio=1, hidden_dim=128, batch_size=64, lr=1e-3))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &self,
        py: Python<'_>,
        variant: &str,
        seed: u64,
        epochs: usize,
        loss: &str,
        neg_ratio: usize,
        hidden_dim: usize,
        batch_size: usize,
        lr: f64,
    ) -> PyResult<Model> {
        let cfg = TrainConfig {
            variant: variant.parse().py()?,
            loss: loss.parse::<LossName>().py()?,
            seed,
            epochs,
            hidden_dim,
            batch_size,
            lr,
            ..TrainConfig::default()
        };
        let data = &self.data;
        let (params, history, report) = py
            .detach(|| -> dti_core::Result<_> {
                let ds = data.benchmark_dataset(neg_ratio, seed, DEFAULT_FRACTIONS)?;
                let out = train(&ds, &data.features, &cfg)?;
                let e = evaluate(
                    &out.params,
                    &ds,
                    dti_core::data_io::Split::Test,
                    &data.features,
                    cfg.variant,
                    false,
                )?;
                Ok((out.params, out.history, e.report))
            })
            .py()?;
        Ok(Model {
            params,
            features: self.data.features.clone(),
            variant: cfg.variant,
            report: Some(report),
            train_losses: history.train_losses(),
            best_epoch: history.best_epoch,
        })
    }
}

/// Trained parameters bound to the features they were trained on.
#[pyclass(module = "dti")]
struct Model {
    params: ModelParams,
    features: FeatureSet,
    variant: Variant,
    report: Option<MetricsReport>,
    train_losses: Vec<f64>,
    best_epoch: usize,
}

#[pymethods]
impl Model {
    #[staticmethod]
    #[pyo3(signature = (path, experiment, variant="full"))]
    fn load(path: PathBuf, experiment: &Experiment, variant: &str) -> PyResult<Self> {
        Ok(Model {
            params: load_checkpoint(&path).py()?,
            features: experiment.data.features.clone(),
            variant: variant.parse().py()?,
            report: None,
            train_losses: Vec::new(),
            best_epoch: 0,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&path, &self.params).py()
    }

    /// Test-split metrics from training, or `None` for a loaded model.
    #[getter]
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        self.report.as_ref().map(|r| report_dict(py, r)).transpose()
    }

    #[getter]
    fn train_losses(&self) -> Vec<f64> {
        self.train_losses.clone()
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    #[getter]
    fn variant(&self) -> &'static str {
        self.variant.as_str()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.params.parameter_count()
    }

    #[getter]
    fn attention_triples(&self) -> usize {
        self.params.attention_triples()
    }

    #[getter]
    fn gate_triples(&self) -> usize {
        self.params.gate_triples()
    }

    #[staticmethod]
    fn tensor_names() -> Vec<&'static str> {
        TENSOR_NAMES.to_vec()
    }

    fn tensor(&self, name: &str) -> PyResult<Vec<Vec<f64>>> {
        self.params
            .tensor(name)
            .map(to_rows)
            .ok_or_else(|| PyValueError::new_err(format!("no tensor named `{name}`")))
    }

    /// Interaction probabilities for aligned lists of drug and protein ids.
    fn predict(&self, drugs: Vec<String>, proteins: Vec<String>) -> PyResult<Vec<f64>> {
        if drugs.len() != proteins.len() {
            return Err(PyValueError::new_err("drugs and proteins differ in length"));
        }
        let pairs = drugs
            .iter()
            .zip(&proteins)
            .map(|(d, p)| {
                Ok((
                    self.features.drugs.require(d, "drug")?,
                    self.features.proteins.require(p, "protein")?,
                ))
            })
            .collect::<dti_core::Result<Vec<_>>>()
            .py()?;
        let (inputs, arch) = make_variant(self.variant, &self.features).py()?;
        score_pairs(&self.params, &inputs, arch, &pairs).py()
    }
}

#[pyfunction]
fn auroc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    eval::auroc(&scores, &labels).py()
}

#[pyfunction]
fn aupr(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    eval::aupr(&scores, &labels).py()
}

#[pyfunction]
#[pyo3(signature = (scores, labels, threshold=DEFAULT_THRESHOLD))]
fn metrics<'py>(
    py: Python<'py>,
    scores: Vec<f64>,
    labels: Vec<u8>,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, &eval::metrics_report(&scores, &labels, threshold).py()?)
}

/// Two-sided Welch t-test; returns `(t, p)`.
#[pyfunction]
fn welch_ttest(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64)> {
    eval::welch_ttest(&a, &b).py()
}

#[pyfunction]
fn bce_loss(probs: Vec<f64>, labels: Vec<f64>) -> PyResult<f64> {
    net::bce_loss(&probs, &labels).py()
}

#[pyfunction]
#[pyo3(signature = (probs, labels, gamma=2.0, alpha=0.25))]
fn focal_loss(probs: Vec<f64>, labels: Vec<f64>, gamma: f64, alpha: f64) -> PyResult<f64> {
    net::focal_loss(&probs, &labels, gamma, alpha).py()
}

fn square_network(adjacency: Vec<Vec<f64>>) -> PyResult<AssociationNetwork> {
    let m = to_matrix(adjacency)?;
    let ids: Vec<String> = (0..m.rows()).map(|i| format!("n{i}")).collect();
    AssociationNetwork::new(NetworkKind::DrugDrug, ids.clone(), ids, m).py()
}

/// Jaccard similarity between the rows of a symmetric 0/1 adjacency matrix.
#[pyfunction]
fn jaccard_similarity(adjacency: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&jaccard(&square_network(adjacency)?)))
}

/// Random walk with restart over a symmetric 0/1 adjacency matrix. Column
/// `j` of the result is the stationary distribution restarting at node `j`.
#[pyfunction]
#[pyo3(signature = (adjacency, restart=0.5, max_iter=1000, tol=1e-12))]
fn rwr(
    adjacency: Vec<Vec<f64>>,
    restart: f64,
    max_iter: usize,
    tol: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let net = square_network(adjacency)?;
    let states = dti_core::graph_features::rwr(
        &net,
        &RwrConfig {
            restart,
            max_iter,
            tol,
        },
    )
    .py()?;
    Ok(to_rows(&states.states))
}

/// Runs the command-line tool in-process and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    py.detach(|| dti_cli::run(&args))
}

#[pymodule]
fn dti(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Experiment>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(aupr, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(welch_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(bce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(focal_loss, m)?)?;
    m.add_function(wrap_pyfunction!(jaccard_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(rwr, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("TENSOR_NAMES", TENSOR_NAMES.to_vec())?;
    Ok(())
}
