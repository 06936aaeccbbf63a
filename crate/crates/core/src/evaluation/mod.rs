//! Classification metrics, held-out evaluation, cold-start and case-study
//! splits, and multi-seed experiment runners.

mod metrics;
pub mod protocol;
mod splits;

pub use metrics::{
    accuracy, aupr, auroc, confusion, mcc, precision_recall_f1, welch_ttest, ConfusionCounts,
    DEFAULT_THRESHOLD,
};
pub use splits::{
    case_study_report, case_study_split, cold_start_split, write_case_study, CaseStudyRow,
    VALID_SHARE,
};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_io::{write_emb1, InteractionDataset, Split};
use crate::error::{Error, Result};
use crate::fusion_net::{forward, ModelParams};
use crate::numkit::Matrix;
use crate::training::{make_variant, FeatureSet, Variant};

/// Threshold metrics plus the threshold-free areas. `auroc` and `aupr` are
/// `None` when the labels make them undefined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub aupr: Option<f64>,
    pub mcc: f64,
    pub auroc: Option<f64>,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub const METRIC_NAMES: [&str; 7] = ["acc", "f1", "precision", "recall", "aupr", "mcc", "auroc"];

impl MetricsReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "acc" => Some(self.acc),
            "f1" => Some(self.f1),
            "precision" => Some(self.precision),
            "recall" => Some(self.recall),
            "aupr" => self.aupr,
            "mcc" => Some(self.mcc),
            "auroc" => self.auroc,
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn undefined_as_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn metrics_report(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsReport> {
    let c = confusion(scores, labels, threshold)?;
    let (precision, recall, f1) = precision_recall_f1(&c)?;
    Ok(MetricsReport {
        acc: accuracy(&c)?,
        f1,
        precision,
        recall,
        aupr: undefined_as_none(aupr(scores, labels))?,
        mcc: mcc(&c)?,
        auroc: undefined_as_none(auroc(scores, labels))?,
        threshold,
        n_pos: c.tp + c.fn_,
        n_neg: c.tn + c.fp,
    })
}

/// Scores and metrics for one split of a dataset.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub rows: Vec<usize>,
    pub scores: Vec<f64>,
    /// `[fused drug ‖ fused protein]` per evaluated pair, when requested.
    pub representations: Option<Matrix>,
}

pub fn evaluate(
    params: &ModelParams,
    ds: &InteractionDataset,
    split: Split,
    features: &FeatureSet,
    variant: Variant,
    keep_representations: bool,
) -> Result<Evaluation> {
    let rows = ds.indices(split);
    if rows.is_empty() {
        return Err(Error::Input(format!(
            "no pairs in the {} split",
            split.as_str()
        )));
    }
    let (inputs, arch) = make_variant(variant, features)?;
    let pairs = features.pair_indices(ds, &rows)?;
    let mut scores = Vec::with_capacity(pairs.len());
    let mut reps = Vec::new();
    for chunk in pairs.chunks(512) {
        let acts = forward(chunk, &inputs, params, arch)?;
        scores.extend_from_slice(&acts.probs);
        if keep_representations {
            reps.push(acts.concat);
        }
    }
    let labels: Vec<u8> = rows.iter().map(|&i| ds.pairs[i].label).collect();
    let report = metrics_report(&scores, &labels, DEFAULT_THRESHOLD)?;
    let representations = if keep_representations {
        let width = reps[0].cols();
        let data = reps.into_iter().flat_map(Matrix::into_vec).collect();
        Some(Matrix::from_vec(rows.len(), width, data)?)
    } else {
        None
    };
    Ok(Evaluation {
        report,
        rows,
        scores,
        representations,
    })
}

/// Writes fused pair vectors as `EMB1` and a `drug_id  protein_id  label`
/// sidecar at `<path>.labels.tsv`.
pub fn write_representations(
    path: &Path,
    ds: &InteractionDataset,
    eval: &Evaluation,
) -> Result<()> {
    let reps = eval
        .representations
        .as_ref()
        .ok_or_else(|| Error::Contract("evaluation kept no representations".into()))?;
    write_emb1(path, None, reps)?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".labels.tsv");
    let mut text = String::from("drug_id\tprotein_id\tlabel\n");
    for &i in &eval.rows {
        let p = &ds.pairs[i];
        text.push_str(&format!("{}\t{}\t{}\n", p.drug, p.protein, p.label));
    }
    fs::write(&sidecar, text).map_err(|e| Error::io(sidecar, e))
}
