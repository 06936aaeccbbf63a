//! Multi-seed experiment runners. Every run derives its negatives, splits
//! and initialisation from its seed alone, so runs can be reordered freely
//! and results are reported in seed order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{evaluate, welch_ttest, MetricsReport, METRIC_NAMES};
use crate::data_io::{make_splits, sample_negatives, InteractionDataset, Split};
use crate::entity::Side;
use crate::error::{Error, Result};
use crate::evaluation::cold_start_split;
use crate::fusion_net::ModelParams;
use crate::numkit::{seeded_stream, RandomStream};
use crate::training::{train, FeatureSet, LossName, RunHistory, TrainConfig, Variant};

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.7, 0.1, 0.2);

/// Known positives plus the feature set they are scored with. When
/// `labeled` is set its pairs (and splits, if complete) are used instead of
/// sampling negatives.
#[derive(Clone, Debug)]
pub struct ProtocolData {
    pub features: FeatureSet,
    pub positives: Vec<(String, String)>,
    pub labeled: Option<InteractionDataset>,
}

impl ProtocolData {
    pub fn from_positives(features: FeatureSet, positives: Vec<(String, String)>) -> Self {
        ProtocolData {
            features,
            positives,
            labeled: None,
        }
    }

    /// Uses `ds` as-is when it holds negatives, otherwise only its positives.
    pub fn from_dataset(features: FeatureSet, ds: InteractionDataset) -> Self {
        let positives = ds.positives();
        let labeled = ds.pairs.iter().any(|p| p.label == 0).then_some(ds);
        ProtocolData {
            features,
            positives,
            labeled,
        }
    }

    /// The labeled dataset, or positives plus `ratio`× sampled negatives.
    pub fn labeled_dataset(
        &self,
        ratio: usize,
        stream: &RandomStream,
    ) -> Result<InteractionDataset> {
        if let Some(ds) = &self.labeled {
            return Ok(ds.clone());
        }
        sample_negatives(
            &self.positives,
            ratio,
            &mut stream.fork("negatives"),
            (self.features.drugs.ids(), self.features.proteins.ids()),
        )
    }

    /// Positives plus `ratio`× sampled negatives, split stratified. A
    /// labeled dataset keeps its own pairs and, when every pair has one,
    /// its own split column.
    pub fn benchmark_dataset(
        &self,
        ratio: usize,
        seed: u64,
        fractions: (f64, f64, f64),
    ) -> Result<InteractionDataset> {
        let stream = seeded_stream(seed);
        let ds = self.labeled_dataset(ratio, &stream)?;
        if ds.split.iter().all(Option::is_some) {
            return Ok(ds);
        }
        make_splits(&ds, fractions, &mut stream.fork("splits"))
    }

    pub fn coldstart_dataset(
        &self,
        side: Side,
        visible_fraction: f64,
        seed: u64,
    ) -> Result<InteractionDataset> {
        let stream = seeded_stream(seed);
        let ds = self.labeled_dataset(1, &stream)?;
        cold_start_split(&ds, side, visible_fraction, &mut stream.fork("coldstart"))
    }
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub group: String,
    pub seed: u64,
    pub report: MetricsReport,
    pub history: RunHistory,
    /// Parameters selected by validation AUROC.
    pub params: ModelParams,
    pub last_params: ModelParams,
}

/// Trains on `ds` with `cfg` and reports on its test split.
pub fn run_once(
    group: &str,
    ds: &InteractionDataset,
    features: &FeatureSet,
    cfg: &TrainConfig,
) -> Result<SeedRun> {
    let mut out = train(ds, features, cfg)?;
    let eval = evaluate(&out.params, ds, Split::Test, features, cfg.variant, false)?;
    out.history.test = Some(eval.report.clone());
    Ok(SeedRun {
        group: group.to_owned(),
        seed: cfg.seed,
        report: eval.report,
        history: out.history,
        params: out.params,
        last_params: out.last_params,
    })
}

fn seeded(cfg: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..cfg.clone()
    }
}

pub fn run_benchmark(
    data: &ProtocolData,
    cfg: &TrainConfig,
    ratio: usize,
    seeds: &[u64],
) -> Result<Vec<SeedRun>> {
    seeds
        .iter()
        .map(|&s| {
            let ds = data.benchmark_dataset(ratio, s, DEFAULT_FRACTIONS)?;
            run_once(cfg.variant.as_str(), &ds, &data.features, &seeded(cfg, s))
        })
        .collect()
}

/// Every variant on the same per-seed datasets.
pub fn run_ablation(
    data: &ProtocolData,
    cfg: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<Vec<SeedRun>> {
    let mut runs = Vec::new();
    for &s in seeds {
        let ds = data.benchmark_dataset(1, s, DEFAULT_FRACTIONS)?;
        for &v in variants {
            let c = TrainConfig {
                variant: v,
                ..seeded(cfg, s)
            };
            runs.push(run_once(v.as_str(), &ds, &data.features, &c)?);
        }
    }
    Ok(runs)
}

pub fn imbalance_group(ratio: usize, loss: LossName) -> String {
    format!(
        "ratio={ratio},loss={}",
        match loss {
            LossName::Bce => "bce",
            LossName::Focal => "focal",
        }
    )
}

/// Negative ratios crossed with losses; each ratio's dataset is shared by
/// the losses.
pub fn run_imbalance(
    data: &ProtocolData,
    cfg: &TrainConfig,
    ratios: &[usize],
    losses: &[LossName],
    seeds: &[u64],
) -> Result<Vec<SeedRun>> {
    let mut runs = Vec::new();
    for &ratio in ratios {
        for &s in seeds {
            let ds = data.benchmark_dataset(ratio, s, DEFAULT_FRACTIONS)?;
            for &loss in losses {
                let c = TrainConfig {
                    loss,
                    ..seeded(cfg, s)
                };
                runs.push(run_once(
                    &imbalance_group(ratio, loss),
                    &ds,
                    &data.features,
                    &c,
                )?);
            }
        }
    }
    Ok(runs)
}

pub fn coldstart_group(side: Side, fraction: f64) -> String {
    format!("{side}@{fraction}")
}

pub fn run_coldstart(
    data: &ProtocolData,
    cfg: &TrainConfig,
    side: Side,
    fractions: &[f64],
    seeds: &[u64],
) -> Result<Vec<SeedRun>> {
    let mut runs = Vec::new();
    for &f in fractions {
        for &s in seeds {
            let ds = data.coldstart_dataset(side, f, s)?;
            runs.push(run_once(
                &coldstart_group(side, f),
                &ds,
                &data.features,
                &seeded(cfg, s),
            )?);
        }
    }
    Ok(runs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub seeds: Vec<u64>,
    pub metrics: BTreeMap<String, MeanStd>,
}

fn mean_std(v: &[f64]) -> MeanStd {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std, n }
}

/// Groups in first-appearance order.
fn groups(runs: &[SeedRun]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in runs {
        if !out.contains(&r.group) {
            out.push(r.group.clone());
        }
    }
    out
}

pub fn metric_values(runs: &[SeedRun], group: &str, metric: &str) -> Vec<f64> {
    runs.iter()
        .filter(|r| r.group == group)
        .filter_map(|r| r.report.get(metric))
        .collect()
}

/// Mean and sample standard deviation of every metric per group.
pub fn summarize(runs: &[SeedRun]) -> Vec<GroupSummary> {
    groups(runs)
        .into_iter()
        .map(|g| {
            let metrics = METRIC_NAMES
                .iter()
                .filter_map(|&m| {
                    let v = metric_values(runs, &g, m);
                    (!v.is_empty()).then(|| (m.to_owned(), mean_std(&v)))
                })
                .collect();
            GroupSummary {
                seeds: runs
                    .iter()
                    .filter(|r| r.group == g)
                    .map(|r| r.seed)
                    .collect(),
                group: g,
                metrics,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: String,
    pub b: String,
    pub metric: String,
    pub t: Option<f64>,
    pub p: Option<f64>,
}

/// Welch t-test of `metric` between every pair of groups. Pairs whose
/// samples are degenerate get `None`.
pub fn welch_matrix(runs: &[SeedRun], metric: &str) -> Vec<PairwiseTest> {
    let gs = groups(runs);
    let mut out = Vec::new();
    for (i, a) in gs.iter().enumerate() {
        for b in &gs[i + 1..] {
            let res = welch_ttest(
                &metric_values(runs, a, metric),
                &metric_values(runs, b, metric),
            );
            let (t, p) = match res {
                Ok((t, p)) => (Some(t), Some(p)),
                Err(_) => (None, None),
            };
            out.push(PairwiseTest {
                a: a.clone(),
                b: b.clone(),
                metric: metric.to_owned(),
                t,
                p,
            });
        }
    }
    out
}

/// Spearman rank correlation (mid-ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Input(
            "spearman needs two equal-length samples of size >= 2".into(),
        ));
    }
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for &k in &idx[i..=j] {
                r[k] = (i + j) as f64 / 2.0 + 1.0;
            }
            i = j + 1;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (m(&rx), m(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedMetric(
            "spearman of a constant sample".into(),
        ));
    }
    Ok(cov / (vx * vy).sqrt())
}
