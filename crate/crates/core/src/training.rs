//! AdamW training loop, model variants and run history.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data_io::{InteractionDataset, Split, TextEmbedding};
use crate::entity::{EntityIndex, Side};
use crate::error::{Error, Result};
use crate::evaluation::{metrics_report, MetricsReport, DEFAULT_THRESHOLD};
use crate::fusion_net::{
    backward, forward, init_params, loss_value, Alignment, Architecture, Fusion, Gradients,
    LossKind, ModelDims, ModelInputs, ModelParams, SideInputs,
};
use crate::graph_features::TopologyEmbedding;
use crate::numkit::{memory, seeded_stream, Matrix};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Pairs scored per forward pass outside training.
const SCORING_CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    WoLlmText,
    WoCra,
    WoTsfusion,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::WoLlmText,
        Variant::WoCra,
        Variant::WoTsfusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WoLlmText => "wo_llm_text",
            Variant::WoCra => "wo_cra",
            Variant::WoTsfusion => "wo_tsfusion",
        }
    }

    pub fn architecture(self) -> Architecture {
        match self {
            Variant::WoCra => Architecture {
                alignment: Alignment::SelfOnly,
                fusion: Fusion::Gated,
            },
            Variant::WoTsfusion => Architecture {
                alignment: Alignment::Cross,
                fusion: Fusion::Static(0.5),
            },
            Variant::Full | Variant::WoLlmText => Architecture::default(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown variant `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossName {
    Bce,
    Focal,
}

impl FromStr for LossName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(LossName::Bce),
            "focal" => Ok(LossName::Focal),
            other => Err(Error::Parameter(format!(
                "unknown loss `{other}` (expected bce or focal)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub hidden_dim: usize,
    pub loss: LossName,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    pub seed: u64,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            lr: 1e-3,
            weight_decay: 1e-6,
            hidden_dim: 128,
            loss: LossName::Bce,
            focal_gamma: 2.0,
            focal_alpha: 0.25,
            seed: 0,
            variant: Variant::Full,
        }
    }
}

impl TrainConfig {
    pub fn loss_kind(&self) -> LossKind {
        match self.loss {
            LossName::Bce => LossKind::Bce,
            LossName::Focal => LossKind::Focal {
                gamma: self.focal_gamma,
                alpha: self.focal_alpha,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.hidden_dim == 0 {
            return Err(Error::Parameter(
                "batch_size and hidden_dim must be >= 1".into(),
            ));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite())
            || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite())
        {
            return Err(Error::Parameter(format!(
                "lr ({}) and weight_decay ({}) must be finite and >= 0",
                self.lr, self.weight_decay
            )));
        }
        self.loss_kind().validate()
    }
}

/// First and second moment estimates, one per parameter tensor.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub m: Gradients,
    pub v: Gradients,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(dims: ModelDims) -> Self {
        OptimizerState {
            m: ModelParams::zeros(dims),
            v: ModelParams::zeros(dims),
            step: 0,
        }
    }
}

/// One AdamW update with bias-corrected moments and decoupled decay.
pub fn adamw_step(
    p: &mut ModelParams,
    g: &Gradients,
    state: &mut OptimizerState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if p.dims != g.dims || p.dims != state.m.dims {
        return Err(Error::Contract(format!(
            "optimizer shapes {:?}/{:?} do not match parameters {:?}",
            g.dims, state.m.dims, p.dims
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let tensors = p
        .tensors_mut()
        .into_iter()
        .zip(g.tensors())
        .zip(state.m.tensors_mut().into_iter().zip(state.v.tensors_mut()));
    for (((_, theta), (_, grad)), ((_, m), (_, v))) in tensors {
        let it = theta
            .as_mut_slice()
            .iter_mut()
            .zip(grad.as_slice())
            .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
        for ((th, &gr), (mm, vv)) in it {
            *mm = ADAM_BETA1 * *mm + (1.0 - ADAM_BETA1) * gr;
            *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gr * gr;
            let mhat = *mm / c1;
            let vhat = *vv / c2;
            *th -= lr * (mhat / (vhat.sqrt() + ADAM_EPS) + weight_decay * *th);
        }
    }
    p.bump_generation();
    Ok(())
}

/// Model inputs for both sides, rows aligned with the entity indexes.
#[derive(Clone, Debug)]
pub struct FeatureSet {
    pub drugs: EntityIndex,
    pub proteins: EntityIndex,
    pub inputs: ModelInputs,
    /// Replacement text features used by the `wo_llm_text` variant.
    pub alt_text: Option<(Matrix, Matrix)>,
}

/// Rows of `text` reordered to follow `ids`.
fn align_text(text: &TextEmbedding, ids: &[String]) -> Result<Matrix> {
    let index = EntityIndex::new(text.entity_ids.clone())?;
    let mut rows = Vec::with_capacity(ids.len());
    for id in ids {
        rows.push(index.get(id).ok_or_else(|| {
            Error::Input(format!(
                "{} text embeddings ({}) have no row for `{id}`",
                text.side, text.provenance
            ))
        })?);
    }
    Ok(text.embedding.gather_rows(&rows))
}

/// Centres every column, then rescales the whole matrix to unit mean
/// variance.
pub fn standardize(m: &Matrix) -> Matrix {
    if m.rows() == 0 {
        return m.clone();
    }
    let means = m.col_sums().scale(-1.0 / m.rows() as f64);
    let centred = m.add_row(&means).expect("row width matches");
    let var = centred.as_slice().iter().map(|v| v * v).sum::<f64>() / centred.len() as f64;
    if var > 0.0 {
        centred.scale(1.0 / var.sqrt())
    } else {
        centred
    }
}

impl FeatureSet {
    pub fn assemble(
        drug_topo: &TopologyEmbedding,
        prot_topo: &TopologyEmbedding,
        drug_text: &TextEmbedding,
        prot_text: &TextEmbedding,
        alt_text: Option<(&TextEmbedding, &TextEmbedding)>,
        standardize_inputs: bool,
    ) -> Result<Self> {
        if drug_topo.side != Side::Drug || prot_topo.side != Side::Protein {
            return Err(Error::Contract(
                "topology embeddings passed for the wrong sides".into(),
            ));
        }
        let prep = |m: Matrix| {
            if standardize_inputs {
                standardize(&m)
            } else {
                m
            }
        };
        let inputs = ModelInputs {
            drug: SideInputs {
                structure: prep(drug_topo.embedding.clone()),
                text: prep(align_text(drug_text, &drug_topo.entity_ids)?),
            },
            protein: SideInputs {
                structure: prep(prot_topo.embedding.clone()),
                text: prep(align_text(prot_text, &prot_topo.entity_ids)?),
            },
        };
        let alt_text = match alt_text {
            Some((d, p)) => Some((
                prep(align_text(d, &drug_topo.entity_ids)?),
                prep(align_text(p, &prot_topo.entity_ids)?),
            )),
            None => None,
        };
        if let Some((d, p)) = &alt_text {
            if d.cols() != p.cols() {
                return Err(Error::Input(format!(
                    "alternative text embeddings differ in width ({} vs {})",
                    d.cols(),
                    p.cols()
                )));
            }
        }
        if inputs.drug.text.cols() != inputs.protein.text.cols() {
            return Err(Error::Input(format!(
                "drug and protein text embeddings differ in width ({} vs {})",
                inputs.drug.text.cols(),
                inputs.protein.text.cols()
            )));
        }
        Ok(FeatureSet {
            drugs: EntityIndex::new(drug_topo.entity_ids.clone())?,
            proteins: EntityIndex::new(prot_topo.entity_ids.clone())?,
            inputs,
            alt_text,
        })
    }

    /// Entity-index pairs for the given dataset rows.
    pub fn pair_indices(
        &self,
        ds: &InteractionDataset,
        rows: &[usize],
    ) -> Result<Vec<(usize, usize)>> {
        rows.iter()
            .map(|&i| {
                let p = &ds.pairs[i];
                Ok((
                    self.drugs.require(&p.drug, "drug")?,
                    self.proteins.require(&p.protein, "protein")?,
                ))
            })
            .collect()
    }
}

/// Inputs and architecture for one variant.
pub fn make_variant(
    variant: Variant,
    features: &FeatureSet,
) -> Result<(ModelInputs, Architecture)> {
    let mut inputs = features.inputs.clone();
    if variant == Variant::WoLlmText {
        let (d, p) = features.alt_text.clone().ok_or_else(|| {
            Error::Input("variant wo_llm_text needs alternative text embeddings".into())
        })?;
        inputs.drug.text = d;
        inputs.protein.text = p;
    }
    Ok((inputs, variant.architecture()))
}

pub fn model_dims(inputs: &ModelInputs, hidden: usize) -> ModelDims {
    ModelDims::new(
        inputs.drug.structure.cols(),
        inputs.protein.structure.cols(),
        inputs.drug.text.cols(),
        hidden,
    )
}

/// Interaction probabilities for index pairs, scored in fixed-size chunks.
pub fn score_pairs(
    p: &ModelParams,
    inputs: &ModelInputs,
    arch: Architecture,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(SCORING_CHUNK) {
        out.extend(forward(chunk, inputs, p, arch)?.probs);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid: Option<MetricsReport>,
    pub elapsed_secs: f64,
    pub peak_bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were selected (0 means the initial ones).
    pub best_epoch: usize,
    pub test: Option<MetricsReport>,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum HistoryLine<'a> {
    Config(&'a TrainConfig),
    Epoch(&'a EpochRecord),
    Summary {
        best_epoch: usize,
        test: &'a Option<MetricsReport>,
    },
}

impl RunHistory {
    /// One JSON object per line: a `config` record, one `epoch` record per
    /// completed epoch, then a `summary` record.
    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![serde_json::to_string(&HistoryLine::Config(&self.config))];
        lines.extend(
            self.epochs
                .iter()
                .map(|e| serde_json::to_string(&HistoryLine::Epoch(e))),
        );
        lines.push(serde_json::to_string(&HistoryLine::Summary {
            best_epoch: self.best_epoch,
            test: &self.test,
        }));
        let mut out = lines
            .into_iter()
            .map(|l| l.expect("history serializes"))
            .collect::<Vec<_>>()
            .join("\n");
        out.push('\n');
        out
    }

    pub fn train_losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.train_loss).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation AUROC, or the last
    /// epoch when no validation pairs exist.
    pub params: ModelParams,
    pub last_params: ModelParams,
    pub history: RunHistory,
}

/// Trains on the `train` split, tracking validation AUROC per epoch.
pub fn train(
    ds: &InteractionDataset,
    features: &FeatureSet,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (inputs, arch) = make_variant(cfg.variant, features)?;
    let loss = cfg.loss_kind();
    let stream = seeded_stream(cfg.seed);
    let mut params = init_params(&stream.fork("init"), model_dims(&inputs, cfg.hidden_dim))?;
    let mut order = stream.fork("batches");

    let train_rows = ds.indices(Split::Train);
    if train_rows.is_empty() {
        return Err(Error::Input("dataset has no training pairs".into()));
    }
    let train_pairs = features.pair_indices(ds, &train_rows)?;
    let train_y: Vec<f64> = train_rows
        .iter()
        .map(|&i| f64::from(ds.pairs[i].label))
        .collect();
    let valid_rows = ds.indices(Split::Valid);
    let valid_pairs = features.pair_indices(ds, &valid_rows)?;
    let valid_y: Vec<u8> = valid_rows.iter().map(|&i| ds.pairs[i].label).collect();

    let mut state = OptimizerState::new(params.dims);
    let mut history = RunHistory {
        config: cfg.clone(),
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        test: None,
    };
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        memory::reset_peak();
        let perm = order.permutation(train_pairs.len());
        let mut loss_sum = 0.0;
        for (b, chunk) in perm.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(usize, usize)> = chunk.iter().map(|&i| train_pairs[i]).collect();
            let y: Vec<f64> = chunk.iter().map(|&i| train_y[i]).collect();
            let acts = forward(&batch, &inputs, &params, arch)?;
            let value = loss_value(loss, &acts.probs, &y)?;
            if !value.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss: value,
                });
            }
            let g = backward(&acts, &inputs, &y, &params, loss)?;
            drop(acts);
            adamw_step(&mut params, &g, &mut state, cfg.lr, cfg.weight_decay)?;
            if !params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss: f64::NAN,
                });
            }
            loss_sum += value * chunk.len() as f64;
        }
        let valid = if valid_pairs.is_empty() {
            None
        } else {
            let scores = score_pairs(&params, &inputs, arch, &valid_pairs)?;
            Some(metrics_report(&scores, &valid_y, DEFAULT_THRESHOLD)?)
        };
        if let Some(auc) = valid.as_ref().and_then(|v| v.auroc) {
            if best.as_ref().is_none_or(|(b, _)| auc > *b) {
                best = Some((auc, params.clone()));
                history.best_epoch = epoch;
            }
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_pairs.len() as f64,
            valid,
            elapsed_secs: started.elapsed().as_secs_f64(),
            peak_bytes: memory::peak_bytes(),
        });
    }
    let last_params = params.clone();
    let params = match best {
        Some((_, p)) => p,
        None => {
            history.best_epoch = history.epochs.len();
            params
        }
    };
    Ok(TrainOutcome {
        params,
        last_params,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{make_splits, LabeledPair};
    use crate::numkit::RandomStream;

    #[test]
    fn defaults_match_published_settings() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.hidden_dim), (100, 64, 128));
        assert_eq!((c.lr, c.weight_decay), (1e-3, 1e-6));
    }

    fn scalar_params(theta: f64) -> ModelParams {
        let mut p = ModelParams::zeros(ModelDims::new(1, 1, 1, 1));
        p.attn.wq.set(0, 0, theta);
        p
    }

    #[test]
    fn adamw_first_step_closed_form() {
        let mut p = scalar_params(1.0);
        let mut g = ModelParams::zeros(p.dims);
        g.attn.wq.set(0, 0, 0.5);
        let mut st = OptimizerState::new(p.dims);
        adamw_step(&mut p, &g, &mut st, 1e-3, 0.0).unwrap();
        let expect = 1.0 - 1e-3 * (0.5 / (0.5 + 1e-8));
        assert!((p.attn.wq.get(0, 0) - expect).abs() < 1e-15);
        assert!((p.attn.wq.get(0, 0) - 0.999).abs() < 1e-9);
        assert_eq!(p.generation, 1);
    }

    #[test]
    fn adamw_decay_and_identity_cases() {
        let g = ModelParams::zeros(ModelDims::new(1, 1, 1, 1));
        let mut p = scalar_params(2.0);
        let mut st = OptimizerState::new(p.dims);
        adamw_step(&mut p, &g, &mut st, 1e-3, 0.0).unwrap();
        assert_eq!(p.attn.wq.get(0, 0), 2.0);
        let mut q = scalar_params(2.0);
        let mut st = OptimizerState::new(q.dims);
        adamw_step(&mut q, &g, &mut st, 1e-3, 1e-6).unwrap();
        assert_eq!(q.attn.wq.get(0, 0), 2.0 - 1e-3 * 1e-6 * 2.0);

        let mut rng = seeded_stream(4);
        let dims = ModelDims::new(3, 3, 3, 2);
        let mut p = init_params(&rng.fork("p"), dims).unwrap();
        let before = p.clone();
        let mut g = ModelParams::zeros(dims);
        for (_, m) in g.tensors_mut() {
            m.map_inplace(|_| rng.gaussian());
        }
        let mut st = OptimizerState::new(dims);
        adamw_step(&mut p, &g, &mut st, 0.0, 1e-2).unwrap();
        for ((_, a), (_, b)) in p.tensors().into_iter().zip(before.tensors()) {
            assert_eq!(a, b);
        }
        let mut wrong = OptimizerState::new(ModelDims::new(2, 3, 3, 2));
        assert!(matches!(
            adamw_step(&mut p, &g, &mut wrong, 1e-3, 0.0),
            Err(Error::Contract(_))
        ));
    }

    fn topo(side: Side, ids: &[String], m: Matrix) -> TopologyEmbedding {
        TopologyEmbedding {
            side,
            entity_ids: ids.to_vec(),
            embedding: m,
            warnings: vec![],
        }
    }

    fn text(side: Side, ids: &[String], m: Matrix) -> TextEmbedding {
        TextEmbedding {
            side,
            entity_ids: ids.to_vec(),
            embedding: m,
            provenance: "test".into(),
        }
    }

    /// Drugs and proteins carry one latent sign; a pair interacts when the
    /// signs agree. Structure and text both expose the sign without noise.
    fn separable(seed: u64) -> (InteractionDataset, FeatureSet) {
        let mut rng = RandomStream::new(seed);
        let (nd, np) = (12, 14);
        let dids: Vec<String> = (0..nd).map(|i| format!("d{i}")).collect();
        let pids: Vec<String> = (0..np).map(|i| format!("p{i}")).collect();
        let sign = |i: usize| if i.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mk = |n: usize, d: usize, rng: &mut RandomStream| {
            let load: Vec<f64> = (0..d).map(|_| rng.gaussian()).collect();
            Matrix::from_fn(n, d, |i, j| sign(i) * load[j])
        };
        let (ds_, dt, ps, pt) = (
            mk(nd, 4, &mut rng),
            mk(nd, 5, &mut rng),
            mk(np, 3, &mut rng),
            mk(np, 5, &mut rng),
        );
        let fs = FeatureSet::assemble(
            &topo(Side::Drug, &dids, ds_),
            &topo(Side::Protein, &pids, ps),
            &text(Side::Drug, &dids, dt),
            &text(Side::Protein, &pids, pt),
            None,
            true,
        )
        .unwrap();
        let mut pairs = Vec::new();
        for i in 0..nd {
            for j in 0..np {
                pairs.push(LabeledPair {
                    drug: dids[i].clone(),
                    protein: pids[j].clone(),
                    label: (sign(i) == sign(j)) as u8,
                });
            }
        }
        let ds = InteractionDataset::new(pairs, seed).unwrap();
        let ds = make_splits(&ds, (0.7, 0.1, 0.2), &mut rng.fork("splits")).unwrap();
        (ds, fs)
    }

    fn small_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            hidden_dim: 8,
            batch_size: 16,
            lr: 1e-2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn separable_fixture_is_learned() {
        let (ds, fs) = separable(1);
        let out = train(&ds, &fs, &small_cfg(100)).unwrap();
        let losses = out.history.train_losses();
        assert_eq!(losses.len(), 100);
        assert!(*losses.last().unwrap() < 0.05, "{:?}", &losses[90..]);
        let rises = losses[..10].windows(2).filter(|w| w[1] >= w[0]).count();
        assert!(rises <= 1, "{:?}", &losses[..10]);
        assert!(out.history.epochs.iter().all(|e| e.peak_bytes > 0));
    }

    #[test]
    fn training_is_deterministic() {
        let (ds, fs) = separable(2);
        let a = train(&ds, &fs, &small_cfg(5)).unwrap();
        let b = train(&ds, &fs, &small_cfg(5)).unwrap();
        assert_eq!(a.history.train_losses(), b.history.train_losses());
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn zero_epochs_returns_initial_parameters() {
        let (ds, fs) = separable(3);
        let cfg = small_cfg(0);
        let out = train(&ds, &fs, &cfg).unwrap();
        assert!(out.history.epochs.is_empty());
        let (inputs, _) = make_variant(Variant::Full, &fs).unwrap();
        let init = init_params(
            &seeded_stream(cfg.seed).fork("init"),
            model_dims(&inputs, 8),
        )
        .unwrap();
        assert_eq!(out.params, init);
    }

    #[test]
    fn frozen_gate_is_never_updated() {
        let (ds, fs) = separable(4);
        let cfg = TrainConfig {
            variant: Variant::WoTsfusion,
            ..small_cfg(3)
        };
        let out = train(&ds, &fs, &cfg).unwrap();
        let (inputs, _) = make_variant(Variant::Full, &fs).unwrap();
        let init = init_params(
            &seeded_stream(cfg.seed).fork("init"),
            model_dims(&inputs, 8),
        )
        .unwrap();
        // only decoupled decay touches the gate
        let steps = ds.indices(Split::Train).len().div_ceil(cfg.batch_size) * cfg.epochs;
        let decay = (1.0 - cfg.lr * cfg.weight_decay).powi(steps as i32);
        for name in ["gate.ws", "gate.wt"] {
            let a = out.last_params.tensor(name).unwrap();
            let b = init.tensor(name).unwrap();
            for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                assert!((x - y * decay).abs() <= 1e-12);
            }
        }
        assert!(out.last_params.gate.b.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn variant_requirements() {
        let (_, fs) = separable(5);
        assert!(matches!(
            make_variant(Variant::WoLlmText, &fs),
            Err(Error::Input(_))
        ));
        assert_eq!(
            make_variant(Variant::WoCra, &fs).unwrap().1.alignment,
            Alignment::SelfOnly
        );
        assert_eq!("wo_cra".parse::<Variant>().unwrap(), Variant::WoCra);
    }

    #[test]
    fn history_jsonl_schema() {
        let (ds, fs) = separable(6);
        let out = train(&ds, &fs, &small_cfg(2)).unwrap();
        let text = out.history.to_jsonl();
        let lines: Vec<serde_json::Value> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0]["record"], "config");
        assert_eq!(lines[1]["record"], "epoch");
        assert!(lines[1]["valid"]["auroc"].is_number());
        assert_eq!(lines[3]["record"], "summary");
    }

    #[test]
    fn standardize_centres_and_scales() {
        let m = Matrix::from_rows(&[vec![1.0, 10.0], vec![3.0, 30.0], vec![5.0, 20.0]]).unwrap();
        let s = standardize(&m);
        for c in s.col_sums().as_slice() {
            assert!(c.abs() < 1e-12);
        }
        let var = s.as_slice().iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        assert!((var - 1.0).abs() < 1e-12);
    }
}
