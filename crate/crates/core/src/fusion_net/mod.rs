//! The pair-scoring network: per-modality projections, dual cross-attention
//! with one shared weight triple, a shared sigmoid gate, and a two-layer head.
//!
//! Attention for one side runs over every entity of that side: queries come
//! from the entities present in the batch, keys and values from all of them.
//! An entity's fused representation therefore does not depend on which other
//! pairs share its batch.

mod checkpoint;
mod loss;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use loss::{bce_loss, focal_loss, loss_value, LossKind, PROB_CLIP};

use serde::{Deserialize, Serialize};

use crate::entity::Side;
use crate::error::{Error, Result};
use crate::numkit::{sigmoid, sigmoid_scalar, softmax_rows, Matrix, RandomStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub drug_struct: usize,
    pub prot_struct: usize,
    pub text: usize,
    pub hidden: usize,
}

impl ModelDims {
    pub fn new(drug_struct: usize, prot_struct: usize, text: usize, hidden: usize) -> Self {
        ModelDims {
            drug_struct,
            prot_struct,
            text,
            hidden,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Linear {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: Matrix::zeros(1, fan_out),
        }
    }

    fn glorot(stream: &mut RandomStream, fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: glorot(stream, fan_in, fan_out),
            bias: Matrix::zeros(1, fan_out),
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        x.matmul(&self.weight)?.add_row(&self.bias)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
}

impl AttentionWeights {
    /// Identity of this weight object, for checking that both sides share it.
    pub fn fingerprint(&self) -> usize {
        self as *const Self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateWeights {
    pub ws: Matrix,
    pub wt: Matrix,
    pub b: Matrix,
}

impl GateWeights {
    pub fn fingerprint(&self) -> usize {
        self as *const Self as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionHead {
    pub hidden: Linear,
    pub output: Linear,
}

/// All trainable tensors. `generation` counts optimizer updates and is used
/// to reject activations computed with older parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub proj_drug_struct: Linear,
    pub proj_drug_text: Linear,
    pub proj_prot_struct: Linear,
    pub proj_prot_text: Linear,
    pub attn: AttentionWeights,
    pub gate: GateWeights,
    pub head: PredictionHead,
    pub generation: u64,
}

/// Gradients share the parameter layout.
pub type Gradients = ModelParams;

pub const TENSOR_NAMES: [&str; 18] = [
    "proj.drug_struct.weight",
    "proj.drug_struct.bias",
    "proj.drug_text.weight",
    "proj.drug_text.bias",
    "proj.prot_struct.weight",
    "proj.prot_struct.bias",
    "proj.prot_text.weight",
    "proj.prot_text.bias",
    "attn.wq",
    "attn.wk",
    "attn.wv",
    "gate.ws",
    "gate.wt",
    "gate.b",
    "head.hidden.weight",
    "head.hidden.bias",
    "head.output.weight",
    "head.output.bias",
];

fn glorot(stream: &mut RandomStream, fan_in: usize, fan_out: usize) -> Matrix {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_in, fan_out, |_, _| stream.uniform_range(-bound, bound))
}

pub fn init_params(stream: &RandomStream, dims: ModelDims) -> Result<ModelParams> {
    let ModelDims {
        drug_struct,
        prot_struct,
        text,
        hidden: h,
    } = dims;
    if [drug_struct, prot_struct, text, h].contains(&0) {
        return Err(Error::Parameter(format!(
            "model dims must all be >= 1, got {dims:?}"
        )));
    }
    let s = |tag: &str| stream.fork(tag);
    Ok(ModelParams {
        dims,
        proj_drug_struct: Linear::glorot(&mut s("proj.drug_struct"), drug_struct, h),
        proj_drug_text: Linear::glorot(&mut s("proj.drug_text"), text, h),
        proj_prot_struct: Linear::glorot(&mut s("proj.prot_struct"), prot_struct, h),
        proj_prot_text: Linear::glorot(&mut s("proj.prot_text"), text, h),
        attn: AttentionWeights {
            wq: glorot(&mut s("attn.wq"), h, h),
            wk: glorot(&mut s("attn.wk"), h, h),
            wv: glorot(&mut s("attn.wv"), h, h),
        },
        gate: GateWeights {
            ws: glorot(&mut s("gate.ws"), h, h),
            wt: glorot(&mut s("gate.wt"), h, h),
            b: Matrix::zeros(1, h),
        },
        head: PredictionHead {
            hidden: Linear::glorot(&mut s("head.hidden"), 2 * h, h),
            output: Linear::glorot(&mut s("head.output"), h, 1),
        },
        generation: 0,
    })
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let h = dims.hidden;
        ModelParams {
            dims,
            proj_drug_struct: Linear::zeros(dims.drug_struct, h),
            proj_drug_text: Linear::zeros(dims.text, h),
            proj_prot_struct: Linear::zeros(dims.prot_struct, h),
            proj_prot_text: Linear::zeros(dims.text, h),
            attn: AttentionWeights {
                wq: Matrix::zeros(h, h),
                wk: Matrix::zeros(h, h),
                wv: Matrix::zeros(h, h),
            },
            gate: GateWeights {
                ws: Matrix::zeros(h, h),
                wt: Matrix::zeros(h, h),
                b: Matrix::zeros(1, h),
            },
            head: PredictionHead {
                hidden: Linear::zeros(2 * h, h),
                output: Linear::zeros(h, 1),
            },
            generation: 0,
        }
    }

    /// Every tensor with its name, in `TENSOR_NAMES` order.
    pub fn tensors(&self) -> [(&'static str, &Matrix); 18] {
        let n = TENSOR_NAMES;
        [
            (n[0], &self.proj_drug_struct.weight),
            (n[1], &self.proj_drug_struct.bias),
            (n[2], &self.proj_drug_text.weight),
            (n[3], &self.proj_drug_text.bias),
            (n[4], &self.proj_prot_struct.weight),
            (n[5], &self.proj_prot_struct.bias),
            (n[6], &self.proj_prot_text.weight),
            (n[7], &self.proj_prot_text.bias),
            (n[8], &self.attn.wq),
            (n[9], &self.attn.wk),
            (n[10], &self.attn.wv),
            (n[11], &self.gate.ws),
            (n[12], &self.gate.wt),
            (n[13], &self.gate.b),
            (n[14], &self.head.hidden.weight),
            (n[15], &self.head.hidden.bias),
            (n[16], &self.head.output.weight),
            (n[17], &self.head.output.bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Matrix); 18] {
        let n = TENSOR_NAMES;
        [
            (n[0], &mut self.proj_drug_struct.weight),
            (n[1], &mut self.proj_drug_struct.bias),
            (n[2], &mut self.proj_drug_text.weight),
            (n[3], &mut self.proj_drug_text.bias),
            (n[4], &mut self.proj_prot_struct.weight),
            (n[5], &mut self.proj_prot_struct.bias),
            (n[6], &mut self.proj_prot_text.weight),
            (n[7], &mut self.proj_prot_text.bias),
            (n[8], &mut self.attn.wq),
            (n[9], &mut self.attn.wk),
            (n[10], &mut self.attn.wv),
            (n[11], &mut self.gate.ws),
            (n[12], &mut self.gate.wt),
            (n[13], &mut self.gate.b),
            (n[14], &mut self.head.hidden.weight),
            (n[15], &mut self.head.hidden.bias),
            (n[16], &mut self.head.output.weight),
            (n[17], &mut self.head.output.bias),
        ]
    }

    pub fn tensor(&self, name: &str) -> Option<&Matrix> {
        self.tensors()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| m)
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.tensors_mut()
            .into_iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| m)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    /// Number of distinct attention weight triples (always one).
    pub fn attention_triples(&self) -> usize {
        self.tensors()
            .iter()
            .filter(|(n, _)| n.starts_with("attn.wq"))
            .count()
    }

    /// Number of distinct gate triples (always one).
    pub fn gate_triples(&self) -> usize {
        self.tensors()
            .iter()
            .filter(|(n, _)| n.starts_with("gate.ws"))
            .count()
    }

    /// Marks the parameters as updated; activations from earlier passes
    /// become stale.
    pub fn bump_generation(&mut self) {
        self.generation += 1;
    }

    pub fn add_assign(&mut self, other: &ModelParams) -> Result<()> {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    fn side_projections(&self, side: Side) -> (&Linear, &Linear) {
        match side {
            Side::Drug => (&self.proj_drug_struct, &self.proj_drug_text),
            Side::Protein => (&self.proj_prot_struct, &self.proj_prot_text),
        }
    }

    fn side_projections_mut(&mut self, side: Side) -> (&mut Linear, &mut Linear) {
        match side {
            Side::Drug => (&mut self.proj_drug_struct, &mut self.proj_drug_text),
            Side::Protein => (&mut self.proj_prot_struct, &mut self.proj_prot_text),
        }
    }
}

/// How the two modality streams of one side are aligned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Each modality queries the other.
    Cross,
    /// Each modality attends only over itself.
    SelfOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    Gated,
    /// Gate frozen at a constant value.
    Static(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub alignment: Alignment,
    pub fusion: Fusion,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            alignment: Alignment::Cross,
            fusion: Fusion::Gated,
        }
    }
}

/// Raw per-entity features of one side, rows in entity-index order.
#[derive(Clone, Debug)]
pub struct SideInputs {
    pub structure: Matrix,
    pub text: Matrix,
}

impl SideInputs {
    pub fn len(&self) -> usize {
        self.structure.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.structure.rows() == 0
    }
}

#[derive(Clone, Debug)]
pub struct ModelInputs {
    pub drug: SideInputs,
    pub protein: SideInputs,
}

impl ModelInputs {
    pub fn side(&self, side: Side) -> &SideInputs {
        match side {
            Side::Drug => &self.drug,
            Side::Protein => &self.protein,
        }
    }

    pub fn check(&self, dims: ModelDims) -> Result<()> {
        for (side, s, ds) in [
            (Side::Drug, &self.drug, dims.drug_struct),
            (Side::Protein, &self.protein, dims.prot_struct),
        ] {
            if s.structure.cols() != ds || s.text.cols() != dims.text {
                return Err(Error::Contract(format!(
                    "{side} inputs have widths ({}, {}), model expects ({ds}, {})",
                    s.structure.cols(),
                    s.text.cols(),
                    dims.text
                )));
            }
            if s.structure.rows() != s.text.rows() {
                return Err(Error::Shape {
                    op: "side inputs",
                    left: s.structure.shape(),
                    right: s.text.shape(),
                });
            }
        }
        Ok(())
    }
}

/// Which projected stream an attention pass read its keys and values from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Structure,
    Text,
}

#[derive(Clone, Debug)]
pub struct AttentionActs {
    pub query_stream: Stream,
    pub context_stream: Stream,
    pub query_in: Matrix,
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    pub weights: Matrix,
    pub output: Matrix,
}

#[derive(Clone, Debug)]
pub struct SideActs {
    pub side: Side,
    /// Entity indices present in the batch, ascending.
    pub active: Vec<usize>,
    /// Row of `active` used by each pair of the batch.
    pub pair_rows: Vec<usize>,
    pub structure: Matrix,
    pub text: Matrix,
    pub struct_aligned: AttentionActs,
    pub text_aligned: AttentionActs,
    pub gate: Matrix,
    pub fused: Matrix,
    pub attn_fingerprint: usize,
    pub gate_fingerprint: usize,
}

impl SideActs {
    fn stream(&self, s: Stream) -> &Matrix {
        match s {
            Stream::Structure => &self.structure,
            Stream::Text => &self.text,
        }
    }
}

/// Everything one forward pass computed, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct BatchActivations {
    pub batch: Vec<(usize, usize)>,
    pub arch: Architecture,
    pub generation: u64,
    pub dims: ModelDims,
    pub drug: SideActs,
    pub protein: SideActs,
    /// `[fused drug ‖ fused protein]` per pair.
    pub concat: Matrix,
    pub hidden_pre: Matrix,
    pub hidden: Matrix,
    pub logits: Matrix,
    pub probs: Vec<f64>,
}

fn attend(
    query_in: Matrix,
    ctx: &Matrix,
    attn: &AttentionWeights,
    query_stream: Stream,
    context_stream: Stream,
) -> Result<AttentionActs> {
    let q = query_in.matmul(&attn.wq)?;
    let k = ctx.matmul(&attn.wk)?;
    let v = ctx.matmul(&attn.wv)?;
    let scale = 1.0 / (attn.wk.cols() as f64).sqrt();
    let mut scores = q.matmul_t(&k)?;
    scores.map_inplace(|x| x * scale);
    let weights = softmax_rows(&scores);
    let output = weights.matmul(&v)?;
    Ok(AttentionActs {
        query_stream,
        context_stream,
        query_in,
        q,
        k,
        v,
        weights,
        output,
    })
}

/// `softmax(Q Kᵀ / √h) V` with `Q = query_src·W_q`, `K = ctx_src·W_k`,
/// `V = ctx_src·W_v`.
pub fn cross_attention(query_src: &Matrix, ctx_src: &Matrix, p: &ModelParams) -> Result<Matrix> {
    if query_src.rows() != ctx_src.rows() {
        return Err(Error::Shape {
            op: "cross_attention",
            left: query_src.shape(),
            right: ctx_src.shape(),
        });
    }
    Ok(attend(
        query_src.clone(),
        ctx_src,
        &p.attn,
        Stream::Structure,
        Stream::Text,
    )?
    .output)
}

/// Structure attends over text and text attends over structure.
pub fn dual_align(zs: &Matrix, zt: &Matrix, p: &ModelParams) -> Result<(Matrix, Matrix)> {
    Ok((cross_attention(zs, zt, p)?, cross_attention(zt, zs, p)?))
}

fn gate_values(zs: &Matrix, zt: &Matrix, gate: &GateWeights, fusion: Fusion) -> Result<Matrix> {
    if zs.shape() != zt.shape() {
        return Err(Error::Shape {
            op: "tsfusion",
            left: zs.shape(),
            right: zt.shape(),
        });
    }
    match fusion {
        Fusion::Gated => {
            let mut pre = zs.matmul(&gate.ws)?;
            pre.add_assign(&zt.matmul(&gate.wt)?)?;
            Ok(sigmoid(&pre.add_row(&gate.b)?))
        }
        Fusion::Static(g) => Ok(Matrix::filled(zs.rows(), zs.cols(), g)),
    }
}

fn mix(zs: &Matrix, zt: &Matrix, g: &Matrix) -> Matrix {
    let data = zs
        .as_slice()
        .iter()
        .zip(zt.as_slice())
        .zip(g.as_slice())
        .map(|((&s, &t), &g)| g * s + (1.0 - g) * t)
        .collect();
    Matrix::from_vec(zs.rows(), zs.cols(), data).expect("shapes checked")
}

/// Gated mix `G⊙zs + (1−G)⊙zt` with `G = σ(zs·W_s + zt·W_t + b)`.
pub fn tsfusion(zs: &Matrix, zt: &Matrix, p: &ModelParams) -> Result<Matrix> {
    let g = gate_values(zs, zt, &p.gate, Fusion::Gated)?;
    Ok(mix(zs, zt, &g))
}

fn head_forward(
    concat: &Matrix,
    head: &PredictionHead,
) -> Result<(Matrix, Matrix, Matrix, Vec<f64>)> {
    let hidden_pre = head.hidden.apply(concat)?;
    let hidden = hidden_pre.map(|x| x.max(0.0));
    let logits = head.output.apply(&hidden)?;
    let probs = logits
        .as_slice()
        .iter()
        .map(|&z| sigmoid_scalar(z))
        .collect();
    Ok((hidden_pre, hidden, logits, probs))
}

/// Interaction probability per row pair of fused drug and protein vectors.
pub fn predict(zd: &Matrix, zp: &Matrix, p: &ModelParams) -> Result<Vec<f64>> {
    if zd.rows() != zp.rows() {
        return Err(Error::Shape {
            op: "predict",
            left: zd.shape(),
            right: zp.shape(),
        });
    }
    let concat = Matrix::hcat(&[zd, zp])?;
    Ok(head_forward(&concat, &p.head)?.3)
}

fn side_forward(
    side: Side,
    entity_idx: impl Iterator<Item = usize>,
    inputs: &SideInputs,
    p: &ModelParams,
    arch: Architecture,
) -> Result<SideActs> {
    let picks: Vec<usize> = entity_idx.collect();
    let n = inputs.len();
    if let Some(&bad) = picks.iter().find(|&&i| i >= n) {
        return Err(Error::Input(format!(
            "{side} index {bad} out of range for {n} entities"
        )));
    }
    let mut active = picks.clone();
    active.sort_unstable();
    active.dedup();
    let pair_rows = picks
        .iter()
        .map(|i| active.binary_search(i).expect("present"))
        .collect();

    let (ps, pt) = p.side_projections(side);
    let structure = ps.apply(&inputs.structure)?;
    let text = pt.apply(&inputs.text)?;
    let (struct_aligned, text_aligned) = match arch.alignment {
        Alignment::Cross => (
            attend(
                structure.gather_rows(&active),
                &text,
                &p.attn,
                Stream::Structure,
                Stream::Text,
            )?,
            attend(
                text.gather_rows(&active),
                &structure,
                &p.attn,
                Stream::Text,
                Stream::Structure,
            )?,
        ),
        Alignment::SelfOnly => (
            attend(
                structure.gather_rows(&active),
                &structure,
                &p.attn,
                Stream::Structure,
                Stream::Structure,
            )?,
            attend(
                text.gather_rows(&active),
                &text,
                &p.attn,
                Stream::Text,
                Stream::Text,
            )?,
        ),
    };
    let gate = gate_values(
        &struct_aligned.output,
        &text_aligned.output,
        &p.gate,
        arch.fusion,
    )?;
    let fused = mix(&struct_aligned.output, &text_aligned.output, &gate);
    Ok(SideActs {
        side,
        active,
        pair_rows,
        structure,
        text,
        struct_aligned,
        text_aligned,
        gate,
        fused,
        attn_fingerprint: p.attn.fingerprint(),
        gate_fingerprint: p.gate.fingerprint(),
    })
}

/// Projects, aligns, fuses and scores every `(drug, protein)` index pair.
pub fn forward(
    batch: &[(usize, usize)],
    inputs: &ModelInputs,
    p: &ModelParams,
    arch: Architecture,
) -> Result<BatchActivations> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    inputs.check(p.dims)?;
    let drug = side_forward(Side::Drug, batch.iter().map(|b| b.0), &inputs.drug, p, arch)?;
    let protein = side_forward(
        Side::Protein,
        batch.iter().map(|b| b.1),
        &inputs.protein,
        p,
        arch,
    )?;
    let zd = drug.fused.gather_rows(&drug.pair_rows);
    let zp = protein.fused.gather_rows(&protein.pair_rows);
    let concat = Matrix::hcat(&[&zd, &zp])?;
    let (hidden_pre, hidden, logits, probs) = head_forward(&concat, &p.head)?;
    Ok(BatchActivations {
        batch: batch.to_vec(),
        arch,
        generation: p.generation,
        dims: p.dims,
        drug,
        protein,
        concat,
        hidden_pre,
        hidden,
        logits,
        probs,
    })
}

/// Gradient contributions split by where they arise. Summing the three
/// gives the full gradient.
#[derive(Clone, Debug)]
pub struct PathGradients {
    pub head: Gradients,
    pub drug: Gradients,
    pub protein: Gradients,
}

fn check_backward(acts: &BatchActivations, y: &[f64], p: &ModelParams) -> Result<()> {
    if acts.generation != p.generation || acts.dims != p.dims {
        return Err(Error::Contract(format!(
            "activations from parameter generation {} used with generation {}",
            acts.generation, p.generation
        )));
    }
    if y.len() != acts.probs.len() {
        return Err(Error::Shape {
            op: "backward labels",
            left: (acts.probs.len(), 1),
            right: (y.len(), 1),
        });
    }
    Ok(())
}

/// Head gradients; returns the gradient with respect to `concat`.
fn head_backward(
    acts: &BatchActivations,
    y: &[f64],
    p: &ModelParams,
    loss: LossKind,
    g: &mut Gradients,
) -> Result<Matrix> {
    let n = y.len();
    let mut dlogit = Vec::with_capacity(n);
    for (&prob, &t) in acts.probs.iter().zip(y) {
        if t != 0.0 && t != 1.0 {
            return Err(Error::Input(format!("label {t} is not 0/1")));
        }
        dlogit.push(loss::logit_grad(loss, prob, t, n));
    }
    let dlogit = Matrix::column_vector(&dlogit);
    g.head
        .output
        .weight
        .add_assign(&acts.hidden.t_matmul(&dlogit)?)?;
    g.head.output.bias.add_assign(&dlogit.col_sums())?;
    let dh = dlogit.matmul_t(&p.head.output.weight)?;
    let dpre = dh.zip_map(&acts.hidden_pre, |d, z| if z > 0.0 { d } else { 0.0 })?;
    g.head
        .hidden
        .weight
        .add_assign(&acts.concat.t_matmul(&dpre)?)?;
    g.head.hidden.bias.add_assign(&dpre.col_sums())?;
    dpre.matmul_t(&p.head.hidden.weight)
}

/// Backpropagates one attention pass; returns gradients for its query rows
/// and for the full context stream.
fn attention_backward(
    a: &AttentionActs,
    ctx: &Matrix,
    dout: &Matrix,
    w: &AttentionWeights,
    g: &mut AttentionWeights,
) -> Result<(Matrix, Matrix)> {
    let scale = 1.0 / (w.wk.cols() as f64).sqrt();
    let dv = a.weights.t_matmul(dout)?;
    let da = dout.matmul_t(&a.v)?;
    let mut ds = Matrix::zeros(da.rows(), da.cols());
    for i in 0..da.rows() {
        let (arow, darow) = (a.weights.row(i), da.row(i));
        let dot: f64 = arow.iter().zip(darow).map(|(x, y)| x * y).sum();
        for (o, (&x, &y)) in ds.row_mut(i).iter_mut().zip(arow.iter().zip(darow)) {
            *o = x * (y - dot) * scale;
        }
    }
    let dq = ds.matmul(&a.k)?;
    let dk = ds.t_matmul(&a.q)?;
    g.wq.add_assign(&a.query_in.t_matmul(&dq)?)?;
    g.wk.add_assign(&ctx.t_matmul(&dk)?)?;
    g.wv.add_assign(&ctx.t_matmul(&dv)?)?;
    let dquery = dq.matmul_t(&w.wq)?;
    let mut dctx = dk.matmul_t(&w.wk)?;
    dctx.add_assign(&dv.matmul_t(&w.wv)?)?;
    Ok((dquery, dctx))
}

/// Gradients of the weights both sides share, for one side's path.
struct SharedGrads {
    attn: AttentionWeights,
    gate: GateWeights,
}

impl SharedGrads {
    fn zeros(h: usize) -> Self {
        let z = ModelParams::zeros(ModelDims::new(1, 1, 1, h));
        SharedGrads {
            attn: z.attn,
            gate: z.gate,
        }
    }

    fn store(self, g: &mut Gradients) {
        g.attn = self.attn;
        g.gate = self.gate;
    }
}

/// Sums the two paths' shared-weight gradients into `g`.
fn merge_shared(g: &mut Gradients, a: &SharedGrads, b: &SharedGrads) -> Result<()> {
    g.attn.wq = a.attn.wq.add(&b.attn.wq)?;
    g.attn.wk = a.attn.wk.add(&b.attn.wk)?;
    g.attn.wv = a.attn.wv.add(&b.attn.wv)?;
    g.gate.ws = a.gate.ws.add(&b.gate.ws)?;
    g.gate.wt = a.gate.wt.add(&b.gate.wt)?;
    g.gate.b = a.gate.b.add(&b.gate.b)?;
    Ok(())
}

fn side_backward(
    s: &SideActs,
    inputs: &SideInputs,
    dpairs: &Matrix,
    p: &ModelParams,
    fusion: Fusion,
    shared: &mut SharedGrads,
    g: &mut Gradients,
) -> Result<()> {
    let h = p.dims.hidden;
    let mut dfused = Matrix::zeros(s.active.len(), h);
    dfused.scatter_add_rows(&s.pair_rows, dpairs)?;

    let zs = &s.struct_aligned.output;
    let zt = &s.text_aligned.output;
    let mut dzs = dfused.hadamard(&s.gate)?;
    let mut dzt = dfused.zip_map(&s.gate, |d, gv| d * (1.0 - gv))?;
    if fusion == Fusion::Gated {
        let mut dpre = dfused.clone();
        for (((o, &a), &b), &gv) in dpre
            .as_mut_slice()
            .iter_mut()
            .zip(zs.as_slice())
            .zip(zt.as_slice())
            .zip(s.gate.as_slice())
        {
            *o *= (a - b) * gv * (1.0 - gv);
        }
        shared.gate.ws.add_assign(&zs.t_matmul(&dpre)?)?;
        shared.gate.wt.add_assign(&zt.t_matmul(&dpre)?)?;
        shared.gate.b.add_assign(&dpre.col_sums())?;
        dzs.add_assign(&dpre.matmul_t(&p.gate.ws)?)?;
        dzt.add_assign(&dpre.matmul_t(&p.gate.wt)?)?;
    }

    let n = inputs.len();
    let mut dstruct = Matrix::zeros(n, h);
    let mut dtext = Matrix::zeros(n, h);
    for (acts, dout) in [(&s.struct_aligned, &dzs), (&s.text_aligned, &dzt)] {
        let ctx = s.stream(acts.context_stream);
        let (dquery, dctx) = attention_backward(acts, ctx, dout, &p.attn, &mut shared.attn)?;
        match acts.query_stream {
            Stream::Structure => dstruct.scatter_add_rows(&s.active, &dquery)?,
            Stream::Text => dtext.scatter_add_rows(&s.active, &dquery)?,
        }
        match acts.context_stream {
            Stream::Structure => dstruct.add_assign(&dctx)?,
            Stream::Text => dtext.add_assign(&dctx)?,
        }
    }

    let (gs, gt) = g.side_projections_mut(s.side);
    gs.weight
        .add_assign(&inputs.structure.t_matmul(&dstruct)?)?;
    gs.bias.add_assign(&dstruct.col_sums())?;
    gt.weight.add_assign(&inputs.text.t_matmul(&dtext)?)?;
    gt.bias.add_assign(&dtext.col_sums())?;
    Ok(())
}

/// Exact gradients of the mean loss with respect to every parameter.
pub fn backward(
    acts: &BatchActivations,
    inputs: &ModelInputs,
    y: &[f64],
    p: &ModelParams,
    loss: LossKind,
) -> Result<Gradients> {
    check_backward(acts, y, p)?;
    let mut g = ModelParams::zeros(p.dims);
    let dconcat = head_backward(acts, y, p, loss, &mut g)?;
    let h = p.dims.hidden;
    let mut sd = SharedGrads::zeros(h);
    let mut sp = SharedGrads::zeros(h);
    side_backward(
        &acts.drug,
        &inputs.drug,
        &dconcat.columns(0, h),
        p,
        acts.arch.fusion,
        &mut sd,
        &mut g,
    )?;
    side_backward(
        &acts.protein,
        &inputs.protein,
        &dconcat.columns(h, 2 * h),
        p,
        acts.arch.fusion,
        &mut sp,
        &mut g,
    )?;
    merge_shared(&mut g, &sd, &sp)?;
    Ok(g)
}

/// Like [`backward`] but keeps the drug-path and protein-path contributions
/// apart.
pub fn backward_paths(
    acts: &BatchActivations,
    inputs: &ModelInputs,
    y: &[f64],
    p: &ModelParams,
    loss: LossKind,
) -> Result<PathGradients> {
    check_backward(acts, y, p)?;
    let mut head = ModelParams::zeros(p.dims);
    let mut drug = ModelParams::zeros(p.dims);
    let mut protein = ModelParams::zeros(p.dims);
    let dconcat = head_backward(acts, y, p, loss, &mut head)?;
    let h = p.dims.hidden;
    let mut sd = SharedGrads::zeros(h);
    let mut sp = SharedGrads::zeros(h);
    side_backward(
        &acts.drug,
        &inputs.drug,
        &dconcat.columns(0, h),
        p,
        acts.arch.fusion,
        &mut sd,
        &mut drug,
    )?;
    side_backward(
        &acts.protein,
        &inputs.protein,
        &dconcat.columns(h, 2 * h),
        p,
        acts.arch.fusion,
        &mut sp,
        &mut protein,
    )?;
    sd.store(&mut drug);
    sp.store(&mut protein);
    Ok(PathGradients {
        head,
        drug,
        protein,
    })
}

/// Mean loss of the batch under `p`, for finite-difference checks.
pub fn batch_loss(
    batch: &[(usize, usize)],
    inputs: &ModelInputs,
    y: &[f64],
    p: &ModelParams,
    arch: Architecture,
    loss: LossKind,
) -> Result<f64> {
    let acts = forward(batch, inputs, p, arch)?;
    loss_value(loss, &acts.probs, y)
}

/// Largest relative error between analytic and central-difference
/// gradients, per tensor. Relative error is `|a − n| / max(|a|, |n|, floor)`.
pub fn gradient_check(
    batch: &[(usize, usize)],
    inputs: &ModelInputs,
    y: &[f64],
    p: &ModelParams,
    arch: Architecture,
    loss: LossKind,
    step: f64,
    floor: f64,
) -> Result<Vec<(&'static str, f64)>> {
    let acts = forward(batch, inputs, p, arch)?;
    let g = backward(&acts, inputs, y, p, loss)?;
    let mut probe = p.clone();
    let mut out = Vec::with_capacity(TENSOR_NAMES.len());
    for name in TENSOR_NAMES {
        let analytic = g.tensor(name).expect("known tensor").clone();
        let mut worst: f64 = 0.0;
        for k in 0..analytic.len() {
            let orig = probe.tensor(name).expect("known tensor").as_slice()[k];
            probe.tensor_mut(name).expect("known tensor").as_mut_slice()[k] = orig + step;
            let up = batch_loss(batch, inputs, y, &probe, arch, loss)?;
            probe.tensor_mut(name).expect("known tensor").as_mut_slice()[k] = orig - step;
            let down = batch_loss(batch, inputs, y, &probe, arch, loss)?;
            probe.tensor_mut(name).expect("known tensor").as_mut_slice()[k] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic.as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
        out.push((name, worst));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
