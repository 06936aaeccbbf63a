use super::*;
use crate::numkit::seeded_stream;
use proptest::prelude::*;

fn randn(stream: &mut RandomStream, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| stream.gaussian())
}

fn toy(seed: u64, dims: ModelDims, nd: usize, np: usize) -> (ModelInputs, ModelParams) {
    let mut s = seeded_stream(seed);
    let inputs = ModelInputs {
        drug: SideInputs {
            structure: randn(&mut s, nd, dims.drug_struct),
            text: randn(&mut s, nd, dims.text),
        },
        protein: SideInputs {
            structure: randn(&mut s, np, dims.prot_struct),
            text: randn(&mut s, np, dims.text),
        },
    };
    let mut p = init_params(&s.fork("init"), dims).unwrap();
    // move biases off zero so their gradients are exercised in general position
    for (_, m) in p.tensors_mut() {
        m.map_inplace(|v| v + 0.1 * s.gaussian());
    }
    (inputs, p)
}

fn naive_attention(x: &Matrix, c: &Matrix, w: &AttentionWeights) -> Matrix {
    let h = w.wq.cols();
    let lin = |m: &Matrix, wm: &Matrix, i: usize, j: usize| {
        (0..m.cols())
            .map(|k| m.get(i, k) * wm.get(k, j))
            .sum::<f64>()
    };
    let mut out = Matrix::zeros(x.rows(), h);
    for i in 0..x.rows() {
        let mut scores = vec![0.0; c.rows()];
        for (r, sc) in scores.iter_mut().enumerate() {
            for j in 0..h {
                *sc += lin(x, &w.wq, i, j) * lin(c, &w.wk, r, j);
            }
            *sc /= (h as f64).sqrt();
        }
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let z: f64 = e.iter().sum();
        for j in 0..h {
            let v: f64 = (0..c.rows()).map(|r| e[r] / z * lin(c, &w.wv, r, j)).sum();
            out.set(i, j, v);
        }
    }
    out
}

#[test]
fn init_is_seeded_and_bounded() {
    let dims = ModelDims::new(5, 6, 7, 4);
    let a = init_params(&seeded_stream(1), dims).unwrap();
    let b = init_params(&seeded_stream(1), dims).unwrap();
    let c = init_params(&seeded_stream(2), dims).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    for (name, m) in a.tensors() {
        if name.ends_with("bias") || name == "gate.b" {
            assert!(m.as_slice().iter().all(|&v| v == 0.0), "{name}");
        } else {
            let bound = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            assert!(m.max_abs() <= bound, "{name}");
        }
    }
    assert!(init_params(&seeded_stream(1), ModelDims::new(5, 0, 7, 4)).is_err());
}

#[test]
fn shared_weight_contract() {
    let dims = ModelDims::new(5, 6, 7, 4);
    let (inputs, p) = toy(3, dims, 4, 5);
    assert_eq!(p.attention_triples(), 1);
    assert_eq!(p.gate_triples(), 1);
    assert_eq!(p.tensors().len(), 18);
    let acts = forward(&[(0, 1), (2, 3)], &inputs, &p, Architecture::default()).unwrap();
    assert_eq!(acts.drug.attn_fingerprint, acts.protein.attn_fingerprint);
    assert_eq!(acts.drug.gate_fingerprint, acts.protein.gate_fingerprint);
    assert_eq!(acts.drug.attn_fingerprint, p.attn.fingerprint());
}

#[test]
fn attention_single_row_returns_value_row() {
    let dims = ModelDims::new(3, 3, 3, 3);
    let (_, p) = toy(1, dims, 1, 1);
    let zs = Matrix::from_rows(&[vec![0.3, -1.0, 2.0]]).unwrap();
    let zt = Matrix::from_rows(&[vec![1.5, 0.2, -0.7]]).unwrap();
    let out = cross_attention(&zs, &zt, &p).unwrap();
    assert_eq!(out, zt.matmul(&p.attn.wv).unwrap());
}

#[test]
fn attention_identical_context_rows() {
    let dims = ModelDims::new(3, 3, 3, 3);
    let (_, p) = toy(2, dims, 1, 1);
    let mut s = seeded_stream(9);
    let zs = randn(&mut s, 4, 3);
    let row = vec![0.4, -0.1, 0.9];
    let zt = Matrix::from_rows(&vec![row.clone(); 4]).unwrap();
    let v = Matrix::from_rows(&[row])
        .unwrap()
        .matmul(&p.attn.wv)
        .unwrap();
    let out = cross_attention(&zs, &zt, &p).unwrap();
    for i in 0..4 {
        for j in 0..3 {
            assert!((out.get(i, j) - v.get(0, j)).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_hand_set_2x2() {
    let mut p = ModelParams::zeros(ModelDims::new(2, 2, 2, 2));
    p.attn.wq = Matrix::from_rows(&[vec![1.0, 0.5], vec![-0.3, 2.0]]).unwrap();
    p.attn.wk = Matrix::from_rows(&[vec![0.7, -1.0], vec![0.2, 0.4]]).unwrap();
    p.attn.wv = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap();
    let zs = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.5, -2.0]]).unwrap();
    let zt = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.5, 0.25]]).unwrap();
    let out = cross_attention(&zs, &zt, &p).unwrap();
    let oracle = naive_attention(&zs, &zt, &p.attn);
    for (a, b) in out.as_slice().iter().zip(oracle.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
    let bad = Matrix::zeros(3, 2);
    assert!(matches!(
        cross_attention(&zs, &bad, &p),
        Err(Error::Shape { .. })
    ));
}

#[test]
fn dual_align_properties() {
    let dims = ModelDims::new(4, 4, 4, 4);
    let (_, p) = toy(4, dims, 1, 1);
    let mut s = seeded_stream(5);
    let z = randn(&mut s, 3, 4);
    let (a, b) = dual_align(&z, &z, &p).unwrap();
    assert_eq!(a, b);
    let zt = randn(&mut s, 3, 4);
    let (a, b) = dual_align(&z, &zt, &p).unwrap();
    let oa = naive_attention(&z, &zt, &p.attn);
    let ob = naive_attention(&zt, &z, &p.attn);
    assert!(a.sub(&oa).unwrap().max_abs() < 1e-12);
    assert!(b.sub(&ob).unwrap().max_abs() < 1e-12);
}

#[test]
fn tsfusion_examples() {
    let dims = ModelDims::new(3, 3, 3, 3);
    let mut s = seeded_stream(6);
    let zs = randn(&mut s, 4, 3);
    let zt = randn(&mut s, 4, 3);
    let mut p = ModelParams::zeros(dims);
    let out = tsfusion(&zs, &zt, &p).unwrap();
    let mean = zs.add(&zt).unwrap().scale(0.5);
    assert!(out.sub(&mean).unwrap().max_abs() < 1e-15);

    p.gate.b = Matrix::filled(1, 3, 20.0);
    let out = tsfusion(&zs, &zt, &p).unwrap();
    assert!(out.sub(&zs).unwrap().max_abs() < 1e-8);

    let (_, q) = toy(7, dims, 1, 1);
    assert!(tsfusion(&zs, &zs, &q).unwrap().sub(&zs).unwrap().max_abs() < 1e-15);
    assert!(tsfusion(&zs, &Matrix::zeros(2, 3), &q).is_err());
}

#[test]
fn predict_examples() {
    let dims = ModelDims::new(2, 2, 2, 2);
    let mut s = seeded_stream(8);
    let zd = randn(&mut s, 5, 2);
    let zp = randn(&mut s, 5, 2);
    let p = ModelParams::zeros(dims);
    assert!(predict(&zd, &zp, &p).unwrap().iter().all(|&v| v == 0.5));

    let mut p = ModelParams::zeros(dims);
    p.head.hidden.weight = Matrix::from_rows(&[
        vec![1.0, -0.5],
        vec![0.2, 0.3],
        vec![-1.0, 0.8],
        vec![0.4, 0.1],
    ])
    .unwrap();
    p.head.hidden.bias = Matrix::row_vector(&[0.1, -0.2]);
    p.head.output.weight = Matrix::column_vector(&[1.5, -2.0]);
    p.head.output.bias = Matrix::row_vector(&[0.3]);
    let d = [0.5, -1.0];
    let q = [2.0, 0.25];
    let x = [d[0], d[1], q[0], q[1]];
    let w = &p.head.hidden.weight;
    let h0 = (0.1 + (0..4).map(|k| x[k] * w.get(k, 0)).sum::<f64>()).max(0.0);
    let h1 = (-0.2 + (0..4).map(|k| x[k] * w.get(k, 1)).sum::<f64>()).max(0.0);
    let oracle = 1.0 / (1.0 + (-(0.3 + 1.5 * h0 - 2.0 * h1)).exp());
    let got = predict(&Matrix::row_vector(&d), &Matrix::row_vector(&q), &p).unwrap();
    assert!((got[0] - oracle).abs() < 1e-12);
    assert!(predict(&zd, &Matrix::zeros(4, 2), &p).is_err());
}

#[test]
fn forward_single_pair_matches_composition() {
    let dims = ModelDims::new(5, 6, 7, 4);
    let (inputs, p) = toy(10, dims, 4, 5);
    let acts = forward(&[(2, 3)], &inputs, &p, Architecture::default()).unwrap();
    let fuse = |s: &SideInputs, ps: &Linear, pt: &Linear, row: usize| {
        let zs = ps.apply(&s.structure).unwrap();
        let zt = pt.apply(&s.text).unwrap();
        let a = naive_attention(&zs.gather_rows(&[row]), &zt, &p.attn);
        let b = naive_attention(&zt.gather_rows(&[row]), &zs, &p.attn);
        tsfusion(&a, &b, &p).unwrap()
    };
    let fd = fuse(&inputs.drug, &p.proj_drug_struct, &p.proj_drug_text, 2);
    let fp = fuse(&inputs.protein, &p.proj_prot_struct, &p.proj_prot_text, 3);
    let expect = predict(&fd, &fp, &p).unwrap();
    assert!((acts.probs[0] - expect[0]).abs() < 1e-12);
}

#[test]
fn forward_is_row_independent_and_deterministic() {
    let dims = ModelDims::new(5, 6, 7, 4);
    let (inputs, p) = toy(11, dims, 6, 7);
    let batch = vec![(0, 1), (3, 3), (5, 0), (0, 6), (2, 2)];
    let a = forward(&batch, &inputs, &p, Architecture::default()).unwrap();
    let b = forward(&batch, &inputs, &p, Architecture::default()).unwrap();
    assert_eq!(a.probs, b.probs);
    let perm = [3, 0, 4, 2, 1];
    let shuffled: Vec<_> = perm.iter().map(|&i| batch[i]).collect();
    let c = forward(&shuffled, &inputs, &p, Architecture::default()).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        assert_eq!(c.probs[k], a.probs[i]);
    }
    // an entity's score does not depend on its batch companions
    let single = forward(&[(3, 3)], &inputs, &p, Architecture::default()).unwrap();
    assert!((single.probs[0] - a.probs[1]).abs() < 1e-14);
    assert!(forward(&[(6, 0)], &inputs, &p, Architecture::default()).is_err());
    assert!(forward(&[], &inputs, &p, Architecture::default()).is_err());
}

#[test]
fn activation_invariants() {
    let dims = ModelDims::new(5, 6, 7, 4);
    let (inputs, p) = toy(12, dims, 6, 7);
    let acts = forward(
        &[(0, 1), (3, 3), (5, 0)],
        &inputs,
        &p,
        Architecture::default(),
    )
    .unwrap();
    for side in [&acts.drug, &acts.protein] {
        for att in [&side.struct_aligned, &side.text_aligned] {
            for row in att.weights.row_iter() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&w| w >= 0.0));
            }
            for j in 0..att.v.cols() {
                let col = att.v.col(j);
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for i in 0..att.output.rows() {
                    let x = att.output.get(i, j);
                    assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
                }
            }
        }
        assert!(side.gate.as_slice().iter().all(|&g| g > 0.0 && g < 1.0));
        let (a, b) = (&side.struct_aligned.output, &side.text_aligned.output);
        for k in 0..side.fused.len() {
            let (x, lo, hi) = (
                side.fused.as_slice()[k],
                a.as_slice()[k].min(b.as_slice()[k]),
                a.as_slice()[k].max(b.as_slice()[k]),
            );
            assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        }
    }
    assert!(acts.probs.iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn static_fusion_equals_half_gate() {
    let dims = ModelDims::new(5, 6, 7, 4);
    let (inputs, mut p) = toy(13, dims, 4, 5);
    let batch = [(0, 1), (3, 4)];
    let stat = Architecture {
        alignment: Alignment::Cross,
        fusion: Fusion::Static(0.5),
    };
    let a = forward(&batch, &inputs, &p, stat).unwrap();
    p.gate.ws = Matrix::zeros(4, 4);
    p.gate.wt = Matrix::zeros(4, 4);
    p.gate.b = Matrix::zeros(1, 4);
    let b = forward(&batch, &inputs, &p, Architecture::default()).unwrap();
    assert_eq!(a.probs, b.probs);
    let g = backward(&a, &inputs, &[1.0, 0.0], &p, LossKind::Bce).unwrap();
    for name in ["gate.ws", "gate.wt", "gate.b"] {
        assert!(g.tensor(name).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn self_alignment_coincides_with_cross_on_equal_streams() {
    let dims = ModelDims::new(4, 4, 4, 3);
    let (mut inputs, mut p) = toy(14, dims, 3, 3);
    inputs.drug.text = inputs.drug.structure.clone();
    inputs.protein.text = inputs.protein.structure.clone();
    p.proj_drug_text = p.proj_drug_struct.clone();
    p.proj_prot_text = p.proj_prot_struct.clone();
    let batch = [(0, 1), (2, 2)];
    let a = forward(&batch, &inputs, &p, Architecture::default()).unwrap();
    let b = forward(
        &batch,
        &inputs,
        &p,
        Architecture {
            alignment: Alignment::SelfOnly,
            fusion: Fusion::Gated,
        },
    )
    .unwrap();
    assert_eq!(a.probs, b.probs);
}

#[test]
fn gradient_check_all_tensors() {
    let dims = ModelDims::new(5, 6, 7, 4);
    let archs = [
        Architecture::default(),
        Architecture {
            alignment: Alignment::SelfOnly,
            fusion: Fusion::Gated,
        },
        Architecture {
            alignment: Alignment::Cross,
            fusion: Fusion::Static(0.5),
        },
    ];
    for seed in 0..3 {
        let (inputs, p) = toy(100 + seed, dims, 4, 5);
        let batch = [(0, 1), (3, 4), (0, 2)];
        let y = [1.0, 0.0, 1.0];
        for arch in archs {
            for loss in [LossKind::Bce, LossKind::focal_default()] {
                let report =
                    gradient_check(&batch, &inputs, &y, &p, arch, loss, 1e-5, 1e-7).unwrap();
                for (name, rel) in report {
                    assert!(rel <= 1e-4, "seed {seed} {arch:?} {loss:?} {name}: {rel:e}");
                }
            }
        }
    }
}

#[test]
fn zero_loss_gives_no_head_gradient() {
    let dims = ModelDims::new(2, 2, 2, 2);
    let (inputs, mut p) = toy(15, dims, 2, 2);
    p.head.output.weight = Matrix::zeros(2, 1);
    p.head.output.bias = Matrix::row_vector(&[40.0]);
    let acts = forward(&[(0, 0), (1, 1)], &inputs, &p, Architecture::default()).unwrap();
    let g = backward(&acts, &inputs, &[1.0, 1.0], &p, LossKind::Bce).unwrap();
    assert!(g.head.output.weight.max_abs() <= 1e-6);
    assert!(g.head.output.bias.max_abs() <= 1e-6);
}

#[test]
fn duplicated_path_doubles_shared_gradient() {
    let dims = ModelDims::new(5, 5, 6, 4);
    let (mut inputs, mut p) = toy(16, dims, 4, 4);
    inputs.protein = inputs.drug.clone();
    p.proj_prot_struct = p.proj_drug_struct.clone();
    p.proj_prot_text = p.proj_drug_text.clone();
    let h = dims.hidden;
    let top = p.head.hidden.weight.clone();
    for i in 0..h {
        p.head
            .hidden
            .weight
            .row_mut(h + i)
            .copy_from_slice(top.row(i));
    }
    let batch = [(0, 0), (1, 1), (3, 3)];
    let y = [1.0, 0.0, 1.0];
    let acts = forward(&batch, &inputs, &p, Architecture::default()).unwrap();
    let paths = backward_paths(&acts, &inputs, &y, &p, LossKind::Bce).unwrap();
    let full = backward(&acts, &inputs, &y, &p, LossKind::Bce).unwrap();
    for name in [
        "attn.wq", "attn.wk", "attn.wv", "gate.ws", "gate.wt", "gate.b",
    ] {
        let single = paths.drug.tensor(name).unwrap();
        assert_eq!(single, paths.protein.tensor(name).unwrap());
        assert_eq!(full.tensor(name).unwrap(), &single.scale(2.0), "{name}");
    }
}

#[test]
fn stale_activations_are_rejected() {
    let dims = ModelDims::new(2, 2, 2, 2);
    let (inputs, mut p) = toy(17, dims, 2, 2);
    let acts = forward(&[(0, 0)], &inputs, &p, Architecture::default()).unwrap();
    p.bump_generation();
    assert!(matches!(
        backward(&acts, &inputs, &[1.0], &p, LossKind::Bce),
        Err(Error::Contract(_))
    ));
}

#[test]
fn checkpoint_roundtrip() {
    let dims = ModelDims::new(5, 6, 7, 4);
    let (_, mut p) = toy(18, dims, 1, 1);
    p.generation = 42;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&path, &p).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), p);
    let bytes = encode_checkpoint(&p).unwrap();
    assert_eq!(&bytes[..4], b"DTCK");
    assert!(decode_checkpoint(&path, &bytes[..bytes.len() - 3]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn probabilities_in_open_unit_interval(seed in 0u64..1000, scale in 0.1f64..50.0) {
        let dims = ModelDims::new(3, 4, 5, 3);
        let (mut inputs, p) = toy(seed, dims, 3, 3);
        inputs.drug.structure = inputs.drug.structure.scale(scale);
        let acts = forward(&[(0, 0), (1, 2), (2, 1)], &inputs, &p, Architecture::default()).unwrap();
        prop_assert!(acts.probs.iter().all(|&v| v > 0.0 && v < 1.0));
        for side in [&acts.drug, &acts.protein] {
            for row in side.struct_aligned.weights.row_iter() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
