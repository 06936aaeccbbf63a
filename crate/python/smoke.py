"""Smoke test for the `dti` extension module.

    pip install --no-build-isolation ./crates/py
    python python/smoke.py
"""

import math
import os
import tempfile

import dti


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    assert close(dti.auroc([0.9, 0.4, 0.6, 0.2], [1, 1, 0, 0]), 0.75)
    assert close(dti.bce_loss([0.5, 0.5], [1.0, 0.0]), math.log(2.0), 1e-12)
    assert close(dti.focal_loss([0.3, 0.8], [1.0, 0.0], gamma=0.0, alpha=0.5),
                 0.5 * dti.bce_loss([0.3, 0.8], [1.0, 0.0]))
    s = dti.rwr([[0.0, 1.0], [1.0, 0.0]], restart=0.5)
    assert close(s[0][0], 2 / 3, 1e-10) and close(s[1][0], 1 / 3, 1e-10)
    m = dti.metrics([0.9, 0.8, 0.3, 0.1], [1, 0, 1, 0])
    assert m["n_pos"] == 2 and 0.0 <= m["auroc"] <= 1.0

    exp = dti.Experiment.synthetic()
    assert len(exp.drug_ids) == 100 and len(exp.protein_ids) == 150
    model = exp.train(epochs=5, seed=0)
    assert model.attention_triples == 1 and model.gate_triples == 1
    assert len(dti.Model.tensor_names()) == 18
    report = model.report
    print("5-epoch test report:", {k: round(v, 4) for k, v in report.items() if isinstance(v, float)})
    assert report["auroc"] > 0.6

    p = model.predict(exp.drug_ids[:3], exp.protein_ids[:3])
    assert len(p) == 3 and all(0.0 < x < 1.0 for x in p)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.ckpt")
        model.save(path)
        again = dti.Model.load(path, exp)
        assert again.predict(exp.drug_ids[:3], exp.protein_ids[:3]) == p
        assert dti.run_cli(["synth", "--out", os.path.join(d, "fx")]) == 0
        assert dti.run_cli(["train", "--bogus", "1"]) == 2

    try:
        dti.auroc([0.1], [1, 0])
    except ValueError:
        pass
    else:
        raise AssertionError("length mismatch must raise")
    print("smoke OK")


if __name__ == "__main__":
    main()
