import csv
import json

import numpy as np
import pytest

from candlearn.cli import derive_seed, main
from candlearn.data import IDX_UBYTE, IdxTensor, load_annotated, load_dataset, write_idx


def run(args):
    return main([str(a) for a in args])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_derive_seed_stable_and_distinct():
    assert derive_seed(1, "train", 0) == derive_seed(1, "train", 0)
    assert derive_seed(1, "train", 0) != derive_seed(1, "train", 1)
    assert derive_seed(1, "train", 0) != derive_seed(2, "train", 0)
    assert 0 <= derive_seed("x") < 2**63


def test_gen_annotate_train_eval_pipeline(tmp_path):
    out = tmp_path / "run"
    assert run(["gen", "--k", 4, "--per-class", 30, "--seed", 3, "--out", out]) == 0
    dataset = load_dataset(out / "dataset.jsonl")
    assert dataset.k == 4 and dataset.features.shape == (120, 2)

    assert run(["annotate", out / "dataset.jsonl", "--n", 2, "--seed", 4, "--out", out]) == 0
    annotated = load_annotated(out / "annotated.jsonl")
    assert annotated.n_cand == 2 and len(annotated.examples) == 120
    assert all(e.candidates.n == 2 for e in annotated.examples)

    assert run([
        "train", out / "annotated.jsonl", "--strategy", "pc",
        "--epochs", 30, "--seed", 5, "--out", out,
    ]) == 0
    assert (out / "checkpoint.json").exists()
    curve = read_csv(out / "loss_curve.csv")
    assert len(curve) == 30

    assert run([
        "eval", out / "annotated.jsonl", "--checkpoint", out / "checkpoint.json",
        "--strategy", "pc", "--out", out,
    ]) == 0
    report = read_csv(out / "risk_report.csv")[0]
    assert 0.5 <= float(report["accuracy"]) <= 1.0
    assert int(report["n"]) == 120

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "eval"
    assert manifest["artifacts"] == ["risk_report.csv"]


def test_gen_with_k_minus_one_annotation(tmp_path):
    out = tmp_path / "r"
    run(["gen", "--k", 5, "--per-class", 10, "--out", out])
    assert run(["annotate", out / "dataset.jsonl", "--n", "K-1", "--out", out]) == 0
    annotated = load_annotated(out / "annotated.jsonl")
    assert annotated.n_cand == 4


def test_annotate_stochastic_sizes(tmp_path):
    out = tmp_path / "r"
    run(["gen", "--k", 5, "--per-class", 30, "--out", out])
    assert run([
        "annotate", out / "dataset.jsonl", "--stochastic-n", "--seed", 1, "--out", out,
    ]) == 0
    annotated = load_annotated(out / "annotated.jsonl")
    assert annotated.n_cand is None
    assert {e.candidates.n for e in annotated.examples} == {1, 2, 3, 4}
    # mixed sizes still train via the per-example rescale
    assert run(["train", out / "annotated.jsonl", "--epochs", 3, "--out", out]) == 0


def test_bounds_csv(tmp_path):
    out = tmp_path / "b"
    assert run(["bounds", "--k", 5, "--n", "1..4", "--out", out]) == 0
    rows = read_csv(out / "bounds.csv")
    assert len(rows) == 8  # both strategies
    by_key = {(r["strategy"], r["n_cand"]): r for r in rows}
    assert float(by_key[("pc", "4")]["err_bound"]) == pytest.approx(320.3916, abs=5e-4)
    assert by_key[("ova", "1")]["branch"] == "low_n"
    assert by_key[("ova", "4")]["branch"] == "high_n"


def test_bounds_single_value(tmp_path):
    out = tmp_path / "b"
    assert run(["bounds", "--k", 10, "--n", "K-1", "--strategy", "ova", "--out", out]) == 0
    rows = read_csv(out / "bounds.csv")
    assert len(rows) == 1 and rows[0]["n_cand"] == "9"


def test_usage_errors_exit_one(tmp_path, capsys):
    assert run(["gen", "--out", tmp_path]) == 1  # no --k
    assert run(["annotate", tmp_path / "missing.jsonl", "--n", 1, "--out", tmp_path]) == 1
    assert run(["nonsense"]) == 1
    assert run(["bounds", "--k", 5, "--n", "7", "--out", tmp_path]) == 1  # n out of range
    capsys.readouterr()


def test_divergence_exits_three(tmp_path):
    out = tmp_path / "d"
    run(["gen", "--k", 3, "--per-class", 20, "--out", out])
    run(["annotate", out / "dataset.jsonl", "--n", 1, "--out", out])
    code = run([
        "train", out / "annotated.jsonl", "--epochs", 60, "--optimizer", "sgd",
        "--lr", "1e12", "--weight-decay", "0.1", "--out", out,
    ])
    assert code == 3


def test_verify_quick_exits_zero(tmp_path, capsys):
    assert run(["verify", "--quick", "--out", tmp_path]) == 0
    captured = capsys.readouterr()
    assert "all verification groups passed" in captured.out
    assert captured.out.count("ok ") >= 8


def test_experiment_and_rerun_byte_identical(tmp_path):
    first = tmp_path / "e1"
    code = run([
        "experiment", "--k", 3, "--per-class", 20, "--n-values", "1,2",
        "--seeds", 2, "--epochs", 10, "--strategy", "ova", "--seed", 8, "--out", first,
    ])
    assert code == 0
    runs = read_csv(first / "runs.csv")
    assert len(runs) == 4  # 2 sizes x 2 trials
    summary = read_csv(first / "summary.csv")
    assert len(summary) == 2
    assert {r["n_cand"] for r in summary} == {"1", "2"}

    second = tmp_path / "e2"
    assert run(["rerun", first / "manifest.json", "--out", second]) == 0
    assert (first / "runs.csv").read_bytes() == (second / "runs.csv").read_bytes()
    assert (first / "summary.csv").read_bytes() == (second / "summary.csv").read_bytes()


def test_rerun_rejects_foreign_manifest(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"command": "rerun", "config": {}}))
    assert run(["rerun", path]) == 1


def test_gen_from_idx(tmp_path):
    rng = np.random.default_rng(2)
    images = rng.integers(0, 256, (30, 3, 3), dtype=np.uint8)
    labels = rng.integers(0, 4, 30, dtype=np.uint8)
    (tmp_path / "im.idx").write_bytes(write_idx(IdxTensor(IDX_UBYTE, images.shape, images)))
    (tmp_path / "lb.idx").write_bytes(write_idx(IdxTensor(IDX_UBYTE, labels.shape, labels)))
    out = tmp_path / "r"
    code = run([
        "gen", "--from-idx", tmp_path / "im.idx", tmp_path / "lb.idx",
        "--keep-classes", "0,2", "--out", out,
    ])
    assert code == 0
    dataset = load_dataset(out / "dataset.jsonl")
    assert dataset.k == 2
    assert dataset.features.shape[1] == 9
    assert set(dataset.labels.tolist()) <= {0, 1}
    # non-synthetic data annotates with the true-label table
    assert run(["annotate", out / "dataset.jsonl", "--n", 1, "--out", out]) == 0
    annotated = load_annotated(out / "annotated.jsonl")
    assert annotated.generator == "onehot"
    for example in annotated.examples:
        assert example.true_label in example.candidates


def test_out_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("CANDLEARN_OUT", str(tmp_path / "envout"))
    assert run(["gen", "--k", 3, "--per-class", 5]) == 0
    assert (tmp_path / "envout" / "dataset.jsonl").exists()


def test_checkpoint_annotator(tmp_path):
    out = tmp_path / "c"
    run(["gen", "--k", 3, "--per-class", 20, "--seed", 1, "--out", out])
    run(["annotate", out / "dataset.jsonl", "--n", 1, "--seed", 1, "--out", out])
    run(["train", out / "annotated.jsonl", "--epochs", 10, "--seed", 1, "--out", out])
    code = run([
        "annotate", out / "dataset.jsonl", "--n", 2, "--seed", 2,
        "--annotator", f"checkpoint:{out / 'checkpoint.json'}",
        "--temperature", "0.5", "--filename", "redrawn.jsonl", "--out", out,
    ])
    assert code == 0
    redrawn = load_annotated(out / "redrawn.jsonl")
    assert redrawn.generator.startswith("checkpoint:")
    assert all(e.candidates.n == 2 for e in redrawn.examples)
