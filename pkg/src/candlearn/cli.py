"""Command-line driver: dataset generation, annotation, training,
evaluation, bound sweeps, a self-check suite, and the N-sweep experiment.

Every run writes exactly one ``manifest.json`` next to its outputs with the
fully resolved configuration; ``candlearn rerun manifest.json --out DIR``
replays it and reproduces the numerical outputs byte for byte.  Exit codes:
0 success, 1 validation/usage error, 2 verification failure, 3 training
divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import bounds as bounds_mod
from . import data as data_mod
from .losses import (
    RAMP_SHIFTED,
    SIGMOID_SHIFTED,
    SURROGATES,
    ZERO_ONE,
    InvalidCandidateSetError,
    Strategy,
    additive_scheme,
    candidate_loss,
    candidate_loss_grad,
    complementary_loss,
    dual_candidate_loss,
    eval_surrogate,
    ordinary_loss,
    ordinary_losses,
    scheme_for,
)
from .model import MlpScorer, TrainConfig, TrainingDivergedError, load_checkpoint, save_checkpoint, train
from .risk import classification_error, empirical_risk, true_risk_oracle, zero_one_evaluate
from .sampling import (
    all_candidate_sets,
    annotate_dataset,
    candidate_probability,
    posterior_mixture,
    sample_candidate_set,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_VERIFY = 2
EXIT_DIVERGED = 3

OUT_ENV = "CANDLEARN_OUT"


class CliError(Exception):
    """Validation problem surfaced to the user (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    # Usage problems are validation errors; keep exit code 2 for verify.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a base seed and a role path."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _csv_cell(row.get(key)) for key in fieldnames})


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return value


def _write_manifest(args, out: Path, artifacts: list[str]) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    config["out"] = str(out)
    manifest = {
        "command": args.command,
        "config": config,
        "seed": config.get("seed"),
        "artifacts": artifacts,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(out / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_n_values(text: str, k: int) -> list[int]:
    """Accept '1,2,3', '1..4', or 'K-1' style set sizes."""
    values: list[int] = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ".." in chunk:
            lo, hi = chunk.split("..", 1)
            values.extend(range(_parse_n(lo, k), _parse_n(hi, k) + 1))
        else:
            values.append(_parse_n(chunk, k))
    if not values:
        raise CliError(f"no candidate-set sizes in {text!r}")
    for n in values:
        if not 1 <= n <= k - 1:
            raise CliError(f"set size {n} invalid for {k} classes")
    return values


def _parse_n(token: str, k: int) -> int:
    token = token.strip()
    if token.upper().startswith("K"):
        rest = token[1:].replace(" ", "")
        if rest == "":
            return k
        if rest.startswith("-"):
            return k - int(rest[1:])
        raise CliError(f"cannot parse set size {token!r}")
    return int(token)


# --------------------------------------------------------------------------
# gen


def cmd_gen(args) -> int:
    out = _out_dir(args)
    if args.from_idx:
        images, labels_path = args.from_idx
        features, labels = data_mod.load_idx_pair(images, labels_path)
        k = int(labels.max()) + 1 if labels.size else 0
        meta = {"generator": "idx", "images": str(images), "labels": str(labels_path)}
        if args.keep_classes:
            keep = [int(c) for c in args.keep_classes.split(",")]
            features, labels = data_mod.restrict_classes(features, labels, keep)
            k = len(keep)
            meta["keep_classes"] = keep
        if k < 2:
            raise CliError("ingested dataset has fewer than two classes")
        dataset = data_mod.LabeledDataset(features=features, labels=labels, k=k, meta=meta)
    else:
        if args.k is None:
            raise CliError("--k is required unless --from-idx is given")
        if args.dims == 2:
            means = data_mod.circle_means(args.k, args.radius)
        else:
            means = data_mod.scattered_means(args.k, args.dims, args.radius, derive_seed(args.seed, "means"))
        spec = data_mod.SyntheticSpec(
            k=args.k,
            dims=args.dims,
            per_class=args.per_class,
            class_means=tuple(tuple(row) for row in means.tolist()),
            class_stddev=args.stddev,
            seed=args.seed,
        )
        dataset = data_mod.load_dataset(spec)
    path = out / args.filename
    data_mod.save_labeled(path, dataset)
    _write_manifest(args, out, [args.filename])
    print(f"wrote {path} ({dataset.features.shape[0]} examples, k={dataset.k})")
    return EXIT_OK


# --------------------------------------------------------------------------
# annotate


def _build_annotator(args, dataset: data_mod.LabeledDataset):
    choice = args.annotator
    meta = dataset.meta or {}
    if choice == "auto":
        choice = "oracle" if meta.get("generator") == "synthetic" else "onehot"
    if choice == "oracle":
        if meta.get("generator") != "synthetic":
            raise CliError("oracle annotation needs a synthetic dataset with stored means")
        means = np.asarray(meta["class_means"], dtype=float)
        return data_mod.oracle_annotator(means, float(meta["class_stddev"]), args.temperature), "oracle"
    if choice == "onehot":
        return data_mod.onehot_annotator(dataset.features, dataset.labels, dataset.k), "onehot"
    if choice.startswith("checkpoint:"):
        choice = choice[len("checkpoint:"):]
    scorer = load_checkpoint(choice)
    if scorer.k != dataset.k:
        raise CliError("annotator checkpoint class count disagrees with the dataset")
    return data_mod.softmax_annotator(scorer, args.temperature), f"checkpoint:{Path(choice).name}"


def cmd_annotate(args) -> int:
    out = _out_dir(args)
    dataset = data_mod.load_dataset(args.dataset)
    if not isinstance(dataset, data_mod.LabeledDataset):
        raise CliError("annotate expects a labeled dataset file")
    if args.stochastic_n:
        n_cand = None
    else:
        if args.n is None:
            raise CliError("--n is required unless --stochastic-n is given")
        n_cand = _parse_n(args.n, dataset.k)
        if not 1 <= n_cand <= dataset.k - 1:
            raise CliError(f"set size {n_cand} invalid for {dataset.k} classes")
    annotator, generator = _build_annotator(args, dataset)
    rng = np.random.default_rng(args.seed)
    examples = annotate_dataset(
        dataset.features, annotator, n_cand or 1, rng, stochastic_n=args.stochastic_n
    )
    annotated = data_mod.AnnotatedDataset(
        examples=examples, k=dataset.k, n_cand=n_cand, seed=args.seed, generator=generator
    )
    path = out / args.filename
    data_mod.save_annotated(path, annotated)
    _write_manifest(args, out, [args.filename])
    print(f"wrote {path} ({len(examples)} examples, n={n_cand if n_cand else 'stochastic'})")
    return EXIT_OK


# --------------------------------------------------------------------------
# train


def _hidden_dims(text: str) -> tuple[int, ...]:
    if not text.strip():
        return ()
    return tuple(int(v) for v in text.split(","))


def cmd_train(args) -> int:
    out = _out_dir(args)
    dataset = data_mod.load_dataset(args.dataset)
    if not isinstance(dataset, data_mod.AnnotatedDataset):
        raise CliError("train expects an annotated dataset file")
    dims = (dataset.examples[0].x.shape[0], *_hidden_dims(args.hidden), dataset.k)
    config = TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        optimizer=args.optimizer,
        seed=args.seed,
        strategy=args.strategy,
        halve_lr_every=args.halve_lr_every,
        allow_mixed_n=dataset.n_cand is None,
    )
    model = MlpScorer.init(dims, seed=derive_seed(args.seed, "init"))
    model, curve = train(model, dataset.examples, config)
    ck = out / args.checkpoint
    save_checkpoint(model, ck, seed=args.seed, config=config)
    curve_rows = [{"epoch": i, "train_risk": v} for i, v in enumerate(curve)]
    _write_csv(out / "loss_curve.csv", ["epoch", "train_risk"], curve_rows)
    _write_manifest(args, out, [args.checkpoint, "loss_curve.csv"])
    print(f"wrote {ck} (final train risk {curve[-1]:.6f})")
    return EXIT_OK


# --------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    out = _out_dir(args)
    dataset = data_mod.load_dataset(args.dataset)
    if not isinstance(dataset, data_mod.AnnotatedDataset):
        raise CliError("eval expects an annotated dataset file")
    model = load_checkpoint(args.checkpoint)
    if model.k != dataset.k:
        raise CliError("checkpoint class count disagrees with the dataset")
    scheme = scheme_for(args.strategy, dataset.k) if args.strategy else None
    report = zero_one_evaluate(model, dataset.examples, scheme)
    _write_csv(out / "risk_report.csv", list(report.to_record()), [report.to_record()])
    _write_manifest(args, out, ["risk_report.csv"])
    print(
        f"accuracy {report.accuracy:.4f} zero-one risk {report.zero_one_risk:.4f} "
        f"empirical risk {report.empirical_risk:.6f} (n={report.n})"
    )
    return EXIT_OK


# --------------------------------------------------------------------------
# bounds


def cmd_bounds(args) -> int:
    out = _out_dir(args)
    strategies = ["ova", "pc"] if args.strategy == "both" else [args.strategy]
    n_values = _parse_n_values(args.n, args.k)
    rows = []
    for strategy in strategies:
        for n_cand in n_values:
            inputs = bounds_mod.BoundInputs(
                k=args.k,
                n_cand=n_cand,
                n_train=args.n_train,
                delta=args.delta,
                lipschitz=args.lipschitz,
                rad=args.rad,
            )
            rows.append(
                {
                    "strategy": strategy,
                    "k": args.k,
                    "n_cand": n_cand,
                    "n_train": args.n_train,
                    "delta": args.delta,
                    "sup_norm": bounds_mod.sup_norm(strategy, args.k, n_cand),
                    "rad_bound": bounds_mod.rademacher_bound(
                        strategy, args.k, n_cand, args.lipschitz, args.rad
                    ),
                    "err_bound": bounds_mod.error_bound(strategy, inputs),
                    "branch": bounds_mod.branch(args.k, n_cand),
                }
            )
    fields = ["strategy", "k", "n_cand", "n_train", "delta", "sup_norm", "rad_bound", "err_bound", "branch"]
    _write_csv(out / "bounds.csv", fields, rows)
    _write_manifest(args, out, ["bounds.csv"])
    print(f"wrote {out / 'bounds.csv'} ({len(rows)} rows)")
    return EXIT_OK


# --------------------------------------------------------------------------
# experiment


def cmd_experiment(args) -> int:
    out = _out_dir(args)
    k = args.k
    n_values = _parse_n_values(args.n_values, k)
    strategies = ["ova", "pc"] if args.strategy == "both" else [args.strategy]
    if args.dims == 2:
        means = data_mod.circle_means(k, args.radius)
    else:
        means = data_mod.scattered_means(k, args.dims, args.radius, derive_seed(args.seed, "means"))
    means_tuple = tuple(tuple(row) for row in means.tolist())
    annotator = data_mod.oracle_annotator(means, args.stddev, args.temperature)
    hidden = _hidden_dims(args.hidden)
    runs = []
    for trial in range(args.seeds):
        spec_train = data_mod.SyntheticSpec(
            k, args.dims, args.per_class, means_tuple, args.stddev, derive_seed(args.seed, "train-data", trial)
        )
        spec_test = data_mod.SyntheticSpec(
            k, args.dims, args.per_class, means_tuple, args.stddev, derive_seed(args.seed, "test-data", trial)
        )
        features_train, _ = data_mod.generate_synthetic(spec_train)
        features_test, _ = data_mod.generate_synthetic(spec_test)
        for n_cand in n_values:
            annotated_train = annotate_dataset(
                features_train, annotator, n_cand,
                np.random.default_rng(derive_seed(args.seed, "annotate-train", trial, n_cand)),
            )
            annotated_test = annotate_dataset(
                features_test, annotator, n_cand,
                np.random.default_rng(derive_seed(args.seed, "annotate-test", trial, n_cand)),
            )
            for strategy in strategies:
                scheme = scheme_for(strategy, k)

                def fit(examples, role):
                    config = TrainConfig(
                        epochs=args.epochs,
                        batch_size=args.batch_size,
                        learning_rate=args.lr,
                        weight_decay=args.weight_decay,
                        optimizer=args.optimizer,
                        seed=derive_seed(args.seed, "train", trial, n_cand, strategy, role),
                        strategy=strategy,
                    )
                    dims = (args.dims, *hidden, k)
                    scorer = MlpScorer.init(
                        dims, seed=derive_seed(args.seed, "init", trial, n_cand, strategy, role)
                    )
                    scorer, curve = train(scorer, examples, config)
                    return scorer, curve

                fitted, curve = fit(annotated_train, "fit")
                reference, _ = fit(annotated_test, "ref")
                report = zero_one_evaluate(fitted, annotated_test)
                estimate = classification_error(scheme, fitted, reference, annotated_test)
                runs.append(
                    {
                        "strategy": strategy,
                        "n_cand": n_cand,
                        "trial": trial,
                        "accuracy": report.accuracy,
                        "err": estimate.err,
                        "risk_fitted": estimate.risk_fitted,
                        "risk_reference": estimate.risk_reference,
                        "final_train_risk": curve[-1],
                    }
                )
    run_fields = [
        "strategy", "n_cand", "trial", "accuracy", "err",
        "risk_fitted", "risk_reference", "final_train_risk",
    ]
    _write_csv(out / "runs.csv", run_fields, runs)
    summary = []
    n_train_total = args.per_class * k
    for strategy in strategies:
        for n_cand in n_values:
            cell = [r for r in runs if r["strategy"] == strategy and r["n_cand"] == n_cand]
            accs = np.asarray([r["accuracy"] for r in cell])
            errs = np.asarray([r["err"] for r in cell])
            inputs = bounds_mod.BoundInputs(k=k, n_cand=n_cand, n_train=n_train_total)
            summary.append(
                {
                    "strategy": strategy,
                    "n_cand": n_cand,
                    "mean_accuracy": float(accs.mean()),
                    "std_accuracy": float(accs.std()),
                    "mean_err": float(errs.mean()),
                    "std_err": float(errs.std()),
                    "err_bound": bounds_mod.error_bound(strategy, inputs),
                }
            )
    summary_fields = [
        "strategy", "n_cand", "mean_accuracy", "std_accuracy", "mean_err", "std_err", "err_bound",
    ]
    _write_csv(out / "summary.csv", summary_fields, summary)
    _write_manifest(args, out, ["runs.csv", "summary.csv"])
    for row in summary:
        print(
            "{strategy} n={n_cand}: accuracy {mean_accuracy:.4f}+-{std_accuracy:.4f} "
            "err {mean_err:.5f}+-{std_err:.5f} bound {err_bound:.2f}".format(**row)
        )
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def _verify_groups(quick: bool):
    rng = np.random.default_rng(20240801)
    k_range = (3, 4, 5) if quick else (3, 4, 5, 6)
    score_draws = 5 if quick else 20
    surrogates = (SIGMOID_SHIFTED, ZERO_ONE, RAMP_SHIFTED)

    def surrogate_reflection():
        checks = 0
        grid = np.linspace(-30.0, 30.0, 601)
        for surrogate in surrogates:
            z = grid[grid != 0.0] if surrogate is ZERO_ONE else grid
            values = eval_surrogate(surrogate, z) + eval_surrogate(surrogate, -z)
            assert np.max(np.abs(values - surrogate.a)) <= 1e-12
            checks += z.size
            steps = np.diff(eval_surrogate(surrogate, grid))
            assert steps.max() <= 1e-12  # non-increasing
        return checks

    def loss_identities():
        checks = 0
        for k in k_range:
            for surrogate in surrogates:
                for strategy in (Strategy.OVA, Strategy.PC):
                    scheme = scheme_for(strategy, k, surrogate)
                    for _ in range(score_draws):
                        g = rng.uniform(-2.5, 2.5, k)
                        assert abs(ordinary_losses(scheme, g).sum() - scheme.row_sum_const) <= 1e-12
                        for y in range(k):
                            pair = ordinary_loss(scheme, g, y) + complementary_loss(scheme, g, y)
                            assert abs(pair - scheme.pair_sum_const) <= 1e-12
                            checks += 1
        return checks

    def additivity_and_duality():
        checks = 0
        for k in k_range:
            for surrogate in surrogates:
                for strategy in (Strategy.OVA, Strategy.PC):
                    scheme = scheme_for(strategy, k, surrogate)
                    for _ in range(score_draws):
                        g = rng.uniform(-2.5, 2.5, k)
                        for n_cand in range(1, k):
                            for y_set in all_candidate_sets(k, n_cand):
                                direct = candidate_loss(scheme, g, y_set)
                                scale, shift = scheme.additive_constants(n_cand)
                                additive = scale * sum(ordinary_loss(scheme, g, y) for y in y_set) + shift
                                assert abs(additive - direct) <= 1e-12
                                complement = tuple(sorted(set(range(k)) - set(y_set.labels)))
                                assert abs(dual_candidate_loss(scheme, g, complement) - direct) <= 1e-12
                                checks += 2
        return checks

    def risk_rewriting():
        checks = 0
        for k in k_range:
            for surrogate in (SIGMOID_SHIFTED, ZERO_ONE):
                for strategy in (Strategy.OVA, Strategy.PC):
                    scheme = scheme_for(strategy, k, surrogate)
                    for _ in range(max(3, score_draws // 2)):
                        p = rng.dirichlet(np.ones(k))
                        g = rng.uniform(-2.5, 2.5, k)
                        for n_cand in range(1, k):
                            lhs, rhs = true_risk_oracle(scheme, g, p, n_cand)
                            assert abs(lhs - rhs) <= 1e-12
                            checks += 1
        return checks

    def mixture_identity():
        checks = 0
        for k in k_range:
            for _ in range(max(3, score_draws // 2)):
                p = rng.dirichlet(np.ones(k))
                for n_cand in range(1, k):
                    beta, q = posterior_mixture(p, n_cand)
                    for alpha in range(k):
                        mass = sum(
                            candidate_probability(p, y_set) / n_cand
                            for y_set in all_candidate_sets(k, n_cand)
                            if alpha in y_set
                        )
                        assert abs(mass - q[alpha]) <= 1e-12
                        checks += 1
        return checks

    def sampler_law():
        k, n_cand, draws = 4, 2, 2000 if quick else 20000
        p = np.asarray([0.4, 0.3, 0.2, 0.1])
        sets = list(all_candidate_sets(k, n_cand))
        expected = np.asarray([candidate_probability(p, s) for s in sets]) * draws
        counts = {s.labels: 0 for s in sets}
        sampler_rng = np.random.default_rng(7)
        for _ in range(draws):
            counts[sample_candidate_set(p, n_cand, sampler_rng).labels] += 1
        observed = np.asarray([counts[s.labels] for s in sets], dtype=float)
        stat = float(((observed - expected) ** 2 / expected).sum())
        from scipy.stats import chi2

        assert stat < chi2.ppf(0.999, len(sets) - 1), f"chi-square statistic {stat}"
        return draws

    def bound_values():
        checks = 0
        for k in (5, 10):
            previous = {"ova": -math.inf, "pc": -math.inf}
            for n_cand in range(1, k):
                inputs = bounds_mod.BoundInputs(k=k, n_cand=n_cand, n_train=10000)
                for strategy in ("ova", "pc"):
                    value = bounds_mod.error_bound(strategy, inputs)
                    assert value > previous[strategy]
                    previous[strategy] = value
                    checks += 1
        spot = bounds_mod.error_bound("ova", bounds_mod.BoundInputs(k=10, n_cand=1, n_train=10000))
        expect = 4 * 10 * 11 / 9 * 0.5 + (10 / 9) * math.sqrt(2 * math.log(20.0) / 10000)
        assert abs(spot - expect) <= 1e-9 * expect
        return checks + 1

    def sup_norm_search():
        checks = 0
        ks = (3, 4) if quick else (3, 4, 5, 6)
        for k in ks:
            for n_cand in range(1, k):
                for strategy in ("ova", "pc"):
                    analytic = bounds_mod.sup_norm(strategy, k, n_cand)
                    found = bounds_mod.empirical_sup_norm_search(strategy, k, n_cand, trials=10)
                    assert analytic - 1e-3 <= found <= analytic + 1e-9
                    checks += 1
        return checks

    def gradient_checks():
        checks = 0
        step = 1e-5
        for k in (3, 5):
            for strategy in (Strategy.OVA, Strategy.PC):
                scheme = scheme_for(strategy, k)
                for _ in range(5 if quick else 15):
                    g = rng.uniform(-2.0, 2.0, k)
                    n_cand = int(rng.integers(1, k))
                    y_set = sample_candidate_set(np.full(k, 1.0 / k), n_cand, rng)
                    analytic = candidate_loss_grad(scheme, g, y_set)
                    fd = np.zeros(k)
                    for j in range(k):
                        up, down = g.copy(), g.copy()
                        up[j] += step
                        down[j] -= step
                        fd[j] = (candidate_loss(scheme, up, y_set) - candidate_loss(scheme, down, y_set)) / (2 * step)
                    scale = max(np.linalg.norm(analytic), np.linalg.norm(fd), 1e-8)
                    assert np.linalg.norm(analytic - fd) / scale < 1e-5
                    checks += 1
        return checks

    def idx_total():
        count = 1000 if quick else 5000
        fuzz_rng = np.random.default_rng(99)
        for _ in range(count):
            size = int(fuzz_rng.integers(0, 64))
            blob = fuzz_rng.integers(0, 256, size, dtype=np.uint8).tobytes()
            try:
                data_mod.parse_idx(blob)
            except data_mod.IdxFormatError:
                pass
        tensor = data_mod.IdxTensor(data_mod.IDX_UBYTE, (2, 3), np.arange(6, dtype=np.uint8).reshape(2, 3))
        parsed = data_mod.parse_idx(data_mod.write_idx(tensor))
        assert parsed.dims == (2, 3) and np.array_equal(parsed.values, tensor.values)
        return count + 1

    return [
        ("surrogate reflection/monotone", surrogate_reflection),
        ("ordinary/complementary identities", loss_identities),
        ("additivity and duality", additivity_and_duality),
        ("risk rewriting oracle", risk_rewriting),
        ("posterior mixture identity", mixture_identity),
        ("sampler chi-square", sampler_law),
        ("error-bound values", bound_values),
        ("sup-norm search", sup_norm_search),
        ("gradient checks", gradient_checks),
        ("idx parser totality", idx_total),
    ]


def cmd_verify(args) -> int:
    failures = 0
    for name, check in _verify_groups(args.quick):
        try:
            count = check()
        except AssertionError as exc:
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"ok {name} ({count} checks)")
    if failures:
        print(f"{failures} group(s) failed")
        return EXIT_VERIFY
    print("all verification groups passed")
    return EXIT_OK


# --------------------------------------------------------------------------
# rerun


def cmd_rerun(args) -> int:
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    command = manifest.get("command")
    if command not in COMMANDS or command == "rerun":
        raise CliError(f"manifest names unknown command {command!r}")
    config = dict(manifest.get("config", {}))
    if args.out:
        config["out"] = args.out
    replay = argparse.Namespace(**config)
    replay.command = command
    return COMMANDS[command](replay)


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="candlearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="base seed for all randomness")
        p.add_argument("--out", default=None, help=f"output directory (default $({OUT_ENV}) or .)")
        p.add_argument("--format", choices=["csv"], default="csv", help="tabular output format")

    p = sub.add_parser("gen", help="generate a labeled dataset (synthetic blobs or IDX ingestion)")
    common(p)
    p.add_argument("--k", type=int, default=None, help="number of classes")
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--per-class", type=int, default=500, dest="per_class")
    p.add_argument("--radius", type=float, default=3.0, help="mean spread (circle radius in 2-D)")
    p.add_argument("--stddev", type=float, default=1.0)
    p.add_argument("--from-idx", nargs=2, metavar=("IMAGES", "LABELS"), default=None, dest="from_idx")
    p.add_argument("--keep-classes", default=None, dest="keep_classes",
                   help="comma list of classes to keep (relabeled densely)")
    p.add_argument("--filename", default="dataset.jsonl")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("annotate", help="draw candidate sets for a labeled dataset")
    common(p)
    p.add_argument("dataset")
    p.add_argument("--n", default=None, help="candidate-set size (int or 'K-1')")
    p.add_argument("--stochastic-n", action="store_true", dest="stochastic_n",
                   help="draw the set size uniformly per example")
    p.add_argument("--annotator", default="auto",
                   help="'auto', 'oracle', 'onehot', or a scorer checkpoint path")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--filename", default="annotated.jsonl")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("train", help="train a scorer on candidate annotations")
    common(p)
    p.add_argument("dataset")
    p.add_argument("--strategy", choices=["ova", "pc"], default="ova")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=64, dest="batch_size")
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--weight-decay", type=float, default=1e-4, dest="weight_decay")
    p.add_argument("--optimizer", choices=["sgd", "adam"], default="adam")
    p.add_argument("--hidden", default="16", help="comma list of hidden widths")
    p.add_argument("--halve-lr-every", type=int, default=None, dest="halve_lr_every")
    p.add_argument("--checkpoint", default="checkpoint.json")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on annotated data with true labels")
    common(p)
    p.add_argument("dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--strategy", choices=["ova", "pc"], default=None,
                   help="also report the rescaled candidate risk for this family")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bounds", help="sweep the generalization-bound calculators")
    common(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--strategy", choices=["ova", "pc", "both"], default="both")
    p.add_argument("--n", default="1..K-1", help="set sizes, e.g. '1..9' or '1,2,3' or 'K-1'")
    p.add_argument("--n-train", type=int, default=10000, dest="n_train")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--lipschitz", type=float, default=1.0)
    p.add_argument("--rad", type=float, default=0.5)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run the built-in property checks")
    common(p)
    p.add_argument("--quick", action="store_true", help="smaller check counts")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", help="N-sweep training experiment on synthetic blobs")
    common(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--per-class", type=int, default=100, dest="per_class")
    p.add_argument("--radius", type=float, default=3.0)
    p.add_argument("--stddev", type=float, default=1.0)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--n-values", default="1..K-1", dest="n_values")
    p.add_argument("--seeds", type=int, default=5, help="number of trials")
    p.add_argument("--strategy", choices=["ova", "pc", "both"], default="both")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=64, dest="batch_size")
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--weight-decay", type=float, default=1e-4, dest="weight_decay")
    p.add_argument("--optimizer", choices=["sgd", "adam"], default="adam")
    p.add_argument("--hidden", default="16")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("rerun", help="replay a previous run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the output directory")
    p.set_defaults(func=cmd_rerun)

    return parser


COMMANDS = {
    "gen": cmd_gen,
    "annotate": cmd_annotate,
    "train": cmd_train,
    "eval": cmd_eval,
    "bounds": cmd_bounds,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (CliError, InvalidCandidateSetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
