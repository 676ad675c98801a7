"""Batch command surface over the pipeline.

Each subcommand is a thin wrapper over one module operation, reading and
writing the documented file formats, so a full run composes at the shell:

    scorefuse split      -> train/test manifests
    scorefuse preprocess -> resized (and, for training data, augmented) PGMs
    scorefuse featurize  -> feature CSV from preprocessed images
    scorefuse train-base / bag / boost -> model JSON
    scorefuse predict    -> score-table CSV
    scorefuse fuse       -> fused score-table CSV (any combining rule)
    scorefuse cascade    -> binary+multiclass fusion
    scorefuse eval       -> metrics report (JSON + text)

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numeric
failure. On failure, stderr carries a single machine-parseable line
``scorefuse: <CODE>: <message>``.

All randomness flows through ``--seed`` (default 42, overridable by the
``EF_SEED`` environment variable; explicit flags win). Outputs are written
atomically: partial files never persist.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import cascade as cascade_mod
from . import combine, evaluate, images, io, linear
from .errors import NumericError, ScoreFuseError, ValidationError
from .types import LabelSpace

DEFAULT_SEED = 42
SEED_ENV_VAR = "EF_SEED"

_FUSE_METHODS = {
    "majority": "majority_vote",
    "max": "max_rule",
    "avg": "prob_average",
    "wavg": "weighted_average",
    "stack": "stacking",
    "moe": "mixture_of_experts",
}


class UsageError(Exception):
    """Bad flag combination detected after parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; the contract is 1
        self.print_usage(sys.stderr)
        _fail_line("E_USAGE", message)
        raise SystemExit(1)


def _fail_line(code: str, message: str) -> None:
    print(f"scorefuse: {code}: {message}", file=sys.stderr)


def resolve_seed(flag_value: int | None) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
    return DEFAULT_SEED


def _classes(text: str) -> LabelSpace:
    return LabelSpace.of(tuple(name for name in text.split(",") if name))


def _weights(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise UsageError(f"weights must be comma-separated numbers: {exc}") from exc


def _require_inputs(*paths: str | Path | None) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise ScoreFuseError(f"input path does not exist: {p}")


def _train_config(args, seed: int) -> linear.TrainConfig:
    return linear.TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        l2=args.l2,
        seed=seed,
    )


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", required=True, help="feature CSV (sample_id,label,f0,...)")
    p.add_argument("--lr", type=float, default=0.1, help="SGD learning rate")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32, help="minibatch size")
    p.add_argument("--l2", type=float, default=0.0, help="L2 penalty on the weight matrix")
    p.add_argument("--classes", required=True, type=_classes, help="ordered class names, comma-separated")
    p.add_argument("--out", required=True, help="output model JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scorefuse", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="stratified train/test split of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--classes", required=True, type=_classes)
    p.add_argument("--ratio", type=float, default=0.8, help="train fraction per class")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output prefix; writes <out>_train.csv and <out>_test.csv")

    p = sub.add_parser("preprocess", help="load, square-resize and (train only) augment images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--classes", required=True, type=_classes)
    p.add_argument("--size", type=int, default=224, help="output side length in pixels")
    p.add_argument("--mode", choices=("pad", "stretch"), default="pad")
    p.add_argument("--fill", type=float, default=0.0, help="pad intensity in [0,1]")
    p.add_argument("--normalize", action="store_true", help="min-max normalize before resizing")
    p.add_argument("--augment", default=None,
                   help="comma-separated subset of rot90,flip-h,flip-v (training partition only)")
    p.add_argument("--partition", choices=("train", "test"), default="train")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output directory (PGMs plus manifest.csv)")

    p = sub.add_parser("featurize", help="flatten preprocessed images into a feature CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--classes", required=True, type=_classes)
    p.add_argument("--side", type=int, default=16, help="stretch-resize side; d = side**2")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-base", help="train the multinomial-logistic base learner")
    _add_train_flags(p)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("predict", help="score a feature CSV with a saved model or ensemble")
    p.add_argument("--model", required=True, help="model JSON (linear, bag or boost bundle)")
    p.add_argument("--features", required=True)
    p.add_argument("--model-id", default=None, help="model id to stamp on the table (default: file stem)")
    p.add_argument("--out", required=True, help="output score-table CSV")

    p = sub.add_parser("bag", help="train a bagging ensemble over bootstrap subsets")
    _add_train_flags(p)
    p.add_argument("--replicates", type=int, default=15, help="number of bootstrap members")
    p.add_argument("--no-bootstrap", action="store_true",
                   help="train every member on the full dataset (identity subsets)")
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("boost", help="train a stagewise reweighted boosting ensemble")
    _add_train_flags(p)
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("fuse", help="combine score tables with one ensemble rule")
    p.add_argument("--method", required=True, choices=sorted(_FUSE_METHODS))
    p.add_argument("--scores", required=True, nargs="+", help="input score-table CSVs")
    p.add_argument("--weights", type=_weights, default=None, help="comma-separated, for wavg")
    p.add_argument("--meta", default=None, help="meta-model JSON, for stack")
    p.add_argument("--gate", default=None, help="gate-model JSON, for moe")
    p.add_argument("--features", default=None, help="feature CSV aligned with the tables, for moe")
    p.add_argument("--tie-policy", choices=("first", "random"), default="first")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--spec-out", default=None, help="also write the ensemble spec JSON here")
    p.add_argument("--out", required=True)

    p = sub.add_parser("cascade", help="fuse a binary detector with a multiclass classifier")
    p.add_argument("--binary", required=True, help="binary score-table CSV")
    p.add_argument("--multi", required=True, help="multiclass score-table CSV")
    p.add_argument("--rule", choices=("lift", "gate"), default="lift")
    p.add_argument("--threshold", type=float, default=0.5, help="gate threshold on the 'no' mass")
    p.add_argument("--post", choices=("avg", "wavg"), default="avg",
                   help="post-combiner blending the lifted and multiclass vectors")
    p.add_argument("--weights", type=_weights, default=None, help="two weights, for --post wavg")
    p.add_argument("--bin-negative", default="no", help="binary class meaning 'no tumor'")
    p.add_argument("--multi-negative", default="no_tumor", help="multiclass negative class")
    p.add_argument("--spec-out", default=None, help="also write the cascade spec JSON here")
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="confusion matrix, metrics and report for a labeled table")
    p.add_argument("--scores", required=True, help="score-table CSV with true labels")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--dataset", default=None, help="dataset tag recorded in the report")
    p.add_argument("--split-label", default=None, help="how the evaluated split was made")
    p.add_argument("--model-id", default=None, help="override the table's model id in the report")
    p.add_argument("--spec", default=None, help="ensemble or cascade spec JSON to embed")

    return parser


# -- command bodies -----------------------------------------------------------


def _cmd_split(args) -> int:
    _require_inputs(args.manifest)
    manifest = io.read_manifest(args.manifest, args.classes)
    assignment = evaluate.stratified_split(manifest, args.ratio, resolve_seed(args.seed))
    by_id = {e.sample_id: e for e in manifest.entries}
    for suffix, ids in (("_train", assignment.train_ids), ("_test", assignment.test_ids)):
        part = io.DatasetManifest(args.classes, tuple(by_id[i] for i in ids))
        io.write_manifest(part, f"{args.out}{suffix}.csv")
    print(f"split {len(manifest)} samples -> {len(assignment.train_ids)} train / "
          f"{len(assignment.test_ids)} test")
    return 0


def _augment_plan(spec_text: str | None, seed: int) -> images.AugmentPlan:
    rotations: tuple[int, ...] = (0,)
    flips: list[str] = []
    for token in (spec_text or "").split(","):
        token = token.strip()
        if not token:
            continue
        if token == "rot90":
            rotations = (0, 90, 180, 270)
        elif token == "flip-h":
            flips.append("horizontal")
        elif token == "flip-v":
            flips.append("vertical")
        else:
            raise UsageError(f"unknown augment token {token!r}; expected rot90, flip-h, flip-v")
    return images.AugmentPlan(rotations, tuple(flips), seed)


def _safe_filename(sample_id: str) -> str:
    return sample_id.replace("/", "_").replace("\\", "_")


def _cmd_preprocess(args) -> int:
    if args.augment and args.partition == "test":
        raise UsageError("augmentation is restricted to the training partition")
    _require_inputs(args.manifest)
    manifest = io.read_manifest(args.manifest, args.classes)
    plan = _augment_plan(args.augment, resolve_seed(args.seed))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = Path(args.manifest).parent
    entries = []
    for entry in manifest.entries:
        img = images.load_image(root / entry.path)
        if args.normalize:
            img = images.min_max_normalize(img)
        img = images.resize_square(img, args.size, args.mode, args.fill)
        if args.augment:
            variants = images.augment(img, plan)
            derived = images.augment_ids(entry.sample_id, plan)
        else:
            variants, derived = [img], [entry.sample_id]
        for variant, sid in zip(variants, derived):
            filename = f"{_safe_filename(sid)}.pgm"
            images.save_pgm(variant, out_dir / filename)
            entries.append(io.ManifestEntry(sid, filename, entry.label))
    io.write_manifest(io.DatasetManifest(args.classes, tuple(entries)), out_dir / "manifest.csv")
    print(f"preprocessed {len(manifest)} images -> {len(entries)} files in {out_dir}")
    return 0


def _cmd_featurize(args) -> int:
    _require_inputs(args.manifest)
    manifest = io.read_manifest(args.manifest, args.classes)
    root = Path(args.manifest).parent
    rows = [
        linear.extract_features(images.load_image(root / e.path), args.side)
        for e in manifest.entries
    ]
    io.write_feature_table(
        args.out,
        [e.sample_id for e in manifest.entries],
        np.stack(rows) if rows else np.zeros((0, args.side**2)),
        [e.label for e in manifest.entries],
    )
    print(f"featurized {len(manifest)} images at d={args.side ** 2} -> {args.out}")
    return 0


def _load_labeled_features(path: str):
    ids, labels, X = io.read_feature_table(path)
    if any(lab is None for lab in labels):
        raise ValidationError(f"{path}: training requires a label on every row")
    return ids, list(labels), X


def _cmd_train_base(args) -> int:
    _require_inputs(args.features)
    _, labels, X = _load_labeled_features(args.features)
    config = _train_config(args, resolve_seed(args.seed))
    model = linear.train(X, labels, args.classes, config)
    linear.save_model(model, args.out, config)
    print(f"trained base model on {X.shape[0]} samples -> {args.out}")
    return 0


def _cmd_bag(args) -> int:
    _require_inputs(args.features)
    _, labels, X = _load_labeled_features(args.features)
    seed = resolve_seed(args.seed)
    ens = combine.bagging_train(
        X, labels, args.classes, args.replicates,
        _train_config(args, seed), seed, bootstrap=not args.no_bootstrap,
    )
    combine.save_ensemble(ens, args.out)
    print(f"trained bagging ensemble ({args.replicates} members) -> {args.out}")
    return 0


def _cmd_boost(args) -> int:
    _require_inputs(args.features)
    _, labels, X = _load_labeled_features(args.features)
    ens = combine.boosting_train(
        X, labels, args.classes, args.rounds, _train_config(args, resolve_seed(args.seed))
    )
    combine.save_ensemble(ens, args.out)
    print(f"trained boosting ensemble ({len(ens.stages)} stages kept) -> {args.out}")
    return 0


def _load_any_model(path: str):
    import json

    with open(path, encoding="utf-8") as handle:
        kind = json.load(handle).get("kind")
    if kind == linear.MODEL_KIND:
        return linear.load_model(path)
    return combine.load_ensemble(path)


def _cmd_predict(args) -> int:
    _require_inputs(args.model, args.features)
    model = _load_any_model(args.model)
    ids, labels, X = io.read_feature_table(args.features)
    model_id = args.model_id or Path(args.model).stem
    if isinstance(model, linear.LinearModel):
        table = linear.score_table(model, model_id, ids, X, labels)
    elif isinstance(model, combine.BagEnsemble):
        probs = combine.bag_predict_matrix(model, X)
        table = _table_from_probs(model.label_space, model_id, ids, probs, labels)
    else:
        rows = np.zeros((len(ids), len(model.label_space)))
        for i in range(len(ids)):
            winner = combine.boosting_predict(model, X[i])
            rows[i, model.label_space.index(winner)] = 1.0
        table = _table_from_probs(model.label_space, model_id, ids, rows, labels)
    io.write_score_table(table, args.out)
    print(f"scored {len(ids)} samples with {model_id} -> {args.out}")
    return 0


def _table_from_probs(space, model_id, ids, probs, labels):
    from .types import ProbVector, ScoreRow, ScoreTable

    rows = tuple(
        ScoreRow(ids[i], ProbVector(tuple(float(v) for v in probs[i])),
                 labels[i] if labels is not None else None)
        for i in range(len(ids))
    )
    return ScoreTable(space, model_id, rows)


def _cmd_fuse(args) -> int:
    method = _FUSE_METHODS[args.method]
    if method == "weighted_average" and args.weights is None:
        raise UsageError("--method wavg requires --weights")
    if method == "stacking" and args.meta is None:
        raise UsageError("--method stack requires --meta")
    if method == "mixture_of_experts" and (args.gate is None or args.features is None):
        raise UsageError("--method moe requires --gate and --features")
    _require_inputs(*args.scores, args.meta, args.gate, args.features)
    tables = [io.read_score_table(p) for p in args.scores]
    meta = linear.load_model(args.meta) if args.meta else None
    gate = linear.load_model(args.gate) if args.gate else None
    features = None
    if args.features:
        ids, _, features = io.read_feature_table(args.features)
        if ids != tables[0].sample_ids:
            raise ValidationError("--features rows must match the score tables' sample ids")
    seed = resolve_seed(args.seed)
    fused = combine.fuse_tables(
        method, tables, weights=args.weights, meta=meta, gate=gate,
        features=features, tie_policy=args.tie_policy,
        seed=seed if args.tie_policy == "random" else None,
    )
    io.write_score_table(fused, args.out)
    if args.spec_out:
        params: dict = {"tie_policy": args.tie_policy}
        if args.weights is not None:
            params["weights"] = list(args.weights)
        if meta is not None:
            params["meta_model"] = linear.model_to_dict(meta)
        if gate is not None:
            params["gate"] = linear.model_to_dict(gate)
        combine.save_spec(combine.EnsembleSpec(method, params), args.spec_out)
    print(f"fused {len(tables)} tables with {method} -> {args.out}")
    return 0


def _cmd_cascade(args) -> int:
    if args.post == "wavg" and args.weights is None:
        raise UsageError("--post wavg requires --weights")
    _require_inputs(args.binary, args.multi)
    spec = cascade_mod.CascadeSpec(
        rule={"lift": "lift_proportional", "gate": "hard_gate"}[args.rule],
        gate_threshold=args.threshold,
        post_combiner={"avg": "prob_average", "wavg": "weighted_average"}[args.post],
        weights=tuple(args.weights) if args.weights else None,
    )
    bin_table = io.read_score_table(args.binary)
    multi_table = io.read_score_table(args.multi)
    fused = cascade_mod.cascade_predict(
        bin_table, multi_table, spec, args.bin_negative, args.multi_negative
    )
    io.write_score_table(fused, args.out)
    if args.spec_out:
        cascade_mod.save_cascade_spec(spec, args.spec_out)
    print(f"cascaded {bin_table.model_id} + {multi_table.model_id} -> {args.out}")
    return 0


def _cmd_eval(args) -> int:
    import json

    _require_inputs(args.scores, args.spec)
    table = io.read_score_table(args.scores, model_id=args.model_id)
    cm = evaluate.confusion(table)
    m = evaluate.metrics(cm)
    spec_payload = None
    if args.spec:
        with open(args.spec, encoding="utf-8") as handle:
            spec_payload = json.load(handle)
    report = evaluate.build_report(
        m,
        cm,
        run_meta={
            "dataset": args.dataset,
            "model_id": table.model_id,
            "split": args.split_label,
            "seed": None,
        },
        ensemble_spec=spec_payload,
    )
    evaluate.write_report(report, args.report)
    sys.stdout.write(evaluate.render_report_text(report))
    return 0


_COMMANDS = {
    "split": _cmd_split,
    "preprocess": _cmd_preprocess,
    "featurize": _cmd_featurize,
    "train-base": _cmd_train_base,
    "predict": _cmd_predict,
    "bag": _cmd_bag,
    "boost": _cmd_boost,
    "fuse": _cmd_fuse,
    "cascade": _cmd_cascade,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        _fail_line("E_USAGE", str(exc))
        return 1
    except NumericError as exc:
        _fail_line(exc.code, str(exc))
        return 3
    except ScoreFuseError as exc:
        _fail_line(exc.code, str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
