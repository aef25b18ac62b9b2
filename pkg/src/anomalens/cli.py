"""Command-line surface.

Commands: train, score, explain, eval-roc, eval-events, simulate,
ingest-nslkdd, experiment. Every command accepts --config FILE (flat
key=value pairs) and --seed S; flags beat config values, config values
beat defaults, and the ANOMALENS_SEED environment variable is the
last-resort seed. Exit codes: 0 success, 1 usage error, 2 bad data,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from .config import Config, load_config, resolve_seed
from .contribution import (
    ContributionConfig,
    estimate_contribution,
)
from .datagen import (
    FaultSpec,
    SimConfig,
    gen_simulated,
    inject_fault,
    load_nslkdd,
    read_csv,
    read_events_csv,
    write_csv,
    write_events_csv,
)
from .detector import AEDetector, PCABaseline, mse_score_batch, pca_fit, pca_score_batch, train_detector
from .errors import DataError, NumericalError
from .evaluation import EventWindowConfig, event_tpr_fpr, roc_auc, threshold_for_fpr
from .multimodal import MAEModel, mae_estimate_contribution, wmse_score_batch
from .neuralnet import TrainConfig
from .persistence import load_model, save_model
from .rng import PortableRng, derive_seed


class UsageError(Exception):
    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_table(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _read_column(path, column):
    """One named column from a CSV with a header row."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise DataError(f"{path} is empty")
    header = lines[0].split(",")
    if column not in header:
        raise DataError(f"{path} has no column {column!r} (found {header})")
    idx = header.index(column)
    out = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
        out.append(parts[idx])
    return out


def _pick(flag, cfg: Config, key: str, default, getter):
    if flag is not None:
        return flag
    got = getter(cfg, key)
    return default if got is None else got


def _train_config(args, cfg: Config, seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=_pick(args.epochs, cfg, "train.epochs", 100, Config.get_int),
        batch_size=_pick(args.batch_size, cfg, "train.batch_size", 50, Config.get_int),
        learning_rate=_pick(args.learning_rate, cfg, "train.learning_rate", 0.01, Config.get_float),
        weight_decay=_pick(args.weight_decay, cfg, "train.weight_decay", 0.0, Config.get_float),
        seed=seed,
    )


def _contribution_config(args, cfg: Config) -> ContributionConfig:
    lambdas = args.lambdas
    if lambdas is None:
        lambdas = cfg.get_floats("contribution.lambdas")
    kwargs = {}
    if lambdas is not None:
        kwargs["lambdas"] = tuple(lambdas)
    step = _pick(args.step_size, cfg, "contribution.step_size", None, Config.get_str)
    if step is not None:
        kwargs["step_size"] = step if step == "backtracking" else float(step)
    max_iters = _pick(args.max_iters, cfg, "contribution.max_iters", None, Config.get_int)
    if max_iters is not None:
        kwargs["max_iters"] = max_iters
    mse_stop = _pick(args.mse_stop, cfg, "contribution.mse_stop", None, Config.get_float)
    if mse_stop is not None:
        kwargs["mse_stop"] = mse_stop
    return ContributionConfig(**kwargs)


def _load_streams(paths: str):
    arrays, names = [], []
    for part in paths.split(","):
        arr, cols = read_csv(part.strip())
        arrays.append(arr)
        names.append(cols)
    return arrays, names


# ---------------------------------------------------------------------------
# commands


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg)
    data, _ = read_csv(args.data)
    kind = _pick(args.kind, cfg, "train.kind", "ae", Config.get_str)
    if kind == "pca":
        m = _pick(args.components, cfg, "train.components", None, Config.get_int)
        if m is None:
            raise UsageError("--kind pca needs --components")
        model = pca_fit(data, m)
    elif kind == "ae":
        hidden = args.hidden
        if hidden is None:
            hidden = cfg.get_ints("train.hidden", (10,))
        acts = args.activations
        if acts is None:
            acts = cfg.get_strs("train.activations", ("sigmoid", "identity"))
        model = train_detector(data, list(hidden), list(acts), _train_config(args, cfg, seed))
    else:
        raise UsageError(f"unknown model kind {kind!r}")
    save_model(args.out, model)
    print(f"saved {kind} model to {args.out} (seed={seed})")
    return 0


def cmd_score(args) -> int:
    cfg = load_config(args.config)
    model = load_model(args.model)
    rows = []
    if isinstance(model, MAEModel):
        streams, _ = _load_streams(args.data)
        if len(streams) != len(model.schema.types):
            raise DataError(
                f"model has {len(model.schema.types)} data types, got {len(streams)} files"
            )
        scores, _ = wmse_score_batch(model, streams)
        threshold = model.threshold if args.threshold is None else args.threshold
    elif isinstance(model, AEDetector):
        data, _ = read_csv(args.data)
        scores = mse_score_batch(model, data)
        threshold = model.threshold if args.threshold is None else args.threshold
    elif isinstance(model, PCABaseline):
        if args.threshold is None:
            raise UsageError("pca models carry no threshold; pass --threshold")
        data, _ = read_csv(args.data)
        scores = pca_score_batch(model, data)
        threshold = args.threshold
    else:
        raise DataError(f"cannot score with {type(model).__name__}")
    for i, s in enumerate(scores):
        rows.append((i, float(s), float(threshold), bool(s > threshold)))
    _write_table(args.out, ["record_index", "score", "threshold", "is_anomalous"], rows)
    return 0


def cmd_explain(args) -> int:
    cfg = load_config(args.config)
    model = load_model(args.model)
    ccfg = _contribution_config(args, cfg)
    if isinstance(model, MAEModel):
        streams, names = _load_streams(args.data)
        if len(streams) != len(model.schema.types):
            raise DataError(
                f"model has {len(model.schema.types)} data types, got {len(streams)} files"
            )
        t = streams[0].shape[0]
        if not 0 <= args.record < t:
            raise DataError(f"record {args.record} outside 0..{t - 1}")
        records = [s[args.record] for s in streams]
        results = mae_estimate_contribution(model, records, ccfg)
        eta = np.concatenate([r.eta for r in results])
        feature_names = [
            f"{mt.name}:{col}"
            for mt, cols in zip(model.schema.types, names)
            for col in cols
        ]
        head = results[0]
        meta = {
            "lambda_used": head.lambda_used,
            "iterations": head.iterations,
            "final_mse": head.final_mse,
            "converged": int(head.converged),
        }
    elif isinstance(model, AEDetector):
        data, feature_names = read_csv(args.data)
        if not 0 <= args.record < data.shape[0]:
            raise DataError(f"record {args.record} outside 0..{data.shape[0] - 1}")
        res = estimate_contribution(model, data[args.record], ccfg)
        eta = res.eta
        meta = {
            "lambda_used": res.lambda_used,
            "iterations": res.iterations,
            "final_mse": res.final_mse,
            "converged": int(res.converged),
        }
    else:
        raise DataError(f"cannot explain with {type(model).__name__}")

    order = np.lexsort((np.arange(eta.size), -np.abs(eta)))
    rank = np.empty(eta.size, dtype=int)
    rank[order] = np.arange(1, eta.size + 1)
    rows = [(i, feature_names[i], float(eta[i]), int(rank[i])) for i in range(eta.size)]

    header_lines = [f"# {k}={_fmt(v)}" for k, v in meta.items()]
    body = ["dimension_index,feature_name,eta,abs_rank"]
    body.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(header_lines + body) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


def cmd_eval_roc(args) -> int:
    scores = [float(v) for v in _read_column(args.scores, args.score_column)]
    raw = _read_column(args.labels, args.label_column)
    try:
        labels = [bool(int(v)) for v in raw]
    except ValueError:
        raise DataError(f"label column {args.label_column!r} must hold 0/1 values") from None
    if len(scores) != len(labels):
        raise DataError(f"{len(scores)} scores vs {len(labels)} labels")
    curve = roc_auc(scores, labels)
    print(f"auroc={curve.auroc!r}")
    if args.out is not None:
        _write_table(args.out, ["fpr", "tpr"], list(zip(curve.fpr, curve.tpr)))
    return 0


def _parse_spans(text):
    spans = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            start, _, end = part.partition(":")
            spans.append((int(start), int(end)))
        except ValueError:
            raise DataError(f"bad excluded span {part!r}; expected start:end") from None
    return tuple(spans)


def cmd_eval_events(args) -> int:
    cfg = load_config(args.config)
    scores = np.array([float(v) for v in _read_column(args.scores, args.score_column)])
    events = read_events_csv(args.events)
    window = _pick(args.window, cfg, "events.window", 5, Config.get_int)
    excluded = _parse_spans(args.excluded) if args.excluded else ()
    wcfg = EventWindowConfig(window=window, excluded=excluded)

    threshold = args.threshold
    if threshold is None and args.target_fpr is not None:
        mask = np.ones(scores.size, dtype=bool)
        for e in events:
            lo = max(0, e.index - window)
            hi = min(scores.size - 1, e.index + window)
            mask[lo : hi + 1] = False
        for start, end in excluded:
            lo, hi = max(0, start), min(scores.size - 1, end)
            if lo <= hi:
                mask[lo : hi + 1] = False
        if not mask.any():
            raise DataError("no normal bins left to calibrate a threshold on")
        threshold = threshold_for_fpr(scores[mask], args.target_fpr)
    if threshold is None:
        raise UsageError("pass --threshold or --target-fpr")

    res = event_tpr_fpr(scores, threshold, events, wcfg)
    print(f"threshold={threshold!r}")
    print(f"tpr={res.tpr!r} fpr={res.fpr!r}")
    print(
        f"detected={res.detected} n_events={res.n_events} "
        f"normal_bins={res.n_normal_bins} false_bins={res.n_false_bins} "
        f"vacuous_tpr={int(res.vacuous_tpr)}"
    )
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg)
    sim = SimConfig(
        n_components=_pick(args.components, cfg, "sim.components", 10, Config.get_int),
        dims_per_component=_pick(
            args.dims_per_component, cfg, "sim.dims_per_component", 100, Config.get_int
        ),
        beta=_pick(args.beta, cfg, "sim.beta", 100.0, Config.get_float),
        gamma=_pick(args.gamma, cfg, "sim.gamma", 50.0, Config.get_float),
        layout=_pick(args.layout, cfg, "sim.layout", "interleaved", Config.get_str),
        seed=seed,
    )
    t = _pick(args.t, cfg, "sim.t", sim.t_train, Config.get_int)
    data = gen_simulated(sim, t=t)

    labels = []
    if args.faults > 0:
        if args.events_out is None:
            raise UsageError("--faults needs --events-out for the ground-truth labels")
        rng = PortableRng(derive_seed(seed, 0xE7))
        where = sorted(int(i) for i in rng.choice_without_replacement(t, args.faults))
        for idx in where:
            direction = args.direction
            if direction == "mixed":
                direction = "increase" if rng.uniform(0, 1, 1)[0] < 0.5 else "decrease"
            spec = FaultSpec(n_f=args.n_f, direction=direction)
            data[idx], label = inject_fault(data[idx], spec, sim, seed=derive_seed(seed, 1000 + idx))
            labels.append(dataclasses.replace(label, index=idx))
    names = [f"d{i}" for i in range(data.shape[1])]
    write_csv(args.out, data, names)
    if args.events_out is not None:
        write_events_csv(args.events_out, labels)
    print(f"wrote {t} records x {data.shape[1]} dims to {args.out} (seed={seed})")
    return 0


def cmd_ingest_nslkdd(args) -> int:
    import os

    os.makedirs(args.out_dir, exist_ok=True)
    train = load_nslkdd(args.train)
    write_csv(os.path.join(args.out_dir, "train_features.csv"), train.x, train.feature_names)
    _write_table(
        os.path.join(args.out_dir, "train_labels.csv"),
        ["record_index", "category", "label"],
        [
            (i, cat, int(cat != "normal"))
            for i, cat in enumerate(train.categories)
        ],
    )
    msg = [f"train: {train.x.shape[0]} records -> {train.x.shape[1]} dims"]
    if args.test is not None:
        test = load_nslkdd(args.test, vocabulary=train.vocabulary)
        write_csv(os.path.join(args.out_dir, "test_features.csv"), test.x, test.feature_names)
        _write_table(
            os.path.join(args.out_dir, "test_labels.csv"),
            ["record_index", "category", "label"],
            [
                (i, cat, int(cat != "normal"))
                for i, cat in enumerate(test.categories)
            ],
        )
        msg.append(f"test: {test.x.shape[0]} records -> {test.x.shape[1]} dims")
    print("; ".join(msg))
    return 0


def cmd_experiment(args) -> int:
    from . import experiments

    cfg = load_config(args.config)
    seed = resolve_seed(args.seed, cfg)
    if args.which == "sim61":
        sim_cfg = experiments.Sim61Config(
            runs=_pick(args.runs, cfg, "experiment.runs", 10, Config.get_int),
            scale=_pick(args.scale, cfg, "experiment.scale", 1.0, Config.get_float),
            n_f=_pick(args.n_f, cfg, "experiment.n_f", 10, Config.get_int),
            beta=_pick(args.beta, cfg, "experiment.beta", 100.0, Config.get_float),
            gamma=_pick(args.gamma, cfg, "experiment.gamma", 50.0, Config.get_float),
            seed=seed,
        )
        runner = experiments.run_sim61_sweep if args.sweep else experiments.run_sim61
        report = runner(sim_cfg, out_dir=args.out_dir, emit_plotdata=args.emit_plotdata)
        for line in report.summary_lines():
            print(line)
    elif args.which == "nslkdd":
        report = experiments.run_nslkdd(
            experiments.NslkddConfig(
                train_path=args.train_file,
                test_path=args.test_file,
                subsample=_pick(args.subsample, cfg, "experiment.subsample", 0, Config.get_int),
                seeds=_pick(args.seeds, cfg, "experiment.seeds", 5, Config.get_int),
                contrib_cap=_pick(args.contrib_cap, cfg, "experiment.contrib_cap", 400, Config.get_int),
                seed=seed,
            ),
            out_dir=args.out_dir,
            emit_plotdata=args.emit_plotdata,
        )
        for line in report.summary_lines():
            print(line)
    else:
        report = experiments.run_multimodal(
            experiments.MultimodalExpConfig(
                trials=_pick(args.trials, cfg, "experiment.trials", 10, Config.get_int),
                seed=seed,
            ),
            out_dir=args.out_dir,
            emit_plotdata=args.emit_plotdata,
        )
        for line in report.summary_lines():
            print(line)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(p):
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--seed", type=int, default=None, help="overrides config and ANOMALENS_SEED")


def build_parser() -> _Parser:
    parser = _Parser(prog="anomalens", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a detector (or PCA baseline) from a data CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", choices=["ae", "pca"], default=None)
    p.add_argument("--hidden", type=lambda s: tuple(int(v) for v in s.split(",")), default=None)
    p.add_argument("--activations", type=lambda s: tuple(s.split(",")), default=None)
    p.add_argument("--components", type=int, default=None, help="pca only")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score records; one CSV row per record")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="CSV path, or comma-joined paths per data type")
    p.add_argument("--out", default=None, help="default: stdout")
    p.add_argument("--threshold", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("explain", help="per-dimension contribution for one record")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--record", type=int, required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--lambdas", type=lambda s: tuple(float(v) for v in s.split(",")), default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--mse-stop", type=float, default=None)
    p.add_argument("--step-size", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("eval-roc", help="ROC/AUROC from a scores CSV and a labels CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", default=None, help="write the curve points here")
    p.add_argument("--score-column", default="score")
    p.add_argument("--label-column", default="label")
    _add_common(p)
    p.set_defaults(func=cmd_eval_roc)

    p = sub.add_parser("eval-events", help="event-window TPR/FPR from scores and event labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--target-fpr", type=float, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--excluded", default=None, help="comma list of start:end spans")
    p.add_argument("--score-column", default="score")
    _add_common(p)
    p.set_defaults(func=cmd_eval_events)

    p = sub.add_parser("simulate", help="correlated-component data, optionally with faults")
    p.add_argument("--out", required=True)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--components", type=int, default=None)
    p.add_argument("--dims-per-component", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--layout", choices=["interleaved", "block"], default=None)
    p.add_argument("--faults", type=int, default=0, help="number of faulted records")
    p.add_argument("--n-f", type=int, default=10)
    p.add_argument("--direction", choices=["increase", "decrease", "mixed"], default="increase")
    p.add_argument("--events-out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest-nslkdd", help="expand raw NSL-KDD files into feature/label CSVs")
    p.add_argument("--train", required=True)
    p.add_argument("--test", default=None)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_ingest_nslkdd)

    p = sub.add_parser("experiment", help="seeded study drivers with CSV reports")
    p.add_argument("which", choices=["sim61", "nslkdd", "multimodal"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--emit-plotdata", action="store_true")
    p.add_argument("--sweep", action="store_true", help="sim61 only: run the standard parameter cells")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--scale", type=float, default=None)
    p.add_argument("--n-f", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--train-file", default=None)
    p.add_argument("--test-file", default=None)
    p.add_argument("--subsample", type=int, default=None)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--contrib-cap", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        if exc.usage:
            sys.stderr.write(exc.usage)
        return 1
    except (DataError, FileNotFoundError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
