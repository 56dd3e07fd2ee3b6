"""Command-line interface.

Exit codes: 0 on success, 2 for invalid input, 3 for numerical failure. On
failure a single JSON object ``{"error": ..., "message": ...}`` is written to
stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import numpy as np

from ..baselines import EmConfig
from ..core import LabeledPredictionSet, RngStream, UnlabeledPredictionSet
from ..errors import InputError, InvalidConfig, NumericalError
from ..losses import LossConfig
from ..metrics import accuracy_and_precision, brier_decomposition, nll_per_sample, reliability_table
from ..partition import DEFAULT_CELLS, DEFAULT_SMOOTHING, histogram, observed_cell_frequencies
from ..prevalence import MapConfig, linear_solve_estimate, naive_estimate
from ..recalibrate import build_dev_summary, global_urc, local_urc
from ..synthdata import make_population, predict, train_logistic
from . import io
from .experiments import Experiment, ExperimentConfig, run_local_experiment, run_quantification_experiment, summarize

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


def _sizes(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def _map_config(args) -> MapConfig:
    return MapConfig(LossConfig(kl_weight=args.kl_weight, continuity_weight=args.continuity_weight),
                     max_iterations=args.max_iterations)


def _add_map_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kl-weight", type=float, default=1.0, help="weight of the pull toward the dev prior")
    p.add_argument("--continuity-weight", type=float, default=0.0)
    p.add_argument("--max-iterations", type=int, default=MapConfig().max_iterations)


# --- subcommands -----------------------------------------------------------


def cmd_summary(args) -> int:
    dev = io.read_predictions(args.dev, require_labels=True)
    io.write_summary(args.out, build_dev_summary(dev, args.cells, args.smoothing))
    return EXIT_OK


def _estimate_block(summary, field: UnlabeledPredictionSet, args) -> dict:
    hist = histogram(summary.partition, field)
    if args.method == "map":
        est = global_urc(summary, field, _map_config(args)).estimate
    elif args.method == "linear":
        est = linear_solve_estimate(summary.m_a, observed_cell_frequencies(hist))
    else:
        est = naive_estimate(field)
    block = io.estimate_to_dict(est)
    block["n_samples"] = len(field)
    block["histogram"] = hist.counts.tolist()
    return block


def cmd_estimate(args) -> int:
    summary = io.read_summary(args.summary)
    field = io.read_predictions(args.field, require_labels=False)
    out = {"dev_prior": summary.dev_prior.tolist(), "estimate": _estimate_block(summary, field, args)}
    io.atomic_write(args.out, io.dumps(out))
    return EXIT_OK


def cmd_recalibrate(args) -> int:
    summary = io.read_summary(args.summary)
    field = io.read_predictions(args.field, require_labels=False)
    config = _map_config(args)
    if args.groups:
        results = local_urc(summary, field, config, min_group_size=args.min_group_size)
    else:
        results = [global_urc(summary, field, config)]

    blocks, ids, groups, rows = [], [], [], []
    for res in results:
        block = {"group_id": res.group_id}
        if res.ok:
            block.update(io.estimate_to_dict(res.estimate))
            block["n_samples"] = len(res.recalibrated)
            ids += res.recalibrated.sample_ids
            groups += res.recalibrated.group_ids
            rows.append(res.recalibrated.predictions)
        else:
            block["error"] = type(res.error).__name__
            block["message"] = str(res.error)
        blocks.append(block)

    sidecar = {"mode": "local" if args.groups else "global", "dev_prior": summary.dev_prior.tolist(),
               "estimates": blocks}
    if rows:
        out_set = UnlabeledPredictionSet(np.vstack(rows), tuple(ids), tuple(groups))
        io.write_predictions(args.out, out_set)
    else:
        io.atomic_write(args.out, io.predictions_to_csv(UnlabeledPredictionSet(np.empty((0, summary.m_a.n_classes)))))
    io.atomic_write(args.sidecar or f"{args.out}.json", io.dumps(sidecar))
    return EXIT_OK


def cmd_quantify_compare(args) -> int:
    config = ExperimentConfig(
        Experiment(args.experiment), test_sizes=args.sizes, replicas=args.replicas,
        train_size=args.train_size, validation_size=args.validation_size, seed=args.seed,
        urc_cells=args.cells, map_config=_map_config(args), em_config=EmConfig(),
    )
    if args.workers < 1:
        raise InvalidConfig("workers must be at least 1")
    rows = run_quantification_experiment(config, workers=args.workers)
    io.atomic_write(args.out, io.rows_to_csv(rows))
    if args.summary_out:
        io.atomic_write(args.summary_out, io.rows_to_csv(summarize(rows)))
    return EXIT_OK


def cmd_local_sweep(args) -> int:
    rows = run_local_experiment(args.rates, n_per_group=args.n_per_group, seed=args.seed,
                                cells=args.cells, map_config=_map_config(args))
    io.atomic_write(args.out, io.rows_to_csv(rows))
    return EXIT_OK


def cmd_metrics(args) -> int:
    data = io.read_predictions(args.predictions, require_labels=True)
    P, y = data.predictions, data.labels
    ap = accuracy_and_precision(P, y)
    nll = nll_per_sample(P, y)
    out = {"n_samples": len(data), "accuracy": ap.accuracy, "precision": list(ap.precision),
           "nll": nll.value, "nll_hit_zero": nll.hit_zero}
    if data.n_classes == 2:
        d = brier_decomposition(P, y, args.bins)
        out.update(brier=d.brier, calibration=d.calibration, refinement=d.refinement, bins=d.bins)
        if args.reliability_out:
            header = ["lower", "upper", "count", "mean_prediction", "observed_frequency"]
            io.atomic_write(args.reliability_out, io.rows_to_csv(reliability_table(P, y, args.bins), header))
    io.atomic_write(args.out, io.dumps(out))
    return EXIT_OK


def cmd_simulate(args) -> int:
    """Synthetic dev and field prediction files from one trained classifier."""
    g = RngStream(args.seed).generator()
    pop = make_population(rng=g)
    model = train_logistic(pop.sample(args.train_size, args.dev_prevalence, g))
    dev = pop.sample(args.dev_size, args.dev_prevalence, g)
    io.write_predictions(args.dev_out, LabeledPredictionSet(predict(model, dev.features), labels=dev.labels))
    preds, labels, groups = [], [], []
    for i, rate in enumerate(args.field_prevalence):
        data = pop.sample(args.field_size, rate, g)
        preds.append(predict(model, data.features))
        labels.append(data.labels)
        groups += [f"g{i + 1}" if len(args.field_prevalence) > 1 else None] * args.field_size
    ids = tuple(f"f{i}" for i in range(len(groups)))
    field = LabeledPredictionSet(np.vstack(preds), ids, tuple(groups), labels=np.concatenate(labels))
    io.write_predictions(args.field_out, field)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="urc", description="Unsupervised recalibration under prior shift.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("summary", help="build a dev summary JSON from a labeled prediction CSV")
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cells", type=int, default=DEFAULT_CELLS)
    p.add_argument("--smoothing", type=float, default=DEFAULT_SMOOTHING)
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("estimate", help="estimate the field class distribution")
    p.add_argument("--summary", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("map", "linear", "naive"), default="map")
    _add_map_options(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("recalibrate", help="recalibrate field predictions, globally or per group")
    p.add_argument("--summary", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--sidecar", help="estimate JSON path (default: OUT.json)")
    p.add_argument("--groups", action="store_true", help="recalibrate each group_id separately")
    p.add_argument("--min-group-size", type=int, default=1)
    _add_map_options(p)
    p.set_defaults(func=cmd_recalibrate)

    p = sub.add_parser("quantify-compare", help="CC/ACC/EM/URC comparison on synthetic data")
    p.add_argument("--experiment", choices=[e.value for e in Experiment], default=Experiment.BALANCED_TRAINING.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=_sizes, default=ExperimentConfig().test_sizes)
    p.add_argument("--replicas", type=int, default=30)
    p.add_argument("--train-size", type=int, default=2000)
    p.add_argument("--validation-size", type=int, default=2000)
    p.add_argument("--cells", type=int, default=2)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--summary-out")
    _add_map_options(p)
    p.set_defaults(func=cmd_quantify_compare)

    p = sub.add_parser("local-sweep", help="per-group recalibration at complementary base rates")
    p.add_argument("--rates", type=_floats, default=(0.5, 0.6, 0.7, 0.8, 0.9))
    p.add_argument("--n-per-group", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cells", type=int, default=DEFAULT_CELLS)
    p.add_argument("--out", required=True)
    _add_map_options(p)
    p.set_defaults(func=cmd_local_sweep)

    p = sub.add_parser("metrics", help="score a labeled prediction CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--reliability-out", help="per-bin reliability table CSV (binary only)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="write synthetic dev and field prediction CSVs")
    p.add_argument("--dev-out", required=True)
    p.add_argument("--field-out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-size", type=int, default=2000)
    p.add_argument("--dev-size", type=int, default=2000)
    p.add_argument("--dev-prevalence", type=float, default=0.5)
    p.add_argument("--field-size", type=int, default=1000)
    p.add_argument("--field-prevalence", type=_floats, default=(0.2,),
                   help="one rate per group; several rates give groups g1, g2, ...")
    p.set_defaults(func=cmd_simulate)
    return parser


def _fail(exc: BaseException, code: int) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        return _fail(exc, EXIT_NUMERICAL)
    except (InputError, OSError) as exc:
        return _fail(exc, EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
