"""Command-line entry point: `dcovforest {simulate,dcov,train,predict,experiment}`.

Settings come from a TOML document where a subcommand takes `--config` (or a spec file, for `experiment`); explicit
flags override the document's values. Exit code is 0 on success, 1 on data/config/model errors (one line on stderr) and
2 on usage errors.
"""
from __future__ import annotations

__all__ = [
    "build_parser",
    "main",
]

import argparse
import logging
import sys
import typing as tp
from pathlib import Path

import pandas as pd

from dcovforest.config import TransferConfig, from_mapping, load_toml
from dcovforest.dcov import estimate_feature_weights
from dcovforest.exceptions import DcovForestError, DimensionMismatchError, EmptyDataError
from dcovforest.experiment import load_experiment_spec, run_experiment, write_results, write_summary
from dcovforest.kinds import DCovKind, Domain, Method
from dcovforest.records import load_model, save_model
from dcovforest.simgen import TARGET_FUNCTIONS, SimConfig, export_csv, gen_dataset
from dcovforest.tabular import CsvSchema, TabularEncoder, load_csv, read_table
from dcovforest.transfer import fit_method

_LOGGER = logging.getLogger("dcovforest")

# `simulate` flag destinations that map onto `SimConfig` fields.
_SIM_FLAGS = ("n_s", "n_t", "n_test", "d", "r", "noise_sd", "seed", "target_fn")


def _add_schema_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--response", default="y", help="Response column name (default: y).")
    parser.add_argument(
        "--numeric", nargs="+", default=None, help="Numeric feature columns (default: every non-role column)."
    )
    parser.add_argument("--categorical", nargs="+", default=(), help="Categorical feature columns (one-hot encoded).")
    parser.add_argument("--no-scale", action="store_true", help="Do not min-max scale numeric columns.")


def _schema(args: argparse.Namespace) -> CsvSchema:
    return CsvSchema(
        response=args.response,
        numeric=tuple(args.numeric) if args.numeric is not None else None,
        categorical=tuple(args.categorical),
        scale=not args.no_scale,
    )


def _output(path: Path | None) -> tp.Any:
    return sys.stdout if path is None else path


def _simulate(args: argparse.Namespace) -> int:
    values = {}
    if args.config is not None:
        values.update(load_toml(args.config).get("sim", {}))
    values.update({name: getattr(args, name) for name in _SIM_FLAGS if getattr(args, name) is not None})
    config = from_mapping(SimConfig, values, "sim")

    args.out_dir.mkdir(parents=True, exist_ok=True)
    for domain in Domain:
        path = export_csv(gen_dataset(config, domain), args.out_dir / f"{domain}.csv")
        _LOGGER.info(f"Wrote {config.size(domain)} {domain} rows to `{path}`.")
    return 0


def _dcov(args: argparse.Namespace) -> int:
    data, encoder = load_csv(args.data, _schema(args))
    weights, estimates = estimate_feature_weights(data.features, data.response, args.kind)
    frame = pd.DataFrame(
        {
            "feature": list(encoder.feature_names),
            "estimate": [estimate.value for estimate in estimates],
            "weight": weights.to_list(),
        }
    )
    frame.to_csv(_output(args.out), index=False, lineterminator="\n")
    return 0


def _transfer_config(args: argparse.Namespace) -> TransferConfig:
    """`[model]` table of `--config` (or the whole document if it has none), with flag overrides."""
    config = TransferConfig()
    if args.config is not None:
        document = load_toml(args.config)
        config = from_mapping(TransferConfig, document.get("model", document), "model")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.n_jobs is not None:
        changes["n_jobs"] = args.n_jobs
    if args.dcov_kind is not None:
        changes["dcov_kind"] = args.dcov_kind
    return config.replace(**changes)


def _train(args: argparse.Namespace) -> int:
    method = args.method
    if method.uses_source and args.source is None:
        raise EmptyDataError(f"Method {method} needs `--source` data.")
    if method.uses_target and args.target is None:
        raise EmptyDataError(f"Method {method} needs `--target` data.")

    schema = _schema(args)
    frames = {
        name: read_table(path, schema)
        for name, path in (("source", args.source), ("target", args.target))
        if path is not None
    }
    # One encoder for both samples, so that source and target features line up.
    encoder = TabularEncoder.fit(pd.concat(list(frames.values()), ignore_index=True), schema)
    datasets = {name: encoder.dataset(frame, schema) for name, frame in frames.items()}

    config = _transfer_config(args)
    model = fit_method(method, datasets.get("source"), datasets.get("target"), config)
    path = save_model(model, args.out, method, encoder)
    _LOGGER.info(f"Saved {method} model with {encoder.d} features to `{path}`.")
    return 0


def _predict_features(frame: pd.DataFrame, encoder: TabularEncoder | None, response: str, d: int):
    if encoder is not None:
        return encoder.transform(frame)
    # Models trained on raw matrices: every non-response column is a feature, used as is.
    raw = TabularEncoder.fit(frame, CsvSchema(response=response, scale=False))
    if raw.d != d:
        raise DimensionMismatchError(f"Data has {raw.d} feature columns, but the model expects {d}.")
    return raw.transform(frame)


def _predict(args: argparse.Namespace) -> int:
    model, method, encoder = load_model(args.model)
    schema = CsvSchema(response=args.response, numeric=encoder.columns if encoder is not None else None)
    frame = read_table(args.data, schema, with_response=False)
    predictions = model.predict(_predict_features(frame, encoder, args.response, model.d))
    pd.DataFrame({"prediction": predictions}).to_csv(_output(args.out), index=False, lineterminator="\n")
    _LOGGER.info(f"Predicted {predictions.shape[0]} rows with {method} model `{args.model}`.")
    return 0


def _experiment(args: argparse.Namespace) -> int:
    spec = load_experiment_spec(args.spec)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.n_jobs is not None:
        changes["n_jobs"] = args.n_jobs
    if args.replications is not None:
        changes["replications"] = args.replications
    if changes:
        spec = spec.replace(**changes)

    rows = run_experiment(spec, timing=args.timing)
    write_results(rows, _output(args.out))
    if args.summary is not None:
        write_summary(rows, args.summary)
    _LOGGER.info(f"Wrote {len(rows)} result rows.")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcovforest",
        description="Transfer learning with distance-covariance weighted random forests.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Log progress (-vv for debug output).")
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="Write synthetic source, target and test CSVs.")
    simulate.add_argument("--config", type=Path, help="TOML document with a [sim] table.")
    simulate.add_argument("--out-dir", type=Path, default=Path("."), help="Directory for the three CSVs.")
    simulate.add_argument("--n-s", dest="n_s", type=int)
    simulate.add_argument("--n-t", dest="n_t", type=int)
    simulate.add_argument("--n-test", dest="n_test", type=int)
    simulate.add_argument("--d", type=int)
    simulate.add_argument("--r", type=float, help="Discrepancy ratio in [0, 0.5].")
    simulate.add_argument("--noise-sd", dest="noise_sd", type=float)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument("--target-fn", dest="target_fn", choices=sorted(TARGET_FUNCTIONS))
    simulate.set_defaults(handler=_simulate)

    dcov = subparsers.add_parser("dcov", help="Distance covariance feature weights for a CSV.")
    dcov.add_argument("data", type=Path)
    _add_schema_arguments(dcov)
    dcov.add_argument("--kind", type=DCovKind.from_name, default=DCovKind.FastU, help="V, U or FastU (default).")
    dcov.add_argument("--out", type=Path, help="Output CSV (default: stdout).")
    dcov.set_defaults(handler=_dcov)

    train = subparsers.add_parser("train", help="Fit a method and write a model file.")
    train.add_argument("--method", type=Method, required=True, choices=list(Method))
    train.add_argument("--source", type=Path, help="Source-domain CSV.")
    train.add_argument("--target", type=Path, help="Target-domain CSV.")
    _add_schema_arguments(train)
    train.add_argument("--config", type=Path, help="TOML document with forest settings (or a [model] table).")
    train.add_argument("--seed", type=int)
    train.add_argument("--n-jobs", dest="n_jobs", type=int)
    train.add_argument("--dcov-kind", dest="dcov_kind", type=DCovKind.from_name)
    train.add_argument("--out", type=Path, required=True, help="Model file to write.")
    train.set_defaults(handler=_train)

    predict = subparsers.add_parser("predict", help="Predict CSV rows with a model file.")
    predict.add_argument("--model", type=Path, required=True)
    predict.add_argument("--data", type=Path, required=True)
    predict.add_argument("--response", default="y", help="Response column to ignore if present (default: y).")
    predict.add_argument("--out", type=Path, help="Output CSV (default: stdout).")
    predict.set_defaults(handler=_predict)

    experiment = subparsers.add_parser("experiment", help="Run a replicated experiment spec.")
    experiment.add_argument("spec", type=Path, help="Experiment spec TOML.")
    experiment.add_argument("--out", type=Path, help="Results CSV (default: stdout).")
    experiment.add_argument("--summary", type=Path, help="Also write per-method median/mean/sd here.")
    experiment.add_argument("--seed", type=int)
    experiment.add_argument("--n-jobs", dest="n_jobs", type=int)
    experiment.add_argument("--replications", type=int)
    experiment.add_argument("--timing", action="store_true", help="Record wall times (breaks byte-identical reruns).")
    experiment.set_defaults(handler=_experiment)

    return parser


def main(argv: tp.Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s [%(name)s] %(message)s")
    try:
        return args.handler(args)
    except (DcovForestError, OSError) as ex:
        _LOGGER.debug("Command failed.", exc_info=True)
        print(f"dcovforest {args.command}: error: {ex}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
