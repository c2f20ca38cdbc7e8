"""Replicated, seeded experiments comparing methods over a sweep of one variable.

Each (sweep value, replicate) cell gets its own seed, `derive_seed(spec.seed, sweep_index, replicate)`, which drives
the data draw (or CSV resampling) and every model fitted in that cell. Result rows come out ordered by sweep value,
then replicate, then method, whatever the worker count.
"""
from __future__ import annotations

__all__ = [
    "RESULT_COLUMNS",
    "SUMMARY_COLUMNS",
    "SweepSpec",
    "CsvSource",
    "ExperimentSpec",
    "ResultRow",
    "CellData",
    "load_experiment_spec",
    "cell_data",
    "run_experiment",
    "results_frame",
    "write_results",
    "summarize",
    "write_summary",
]

import dataclasses
import logging
import math
import time
import typing as tp
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from dcovforest.config import TransferConfig, from_mapping, load_toml
from dcovforest.dataset import Dataset
from dcovforest.exceptions import ConfigError, DcovForestError, ExperimentError
from dcovforest.kinds import CsvScenario, Domain, Method, Metric, SweepVariable
from dcovforest.metrics import score
from dcovforest.rng import derive_seed, stream
from dcovforest.simgen import SimConfig, gen_dataset, true_response
from dcovforest.tabular import CsvSchema, TabularEncoder, read_table
from dcovforest.transfer import fit_method

_LOGGER = logging.getLogger("dcovforest")

RESULT_COLUMNS = (
    "method",
    "sweep_name",
    "sweep_value",
    "replicate",
    "seed",
    "metric_name",
    "metric_value",
    "wall_ms",
)
SUMMARY_COLUMNS = ("method", "sweep_name", "sweep_value", "n", "median", "mean", "sd")

_INTEGER_SWEEPS = {SweepVariable.n_t, SweepVariable.mtry, SweepVariable.target_train_size}


@dataclasses.dataclass(slots=True, frozen=True)
class SweepSpec:
    name: SweepVariable
    values: tuple[float | int | str, ...]

    def __post_init__(self):
        if not self.values:
            raise ConfigError(f"Sweep over `{self.name}` needs at least one value.")
        for value in self.values:
            if self.name.is_numeric and (isinstance(value, bool) or not isinstance(value, (int, float))):
                raise ConfigError(f"Sweep over `{self.name}` needs numeric values, not: {value!r}")
            if self.name in _INTEGER_SWEEPS and value != int(value):
                raise ConfigError(f"Sweep over `{self.name}` needs integer values, not: {value!r}")


@dataclasses.dataclass(slots=True, frozen=True)
class CsvSource:
    """A CSV data source and the evaluation scenario to run on it.

    Rows whose `domain_column` equals `source_value` form the source sample and rows equal to `target_value` the target
    sample. Without a domain column, every row is a target row. `per_group` scenarios take the target rows of one
    `group_column` value at a time.
    """

    path: str
    response: str = "y"
    numeric: tuple[str, ...] | None = None
    categorical: tuple[str, ...] = ()
    domain_column: str | None = None
    source_value: str = "source"
    target_value: str = "target"
    group_column: str | None = None
    scenario: CsvScenario = CsvScenario.Holdout
    test_fraction: float = 0.3
    n_test: int = 200
    scale: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"`test_fraction` must be in (0, 1), not: {self.test_fraction}")
        if self.n_test < 1:
            raise ConfigError(f"`n_test` must be at least 1, not: {self.n_test}")
        if self.scenario == CsvScenario.PerGroup and self.group_column is None:
            raise ConfigError("The `per_group` scenario needs a `group_column`.")

    @property
    def schema(self) -> CsvSchema:
        return CsvSchema(
            response=self.response,
            numeric=self.numeric,
            categorical=self.categorical,
            domain_column=self.domain_column,
            group_column=self.group_column,
            scale=self.scale,
        )


@dataclasses.dataclass(slots=True, frozen=True)
class ExperimentSpec:
    methods: tuple[Method, ...]
    sweep: SweepSpec
    replications: int = 1
    metric: Metric = Metric.MSE
    seed: int = 0
    n_jobs: int = 1  # replicate-level workers; tree-level workers are `model.n_jobs`
    sim: SimConfig | None = None
    csv: CsvSource | None = None
    model: TransferConfig = dataclasses.field(default_factory=TransferConfig)

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("Experiment needs at least one method.")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError(f"Experiment methods must be distinct: {[str(m) for m in self.methods]}")
        if self.replications < 1:
            raise ConfigError(f"`replications` must be at least 1, not: {self.replications}")
        if self.seed < 0:
            raise ConfigError(f"`seed` must be non-negative, not: {self.seed}")
        if self.n_jobs == 0:
            raise ConfigError("`n_jobs` cannot be 0.")
        if (self.sim is None) == (self.csv is None):
            raise ConfigError("Experiment needs exactly one data source: a `sim` table or a `csv` table.")

        name = self.sweep.name
        if self.sim is not None:
            if name == SweepVariable.target_group:
                raise ConfigError("Simulated experiments cannot sweep `target_group`.")
            if self.metric == Metric.OneMinusAUC:
                raise ConfigError("Simulated responses are continuous; use the `MSE` metric.")
        else:
            if name in {SweepVariable.r, SweepVariable.n_t}:
                raise ConfigError(f"CSV experiments cannot sweep `{name}`; use `target_train_size` instead.")
            if name == SweepVariable.target_train_size and self.csv.scenario != CsvScenario.FixedTest:
                raise ConfigError("Sweeping `target_train_size` needs the `fixed_test` scenario.")
            if (name == SweepVariable.target_group) != (self.csv.scenario == CsvScenario.PerGroup):
                raise ConfigError("The `per_group` scenario must sweep `target_group`, and only it can.")
            if self.csv.domain_column is None and any(method.uses_source for method in self.methods):
                raise ConfigError("Methods that use source data need a CSV `domain_column`.")

    def replace(self, **changes) -> tp.Self:
        return dataclasses.replace(self, **changes)

    @property
    def n_rows(self) -> int:
        return len(self.sweep.values) * self.replications * len(self.methods)


@dataclasses.dataclass(slots=True, frozen=True)
class ResultRow:
    method: Method
    sweep_name: SweepVariable
    sweep_value: float | int | str
    replicate: int
    seed: int
    metric_name: Metric
    metric_value: float
    wall_ms: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.metric_value):
            raise ValueError(f"Metric value must be finite, not: {self.metric_value}")
        if self.metric_name == Metric.MSE and self.metric_value < 0:
            raise ValueError(f"MSE cannot be negative: {self.metric_value}")
        if self.metric_name == Metric.OneMinusAUC and not 0.0 <= self.metric_value <= 1.0:
            raise ValueError(f"1 - AUC must be in [0, 1], not: {self.metric_value}")

    def as_dict(self) -> dict[str, tp.Any]:
        return {
            "method": str(self.method),
            "sweep_name": str(self.sweep_name),
            "sweep_value": self.sweep_value,
            "replicate": self.replicate,
            "seed": self.seed,
            "metric_name": str(self.metric_name),
            "metric_value": self.metric_value,
            "wall_ms": "" if self.wall_ms is None else f"{self.wall_ms:.3f}",
        }


@dataclasses.dataclass(slots=True, frozen=True)
class CellData:
    """Everything one experiment cell fits and scores on."""

    source: Dataset | None
    target: Dataset
    test_features: np.ndarray
    truth: np.ndarray  # noise-free test responses for simulations, observed test responses for CSVs
    encoder: TabularEncoder | None = None


def load_experiment_spec(path: str | Path) -> ExperimentSpec:
    return from_mapping(ExperimentSpec, load_toml(path))


def _sweep_value(spec: ExperimentSpec, value: tp.Any) -> tp.Any:
    if spec.sweep.name in _INTEGER_SWEEPS:
        return int(value)
    if spec.sweep.name == SweepVariable.r:
        return float(value)
    return value


def _sim_cell(spec: ExperimentSpec, value: tp.Any, cell_seed: int) -> CellData:
    changes = {"seed": cell_seed}
    if spec.sweep.name == SweepVariable.r:
        changes["r"] = value
    elif spec.sweep.name in {SweepVariable.n_t, SweepVariable.target_train_size}:
        changes["n_t"] = value
    config = spec.sim.replace(**changes)
    source = gen_dataset(config, Domain.Source) if any(m.uses_source for m in spec.methods) else None
    target = gen_dataset(config, Domain.Target)
    test = gen_dataset(config, Domain.Test)
    return CellData(source, target, test.features, true_response(config, Domain.Test, test.features))


def _holdout(n: int, test_fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """`(train, test)` positions with `round(test_fraction * n)` (at least one) test rows."""
    n_test = min(max(1, round(test_fraction * n)), n - 1)
    permutation = rng.permutation(n)
    return np.sort(permutation[n_test:]), np.sort(permutation[:n_test])


def _csv_cell(spec: ExperimentSpec, frame: pd.DataFrame, value: tp.Any, replicate: int, cell_seed: int) -> CellData:
    csv = spec.csv
    if csv.domain_column is not None:
        domains = frame[csv.domain_column]
        source_frame = frame[domains == csv.source_value]
        target_frame = frame[domains == csv.target_value]
    else:
        source_frame = frame.iloc[:0]
        target_frame = frame
    if csv.scenario == CsvScenario.PerGroup:
        target_frame = target_frame[target_frame[csv.group_column] == str(value)]

    n_target = target_frame.shape[0]
    if n_target < 2:
        raise ConfigError(f"Need at least 2 target rows to split into training and test sets, not: {n_target}")

    if csv.scenario == CsvScenario.FixedTest:
        if n_target <= csv.n_test:
            raise ConfigError(f"Target sample of {n_target} rows leaves nothing after a {csv.n_test}-row test set.")
        # The test set depends only on the replicate, so it stays fixed across the sweep.
        permutation = stream(spec.seed, replicate).permutation(n_target)
        test_rows, pool = np.sort(permutation[:csv.n_test]), permutation[csv.n_test:]
        size = value if spec.sweep.name == SweepVariable.target_train_size else pool.shape[0]
        if size > pool.shape[0]:
            raise ConfigError(f"Cannot draw {size} target training rows from the {pool.shape[0]} left after testing.")
        train_rows = np.sort(stream(cell_seed).choice(pool, size=size, replace=False))
    else:
        train_rows, test_rows = _holdout(n_target, csv.test_fraction, stream(cell_seed))

    target_train = target_frame.iloc[train_rows]
    test_frame = target_frame.iloc[test_rows]
    schema = csv.schema
    encoder = TabularEncoder.fit(pd.concat([source_frame, target_train]), schema)
    source = encoder.dataset(source_frame, schema) if source_frame.shape[0] else None
    return CellData(
        source,
        encoder.dataset(target_train, schema),
        encoder.transform(test_frame),
        encoder.response(test_frame, schema),
        encoder,
    )


def cell_data(
    spec: ExperimentSpec,
    value: tp.Any,
    replicate: int,
    cell_seed: int,
    frame: pd.DataFrame | None = None,
) -> CellData:
    """Data for one cell. CSV experiments pass the already-read `frame`."""
    value = _sweep_value(spec, value)
    if spec.sim is not None:
        return _sim_cell(spec, value, cell_seed)
    if frame is None:
        frame = read_table(spec.csv.path, spec.csv.schema)
    return _csv_cell(spec, frame, value, replicate, cell_seed)


def _run_cell(
    spec: ExperimentSpec,
    frame: pd.DataFrame | None,
    sweep_index: int,
    value: tp.Any,
    replicate: int,
    timing: bool,
) -> list[ResultRow]:
    cell_seed = derive_seed(spec.seed, sweep_index, replicate)
    try:
        data = cell_data(spec, value, replicate, cell_seed, frame)
        model_config = spec.model.replace(seed=cell_seed)
        if spec.sweep.name == SweepVariable.mtry:
            model_config = model_config.with_mtry(int(value))
        rows = []
        for method in spec.methods:
            start = time.perf_counter()
            model = fit_method(method, data.source, data.target, model_config)
            prediction = model.predict(data.test_features)
            elapsed_ms = (time.perf_counter() - start) * 1000.0
            rows.append(
                ResultRow(
                    method,
                    spec.sweep.name,
                    value,
                    replicate,
                    cell_seed,
                    spec.metric,
                    score(spec.metric, prediction, data.truth),
                    elapsed_ms if timing else None,
                )
            )
    except (DcovForestError, ValueError) as ex:
        _LOGGER.error(f"Experiment cell failed at sweep value {value!r}, replicate {replicate}: {ex}")
        raise ExperimentError(value, replicate, str(ex)) from ex
    _LOGGER.debug(f"Finished cell {spec.sweep.name} = {value!r}, replicate {replicate} (seed {cell_seed})")
    return rows


def run_experiment(spec: ExperimentSpec, timing: bool = False) -> list[ResultRow]:
    """Run every (sweep value, replicate) cell and return one row per method per cell.

    Wall times are only recorded when `timing` is set, so that reruns produce identical rows.
    """
    frame = read_table(spec.csv.path, spec.csv.schema) if spec.csv is not None else None
    cells = [
        (sweep_index, value, replicate)
        for sweep_index, value in enumerate(spec.sweep.values)
        for replicate in range(spec.replications)
    ]
    _LOGGER.debug(
        f"Running {len(cells)} cells x {len(spec.methods)} methods with {spec.n_jobs} worker(s)."
    )
    if spec.n_jobs == 1:
        results = [_run_cell(spec, frame, i, value, rep, timing) for i, value, rep in cells]
    else:
        results = Parallel(n_jobs=spec.n_jobs)(
            delayed(_run_cell)(spec, frame, i, value, rep, timing) for i, value, rep in cells
        )
    return [row for cell_rows in results for row in cell_rows]


def results_frame(rows: tp.Iterable[ResultRow]) -> pd.DataFrame:
    return pd.DataFrame([row.as_dict() for row in rows], columns=list(RESULT_COLUMNS))


def write_results(rows: tp.Iterable[ResultRow], path: str | Path | tp.TextIO) -> None:
    results_frame(rows).to_csv(path, index=False, lineterminator="\n")


def summarize(rows: tp.Iterable[ResultRow]) -> pd.DataFrame:
    """Median, mean and standard deviation of the metric per (method, sweep value), in first-seen order."""
    frame = results_frame(rows)
    if frame.empty:
        return pd.DataFrame(columns=list(SUMMARY_COLUMNS))
    grouped = frame.groupby(["method", "sweep_name", "sweep_value"], sort=False)["metric_value"]
    summary = grouped.agg(n="count", median="median", mean="mean", sd="std").reset_index()
    return summary[list(SUMMARY_COLUMNS)]


def write_summary(rows: tp.Iterable[ResultRow], path: str | Path | tp.TextIO) -> None:
    summarize(rows).to_csv(path, index=False, lineterminator="\n")
