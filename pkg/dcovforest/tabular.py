"""CSV ingestion: column roles, parsing, and the encoder that turns raw tables into `[0, 1]` feature matrices.

Categorical columns become one dummy column per training level (full k-dummy, levels sorted). Numeric columns are
min-max scaled with training minima and maxima and clamped to `[0, 1]` on new rows. Unseen categories encode to all-zero
dummies.
"""
from __future__ import annotations

__all__ = [
    "CsvSchema",
    "TabularEncoder",
    "read_table",
    "load_csv",
]

import dataclasses
import logging
import typing as tp
from pathlib import Path

import numpy as np
import pandas as pd

from dcovforest.dataset import Dataset
from dcovforest.exceptions import EmptyDataError, EmptyFileError, MissingColumnError, UnparseableCellError

_LOGGER = logging.getLogger("dcovforest")


@dataclasses.dataclass(slots=True, frozen=True)
class CsvSchema:
    """Roles of the columns of a harness CSV.

    `numeric=None` means every column without another role is numeric. `domain_column` and `group_column` are metadata
    (e.g. source/target labels, hospital IDs) and never become features.
    """

    response: str = "y"
    numeric: tuple[str, ...] | None = None
    categorical: tuple[str, ...] = ()
    domain_column: str | None = None
    group_column: str | None = None
    scale: bool = True

    @property
    def role_columns(self) -> tuple[str, ...]:
        return tuple(c for c in (self.response, self.domain_column, self.group_column) if c is not None)

    def feature_columns(self, columns: tp.Sequence[str]) -> tuple[str, ...]:
        """Feature columns in file order."""
        if self.numeric is not None:
            wanted = set(self.numeric) | set(self.categorical)
            return tuple(c for c in columns if c in wanted)
        excluded = set(self.role_columns)
        return tuple(c for c in columns if c not in excluded)

    def required_columns(self, with_response: bool = True) -> tuple[str, ...]:
        required = list(self.numeric or ()) + list(self.categorical)
        required += [c for c in (self.domain_column, self.group_column) if c is not None]
        if with_response:
            required.insert(0, self.response)
        return tuple(required)


def _parse_numeric(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].astype(str)
    values = pd.to_numeric(raw.str.strip(), errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)  # NaN from failed parses, and "inf" cells
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise UnparseableCellError(column, row, raw.iloc[row])
    return values


def read_table(path: str | Path, schema: CsvSchema, with_response: bool = True) -> pd.DataFrame:
    """Read a CSV with every cell as a string, checking that the schema's columns are present and that the file has
    data rows. Numeric cells are parsed later, by `TabularEncoder`."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as ex:
        raise EmptyFileError(f"CSV file `{path}` is empty.") from ex
    if frame.shape[0] == 0:
        raise EmptyFileError(f"CSV file `{path}` has a header but no data rows.")
    for column in schema.required_columns(with_response):
        if column not in frame.columns:
            raise MissingColumnError(column, path)
    return frame


@dataclasses.dataclass(slots=True, frozen=True)
class TabularEncoder:
    """Encoding state fitted on training rows only.

    `n_fit_rows` records how many rows the statistics came from, so callers can check that test rows were not used.
    """

    numeric: tuple[str, ...]
    categorical: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray
    levels: dict[str, tuple[str, ...]]
    n_fit_rows: int
    columns: tuple[str, ...]  # feature columns in output order
    scale: bool = True

    @classmethod
    def fit(cls, frame: pd.DataFrame, schema: CsvSchema) -> tp.Self:
        if frame.shape[0] == 0:
            raise EmptyDataError("Cannot fit an encoder on zero rows.")
        columns = schema.feature_columns(frame.columns)
        categorical = tuple(c for c in columns if c in set(schema.categorical))
        numeric = tuple(c for c in columns if c not in set(categorical))
        mins = np.empty(len(numeric))
        maxs = np.empty(len(numeric))
        for j, column in enumerate(numeric):
            values = _parse_numeric(frame, column)
            mins[j] = values.min()
            maxs[j] = values.max()
        levels = {column: tuple(sorted(frame[column].astype(str).unique())) for column in categorical}
        _LOGGER.debug(
            f"Fitted tabular encoder on {frame.shape[0]} rows: {len(numeric)} numeric columns, "
            f"{sum(len(v) for v in levels.values())} dummies from {len(categorical)} categorical columns"
        )
        return cls(numeric, categorical, mins, maxs, levels, frame.shape[0], columns, schema.scale)

    @property
    def feature_names(self) -> tuple[str, ...]:
        names = []
        for column in self.columns:
            if column in self.levels:
                names.extend(f"{column}={level}" for level in self.levels[column])
            else:
                names.append(column)
        return tuple(names)

    @property
    def d(self) -> int:
        return len(self.feature_names)

    def _scale(self, j: int, values: np.ndarray) -> np.ndarray:
        if not self.scale:
            return values
        span = self.maxs[j] - self.mins[j]
        if span <= 0:
            return np.zeros_like(values)
        return np.clip((values - self.mins[j]) / span, 0.0, 1.0)

    def transform(self, frame: pd.DataFrame) -> np.ndarray:
        """Encode the feature columns of `frame` into an `(n, d)` matrix."""
        for column in self.columns:
            if column not in frame.columns:
                raise MissingColumnError(column)
        blocks = []
        numeric_index = {column: j for j, column in enumerate(self.numeric)}
        for column in self.columns:
            if column in self.levels:
                levels = self.levels[column]
                categories = pd.Categorical(frame[column].astype(str), categories=levels)
                unseen = int(categories.isna().sum())
                if unseen:
                    _LOGGER.warning(f"Column `{column}` has {unseen} rows with unseen categories. Encoding as zeros.")
                dummies = pd.get_dummies(categories, dtype=np.float64)
                blocks.append(dummies.to_numpy(dtype=np.float64).reshape(frame.shape[0], len(levels)))
            else:
                j = numeric_index[column]
                blocks.append(self._scale(j, _parse_numeric(frame, column)).reshape(-1, 1))
        if not blocks:
            return np.empty((frame.shape[0], 0))
        return np.hstack(blocks)

    def response(self, frame: pd.DataFrame, schema: CsvSchema) -> np.ndarray:
        if schema.response not in frame.columns:
            raise MissingColumnError(schema.response)
        return _parse_numeric(frame, schema.response)

    def dataset(self, frame: pd.DataFrame, schema: CsvSchema) -> Dataset:
        return Dataset(self.transform(frame), self.response(frame, schema), self.feature_names)


def load_csv(
    path: str | Path,
    schema: CsvSchema,
    encoder: TabularEncoder | None = None,
) -> tuple[Dataset, TabularEncoder]:
    """Read and encode a CSV. Without an `encoder`, one is fitted on this file's rows."""
    frame = read_table(path, schema)
    if encoder is None:
        encoder = TabularEncoder.fit(frame, schema)
    return encoder.dataset(frame, schema), encoder
