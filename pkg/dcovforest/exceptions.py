from __future__ import annotations

__all__ = [
    "DcovForestError",
    "DimensionMismatchError",
    "InsufficientSampleError",
    "EmptyDataError",
    "InvalidWeightsError",
    "FeatureRangeError",
    "ConfigError",
    "ModelFileError",
    "RecordFieldTypeError",
    "RecordFieldValueError",
    "CsvSchemaError",
    "MissingColumnError",
    "UnparseableCellError",
    "EmptyFileError",
    "ExperimentError",
]

import dataclasses
import typing as tp


class DcovForestError(Exception):
    """Base class for all errors raised by `dcovforest`."""
    pass


class DimensionMismatchError(DcovForestError, ValueError):
    """Paired inputs have incompatible lengths or shapes."""
    pass


class InsufficientSampleError(DcovForestError, ValueError):
    """Too few observations for the requested estimator or procedure."""
    pass


class EmptyDataError(DcovForestError, ValueError):
    pass


class InvalidWeightsError(DcovForestError, ValueError):
    pass


class FeatureRangeError(DcovForestError, ValueError):
    """Features fall outside the unit cube that centered trees tile."""
    pass


class ConfigError(DcovForestError, ValueError):
    pass


class ModelFileError(DcovForestError):
    """Model file could not be read or written."""
    pass


class RecordFieldTypeError(ModelFileError):
    """Exception raised at the class level due to an invalid or incorrectly specified record field."""

    def __init__(self, field: dataclasses.Field, cls_name: str, error_msg: str):
        name = f"`{cls_name}.{field.name}`" if cls_name else f"`{field.name}`"
        super().__init__(f"Field {name}: {error_msg}")


class RecordFieldValueError(ModelFileError):
    """Exception raised at the instance level due to an invalid field value."""
    pass


class CsvSchemaError(DcovForestError):
    """Base class for CSV ingestion errors."""
    pass


class MissingColumnError(CsvSchemaError, KeyError):

    def __init__(self, column: str, path: tp.Any = None):
        self.column = column
        where = f" in `{path}`" if path is not None else ""
        self.path = path
        super().__init__(f"Column `{column}` is missing{where}.")

    def __reduce__(self):
        return self.__class__, (self.column, self.path)

    def __str__(self):
        # `KeyError` would otherwise wrap the message in quotes.
        return self.args[0]


class UnparseableCellError(CsvSchemaError, ValueError):

    def __init__(self, column: str, row: int, value: tp.Any):
        self.column = column
        self.row = row
        self.value = value
        super().__init__(f"Column `{column}` row {row}: cannot parse {value!r} as a number.")

    def __reduce__(self):
        return self.__class__, (self.column, self.row, self.value)


class EmptyFileError(CsvSchemaError, ValueError):
    pass


class ExperimentError(DcovForestError):
    """Error raised while running one (sweep value, replicate) cell of an experiment."""

    def __init__(self, sweep_value: tp.Any, replicate: int, error_msg: str):
        self.sweep_value = sweep_value
        self.replicate = replicate
        self.error_msg = error_msg
        super().__init__(f"Sweep value {sweep_value!r}, replicate {replicate}: {error_msg}")

    def __reduce__(self):
        # Keeps the exception picklable across worker processes.
        return self.__class__, (self.sweep_value, self.replicate, self.error_msg)
