"""Functions for use inside `dataclasses.field()` or as wrappers around `dataclasses.field()` to provide metadata for
JSON serialization with `ModelRecord` subclasses.

The capitalized versions return dictionaries containing the field's metadata under the key `"metadata"`, to be unpacked
into `dataclasses.field()` alongside any other standard arguments:

```
    @dataclass(slots=True)
    class MyRecord(ModelRecord):
        basic_field: int
        kind: str = field(init=False, **Record(asserted="centered"))
        weights: np.ndarray = field(**RecordArray("float64"))
```

The lower-case versions wrap `dataclasses.field` directly, passing any additional `kwargs` through. They also change the
default value of `init` to `False` if a single `asserted` value is passed, as such a field only ever holds that value:

```
    @dataclass(slots=True)
    class MyRecord(ModelRecord):
        version: int = record(asserted=1)
        thresholds: np.ndarray = record_array("float64", ndim=2)
```
"""
from __future__ import annotations

__all__ = [
    "Record",
    "record",
    "RecordArray",
    "record_array",
]

import dataclasses
import typing as tp

from dcovforest.records.metadata import FIELD_T, JSON_T, RecordMetadata, RecordArrayMetadata


def Record(
    key: str = None,
    asserted: tuple[FIELD_T, ...] | FIELD_T = None,
    decode_func: tp.Callable[[JSON_T], FIELD_T] = None,
    encode_func: tp.Callable[[FIELD_T], JSON_T] = None,
):
    if key is not None and not isinstance(key, str):
        raise TypeError(f"Record `key` must be a string or `None` (to use field name), not: {key}")

    if isinstance(asserted, list):
        asserted = tuple(asserted)
    elif asserted is None:
        asserted = ()
    elif not isinstance(asserted, tuple):
        asserted = (asserted,)

    return {"metadata": {"record": RecordMetadata(key, asserted, decode_func, encode_func)}}


def record(
    key: str = None,
    asserted: tuple[FIELD_T, ...] | FIELD_T = None,
    decode_func: tp.Callable[[JSON_T], FIELD_T] = None,
    encode_func: tp.Callable[[FIELD_T], JSON_T] = None,
    **field_kwargs,
) -> dataclasses.Field:
    metadata = Record(key, asserted, decode_func, encode_func)
    if metadata["metadata"]["record"].single_asserted is not None:
        field_kwargs.setdefault("init", False)
    return dataclasses.field(**field_kwargs, metadata=metadata["metadata"])


def RecordArray(dtype: str = "float64", ndim: int = 1, key: str = None):
    if ndim < 1:
        raise ValueError(f"RecordArray `ndim` must be at least 1, not: {ndim}")
    return {"metadata": {"record": RecordArrayMetadata(dtype, ndim, key)}}


def record_array(dtype: str = "float64", ndim: int = 1, key: str = None, **field_kwargs) -> dataclasses.Field:
    metadata = RecordArray(dtype, ndim, key)
    return dataclasses.field(**field_kwargs, metadata=metadata["metadata"])
