from __future__ import annotations

__all__ = [
    "FIELD_T",
    "JSON_T",
    "RecordMetadata",
    "RecordArrayMetadata",
]

import dataclasses
import typing as tp

import numpy as np

from dcovforest.exceptions import RecordFieldValueError

FIELD_T = tp.TypeVar("FIELD_T")  # can be any type thanks to `decode_func` option
JSON_T = tp.Union[None, bool, int, float, str, list, dict]


@dataclasses.dataclass(slots=True)
class RecordMetadata(tp.Generic[FIELD_T]):
    """Base class for optional metadata for `ModelRecord` dataclass fields."""

    key: str | None = None  # JSON key; defaults to the field name
    asserted: tuple[FIELD_T, ...] = dataclasses.field(default=())
    decode_func: tp.Callable[[JSON_T], FIELD_T] = None
    encode_func: tp.Callable[[FIELD_T], JSON_T] = None

    # Constructed in `__post_init__` for efficiency.
    single_asserted: FIELD_T | None = dataclasses.field(init=False, default=None)

    # Assigned by `ModelRecord` to allow better error messages below.
    field_name: str = dataclasses.field(default=None, init=False)
    field_type: type[FIELD_T] = dataclasses.field(default=None, init=False)

    def __post_init__(self):
        if self.asserted and len(self.asserted) == 1:
            self.single_asserted = self.asserted[0]
        else:
            self.single_asserted = None

    @property
    def json_key(self) -> str:
        return self.key or self.field_name

    def _check_asserted(self, value: tp.Any, reading: bool):
        if self.asserted and value not in self.asserted:
            verb = "read value" if reading else "value"
            raise RecordFieldValueError(
                f"Field '{self.field_name}' {verb} {value!r} is not an asserted value: {self.asserted}"
            )

    def get_decoder(self) -> tp.Callable[[JSON_T], FIELD_T]:
        """Configures and returns a function that produces a field value from its decoded JSON value.

        The (unchanging) metadata options are checked once, here, rather than on every record read.
        """
        decode_func = self.decode_func
        check = self._check_asserted if self.asserted else None

        def decode(value: JSON_T) -> FIELD_T:
            if value is not None and decode_func is not None:
                value = decode_func(value)
            if check is not None:
                check(value, True)
            return value

        return decode

    def get_encoder(self) -> tp.Callable[[FIELD_T], JSON_T]:
        encode_func = self.encode_func
        check = self._check_asserted if self.asserted else None

        def encode(value: FIELD_T) -> JSON_T:
            if check is not None:
                check(value, False)
            if value is not None and encode_func is not None:
                value = encode_func(value)
            return value

        return encode


@dataclasses.dataclass(slots=True, init=False)
class RecordArrayMetadata(RecordMetadata):
    """Dataclass field metadata for a numpy array stored as (nested) JSON lists.

    Floats are written with Python's shortest round-trip `repr`, so arrays reload bit-exactly.
    """

    dtype: str = "float64"
    ndim: int = 1

    def __init__(
        self,
        dtype: str = "float64",
        ndim: int = 1,
        key: str | None = None,
    ):
        """Custom argument order to lead with `dtype`."""
        self.dtype = dtype
        self.ndim = ndim
        self.key = key
        self.asserted = ()
        self.decode_func = None
        self.encode_func = None
        self.field_name = None
        self.field_type = None
        super(RecordArrayMetadata, self).__post_init__()

    def get_decoder(self) -> tp.Callable[[JSON_T], np.ndarray]:
        dtype = np.dtype(self.dtype)
        ndim = self.ndim
        field_name = self.field_name

        def decode(value: JSON_T) -> np.ndarray | None:
            if value is None:
                return None
            try:
                array = np.array(value, dtype=dtype)
            except (TypeError, ValueError) as ex:
                raise RecordFieldValueError(f"Field '{field_name}' is not a valid `{dtype}` array: {ex}")
            if array.ndim != ndim and not (array.size == 0 and ndim > 1):
                raise RecordFieldValueError(
                    f"Field '{field_name}' array has {array.ndim} dimensions, expected {ndim}."
                )
            return array

        return decode

    def get_encoder(self) -> tp.Callable[[np.ndarray], JSON_T]:
        dtype = np.dtype(self.dtype)

        def encode(value: np.ndarray | None) -> JSON_T:
            if value is None:
                return None
            return np.asarray(value, dtype=dtype).tolist()

        return encode
