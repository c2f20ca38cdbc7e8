from __future__ import annotations

__all__ = [
    "ModelRecord",
    "parse_document",
    "read_document",
]

import dataclasses
import json
import logging
import types
import typing as tp
from pathlib import Path

import numpy as np

from dcovforest.exceptions import ModelFileError, RecordFieldTypeError, RecordFieldValueError
from dcovforest.records.metadata import JSON_T, RecordMetadata, RecordArrayMetadata

_LOGGER = logging.getLogger("dcovforest")

_PRIMITIVE_TYPES = (bool, int, float, str, dict, list)


def parse_document(text: str) -> dict[str, JSON_T]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as ex:
        raise ModelFileError(f"Model file is not valid JSON: {ex}") from ex
    if not isinstance(data, dict):
        raise ModelFileError(f"Model file must hold a JSON object, not: {type(data).__name__}")
    return data


def read_document(path: str | Path) -> dict[str, JSON_T]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as ex:
        _LOGGER.error(f"Could not read model file `{path}`: {ex}")
        raise ModelFileError(f"Could not read model file `{path}`: {ex}") from ex
    return parse_document(text)


def _strip_optional(field_type: tp.Any) -> tuple[tp.Any, bool]:
    """Remove `None` from a `X | None` hint. Returns the remaining type and whether `None` was allowed."""
    if isinstance(field_type, types.UnionType) or tp.get_origin(field_type) is tp.Union:
        args = tuple(arg for arg in tp.get_args(field_type) if arg is not type(None))
        if len(args) == 1:
            return args[0], True
        return field_type, True
    return field_type, False


@dataclasses.dataclass(slots=True)
class ModelRecord:
    """Dataclass that supports automatic reading/writing from versioned JSON documents.

    Field values are converted by per-field metadata (see `dcovforest.records.fields`). Fields without metadata must be
    JSON primitives, nested `ModelRecord` subclasses, or lists of them. Single-asserted fields (`version`, `kind`) are
    always written and checked on read.
    """

    # Caches for class record information, each constructed on first use.
    _FIELDS: tp.ClassVar[tuple[dataclasses.Field, ...] | None] = None
    _FIELD_METADATA: tp.ClassVar[tuple[RecordMetadata, ...] | None] = None
    _FIELD_ENCODERS: tp.ClassVar[tuple[tp.Callable, ...] | None] = None
    _FIELD_DECODERS: tp.ClassVar[tuple[tp.Callable, ...] | None] = None

    def __post_init__(self) -> None:
        if not self._is_initialized():
            self._initialize_record_cls()

        # Set single-asserted fields to their asserted values, regardless of `init` setting.
        for field, field_metadata in zip(self._FIELDS, self._FIELD_METADATA, strict=True):
            if field_metadata.single_asserted is not None:
                setattr(self, field.name, field_metadata.single_asserted)

    @property
    def cls_name(self):
        return self.__class__.__name__

    @classmethod
    def _is_initialized(cls) -> bool:
        # Checked on `cls.__dict__` so a subclass never inherits its parent's caches.
        return cls.__dict__.get("_FIELD_DECODERS") is not None

    @classmethod
    def _initialize_record_cls(cls):
        if not dataclasses.is_dataclass(cls):
            raise TypeError(f"ModelRecord subclass `{cls.__name__}` is missing a `dataclass` decorator.")

        cls_name = cls.__name__
        dc_fields = tuple(dataclasses.fields(cls))
        if not dc_fields:
            raise TypeError(f"`ModelRecord` subclass `{cls_name}` has no fields.")
        type_hints = tp.get_type_hints(cls)

        all_metadata = []
        for dc_field in dc_fields:
            field_type, _ = _strip_optional(type_hints[dc_field.name])
            metadata = dc_field.metadata.get("record", None)  # type: RecordMetadata | None
            if metadata is None:
                # NOTE: We can't add new keys to `field.metadata` now, but store it in `_FIELD_METADATA`.
                metadata = cls._default_metadata(dc_field, field_type)
            elif field_type is np.ndarray and not isinstance(metadata, RecordArrayMetadata):
                raise RecordFieldTypeError(dc_field, cls_name, "Array fields must use `RecordArray` metadata.")

            metadata.field_name = dc_field.name
            metadata.field_type = field_type
            all_metadata.append(metadata)

        keys = [metadata.json_key for metadata in all_metadata]
        if len(set(keys)) != len(keys):
            raise TypeError(f"`ModelRecord` subclass `{cls_name}` has duplicate JSON keys: {keys}")

        cls._FIELDS = dc_fields
        cls._FIELD_METADATA = tuple(all_metadata)
        cls._FIELD_ENCODERS = tuple(metadata.get_encoder() for metadata in all_metadata)
        cls._FIELD_DECODERS = tuple(metadata.get_decoder() for metadata in all_metadata)

    @classmethod
    def _default_metadata(cls, dc_field: dataclasses.Field, field_type: tp.Any) -> RecordMetadata:
        cls_name = cls.__name__
        if field_type is np.ndarray:
            raise RecordFieldTypeError(dc_field, cls_name, "Array fields must use `RecordArray` metadata.")

        origin = tp.get_origin(field_type)
        if origin in (list, tuple):
            args = tp.get_args(field_type)
            element_type = args[0] if args else None
            if isinstance(element_type, type) and issubclass(element_type, ModelRecord):
                # List of sub-records.
                return RecordMetadata(
                    decode_func=lambda values: [element_type.from_dict(v) for v in values],
                    encode_func=lambda records: [r.to_dict() for r in records],
                )
            if element_type in _PRIMITIVE_TYPES or element_type is None:
                return RecordMetadata(decode_func=origin, encode_func=list)
            raise RecordFieldTypeError(
                dc_field, cls_name, f"List field with element type `{element_type}` must have `decode_func` metadata."
            )

        if isinstance(field_type, type) and issubclass(field_type, ModelRecord):
            # Sub-record.
            return RecordMetadata(decode_func=field_type.from_dict, encode_func=lambda r: r.to_dict())
        if field_type in _PRIMITIVE_TYPES or origin is dict:
            return RecordMetadata()
        raise RecordFieldTypeError(
            dc_field,
            cls_name,
            f"Field with non-primitive, non-record type `{field_type}` must have `decode_func` metadata.",
        )

    @classmethod
    def get_record_metadata(cls) -> tuple[RecordMetadata, ...]:
        if not cls._is_initialized():
            cls._initialize_record_cls()
        return cls._FIELD_METADATA

    @classmethod
    def from_dict(cls, data: dict[str, JSON_T]) -> tp.Self:
        """Build a record from a decoded JSON object, checking asserted values and rejecting unknown keys."""
        if not cls._is_initialized():
            cls._initialize_record_cls()
        cls_name = cls.__name__
        if not isinstance(data, dict):
            raise RecordFieldValueError(f"`{cls_name}` must be read from a JSON object, not: {type(data).__name__}")

        known_keys = {metadata.json_key for metadata in cls._FIELD_METADATA}
        unknown = sorted(set(data) - known_keys)
        if unknown:
            raise RecordFieldValueError(f"`{cls_name}` has unknown keys: {unknown}")

        init_kwargs = {}
        for field, metadata, decoder in zip(cls._FIELDS, cls._FIELD_METADATA, cls._FIELD_DECODERS):
            key = metadata.json_key
            if key not in data:
                if metadata.single_asserted is not None:
                    raise RecordFieldValueError(f"`{cls_name}` is missing asserted key '{key}'.")
                if field.default is dataclasses.MISSING and field.default_factory is dataclasses.MISSING:
                    raise RecordFieldValueError(f"`{cls_name}` is missing required key '{key}'.")
                continue
            try:
                value = decoder(data[key])
            except RecordFieldValueError:
                raise
            except Exception as ex:
                _LOGGER.error(f"Error occurred while decoding record field `{cls_name}.{field.name}`: {ex}")
                raise RecordFieldValueError(f"Field `{cls_name}.{field.name}`: {ex}") from ex
            if field.init:
                init_kwargs[field.name] = value
            # Non-init fields are single-asserted and set in `__post_init__`; the decoder has already checked them.

        try:
            return cls(**init_kwargs)
        except (TypeError, ValueError) as ex:
            raise RecordFieldValueError(f"Invalid `{cls_name}` values: {ex}") from ex

    def to_dict(self) -> dict[str, JSON_T]:
        data = {}
        for field, metadata, encoder in zip(self._FIELDS, self._FIELD_METADATA, self._FIELD_ENCODERS):
            value = getattr(self, field.name, None)
            if value is None and metadata.single_asserted is not None:
                value = metadata.single_asserted
            try:
                data[metadata.json_key] = encoder(value)
            except Exception as ex:
                _LOGGER.error(f"Error occurred while encoding record field `{self.cls_name}.{field.name}`: {ex}")
                raise
        return data

    @classmethod
    def from_json(cls, text: str) -> tp.Self:
        return cls.from_dict(parse_document(text))

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent, allow_nan=False)

    @classmethod
    def read(cls, path: str | Path) -> tp.Self:
        return cls.from_dict(read_document(path))

    def write(self, path: str | Path, indent: int | None = None) -> Path:
        path = Path(path)
        text = self.to_json(indent)
        try:
            path.write_text(text + "\n", encoding="utf-8")
        except OSError as ex:
            _LOGGER.error(f"Could not write model file `{path}`: {ex}")
            raise ModelFileError(f"Could not write model file `{path}`: {ex}") from ex
        return path

