"""Model file records for fitted forests and transfer models.

Every model file is one JSON object with an asserted `version` and `kind` (`centered`, `cart` or `transfer`). A file
written by `train` may also embed the `TabularEncoder` used to build its features, so `predict` can encode new CSV rows
the same way.
"""
from __future__ import annotations

__all__ = [
    "MODEL_FILE_VERSION",
    "EncoderRecord",
    "CenteredForestRecord",
    "CartTreeRecord",
    "CartForestRecord",
    "TransferModelRecord",
    "forest_record",
    "model_record",
    "save_model",
    "load_model",
]

import dataclasses
import logging
import typing as tp
from pathlib import Path

import numpy as np

from dcovforest.cart import CartForest, CartTree
from dcovforest.centered import CenteredForest, CenteredTree
from dcovforest.dcov import FeatureWeights
from dcovforest.exceptions import ModelFileError, RecordFieldValueError
from dcovforest.kinds import Method
from dcovforest.records.fields import record, record_array
from dcovforest.records.model_record import ModelRecord, read_document
from dcovforest.tabular import TabularEncoder
from dcovforest.transfer import FittedModel, SplitAssignment, TransferModel

_LOGGER = logging.getLogger("dcovforest")

MODEL_FILE_VERSION = 1


@dataclasses.dataclass(slots=True)
class EncoderRecord(ModelRecord):
    columns: list[str]
    numeric: list[str]
    categorical: list[str]
    mins: np.ndarray = record_array("float64")
    maxs: np.ndarray = record_array("float64")
    levels: dict = dataclasses.field(default_factory=dict)
    n_fit_rows: int = 0
    scale: bool = True

    @classmethod
    def from_encoder(cls, encoder: TabularEncoder) -> tp.Self:
        return cls(
            list(encoder.columns),
            list(encoder.numeric),
            list(encoder.categorical),
            encoder.mins,
            encoder.maxs,
            {column: list(levels) for column, levels in encoder.levels.items()},
            encoder.n_fit_rows,
            encoder.scale,
        )

    def to_encoder(self) -> TabularEncoder:
        return TabularEncoder(
            numeric=tuple(self.numeric),
            categorical=tuple(self.categorical),
            mins=self.mins,
            maxs=self.maxs,
            levels={column: tuple(levels) for column, levels in self.levels.items()},
            n_fit_rows=self.n_fit_rows,
            columns=tuple(self.columns),
            scale=self.scale,
        )


def _weights_field() -> dataclasses.Field:
    return record(
        decode_func=lambda p: FeatureWeights(np.array(p, dtype=np.float64)),
        encode_func=FeatureWeights.to_list,
    )


@dataclasses.dataclass(slots=True)
class CenteredForestRecord(ModelRecord):
    """Centered forest. Node arrays have one row per tree, in heap order."""

    method: str
    d: int
    depth: int
    n_trees: int
    seed: int
    weights: FeatureWeights = _weights_field()
    features: np.ndarray = record_array("int64", ndim=2)
    thresholds: np.ndarray = record_array("float64", ndim=2)
    leaf_values: np.ndarray = record_array("float64", ndim=2)
    leaf_counts: np.ndarray = record_array("int64", ndim=2)
    encoder: EncoderRecord | None = None
    version: int = record(asserted=MODEL_FILE_VERSION)
    kind: str = record(asserted="centered")

    @classmethod
    def from_forest(cls, forest: CenteredForest, method: Method | str = Method.CRF) -> tp.Self:
        return cls(
            str(method),
            forest.d,
            forest.depth,
            forest.n_trees,
            forest.seed,
            forest.weights,
            np.stack([tree.features for tree in forest.trees]),
            np.stack([tree.thresholds for tree in forest.trees]),
            np.stack([tree.leaf_values for tree in forest.trees]),
            np.stack([tree.leaf_counts for tree in forest.trees]),
        )

    def to_forest(self) -> CenteredForest:
        n_internal = (1 << self.depth) - 1
        expected = {
            "features": (self.n_trees, n_internal),
            "thresholds": (self.n_trees, n_internal),
            "leaf_values": (self.n_trees, n_internal + 1),
            "leaf_counts": (self.n_trees, n_internal + 1),
        }
        for name, shape in expected.items():
            array = getattr(self, name)
            if n_internal == 0 and name in {"features", "thresholds"}:
                # `[[], ...]` or `[]`
                try:
                    array = array.reshape(self.n_trees, 0)
                except ValueError as ex:
                    raise RecordFieldValueError(f"Field '{name}' has shape {array.shape}, expected {shape}.") from ex
                setattr(self, name, array)
            if array.shape != shape:
                raise RecordFieldValueError(f"Field '{name}' has shape {array.shape}, expected {shape}.")
        if self.weights.d != self.d:
            raise RecordFieldValueError(f"Field 'weights' has {self.weights.d} entries for d = {self.d}.")
        trees = tuple(
            CenteredTree(
                self.depth,
                self.features[t].copy(),
                self.thresholds[t].copy(),
                self.leaf_values[t].copy(),
                self.leaf_counts[t].copy(),
            )
            for t in range(self.n_trees)
        )
        return CenteredForest(trees, self.weights, self.depth, self.seed)


@dataclasses.dataclass(slots=True)
class CartTreeRecord(ModelRecord):
    features: np.ndarray = record_array("int64")
    thresholds: np.ndarray = record_array("float64")
    children_left: np.ndarray = record_array("int64")
    children_right: np.ndarray = record_array("int64")
    values: np.ndarray = record_array("float64")
    n_samples: np.ndarray = record_array("int64")

    @classmethod
    def from_tree(cls, tree: CartTree) -> tp.Self:
        return cls(
            tree.features, tree.thresholds, tree.children_left, tree.children_right, tree.values, tree.n_samples
        )

    def to_tree(self) -> CartTree:
        n_nodes = self.features.shape[0]
        for name in ("thresholds", "children_left", "children_right", "values", "n_samples"):
            if getattr(self, name).shape[0] != n_nodes:
                raise RecordFieldValueError(
                    f"Field '{name}' has {getattr(self, name).shape[0]} nodes, expected {n_nodes}."
                )
        return CartTree(
            self.features, self.thresholds, self.children_left, self.children_right, self.values, self.n_samples
        )


@dataclasses.dataclass(slots=True)
class CartForestRecord(ModelRecord):
    method: str
    d: int
    mtry: int
    n_boot: int
    max_depth: int | None
    seed: int
    bootstrap: bool
    weights: FeatureWeights = _weights_field()
    trees: list[CartTreeRecord] = dataclasses.field(default_factory=list)
    encoder: EncoderRecord | None = None
    version: int = record(asserted=MODEL_FILE_VERSION)
    kind: str = record(asserted="cart")

    @classmethod
    def from_forest(cls, forest: CartForest, method: Method | str = Method.SRF) -> tp.Self:
        return cls(
            str(method),
            forest.d,
            forest.mtry,
            forest.n_boot,
            forest.max_depth,
            forest.seed,
            forest.bootstrap,
            forest.weights,
            [CartTreeRecord.from_tree(tree) for tree in forest.trees],
        )

    def to_forest(self) -> CartForest:
        if not self.trees:
            raise RecordFieldValueError("CART forest record has no trees.")
        if self.weights.d != self.d:
            raise RecordFieldValueError(f"Field 'weights' has {self.weights.d} entries for d = {self.d}.")
        trees = tuple(tree.to_tree() for tree in self.trees)
        return CartForest(trees, self.mtry, self.weights, self.n_boot, self.max_depth, self.seed, self.bootstrap)


_FOREST_RECORD_TYPES: dict[str, type[CenteredForestRecord | CartForestRecord]] = {
    "centered": CenteredForestRecord,
    "cart": CartForestRecord,
}


def _forest_record_from_dict(data: dict) -> CenteredForestRecord | CartForestRecord:
    kind = data.get("kind") if isinstance(data, dict) else None
    if kind not in _FOREST_RECORD_TYPES:
        raise RecordFieldValueError(f"Embedded forest has invalid kind: {kind!r}")
    return _FOREST_RECORD_TYPES[kind].from_dict(data)


def _forest_field() -> dataclasses.Field:
    return record(decode_func=_forest_record_from_dict, encode_func=lambda r: r.to_dict())


@dataclasses.dataclass(slots=True)
class TransferModelRecord(ModelRecord):
    """Transfer model: both embedded forest records, the residual weights and the target split (for audit)."""

    method: str
    d: int
    seed: int
    source: CenteredForestRecord | CartForestRecord = _forest_field()
    residual: CenteredForestRecord | CartForestRecord = _forest_field()
    dcov_weights: FeatureWeights = _weights_field()
    split_train: np.ndarray = record_array("int64")
    split_weights: np.ndarray = record_array("int64")
    encoder: EncoderRecord | None = None
    version: int = record(asserted=MODEL_FILE_VERSION)
    kind: str = record(asserted="transfer")

    @classmethod
    def from_model(cls, model: TransferModel) -> tp.Self:
        return cls(
            str(model.method),
            model.d,
            model.seed,
            forest_record(model.source_forest, model.method),
            forest_record(model.residual_forest, model.method),
            model.dcov_weights,
            model.split_assignment.train,
            model.split_assignment.weights,
        )

    def to_model(self) -> TransferModel:
        try:
            split = SplitAssignment(self.split_train, self.split_weights)
        except ValueError as ex:
            raise RecordFieldValueError(f"Invalid target split: {ex}") from ex
        return TransferModel(
            Method(self.method),
            self.source.to_forest(),
            self.residual.to_forest(),
            self.dcov_weights,
            split,
            self.seed,
        )


def forest_record(forest: CenteredForest | CartForest, method: Method | str) -> CenteredForestRecord | CartForestRecord:
    if isinstance(forest, CenteredForest):
        return CenteredForestRecord.from_forest(forest, method)
    if isinstance(forest, CartForest):
        return CartForestRecord.from_forest(forest, method)
    raise TypeError(f"Not a forest: {type(forest).__name__}")


def model_record(
    model: FittedModel,
    method: Method | str | None = None,
    encoder: TabularEncoder | None = None,
) -> CenteredForestRecord | CartForestRecord | TransferModelRecord:
    """Record for any fitted model. `method` labels bare forests (default `CRF` for centered, `SRF` for CART)."""
    if isinstance(model, TransferModel):
        result = TransferModelRecord.from_model(model)
    elif isinstance(model, CenteredForest):
        result = CenteredForestRecord.from_forest(model, method or Method.CRF)
    else:
        result = forest_record(model, method or Method.SRF)
    if encoder is not None:
        result.encoder = EncoderRecord.from_encoder(encoder)
    return result


_MODEL_RECORD_TYPES: dict[str, type[ModelRecord]] = {
    **_FOREST_RECORD_TYPES,
    "transfer": TransferModelRecord,
}


def save_model(
    model: FittedModel,
    path: str | Path,
    method: Method | str | None = None,
    encoder: TabularEncoder | None = None,
) -> Path:
    path = model_record(model, method, encoder).write(path)
    _LOGGER.debug(f"Wrote model file `{path}`.")
    return path


def load_model(path: str | Path) -> tuple[FittedModel, Method, TabularEncoder | None]:
    """Read a model file of any kind. Returns the model, its method label and its encoder (if it has one)."""
    path = Path(path)
    data = read_document(path)
    kind = data.get("kind")
    if kind not in _MODEL_RECORD_TYPES:
        raise ModelFileError(f"Model file `{path}` has invalid kind: {kind!r}")
    loaded = _MODEL_RECORD_TYPES[kind].from_dict(data)
    model = loaded.to_model() if isinstance(loaded, TransferModelRecord) else loaded.to_forest()
    encoder = loaded.encoder.to_encoder() if loaded.encoder is not None else None
    return model, Method(loaded.method), encoder
