from __future__ import annotations

import dataclasses
import json

import numpy as np
import pytest

from dcovforest.config import CartConfig, CenteredConfig, StageConfig, TransferConfig
from dcovforest.exceptions import ModelFileError, RecordFieldTypeError, RecordFieldValueError
from dcovforest.kinds import Method
from dcovforest.records import (
    CartForestRecord,
    CenteredForestRecord,
    ModelRecord,
    TransferModelRecord,
    load_model,
    record,
    record_array,
    save_model,
)
from dcovforest.tabular import CsvSchema, load_csv
from dcovforest.transfer import TransferModel, fit_method


def _config(**cart) -> TransferConfig:
    stage = StageConfig(centered=CenteredConfig(n_trees=4, depth=3), cart=CartConfig(n_trees=4, **cart))
    return TransferConfig(source=stage, residual=stage, target=stage, seed=17)


@pytest.mark.parametrize("method", list(Method))
def test_model_round_trip_is_bit_exact(method, small_source, small_target, tmp_path):
    model = fit_method(method, small_source, small_target, _config())
    path = save_model(model, tmp_path / "model.json", method)
    loaded, loaded_method, encoder = load_model(path)
    assert loaded_method == method
    assert encoder is None
    assert type(loaded) is type(model)
    points = np.random.default_rng(5).uniform(size=(50, small_source.d))
    np.testing.assert_array_equal(loaded.predict(points), model.predict(points))


def test_transfer_record_keeps_audit_fields(small_source, small_target, tmp_path):
    model = fit_method(Method.TLSRF, small_source, small_target, _config(unlimited_depth=True))
    loaded, _, _ = load_model(save_model(model, tmp_path / "model.json"))
    assert isinstance(loaded, TransferModel)
    assert loaded.dcov_weights == model.dcov_weights
    np.testing.assert_array_equal(loaded.split_assignment.train, model.split_assignment.train)
    np.testing.assert_array_equal(loaded.split_assignment.weights, model.split_assignment.weights)
    assert loaded.residual_forest.max_depth is None
    assert loaded.seed == model.seed


def test_depth_zero_centered_forest_round_trip(small_target, tmp_path):
    stage = StageConfig(centered=CenteredConfig(n_trees=2, depth=0))
    model = fit_method(Method.CRF, None, small_target, TransferConfig(target=stage))
    loaded, _, _ = load_model(save_model(model, tmp_path / "model.json"))
    np.testing.assert_array_equal(loaded.predict(small_target.features), model.predict(small_target.features))


def test_embedded_encoder_round_trip(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("a,c,y\n1,x,0.5\n3,y,1.5\n2,x,1.0\n5,z,2.0\n4,y,0.0\n")
    schema = CsvSchema(categorical=("c",))
    data, encoder = load_csv(path, schema)
    model = fit_method(Method.SRF, None, data, _config())
    _, _, loaded = load_model(save_model(model, tmp_path / "model.json", encoder=encoder))
    assert loaded.feature_names == encoder.feature_names
    assert loaded.n_fit_rows == 5
    np.testing.assert_array_equal(load_csv(path, schema, loaded)[0].features, data.features)


def test_file_header_fields(small_target, tmp_path):
    model = fit_method(Method.SRF, None, small_target, _config())
    data = json.loads(save_model(model, tmp_path / "model.json").read_text())
    assert (data["version"], data["kind"], data["method"]) == (1, "cart", "SRF")
    assert isinstance(CartForestRecord.from_dict(data), CartForestRecord)


def _rewrite(path, change):
    data = json.loads(path.read_text())
    change(data)
    path.write_text(json.dumps(data))


def test_corrupted_model_files(small_target, tmp_path):
    path = save_model(fit_method(Method.CRF, None, small_target, _config()), tmp_path / "model.json")
    original = path.read_text()

    _rewrite(path, lambda data: data.update(version=2))
    with pytest.raises(RecordFieldValueError, match="not an asserted value"):
        load_model(path)

    path.write_text(original)
    _rewrite(path, lambda data: data.update(kind="gbm"))
    with pytest.raises(ModelFileError, match="invalid kind"):
        load_model(path)

    path.write_text(original)
    _rewrite(path, lambda data: data.update(colour="red"))
    with pytest.raises(RecordFieldValueError, match="unknown keys"):
        load_model(path)

    path.write_text(original)
    _rewrite(path, lambda data: data.pop("version"))
    with pytest.raises(RecordFieldValueError, match="missing asserted key"):
        load_model(path)

    path.write_text(original)
    _rewrite(path, lambda data: data["leaf_values"][0].append(1.0))
    with pytest.raises(RecordFieldValueError, match="leaf_values"):
        load_model(path)

    path.write_text("{not json")
    with pytest.raises(ModelFileError):
        load_model(path)
    path.write_text("[1, 2]")
    with pytest.raises(ModelFileError):
        load_model(path)
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "missing.json")


def test_record_classes_check_kind():
    assert CenteredForestRecord.get_record_metadata()[-1].single_asserted == "centered"
    assert TransferModelRecord.get_record_metadata()[-1].single_asserted == "transfer"


def test_array_fields_need_array_metadata():

    @dataclasses.dataclass(slots=True)
    class BadRecord(ModelRecord):
        values: np.ndarray = None

    with pytest.raises(RecordFieldTypeError, match="RecordArray"):
        BadRecord()


def test_custom_record_round_trip():

    @dataclasses.dataclass(slots=True)
    class PointsRecord(ModelRecord):
        label: str
        points: np.ndarray = record_array("float64", ndim=2)
        version: int = record(asserted=3)

    points = PointsRecord("corners", np.array([[0.0, 0.1], [1.0 / 3.0, 1.0]]))
    assert points.version == 3
    loaded = PointsRecord.from_json(points.to_json())
    assert loaded.label == "corners"
    np.testing.assert_array_equal(loaded.points, points.points)
    with pytest.raises(RecordFieldValueError):
        PointsRecord.from_dict({"label": "corners", "points": [0.0, 1.0], "version": 3})
