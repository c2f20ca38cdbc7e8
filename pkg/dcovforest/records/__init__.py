"""Declarative JSON records for model files."""
__all__ = [
    "ModelRecord",
    "RecordMetadata",
    "RecordArrayMetadata",
    "Record",
    "record",
    "RecordArray",
    "record_array",
    "parse_document",
    "read_document",

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

from .fields import *
from .metadata import RecordMetadata, RecordArrayMetadata
from .model_record import ModelRecord, parse_document, read_document
from .models import *
