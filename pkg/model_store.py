# model_store.py
import json
import os
from dataclasses import dataclass
from threading import Lock

import config
from errors import ValidationError
from regression import RidgeFit
from results_logger import status
from sparse_features import SparseFeatureMap, feature_map_from_dict, feature_map_to_dict


@dataclass
class StoredModel:
    feature_map: SparseFeatureMap
    fit: RidgeFit
    columns: list[str] | None = None
    target: str | None = None


class ModelStore:
    """
    Persists a fitted model (sparse feature map plus ridge readout) as one
    JSON document. Floats are written with repr precision, so a reload
    reproduces every weight and coefficient bit for bit.
    """
    def __init__(self, model_file):
        self.model_file = str(model_file)
        self._lock = Lock()

    def _load(self) -> dict:
        if not os.path.exists(self.model_file):
            raise ValidationError(f"model file {self.model_file} does not exist")
        with open(self.model_file, "r", encoding="utf-8") as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as e:
                raise ValidationError(f"model file {self.model_file} is not valid JSON: {e}") from e

    def _save(self, document: dict):
        directory = os.path.dirname(self.model_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.model_file, "w", encoding="utf-8") as f:
            json.dump(document, f, indent=1)
            f.write("\n")

    def save(self, model: StoredModel) -> dict:
        document = {
            "version": config.MODEL_FORMAT_VERSION,
            "columns": model.columns,
            "target": model.target,
            "feature_map": feature_map_to_dict(model.feature_map),
            "fit": model.fit.to_dict(),
        }
        with self._lock:
            self._save(document)
        status("model", f"saved {model.feature_map.m} features to {self.model_file}")
        return document

    def load(self) -> StoredModel:
        with self._lock:
            document = self._load()
        if document.get("version") != config.MODEL_FORMAT_VERSION:
            raise ValidationError(f"unsupported model version {document.get('version')!r}")
        try:
            feature_map = feature_map_from_dict(document["feature_map"])
            fit = RidgeFit.from_dict(document["fit"])
        except ValidationError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"model file {self.model_file} is incomplete: {e}") from e
        if fit.coefficients.size != feature_map.n_outputs:
            raise ValidationError("readout size does not match the feature map")
        return StoredModel(feature_map, fit, document.get("columns"), document.get("target"))
