"""JSON save/load for every model kind, bit-exact on float64 values.

The on-disk format is a single JSON document tagged with a format
string and a kind. Floats are serialized through Python's shortest
round-trip repr, so a save/load cycle reproduces scores bit for bit.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .detector import AEDetector, Normalizer, PCABaseline
from .errors import DataError
from .multimodal import MAEModel, ModalitySchema, ModalityType
from .neuralnet import DenseNetwork, Layer

FORMAT_TAG = "anomalens/1"

__all__ = ["FORMAT_TAG", "save_model", "load_model", "model_kind"]


def _arr(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def _network_doc(net: DenseNetwork) -> dict:
    return {
        "input_dim": net.input_dim,
        "layers": [
            {"weights": _arr(l.weights), "biases": _arr(l.biases), "activation": l.activation}
            for l in net.layers
        ],
    }


def _network_from(doc: dict) -> DenseNetwork:
    layers = [
        Layer(
            weights=np.asarray(l["weights"], dtype=np.float64),
            biases=np.asarray(l["biases"], dtype=np.float64),
            activation=l["activation"],
        )
        for l in doc["layers"]
    ]
    return DenseNetwork(layers=layers, input_dim=int(doc["input_dim"]))


def _normalizer_doc(norm: Normalizer) -> dict:
    return {"minimum": _arr(norm.minimum), "maximum": _arr(norm.maximum)}


def _normalizer_from(doc: dict) -> Normalizer:
    return Normalizer(
        minimum=np.asarray(doc["minimum"], dtype=np.float64),
        maximum=np.asarray(doc["maximum"], dtype=np.float64),
    )


def _schema_doc(schema: ModalitySchema) -> dict:
    return {
        "shared_size": schema.shared_size,
        "shared_activation": schema.shared_activation,
        "types": [
            {
                "name": t.name,
                "input_size": t.input_size,
                "code_size": t.code_size,
                "encode_activation": t.encode_activation,
                "defuse_activation": t.defuse_activation,
                "decode_activation": t.decode_activation,
            }
            for t in schema.types
        ],
    }


def _schema_from(doc: dict) -> ModalitySchema:
    return ModalitySchema(
        types=[ModalityType(**t) for t in doc["types"]],
        shared_size=int(doc["shared_size"]),
        shared_activation=doc["shared_activation"],
    )


_MAE_PARAM_NAMES = ("enc_w", "enc_b", "fus_w", "fus_b", "defus_w", "defus_b", "dec_w", "dec_b")


def _to_doc(model) -> dict:
    if isinstance(model, DenseNetwork):
        return {"kind": "dense_network", "network": _network_doc(model)}
    if isinstance(model, AEDetector):
        return {
            "kind": "detector",
            "network": _network_doc(model.net),
            "normalizer": _normalizer_doc(model.normalizer),
            "threshold": float(model.threshold),
            "train_mean": _arr(model.train_mean),
            "train_std": _arr(model.train_std),
            "mse_mean": float(model.mse_mean),
            "mse_std": float(model.mse_std),
        }
    if isinstance(model, PCABaseline):
        return {
            "kind": "pca",
            "normalizer": _normalizer_doc(model.normalizer),
            "mean": _arr(model.mean),
            "components": _arr(model.components),
        }
    if isinstance(model, MAEModel):
        return {
            "kind": "mae",
            "schema": _schema_doc(model.schema),
            "params": {name: [_arr(a) for a in getattr(model, name)] for name in _MAE_PARAM_NAMES},
            "normalizers": [_normalizer_doc(n) for n in model.normalizers],
            "nu": _arr(model.nu),
            "weights": _arr(model.weights),
            "threshold": float(model.threshold),
            "wmse_mean": float(model.wmse_mean),
            "wmse_std": float(model.wmse_std),
        }
    raise DataError(f"cannot serialize objects of type {type(model).__name__}")


def _from_doc(doc: dict):
    kind = doc.get("kind")
    if kind == "dense_network":
        return _network_from(doc["network"])
    if kind == "detector":
        return AEDetector(
            net=_network_from(doc["network"]),
            normalizer=_normalizer_from(doc["normalizer"]),
            threshold=float(doc["threshold"]),
            train_mean=np.asarray(doc["train_mean"], dtype=np.float64),
            train_std=np.asarray(doc["train_std"], dtype=np.float64),
            mse_mean=float(doc["mse_mean"]),
            mse_std=float(doc["mse_std"]),
        )
    if kind == "pca":
        return PCABaseline(
            normalizer=_normalizer_from(doc["normalizer"]),
            mean=np.asarray(doc["mean"], dtype=np.float64),
            components=np.asarray(doc["components"], dtype=np.float64),
        )
    if kind == "mae":
        params = {
            name: [np.asarray(a, dtype=np.float64) for a in doc["params"][name]]
            for name in _MAE_PARAM_NAMES
        }
        return MAEModel(
            schema=_schema_from(doc["schema"]),
            normalizers=[_normalizer_from(n) for n in doc["normalizers"]],
            nu=np.asarray(doc["nu"], dtype=np.float64),
            weights=np.asarray(doc["weights"], dtype=np.float64),
            threshold=float(doc["threshold"]),
            wmse_mean=float(doc["wmse_mean"]),
            wmse_std=float(doc["wmse_std"]),
            **params,
        )
    raise DataError(f"unknown model kind {kind!r}")


def model_kind(model) -> str:
    return _to_doc(model)["kind"]


def save_model(path, model) -> None:
    doc = {"format": FORMAT_TAG}
    doc.update(_to_doc(model))
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid model JSON: {exc}") from None
    if doc.get("format") != FORMAT_TAG:
        raise DataError(f"{path}: unsupported format {doc.get('format')!r}")
    return _from_doc(doc)
