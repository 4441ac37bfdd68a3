"""
JSON file formats.

Operator::

    {"dim": d, "shape": [dA, dB] | null, "entries": [[re, im], ...]}   # row-major, d*d pairs

POVM ``{"dim": d, "effects": [entries, ...]}``, family ``[povm-path | povm, ...]``,
design ``{"dim": d, "t": t, "items": [{"weight": p, "vector": [[re, im], ...]}, ...]}``,
ensemble ``{"items": [{"p": x, "state": entries | operator}, ...]}``.

Every document is checked against its schema with ``jsonschema`` before it
is turned into domain objects; any failure (bad JSON, schema, shape or
Hermiticity) surfaces as :class:`FileFormatError`.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import jsonschema
import numpy as np

from .designs import WeightedDesign
from .errors import DistnormError, FileFormatError
from .information import Ensemble
from .operators import HermitianOp
from .povm import MeasurementFamily, Povm, validate_povm

PathLike = Union[str, Path]

COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
ENTRIES = {"type": "array", "items": COMPLEX, "minItems": 1}

OPERATOR_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "shape": {
            "oneOf": [
                {"type": "null"},
                {"type": "array", "items": {"type": "integer", "minimum": 1},
                 "minItems": 2, "maxItems": 2},
            ]
        },
        "entries": ENTRIES,
    },
    "required": ["dim", "entries"],
}

POVM_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "label": {"type": "string"},
        "effects": {"type": "array", "items": ENTRIES, "minItems": 1},
    },
    "required": ["dim", "effects"],
}

FAMILY_SCHEMA: Dict[str, Any] = {
    "type": "array",
    "items": {"oneOf": [{"type": "string"}, POVM_SCHEMA]},
    "minItems": 1,
}

DESIGN_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "t": {"type": "integer", "minimum": 1},
        "label": {"type": "string"},
        "items": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"weight": {"type": "number", "minimum": 0}, "vector": ENTRIES},
                "required": ["weight", "vector"],
            },
        },
    },
    "required": ["dim", "items"],
}

ENSEMBLE_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "items": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "p": {"type": "number", "minimum": 0},
                    "state": {"oneOf": [ENTRIES, OPERATOR_SCHEMA]},
                },
                "required": ["p", "state"],
            },
        }
    },
    "required": ["items"],
}


def _check(doc: Any, schema: Dict[str, Any], what: str, path: Optional[str]) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise FileFormatError(f"{what} schema: {exc.message} at {where}", path) from exc


def _read(path: PathLike) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"invalid JSON: {exc}", str(path)) from exc
    except OSError as exc:
        raise FileFormatError(f"cannot read file: {exc}", str(path)) from exc


def _write(doc: Any, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, sort_keys=True)
        handle.write("\n")


def _complex_vector(pairs: List[List[float]]) -> np.ndarray:
    values = np.asarray(pairs, dtype=float)
    return values[:, 0] + 1j * values[:, 1]


def _pairs(values: np.ndarray) -> List[List[float]]:
    return [[float(z.real), float(z.imag)] for z in np.ravel(values)]


def _matrix(pairs: List[List[float]], d: int, path: Optional[str]) -> np.ndarray:
    if len(pairs) != d * d:
        raise FileFormatError(f"expected {d * d} entries for dim {d}, got {len(pairs)}", path)
    return _complex_vector(pairs).reshape(d, d)


def _build(factory, path: Optional[str]):
    try:
        return factory()
    except DistnormError as exc:
        if isinstance(exc, FileFormatError):
            raise
        raise FileFormatError(str(exc), path) from exc


def parse_operator(doc: Any, path: Optional[str] = None) -> HermitianOp:
    """
    Operator from a parsed document.

    A CLI report carrying an ``operator`` entry is accepted as well.
    """
    if isinstance(doc, dict) and "entries" not in doc and "operator" in doc:
        doc = doc["operator"]
    _check(doc, OPERATOR_SCHEMA, "operator", path)
    d = doc["dim"]
    matrix = _matrix(doc["entries"], d, path)
    return _build(lambda: HermitianOp(matrix, doc.get("shape")), path)


def operator_doc(op: HermitianOp) -> Dict[str, Any]:
    return {"dim": op.dim, "shape": list(op.shape) if op.shape else None,
            "entries": _pairs(op.entries)}


def load_operator(path: PathLike) -> HermitianOp:
    return parse_operator(_read(path), str(path))


def dump_operator(op: HermitianOp, path: PathLike) -> None:
    _write(operator_doc(op), path)


def parse_povm(doc: Any, path: Optional[str] = None) -> Povm:
    _check(doc, POVM_SCHEMA, "povm", path)
    d = doc["dim"]
    matrices = [_matrix(entries, d, path) for entries in doc["effects"]]
    return _build(lambda: validate_povm([HermitianOp(m) for m in matrices],
                                        label=doc.get("label", "")), path)


def povm_doc(povm: Povm) -> Dict[str, Any]:
    return {"dim": povm.dim, "label": povm.label,
            "effects": [_pairs(e.entries) for e in povm.effects]}


def load_povm(path: PathLike) -> Povm:
    return parse_povm(_read(path), str(path))


def dump_povm(povm: Povm, path: PathLike) -> None:
    _write(povm_doc(povm), path)


def load_family(path: PathLike) -> MeasurementFamily:
    """Family file: POVM paths are resolved relative to the family file."""
    doc = _read(path)
    _check(doc, FAMILY_SCHEMA, "family", str(path))
    base = Path(path).parent
    povms = [load_povm(base / item) if isinstance(item, str) else parse_povm(item, str(path))
             for item in doc]
    return _build(lambda: MeasurementFamily(povms, label=Path(path).stem), str(path))


def dump_family(family: MeasurementFamily, path: PathLike) -> None:
    _write([povm_doc(p) for p in family.povms], path)


def parse_design(doc: Any, path: Optional[str] = None, strict: bool = True) -> WeightedDesign:
    _check(doc, DESIGN_SCHEMA, "design", path)
    d = doc["dim"]
    weights = [item["weight"] for item in doc["items"]]
    vectors = []
    for item in doc["items"]:
        if len(item["vector"]) != d:
            raise FileFormatError(f"vector of length {len(item['vector'])} in dim {d}", path)
        vectors.append(_complex_vector(item["vector"]))
    return _build(lambda: WeightedDesign(weights, np.stack(vectors), t=doc.get("t", 2),
                                         label=doc.get("label", ""), strict=strict), path)


def design_doc(design: WeightedDesign) -> Dict[str, Any]:
    return {"dim": design.d, "t": design.t, "label": design.label,
            "items": [{"weight": float(p), "vector": _pairs(v)}
                      for p, v in zip(design.weights, design.vectors)]}


def load_design(path: PathLike, strict: bool = True) -> WeightedDesign:
    return parse_design(_read(path), str(path), strict)


def dump_design(design: WeightedDesign, path: PathLike) -> None:
    _write(design_doc(design), path)


def parse_ensemble(doc: Any, path: Optional[str] = None) -> Ensemble:
    _check(doc, ENSEMBLE_SCHEMA, "ensemble", path)
    items = []
    for item in doc["items"]:
        state = item["state"]
        if isinstance(state, dict):
            rho = parse_operator(state, path)
        else:
            d = int(round(np.sqrt(len(state))))
            rho = _build(lambda: HermitianOp(_matrix(state, d, path)), path)
        items.append((item["p"], rho))
    return _build(lambda: Ensemble(items), path)


def ensemble_doc(ensemble: Ensemble) -> Dict[str, Any]:
    return {"items": [{"p": p, "state": operator_doc(rho)} for p, rho in ensemble.items]}


def load_ensemble(path: PathLike) -> Ensemble:
    return parse_ensemble(_read(path), str(path))


def dump_ensemble(ensemble: Ensemble, path: PathLike) -> None:
    _write(ensemble_doc(ensemble), path)
