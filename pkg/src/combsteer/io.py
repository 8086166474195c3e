"""File formats: covariance matrices, comb models and reports.

Covariance-matrix files are plain text. ``#`` lines form a ``key: value``
header; the body holds ``2N`` rows of ``2N`` whitespace-separated numbers::

    # schema: combsteer-cm/1
    # n_modes: 2
    # ordering: xpxp
    # normalization: vacuum=1
    # labels: A B
    # provenance: hand-written example
    1.0 0.0 0.0 0.0
    ...

Model files and reports are JSON. Reports are written with sorted keys and
fixed indentation so identical inputs give identical bytes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from pathlib import Path
from typing import Any

import numpy as np

from .comb import CombModel, EigenmodeSpec, ExplicitModeModel
from .exceptions import ModelError, ParseError, UnphysicalStateError
from .gaussian import CovarianceMatrix, validate, xpxp_to_xxpp, xxpp_to_xpxp

__all__ = [
    "CM_SCHEMA",
    "MODEL_SCHEMA",
    "REPORT_SCHEMA",
    "CmFile",
    "ModelFile",
    "format_cm",
    "parse_cm",
    "read_cm",
    "write_cm",
    "model_to_dict",
    "model_from_dict",
    "read_model",
    "write_model",
    "report_bytes",
    "write_report",
    "read_report",
    "file_digest",
]

CM_SCHEMA = "combsteer-cm/1"
MODEL_SCHEMA = "combsteer-model/1"
REPORT_SCHEMA = "combsteer-report/1"

_HEADER_KEYS = ("schema", "n_modes", "ordering", "normalization", "labels", "provenance")
_ORDERINGS = ("xpxp", "xxpp")


# ---------------------------------------------------------------------------
# Covariance matrices
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class CmFile:
    """A covariance matrix with its file header."""

    cm: CovarianceMatrix
    provenance: str = ""
    ordering: str = "xpxp"


def format_cm(cm: CovarianceMatrix, provenance: str = "", ordering: str = "xpxp") -> str:
    """Serialize ``cm``; values use ``repr`` so reading back is exact."""
    if ordering not in _ORDERINGS:
        raise ValueError(f"ordering must be one of {_ORDERINGS}")
    labels = cm.mode_labels
    if any(not lab or re.search(r"\s", lab) for lab in labels):
        raise ValueError("labels must be nonempty and contain no whitespace")
    if "\n" in provenance:
        raise ValueError("provenance must be a single line")
    m = cm.matrix if ordering == "xpxp" else xpxp_to_xxpp(cm.matrix)
    head = {
        "schema": CM_SCHEMA,
        "n_modes": str(cm.n_modes),
        "ordering": ordering,
        "normalization": "vacuum=1",
        "labels": " ".join(labels),
        "provenance": provenance,
    }
    lines = [f"# {k}: {v}".rstrip() for k, v in head.items()]
    lines += [" ".join(repr(float(x)) for x in row) for row in m]
    return "\n".join(lines) + "\n"


def parse_cm(text: str, source: str | None = None) -> CmFile:
    """Parse covariance-matrix text; errors carry line and column numbers."""
    header: dict[str, str] = {}
    rows: list[list[float]] = []
    row_lines: list[int] = []
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, 1):
        stripped = raw.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if rows:
                raise ParseError("header line after matrix body", source, lineno, 1)
            body = stripped[1:].strip()
            if not body:
                continue
            key, sep, value = body.partition(":")
            key = key.strip()
            if not sep or key not in _HEADER_KEYS:
                raise ParseError(f"unknown header line {body!r}", source, lineno, 1)
            if key in header:
                raise ParseError(f"duplicate header key {key!r}", source, lineno, 1)
            header[key] = value.strip()
            continue
        row = []
        for match in re.finditer(r"\S+", raw):
            try:
                value = float(match.group())
            except ValueError:
                raise ParseError(
                    f"not a number: {match.group()!r}", source, lineno, match.start() + 1
                ) from None
            if not math.isfinite(value):
                raise ParseError("non-finite value", source, lineno, match.start() + 1)
            row.append(value)
        rows.append(row)
        row_lines.append(lineno)

    end = len(lines) + 1
    if header.get("schema") != CM_SCHEMA:
        raise ParseError(f"missing or unsupported schema (expected {CM_SCHEMA})", source, 1, 1)
    for key in ("n_modes", "ordering", "normalization"):
        if key not in header:
            raise ParseError(f"missing header key {key!r}", source, 1, 1)
    try:
        n = int(header["n_modes"])
    except ValueError:
        raise ParseError("n_modes must be an integer", source) from None
    if n < 1:
        raise ParseError("n_modes must be positive", source)
    if header["ordering"] not in _ORDERINGS:
        raise ParseError(f"ordering must be one of {_ORDERINGS}", source)
    if header["normalization"] != "vacuum=1":
        raise ParseError("only normalization 'vacuum=1' is supported", source)
    labels = header.get("labels", "").split() or None
    if labels is not None and len(labels) != n:
        raise ParseError(f"{len(labels)} labels for {n} modes", source)

    dim = 2 * n
    for row, lineno in zip(rows, row_lines):
        if len(row) != dim:
            raise ParseError(f"expected {dim} values, found {len(row)}", source, lineno, 1)
    if len(rows) != dim:
        where = row_lines[dim] if len(rows) > dim else end
        raise ParseError(f"expected {dim} rows, found {len(rows)}", source, where, 1)
    m = np.array(rows)
    if header["ordering"] == "xxpp":
        m = xxpp_to_xpxp(m)
    return CmFile(CovarianceMatrix(m, labels), header.get("provenance", ""), header["ordering"])


def read_cm(path, check: bool = True) -> CmFile:
    """Read a covariance-matrix file.

    With ``check`` an invalid matrix raises
    :class:`~combsteer.exceptions.UnphysicalStateError` carrying the verdict.
    """
    path = Path(path)
    cm_file = parse_cm(path.read_text(), str(path))
    if check:
        verdict = validate(cm_file.cm)
        if not verdict.valid:
            raise UnphysicalStateError(f"{path}: {verdict.failures[0].message}", verdict)
    return cm_file


def write_cm(path, cm: CovarianceMatrix, provenance: str = "", ordering: str = "xpxp") -> None:
    Path(path).write_text(format_cm(cm, provenance, ordering))


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ModelFile:
    model: Any
    provenance: str = ""


_COMB_FIELDS = {f.name for f in dataclasses.fields(CombModel)}
_MODE_FIELDS = {f.name for f in dataclasses.fields(EigenmodeSpec)}
_EXPLICIT_FIELDS = {f.name for f in dataclasses.fields(ExplicitModeModel)}


def _reject_unknown(data: dict, allowed, where: str):
    if not isinstance(data, dict):
        raise ModelError(f"{where} must be an object")
    unknown = set(data) - set(allowed)
    if unknown:
        raise ModelError(f"unknown fields in {where}: {sorted(unknown)}")


def model_to_dict(model, provenance: str = "") -> dict:
    if isinstance(model, CombModel):
        body = dataclasses.asdict(model)
        body["support"] = list(model.support)
        if isinstance(model.antisqueezing_excess_db, tuple):
            body["antisqueezing_excess_db"] = list(model.antisqueezing_excess_db)
        kind = "comb"
    elif isinstance(model, ExplicitModeModel):
        body = dataclasses.asdict(model)
        body["overlaps_matrix"] = [list(r) for r in model.overlaps_matrix]
        for key in ("squeezing_db", "phases"):
            body[key] = list(body[key])
        if model.labels is not None:
            body["labels"] = list(model.labels)
        kind = "explicit"
    else:
        raise ModelError(f"cannot serialize {type(model).__name__}")
    return {"schema": MODEL_SCHEMA, "kind": kind, "provenance": provenance, "model": body}


def model_from_dict(data: dict) -> ModelFile:
    _reject_unknown(data, {"schema", "kind", "provenance", "model"}, "model file")
    if data.get("schema") != MODEL_SCHEMA:
        raise ModelError(f"missing or unsupported schema (expected {MODEL_SCHEMA})")
    body = data.get("model")
    kind = data.get("kind")
    if kind == "comb":
        _reject_unknown(body, _COMB_FIELDS, "model")
        modes = body.get("eigenmodes", [])
        if not isinstance(modes, list):
            raise ModelError("eigenmodes must be a list")
        for i, m in enumerate(modes):
            _reject_unknown(m, _MODE_FIELDS, f"eigenmodes[{i}]")
        kwargs = dict(body)
        kwargs["eigenmodes"] = tuple(EigenmodeSpec(**m) for m in modes)
        if "support" in kwargs:
            kwargs["support"] = tuple(kwargs["support"])
        if isinstance(kwargs.get("antisqueezing_excess_db"), list):
            kwargs["antisqueezing_excess_db"] = tuple(kwargs["antisqueezing_excess_db"])
        model = CombModel(**kwargs)
    elif kind == "explicit":
        _reject_unknown(body, _EXPLICIT_FIELDS, "model")
        model = ExplicitModeModel(**body)
    else:
        raise ModelError(f"unknown model kind {kind!r}")
    return ModelFile(model, str(data.get("provenance", "")))


def read_model(path) -> ModelFile:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno, exc.colno) from None
    try:
        return model_from_dict(data)
    except TypeError as exc:
        raise ModelError(f"{path}: {exc}") from None


def write_model(path, model, provenance: str = "") -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, provenance), indent=2) + "\n")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _clean(obj):
    """JSON-safe copy: NaN becomes null, tuples become lists, numpy scalars unwrap."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def report_bytes(kind: str, data: dict, inputs: dict | None = None) -> bytes:
    """Canonical report bytes.

    ``inputs`` maps a role (``"cm"``, ``"model"``) to a file path; the file's
    name and SHA-256 digest are recorded.
    """
    from . import __version__

    doc = {
        "schema": REPORT_SCHEMA,
        "schema_version": 1,
        "toolkit_version": __version__,
        "kind": kind,
        "inputs": {
            role: {"name": Path(p).name, "sha256": file_digest(p)}
            for role, p in (inputs or {}).items()
        },
        "data": _clean(data),
    }
    return (json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n").encode()


def write_report(path, kind: str, data: dict, inputs: dict | None = None) -> bytes:
    out = report_bytes(kind, data, inputs)
    Path(path).write_bytes(out)
    return out


def read_report(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno, exc.colno) from None
    if doc.get("schema") != REPORT_SCHEMA:
        raise ParseError(f"missing or unsupported schema (expected {REPORT_SCHEMA})", str(path))
    return doc
