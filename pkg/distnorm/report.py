"""
Structured reports and their serialisation.

Every audit returns a :class:`Report` instead of raising when a bound
fails; the failures are listed in ``violations`` and the CLI turns a
non-empty list into exit code 2.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Dict, List, Optional

import numpy as np
import structlog
from attrs import define, field

from .errors import AuditViolation, ConfigError

logger = structlog.get_logger(__name__)

OUTPUT_FORMATS = ("json", "csv")


@define
class Report:
    """
    Result of a computation or audit.

    Attributes:
        name: Command or operation that produced the report.
        data: Scalar and nested results.
        rows: Records of a sweep or chain, one CSV line each.
        violations: One entry per failed check.
    """

    name: str
    data: Dict[str, Any] = field(factory=dict)
    rows: List[Dict[str, Any]] = field(factory=list)
    violations: List[Dict[str, Any]] = field(factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def check(self, check: str, passed: bool, **details: Any) -> bool:
        """Record ``details`` as a violation of ``check`` unless ``passed``."""
        if not passed:
            self.violations.append({"check": check, **details})
        return bool(passed)

    def merge(self, other: "Report", prefix: Optional[str] = None) -> "Report":
        key = prefix or other.name
        self.data[key] = other.data
        self.violations.extend({**v, "source": key} for v in other.violations)
        return self

    def raise_for_violations(self) -> "Report":
        if self.violations:
            raise AuditViolation(self.violations)
        return self

    def log(self, **context: Any) -> "Report":
        method = logger.info if self.ok else logger.warning
        method("audit", report=self.name, violations=len(self.violations), **context)
        return self

    def as_dict(self) -> Dict[str, Any]:
        out = dict(self.data)
        if self.rows:
            out["rows"] = list(self.rows)
        out["violations"] = len(self.violations)
        if self.violations:
            out["violation_details"] = list(self.violations)
        return out


@define(frozen=True)
class RunConfig:
    """One CLI invocation: the command, its parameters and the output settings."""

    command: str
    params: Dict[str, Any] = field(factory=dict)
    seed: int = 0
    samples: int = 0
    output: str = "json"
    out_path: Optional[str] = None
    tol: Optional[float] = None

    def __attrs_post_init__(self):
        if self.output not in OUTPUT_FORMATS:
            raise ConfigError(f"unknown output format {self.output!r}")

    def tags(self) -> Dict[str, Any]:
        return {"command": self.command, "seed": self.seed, "samples": self.samples,
                "tol": self.tol, "params": dict(self.params)}


def _plain(value: Any) -> Any:
    """Reduce numpy values, attrs records and operators to JSON-like data."""
    if hasattr(value, "as_dict"):
        return _plain(value.as_dict())
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _encode(value: Any) -> str:
    if isinstance(value, dict):
        items = ", ".join(f"{json.dumps(k)}: {_encode(value[k])}" for k in sorted(value))
        return "{" + items + "}"
    if isinstance(value, list):
        return "[" + ", ".join(_encode(v) for v in value) + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return _format_float(value)
    return json.dumps(value)


def to_json(payload: Dict[str, Any]) -> str:
    """JSON with sorted keys and 17 significant digits per float."""
    return _encode(_plain(payload)) + "\n"


def _csv_cell(value: Any) -> str:
    if isinstance(value, float):
        return _format_float(value).strip('"')
    if isinstance(value, (dict, list)):
        return _encode(value)
    if value is None:
        return ""
    return str(value)


def to_csv(records: List[Dict[str, Any]]) -> str:
    records = [_plain(r) for r in records]
    columns = sorted({key for record in records for key in record})
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for record in records:
        writer.writerow([_csv_cell(record.get(c)) for c in columns])
    return buffer.getvalue()


def emit(report: Report, cfg: RunConfig) -> bytes:
    """
    Serialise a report for ``cfg``.

    JSON carries the whole report plus the run tags. CSV carries one line per
    entry of ``report.rows`` (or one line of scalar fields when there are no
    rows), each tagged with seed and sample count.
    """
    if cfg.output == "json":
        payload = {**report.as_dict(), **{k: v for k, v in cfg.tags().items() if k != "command"}}
        payload["command"] = cfg.command
        return to_json(payload).encode("utf-8")
    tags = {"seed": cfg.seed, "samples": cfg.samples}
    if report.rows:
        records = [{**row, **tags} for row in report.rows]
    else:
        scalars = {k: v for k, v in _plain(report.data).items() if not isinstance(v, (dict, list))}
        records = [{**scalars, "violations": len(report.violations), **tags}]
    return to_csv(records).encode("utf-8")
