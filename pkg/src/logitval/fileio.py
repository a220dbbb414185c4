"""Reading datasets from CSV and writing long-format result reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .exceptions import MissingColumn, NonBinaryOutcome, NonNumericCovariate

NA = "NA"
REPORT_COLUMNS = (
    "scenario_n", "event_rate", "effect", "estimator", "method", "metric",
    "statistic", "value", "mcse", "discarded", "attempted",
)


def load_csv(path, outcome_column: str) -> Dataset:
    """Dataset from a headed CSV; every column except the outcome is a covariate.

    Outcomes must be the literal tokens ``0`` or ``1``.  Row numbers in error
    messages count data rows from 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MissingColumn(f"{path}: file is empty") from None
        if outcome_column not in header:
            raise MissingColumn(f"outcome column {outcome_column!r} not found in header {header}")
        j_out = header.index(outcome_column)
        names = [h for j, h in enumerate(header) if j != j_out]
        y, X = [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise NonNumericCovariate(f"row {row_no}: expected {len(header)} fields, got {len(row)}")
            token = row[j_out].strip()
            if token not in ("0", "1"):
                raise NonBinaryOutcome(f"row {row_no}: outcome {outcome_column!r} is {token!r}, expected 0 or 1")
            y.append(float(token))
            values = []
            for j, cell in enumerate(row):
                if j == j_out:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise NonNumericCovariate(f"row {row_no}: column {header[j]!r} has non-numeric value {cell!r}")
                values.append(v)
            X.append(values)
    if not names:
        raise MissingColumn("no covariate columns besides the outcome")
    return Dataset(np.array(y), np.array(X, dtype=float).reshape(len(y), len(names)), tuple(names))


@dataclass(frozen=True)
class ResultsRow:
    scenario_n: object
    event_rate: object
    effect: object
    estimator: str
    method: str
    metric: str
    statistic: str
    value: object
    mcse: object = None
    discarded: object = None
    attempted: object = None
    reason: str | None = None


def _cell(v) -> str:
    if v is None:
        return NA
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else NA
    if isinstance(v, (np.floating,)):
        return _cell(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _json_value(v):
    if v is None:
        return NA
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else NA
    if isinstance(v, np.integer):
        return int(v)
    return v


def render_report(rows, format: str = "csv", manifest: dict | None = None) -> str:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    if format == "json":
        payload = {
            "manifest": manifest or {},
            "rows": [{k: _json_value(v) for k, v in asdict(r).items()} for r in rows],
        }
        return json.dumps(payload, indent=1, sort_keys=False) + "\n"
    if format != "csv":
        raise ValueError(f"unknown report format {format!r}")
    buf = io.StringIO()
    for key, value in (manifest or {}).items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in rows:
        writer.writerow([_cell(getattr(r, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory and rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(rows, path, format: str = "csv", manifest: dict | None = None) -> None:
    """Write result rows as CSV (fixed header, ``NA`` for missing) or JSON.

    Nothing is written when ``rows`` is empty or rendering fails.
    """
    atomic_write_text(path, render_report(rows, format, manifest))


def _parse(v: str):
    if v == NA:
        return None
    try:
        i = int(v)
        return i
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def read_report(path) -> tuple[dict, list[ResultsRow]]:
    """Inverse of :func:`write_report` for either format."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        names = {f.name for f in fields(ResultsRow)}
        rows = [ResultsRow(**{k: (None if v == NA else v) for k, v in r.items() if k in names})
                for r in payload["rows"]]
        return payload.get("manifest", {}), rows
    manifest, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            manifest[key] = value
        else:
            body.append(line)
    reader = csv.DictReader(body)
    rows = []
    for rec in reader:
        vals = {k: _parse(v) for k, v in rec.items()}
        for k in ("estimator", "method", "metric", "statistic"):
            vals[k] = rec[k]
        rows.append(ResultsRow(**vals))
    return manifest, rows
