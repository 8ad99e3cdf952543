"""File formats: Q-matrix and data CSVs, JSON configs and summaries, draw tables.

Data files are plain CSV with a header row. Lines starting with ``#`` are
comments; writers use one to record the config hash and seed that produced
the file. Response times are stored in seconds; ``0`` or an empty cell reads
as missing.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .model import ObservedData, QMatrix


def _read_rows(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.lstrip().startswith("#")]
    return [row for row in csv.reader(lines) if row]


def _provenance_line(provenance):
    if not provenance:
        return ""
    return "# " + " ".join(f"{k}={v}" for k, v in provenance.items()) + "\n"


def load_qmatrix(path):
    """Read a Q-matrix CSV: header of dimension labels, first column item ids.

    Blank cells mean zero.
    """
    rows = _read_rows(path)
    if len(rows) < 2:
        raise ValueError(f"{path}: Q-matrix needs a header and at least one item")
    header = rows[0]
    dim_labels = [h.strip() for h in header[1:]]
    width = len(header)
    item_ids, entries = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ValueError(
                f"{path}: line {line_no} has {len(row)} cells, expected {width}")
        item_ids.append(row[0].strip())
        vals = []
        for cell in row[1:]:
            cell = cell.strip()
            if cell == "":
                vals.append(0.0)
            elif cell in ("0", "1"):
                vals.append(float(cell))
            else:
                raise ValueError(
                    f"{path}: non-binary entry {cell!r} for item {row[0].strip()}")
        entries.append(vals)
    return QMatrix(np.array(entries), item_ids, dim_labels)


def pisa_qmatrix():
    """The shipped 10-item, 4-dimension PISA 2012 mathematics Q-matrix."""
    with resources.as_file(
            resources.files("mhrt") / "data" / "pisa2012_qmatrix.csv") as p:
        return load_qmatrix(p)


def save_qmatrix(q, path, provenance=None):
    with open(path, "w", newline="") as fh:
        fh.write(_provenance_line(provenance))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item"] + list(q.dim_labels))
        for item, row in zip(q.item_ids, q.entries):
            w.writerow([item] + ["1" if v else "" for v in row])


def _parse_matrix(path, kind):
    rows = _read_rows(path)
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    out = np.full((len(rows) - 1, len(header)), np.nan)
    for r, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise ValueError(
                f"{path}: line {r + 2} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell == "" or cell.upper() == "NA":
                continue
            try:
                val = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: unparseable {kind} {cell!r} at line {r + 2}") from None
            if kind == "response" and val not in (0.0, 1.0):
                raise ValueError(
                    f"{path}: non-binary response {cell!r} at line {r + 2}")
            if kind == "rt":
                if val < 0 or not math.isfinite(val):
                    raise ValueError(
                        f"{path}: invalid response time {cell!r} at line {r + 2}")
                if val == 0:
                    continue
            out[r, c] = val
    return header, out


def load_data(responses_path, rts_path):
    """Read the response and RT CSVs into :class:`ObservedData`.

    Returns
    -------
    data : ObservedData
    item_ids : list of str
    """
    h_y, y = _parse_matrix(responses_path, "response")
    h_t, t = _parse_matrix(rts_path, "rt")
    if h_y != h_t:
        raise ValueError("response and RT files have different item headers")
    if y.shape != t.shape:
        raise ValueError(
            f"response file is {y.shape[0]}x{y.shape[1]} but RT file is "
            f"{t.shape[0]}x{t.shape[1]}")
    return ObservedData(y, t), h_y


def _format_cell(v, integer=False):
    if np.isnan(v):
        return ""
    return str(int(v)) if integer else repr(float(v))


def save_data(data, item_ids, responses_path, rts_path, provenance=None):
    """Write responses and RTs (seconds); missing cells are left empty."""
    for path, mat, integer in ((responses_path, data.responses, True),
                               (rts_path, data.rts, False)):
        with open(path, "w", newline="") as fh:
            fh.write(_provenance_line(provenance))
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(item_ids)
            for row in mat:
                w.writerow([_format_cell(v, integer) for v in row])


def jsonable(obj):
    """Convert numpy values and non-finite floats into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_json(obj, path, provenance=None):
    payload = jsonable(obj)
    if provenance:
        payload = {"provenance": jsonable(provenance), **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")


def config_hash(config_dict):
    """Short stable hash of a JSON-serializable config."""
    blob = json.dumps(jsonable(config_dict), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def write_draws_csv(draws, chain, path, provenance=None):
    """One row per retained iteration; ``param[index]`` columns plus ``deviance``."""
    scalars = draws.scalar_draws(include_deviance=True)
    labels = list(scalars)
    table = np.column_stack([scalars[k][chain] for k in labels])
    buf = _io.StringIO()
    buf.write(_provenance_line(provenance))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(labels)
    w.writerows(table.tolist())
    Path(path).write_text(buf.getvalue())


def read_draws_csv(path):
    """Read a draw table back as ``label -> 1-D array``."""
    rows = _read_rows(path)
    labels = rows[0]
    values = np.array(rows[1:], dtype=float).reshape(-1, len(labels))
    return {k: values[:, j] for j, k in enumerate(labels)}


def write_rows_csv(rows, columns, path, provenance=None):
    with open(path, "w", newline="") as fh:
        fh.write(_provenance_line(provenance))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            out = []
            for c in columns:
                v = row.get(c)
                if isinstance(v, (bool, np.bool_, str)):
                    out.append(str(v))
                elif isinstance(v, (int, np.integer)):
                    out.append(str(int(v)))
                elif v is None or not math.isfinite(float(v)):
                    out.append("NA")
                else:
                    out.append(repr(float(v)))
            w.writerow(out)
