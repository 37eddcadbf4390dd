"""Evaluated datasets and their CSV / JSON containers.

CSV layout (UTF-8, ``.`` decimal point, one row per sample)::

    # floodgate-dataset format_version=1
    # provenance={"model": "ishigami", "seed": 3}
    x_1,x_2,x_3,y,f,batch
    0.5,-1.25,3.0,2.75,2.7,0

The comment lines are optional on read. Input columns are every column
before ``y`` (or all non-reserved columns when ``y`` is absent); ``f``
holds surrogate predictions at the same rows and ``batch`` integer batch
labels, both optional. Floats are written with the shortest decimal string
that round-trips, so save -> load -> save is byte-identical.

The JSON container holds the same fields under ``format_version``,
``names``, ``inputs``, ``outputs``, ``surrogate_outputs``, ``batch_ids``
and ``provenance``.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from floodgate.errors import FormatError
from floodgate.space import check_batches

FORMAT_VERSION = 1
_RESERVED = ("y", "f", "batch")


@dataclass(frozen=True)
class EvaluatedDataset:
    """Input rows with model outputs and optional surrogate outputs and batch labels.

    ``outputs`` may be None for a design that has not been evaluated yet.
    """

    inputs: np.ndarray
    outputs: Optional[np.ndarray] = None
    surrogate_outputs: Optional[np.ndarray] = None
    batch_ids: Optional[np.ndarray] = None
    names: Optional[tuple] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.inputs, dtype=float)
        if x.ndim != 2:
            raise ValueError("inputs must be an (n, d) matrix")
        x.setflags(write=False)
        object.__setattr__(self, "inputs", x)
        n, d = x.shape
        for attr in ("outputs", "surrogate_outputs"):
            col = getattr(self, attr)
            if col is not None:
                col = np.array(col, dtype=float).ravel()
                if col.size != n:
                    raise ValueError(f"{attr} has {col.size} rows, inputs have {n}")
                col.setflags(write=False)
                object.__setattr__(self, attr, col)
        if self.batch_ids is not None:
            ids = np.array(self.batch_ids, dtype=np.int64).ravel()
            check_batches(ids, n)
            ids.setflags(write=False)
            object.__setattr__(self, "batch_ids", ids)
        names = tuple(self.names) if self.names is not None else tuple(f"x_{i + 1}" for i in range(d))
        if len(names) != d:
            raise ValueError(f"{len(names)} names for {d} input columns")
        if set(names) & set(_RESERVED):
            raise ValueError(f"input names may not use reserved columns {_RESERVED}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]

    @property
    def num_batches(self) -> int:
        return 0 if self.batch_ids is None else int(self.batch_ids[-1]) + 1

    def with_outputs(self, outputs, **provenance) -> "EvaluatedDataset":
        prov = dict(self.provenance)
        prov.update(provenance)
        return EvaluatedDataset(self.inputs, outputs, self.surrogate_outputs, self.batch_ids, self.names, prov)

    def with_surrogate_outputs(self, preds) -> "EvaluatedDataset":
        return EvaluatedDataset(self.inputs, self.outputs, preds, self.batch_ids, self.names, self.provenance)

    def head(self, n: int) -> "EvaluatedDataset":
        """First ``n`` rows; with batches, ``n`` must be a whole number of batches."""
        sl = slice(0, n)
        ids = None
        if self.batch_ids is not None:
            ids = self.batch_ids[sl]
            check_batches(ids, len(ids))
        pick = lambda a: None if a is None else a[sl]  # noqa: E731
        return EvaluatedDataset(self.inputs[sl], pick(self.outputs), pick(self.surrogate_outputs), ids,
                                self.names, self.provenance)


def _fmt(v: float) -> str:
    return repr(float(v))


def dataset_to_csv(data: EvaluatedDataset) -> str:
    cols = [data.inputs]
    header = list(data.names)
    if data.outputs is not None:
        cols.append(data.outputs[:, None])
        header.append("y")
    if data.surrogate_outputs is not None:
        cols.append(data.surrogate_outputs[:, None])
        header.append("f")
    block = np.hstack(cols).tolist()
    out = io.StringIO()
    out.write(f"# floodgate-dataset format_version={FORMAT_VERSION}\n")
    if data.provenance:
        out.write("# provenance=" + json.dumps(data.provenance, sort_keys=True) + "\n")
    if data.batch_ids is not None:
        header.append("batch")
        out.write(",".join(header) + "\n")
        for row, b in zip(block, data.batch_ids.tolist()):
            out.write(",".join(map(_fmt, row)) + f",{b}\n")
    else:
        out.write(",".join(header) + "\n")
        for row in block:
            out.write(",".join(map(_fmt, row)) + "\n")
    return out.getvalue()


def _locate_bad_row(body_lines, first_lineno, ncols):
    row = 0
    for offset, line in enumerate(body_lines):
        if not line.strip():
            continue
        row += 1
        cells = line.split(",")
        lineno = first_lineno + offset
        if len(cells) != ncols:
            return FormatError(f"expected {ncols} cells, found {len(cells)} (line {lineno})", row=row)
        for c in cells:
            try:
                v = float(c)
            except ValueError:
                return FormatError(f"non-numeric cell {c.strip()!r} (line {lineno})", row=row)
            if not math.isfinite(v):
                return FormatError(f"non-finite value {c.strip()!r} (line {lineno})", row=row)
    return None


def _read_header(stream):
    """Consume comment and header lines; return (provenance, header, lines consumed)."""
    provenance = {}
    consumed = 0
    while True:
        raw = stream.readline()
        if not raw:
            raise FormatError("missing header line")
        consumed += 1
        if not raw.startswith("#"):
            break
        line = raw[1:].strip()
        if line.startswith("floodgate-dataset"):
            for tok in line.split()[1:]:
                if tok.startswith("format_version=") and int(tok.split("=", 1)[1]) > FORMAT_VERSION:
                    raise FormatError(f"unsupported dataset format version {tok.split('=', 1)[1]}")
        elif line.startswith("provenance="):
            try:
                provenance = json.loads(line.split("=", 1)[1])
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad provenance comment: {exc}") from None
    header = [h.strip() for h in raw.rstrip("\r\n").split(",")]
    return provenance, header, consumed


def _parse_csv(open_stream, require_outputs: bool) -> EvaluatedDataset:
    with open_stream() as fh:
        provenance, header, skip = _read_header(fh)
    if len(set(header)) != len(header):
        raise FormatError(f"duplicate column names in header {header}")
    if "y" in header:
        n_inputs = header.index("y")
    else:
        n_inputs = sum(h not in _RESERVED for h in header)
        if require_outputs:
            raise FormatError("missing outputs column 'y'")
    names = header[:n_inputs]
    if any(h in _RESERVED for h in names) or n_inputs < 1:
        raise FormatError(f"input columns must precede 'y' and 'f'/'batch', got header {header}")

    def body_lines():
        with open_stream() as fh:
            return fh.read().splitlines()[skip:]

    try:
        with open_stream() as fh, warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty body is reported below
            table = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float, comments=None, skiprows=skip)
    except ValueError:
        err = _locate_bad_row(body_lines(), skip + 1, len(header))
        raise (err or FormatError("unparseable dataset body")) from None
    if table.shape[0] == 0:
        raise FormatError("dataset has no rows")
    if table.shape[1] != len(header):
        raise _locate_bad_row(body_lines(), skip + 1, len(header)) or FormatError("column count mismatch")
    if not np.all(np.isfinite(table)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(table), axis=1))[0])
        raise FormatError("NaN or infinite value", row=bad + 1)
    col = {h: table[:, k] for k, h in enumerate(header)}
    batch = None
    if "batch" in col:
        b = col["batch"]
        if np.any(b != np.round(b)):
            raise FormatError("batch labels must be integers")
        batch = b.astype(np.int64)
    try:
        return EvaluatedDataset(table[:, :n_inputs], col.get("y"), col.get("f"), batch, tuple(names), provenance)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def dataset_from_csv(text: str, require_outputs: bool = True) -> EvaluatedDataset:
    return _parse_csv(lambda: io.StringIO(text), require_outputs)


def dataset_to_json(data: EvaluatedDataset) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "floodgate-dataset",
        "names": list(data.names),
        "inputs": data.inputs.tolist(),
        "outputs": None if data.outputs is None else data.outputs.tolist(),
        "surrogate_outputs": None if data.surrogate_outputs is None else data.surrogate_outputs.tolist(),
        "batch_ids": None if data.batch_ids is None else data.batch_ids.tolist(),
        "provenance": data.provenance,
    }
    return json.dumps(doc, sort_keys=True)


def dataset_from_json(text: str, require_outputs: bool = True) -> EvaluatedDataset:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    allowed = {"format_version", "kind", "names", "inputs", "outputs", "surrogate_outputs", "batch_ids", "provenance"}
    unknown = set(doc) - allowed
    if unknown:
        raise FormatError(f"unknown dataset keys {sorted(unknown)}")
    if doc.get("format_version", 0) > FORMAT_VERSION:
        raise FormatError(f"unsupported dataset format version {doc.get('format_version')}")
    if require_outputs and doc.get("outputs") is None:
        raise FormatError("missing outputs")
    try:
        x = np.array(doc["inputs"], dtype=float)
        for k, arr in (("inputs", x), ("outputs", doc.get("outputs")), ("surrogate_outputs", doc.get("surrogate_outputs"))):
            if arr is not None and not np.all(np.isfinite(np.asarray(arr, dtype=float))):
                bad = np.asarray(arr, dtype=float)
                rows = np.flatnonzero(~np.isfinite(bad).reshape(bad.shape[0], -1).all(axis=1))
                raise FormatError(f"NaN or infinite value in {k}", row=int(rows[0]) + 1)
        return EvaluatedDataset(x, doc.get("outputs"), doc.get("surrogate_outputs"), doc.get("batch_ids"),
                                doc.get("names"), doc.get("provenance") or {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed dataset: {exc}") from None


def save_dataset(data: EvaluatedDataset, path) -> Path:
    path = Path(path)
    text = dataset_to_json(data) if path.suffix.lower() == ".json" else dataset_to_csv(data)
    path.write_text(text, encoding="utf-8")
    return path


def load_dataset(path, require_outputs: bool = True) -> EvaluatedDataset:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return dataset_from_json(path.read_text(encoding="utf-8"), require_outputs)
    return _parse_csv(lambda: open(path, encoding="utf-8", newline=""), require_outputs)
