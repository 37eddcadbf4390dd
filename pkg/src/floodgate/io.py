"""File formats: forcing series, experiment configs, run manifests and result tables.

Every format carries ``format_version``: CSV files as a first-line comment
(``# floodgate-<kind> format_version=1``), JSON files as a top-level key.
Floats are written with the shortest round-trip decimal string and columns
in a fixed order, so equal results give byte-identical files.
"""

from __future__ import annotations

import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from floodgate.errors import FormatError
from floodgate.models.hymod import ForcingSeries

FORMAT_VERSION = 1
FORCING_COLUMNS = ("day", "precip_mm", "pet_mm", "obs_flow_mm")


def fmt(v) -> str:
    """Shortest round-trip rendering; NaN and infinities as ``nan`` / ``inf`` / ``-inf``."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(doc, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_json_safe(doc), sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from None


# -- forcing -----------------------------------------------------------------------


def forcing_to_csv(forcing: ForcingSeries) -> str:
    has_obs = forcing.observed_flow is not None
    cols = FORCING_COLUMNS if has_obs else FORCING_COLUMNS[:3]
    lines = [f"# floodgate-forcing format_version={FORMAT_VERSION}", ",".join(cols)]
    for t in range(forcing.T):
        row = [str(t + 1), fmt(forcing.precipitation[t]), fmt(forcing.pet[t])]
        if has_obs:
            row.append(fmt(forcing.observed_flow[t]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def forcing_from_csv(text: str) -> ForcingSeries:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise FormatError("forcing file is empty")
    header = [h.strip() for h in lines[0].split(",")]
    if header not in (list(FORCING_COLUMNS[:3]), list(FORCING_COLUMNS)):
        raise FormatError(f"forcing header must be {','.join(FORCING_COLUMNS[:3])}[,obs_flow_mm], got {lines[0]!r}")
    rows = []
    for i, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(header):
            raise FormatError(f"expected {len(header)} cells, found {len(cells)}", row=i)
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise FormatError(f"non-numeric cell in {line!r}", row=i) from None
        for name, v in zip(header, vals):
            if not math.isfinite(v):
                raise FormatError(f"{name} is not finite", row=i)
            if v < 0:
                raise FormatError(f"{name} is negative ({v})", row=i)
        rows.append(vals)
    if not rows:
        raise FormatError("forcing file has no rows")
    table = np.array(rows)
    obs = table[:, 3] if table.shape[1] == 4 else None
    return ForcingSeries(table[:, 1], table[:, 2], obs)


def save_forcing(forcing: ForcingSeries, path) -> Path:
    path = Path(path)
    path.write_text(forcing_to_csv(forcing), encoding="utf-8")
    return path


def load_forcing(path) -> ForcingSeries:
    return forcing_from_csv(Path(path).read_text(encoding="utf-8"))


# -- config ------------------------------------------------------------------------


def load_config(path):
    """Read an experiment config; unknown keys raise :class:`FormatError`."""
    from floodgate.harness import ExperimentConfig

    doc = read_json(path)
    try:
        return ExperimentConfig.from_dict(doc)
    except TypeError as exc:
        raise FormatError(f"{path}: {exc}") from None


# -- manifest ----------------------------------------------------------------------


def package_versions() -> dict:
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for dist in ("scipy", "artifact"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


@dataclass
class RunManifest:
    """Everything needed to rerun a CLI invocation, plus what it cost.

    ``argv`` replays the command; ``config`` is the resolved configuration.
    ``created`` and ``wall_clock_seconds`` are the only fields that change
    between reruns.
    """

    command: str
    argv: list
    config: dict
    config_hash: str
    seeds: dict
    evaluations: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    versions: dict = field(default_factory=package_versions)
    created: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))
    wall_clock_seconds: float = 0.0
    format_version: int = FORMAT_VERSION
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self) -> "RunManifest":
        self.wall_clock_seconds = round(time.perf_counter() - self._t0, 3)
        return self

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc.pop("_t0")
        return doc

    def save(self, out_dir) -> Path:
        return dump_json(self.to_dict(), Path(out_dir) / "manifest.json")

    @classmethod
    def load(cls, path) -> "RunManifest":
        doc = read_json(path)
        if doc.get("format_version", 0) > FORMAT_VERSION:
            raise FormatError(f"unsupported manifest format version {doc['format_version']}")
        doc.pop("format_version", None)
        try:
            return cls(**doc)
        except TypeError as exc:
            raise FormatError(f"{path}: malformed manifest: {exc}") from None


# -- result tables -----------------------------------------------------------------


def write_table(rows: Sequence[dict], columns: Sequence[str], path, kind: str) -> Path:
    lines = [f"# floodgate-{kind} format_version={FORMAT_VERSION}", ",".join(columns)]
    for r in rows:
        lines.append(",".join(fmt(r.get(c, "")) for c in columns))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


INTERVAL_COLUMNS = ("input", "name", "method", "lower", "upper", "point_lower", "point_upper", "width", "n")


def interval_rows(results) -> list:
    return [{"input": r.input_index, "name": r.name, "method": r.method, "lower": r.lower, "upper": r.upper,
             "point_lower": r.point_lower, "point_upper": r.point_upper, "width": r.width,
             "n": r.diagnostics.get("n", "")} for r in results]


def write_intervals(results, out_dir, stem: str = "intervals") -> list:
    """``<stem>.csv`` (one row per input) and ``<stem>.json`` (with diagnostics and covariances)."""
    out_dir = Path(out_dir)
    csv = write_table(interval_rows(results), INTERVAL_COLUMNS, out_dir / f"{stem}.csv", "intervals")
    doc = {"format_version": FORMAT_VERSION, "kind": "intervals",
           "results": [dict(row, diagnostics=r.diagnostics) for row, r in zip(interval_rows(results), results)]}
    js = dump_json(doc, out_dir / f"{stem}.json")
    return [csv, js]


COVERAGE_COLUMNS = ("method", "input", "name", "N", "n", "trials", "truth", "nominal", "coverage", "coverage_se",
                    "mean_L", "se_L", "mean_U", "se_U", "mean_width", "se_width", "model_evaluations", "skipped")


def write_coverage(report, out_dir, stem: str = "coverage") -> list:
    """Summary CSV plus a JSON holding the summary and every trial's interval."""
    out_dir = Path(out_dir)
    rows = report.rows()
    csv = write_table(rows, COVERAGE_COLUMNS, out_dir / f"{stem}.csv", "coverage")
    doc = {
        "format_version": FORMAT_VERSION, "kind": "coverage", "methods": report.methods, "budgets": report.budgets,
        "names": report.names, "truth": report.truth, "alpha": report.alpha, "summary": rows,
        "surrogate": report.surrogate_info, "config": report.config,
        "trials": {"axes": ["trial", "budget", "method", "input"], "lower": report.lower, "upper": report.upper,
                   "point_lower": report.point_lower, "point_upper": report.point_upper,
                   "mse_ratio": report.mse_ratio, "e_hat": report.e_hat, "s_f": report.s_f},
        "model_evaluations": report.model_evals,
    }
    js = dump_json(doc, out_dir / f"{stem}.json")
    return [csv, js]


WIDTH_COLUMNS = ("method", "input", "name", "N", "n", "trials", "mean_width", "se_width", "mean_excess", "se_excess",
                 "skipped")


def write_width_curve(curve, out_dir, stem: str = "width_curve") -> list:
    out_dir = Path(out_dir)
    csv = write_table(curve.rows, WIDTH_COLUMNS, out_dir / f"{stem}.csv", "width-curve")
    doc = {"format_version": FORMAT_VERSION, "kind": "width-curve", "rows": curve.rows,
           "excess_width_loglog_slope": curve.slopes}
    js = dump_json(doc, out_dir / f"{stem}.json")
    return [csv, js]


def write_ground_truth(truth, names, out_dir, stem: str = "ground_truth") -> list:
    out_dir = Path(out_dir)
    rows = []
    for j, name in enumerate(names):
        rows.append({"input": j, "name": name, "estimate": truth.estimates[j], "stderr": truth.stderr[j],
                     "closed_form": "" if truth.closed_form is None else truth.closed_form[j]})
    csv = write_table(rows, ("input", "name", "estimate", "stderr", "closed_form"), out_dir / f"{stem}.csv",
                      "ground-truth")
    js = dump_json(dict(truth.to_dict(), format_version=FORMAT_VERSION, names=list(names)), out_dir / f"{stem}.json")
    return [csv, js]


def relative_outputs(paths, out_dir) -> list:
    out_dir = Path(out_dir)
    return sorted(str(Path(p).relative_to(out_dir)) for p in paths)


def find_manifest(path) -> Optional[Path]:
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    return p if p.exists() else None
