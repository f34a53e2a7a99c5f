"""Deterministic CSV/JSON report writing and tidy plot-data extraction."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable

import numpy as np

SIGNIFICANT_DIGITS = 12
PLOT_COLUMNS = ("x", "y", "series", "bound")


def round_sig(x: float) -> float:
    if not math.isfinite(x) or x == 0:
        return x
    return float(f"{x:.{SIGNIFICANT_DIGITS}g}")


def clean(obj):
    """Recursively convert numpy scalars and arrays to plain JSON types, rounding floats."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return round_sig(v) if math.isfinite(v) else None
    return obj


def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{SIGNIFICANT_DIGITS}g}"
    if v is None:
        return ""
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    fields = list(rows[0].keys())
    for r in rows[1:]:
        for k in r:
            if k not in fields:
                fields.append(k)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([format_cell(r.get(f)) for f in fields])
    return buf.getvalue()


def summary_to_json(summary: dict) -> str:
    return json.dumps(clean(summary), indent=2) + "\n"


def write_report(out_dir: str | Path, name: str, rows: list[dict], summary: dict) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    json_path = out / f"{name}.json"
    csv_path.write_text(rows_to_csv(rows))
    json_path.write_text(summary_to_json(summary))
    return csv_path, json_path


def _points(report: dict) -> Iterable[tuple[float, float, str, float | None]]:
    command = report.get("command")
    for r in report.get("results", []):
        if command == "soundness":
            yield r["t"], r["soundness_lhs"], f"{r['code']}:{r['adversary']}", r["delta_bound"]
        elif command == "bias":
            yield r["eps"], r["beta"], f"beta:{r['source']}", r["beta_bound"]
            yield r["eps"], r["gamma"], f"gamma:{r['source']}", r["gamma_bound"]
        elif command == "huang":
            yield r["p_c"], r["eve_mse"], f"eve:n={r['n']}", r["eve_formula_mse"]
        elif command == "ghz":
            yield r["n"], r["empirical_mse"], "ghz", r["formula_mse"]
        elif command == "privacy":
            yield r["m"], r["privacy_distance"], f"privacy:{r['code']}", r["tolerance"]
        elif command == "twirl":
            yield r["m"], r["max_residual"], f"twirl:{r['kind']}", r["tolerance"]
        elif command == "secure-estimate":
            yield r["t"], r["beta"], f"beta:{r['code']}", r["beta_bound"]
            yield r["t"], r["gamma"], f"gamma:{r['code']}", r["gamma_bound"]
        else:
            raise ValueError(f"report for {command!r} has no plot mapping")


def emit_plot_data(reports: list[dict]) -> list[dict]:
    """Long-format rows ``(x, y, series, bound)``; stable order by report, then series, then x."""
    if not reports:
        raise ValueError("need at least one report")
    rows = []
    for rep in reports:
        pts = list(_points(rep))
        order = {s: i for i, s in enumerate(dict.fromkeys(p[2] for p in pts))}
        pts.sort(key=lambda p: (order[p[2]], p[0]))
        rows.extend({"x": x, "y": y, "series": s, "bound": b} for x, y, s, b in pts)
    return rows
