"""CSV emission for experiment results."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .runners import ExperimentResult
from .spec import spec_echo

__all__ = ["fmt_float", "emit_results", "table_rows", "write_table", "read_series", "TABLE_MUS", "TABLE_ETAS"]

TABLE_MUS = (1.0, 2.0, 3.0)
TABLE_ETAS = (0.1, 0.5)


def fmt_float(v) -> str:
    """17 significant digits; infinities as ``inf``/``-inf`` and NaN as ``nan``."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _write(path: Path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def row_label(spec) -> str:
    name = "LD" if spec.sampler == "ula" else ("Anchored LD" if spec.sampler == "anchored" else "Time-change LD")
    if spec.kind == "laplace1d":
        return f"{name} d=1"
    S = spec.sigma_matrix()
    off = S[np.triu_indices(S.shape[0], 1)]
    corr = f" rho={fmt_float(off[0])}" if off.size and np.any(off != 0) else ""
    return f"{name} d={S.shape[0]}{corr}"


def table_rows(results) -> tuple[list[str], list[list[str]]]:
    """Iterations-to-threshold laid out as rows x (mu, eta) columns; blank when not run."""
    header = ["row"] + [f"mu={m:g} eta={e:g}" for m in TABLE_MUS for e in TABLE_ETAS]
    cells: dict[str, dict[tuple[float, float], float]] = {}
    order = []
    for res in results:
        label = row_label(res.spec)
        if label not in cells:
            cells[label] = {}
            order.append(label)
        cells[label][(res.spec.mu, res.spec.eta)] = res.iterations_to_threshold
    rows = []
    for label in order:
        row = [label]
        for m in TABLE_MUS:
            for e in TABLE_ETAS:
                v = cells[label].get((m, e))
                row.append("" if v is None else fmt_float(v))
        rows.append(row)
    return header, rows


def write_table(results, path) -> Path:
    header, rows = table_rows(results)
    p = Path(path)
    _write(p, _csv_text(header, rows))
    return p


def emit_results(result: ExperimentResult, out_dir) -> dict[str, Path]:
    """Write ``metrics.csv``, ``table.csv``, ``spec.echo``, ``long.csv`` and ``summary.csv``.

    ``metrics.csv`` depends only on the spec and seed, so repeated runs give
    byte-identical files; timing and version live in ``summary.csv``.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    metrics = list(result.per_repeat)
    header = ["iteration"]
    for m in metrics:
        header += [f"{m}_mean", f"{m}_stderr"]
    header.append("count")
    rows = []
    for i, it in enumerate(result.iterations):
        row = [str(int(it))]
        for m in metrics:
            row += [fmt_float(result.mean(m)[i]), fmt_float(result.stderr(m)[i])]
        row.append(str(int(result.count()[i])))
        rows.append(row)
    paths = {"metrics": out / "metrics.csv", "table": out / "table.csv", "spec": out / "spec.echo",
             "long": out / "long.csv", "summary": out / "summary.csv"}
    _write(paths["metrics"], _csv_text(header, rows))
    write_table([result], paths["table"])
    _write(paths["spec"], spec_echo(result.spec))
    long_rows = []
    for m in metrics:
        vals = result.per_repeat[m]
        for r in range(vals.shape[0]):
            long_rows.append([str(r), "0", m, fmt_float(result.initial[m][r])])
            for i, it in enumerate(result.iterations):
                if not np.isnan(vals[r, i]):
                    long_rows.append([str(r), str(int(it)), m, fmt_float(vals[r, i])])
    _write(paths["long"], _csv_text(["repeat", "iteration", "metric", "value"], long_rows))
    summary = [
        ["metric", result.metric],
        ["final", fmt_float(result.final)],
        ["iterations_to_threshold", fmt_float(result.iterations_to_threshold)],
        ["mean_series_crossing", fmt_float(result.mean_series_crossing())],
        ["wall_time", fmt_float(result.wall_time)],
        ["version", result.version],
    ]
    _write(paths["summary"], _csv_text(["key", "value"], summary))
    return paths


def read_series(path) -> dict[str, np.ndarray]:
    """Parse a ``metrics.csv`` back into float columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[j]) for r in body]) for j, h in enumerate(header)}
