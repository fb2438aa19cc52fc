"""Data ingestion, chain persistence and report emission.

CSV everywhere data or results are exchanged (auditable, matches fisheries
practice); JSON only for run configuration and the chain-file header.

Dataset CSVs are long format, one row per (year, day, size class):

    capture-recapture: year,day,size_class,catch,recaptures,x_*...,z_*...
    CPUE:              year,day,size_class,count,effort_hours,x_*...,z_*...

``x_``-prefixed columns are day-level detection covariates (must agree
across size classes within a day), ``z_``-prefixed columns year-level
covariates (constant within a year). An intercept column is implicit:
ingestion prepends it, so coefficient index 0 is always the intercept.

Chain files are CSV bodies (iteration, parameter, index, value) under
``#``-prefixed header lines holding a JSON document with the format
version, dataset hash, config echo, standardization moments, acceptance
rates and model info. Values are serialized with shortest round-trip
decimal form (17 significant digits), so write-then-read is the identity.

All writes are atomic (temp file in the target directory, then rename).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .chains import CovariateMoments, McmcConfig, PosteriorChains
from .cpue import CPUEDataset
from .crmodel import CRDataset
from .errors import ValidationError

__all__ = [
    "dataset_hash",
    "export_cpue_csv",
    "export_cr_csv",
    "ingest_cpue_csv",
    "ingest_cpue_dir",
    "ingest_cr_csv",
    "read_chains",
    "relative_temperature",
    "summary_rows",
    "write_chains",
    "write_csv_atomic",
    "write_summary_csv",
]

CHAINFILE_VERSION = 1
INTERCEPT = "intercept"


# --------------------------------------------------------------------------
# atomic writes and float formatting
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    """Shortest decimal form that round-trips a float64; ints stay integral."""
    f = float(v)
    if math.isnan(f) or math.isinf(f):
        raise ValidationError("refusing to serialize a non-finite value")
    if f == int(f) and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


def write_text_atomic(path: Path | str, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv_atomic(path: Path | str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    write_text_atomic(path, "\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# dataset CSV schemas
# --------------------------------------------------------------------------

def _split_header(header: list[str], fixed: list[str], path) -> tuple[list[str], list[str]]:
    seen = set()
    for col in header:
        if col in seen:
            raise ValidationError(f"{path}: duplicate column {col!r}")
        seen.add(col)
    for col in fixed:
        if col not in header:
            raise ValidationError(f"{path}: missing required column {col!r}")
    x_cols = [c for c in header if c.startswith("x_")]
    z_cols = [c for c in header if c.startswith("z_")]
    unknown = [c for c in header if c not in fixed and c not in x_cols and c not in z_cols]
    if unknown:
        raise ValidationError(f"{path}: unknown columns {unknown} (covariates need x_/z_ prefixes)")
    return x_cols, z_cols


def _parse_int(value: str, col: str, line: int, path) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}:{line}: column {col!r} must be an integer, got {value!r}")


def _parse_float(value: str, col: str, line: int, path) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{path}:{line}: column {col!r} must be a number, got {value!r}")
    if not math.isfinite(out):
        raise ValidationError(f"{path}:{line}: column {col!r} must be finite, got {value!r}")
    return out


def _read_rows(path, fixed: list[str]):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}")
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError(f"{path}: file is empty")
    header = [h.strip() for h in header]
    x_cols, z_cols = _split_header(header, fixed, path)
    idx = {c: header.index(c) for c in header}
    rows = []
    for line_no, raw in enumerate(reader, start=2):
        if not raw or (len(raw) == 1 and not raw[0].strip()):
            continue
        if len(raw) != len(header):
            raise ValidationError(
                f"{path}:{line_no}: expected {len(header)} fields, got {len(raw)}"
            )
        rows.append((line_no, raw))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return idx, x_cols, z_cols, rows


def _assemble_grid(path, idx, x_cols, z_cols, rows, count_cols: list[str]):
    """Group long-format rows into (year, day) cells x size classes; validate the grid."""
    cells: dict[tuple[int, int], dict[int, list[float]]] = {}
    covars: dict[tuple[int, int], tuple[list[float], int]] = {}
    zvals: dict[int, tuple[list[float], int]] = {}
    for line_no, raw in rows:
        year = _parse_int(raw[idx["year"]], "year", line_no, path)
        day = _parse_int(raw[idx["day"]], "day", line_no, path)
        size_class = _parse_int(raw[idx["size_class"]], "size_class", line_no, path)
        counts = [_parse_float(raw[idx[c]], c, line_no, path) for c in count_cols]
        x = [_parse_float(raw[idx[c]], c, line_no, path) for c in x_cols]
        z = [_parse_float(raw[idx[c]], c, line_no, path) for c in z_cols]
        cell = cells.setdefault((year, day), {})
        if size_class in cell:
            raise ValidationError(
                f"{path}:{line_no}: duplicate row for (year={year}, day={day}, "
                f"size_class={size_class})"
            )
        cell[size_class] = counts
        if (year, day) in covars and covars[(year, day)][0] != x:
            raise ValidationError(
                f"{path}:{line_no}: detection covariates differ across size classes "
                f"within (year={year}, day={day})"
            )
        covars.setdefault((year, day), (x, line_no))
        if year in zvals and zvals[year][0] != z:
            raise ValidationError(
                f"{path}:{line_no}: year covariates are not constant within year {year}"
            )
        zvals.setdefault(year, (z, line_no))

    classes = sorted({sc for cell in cells.values() for sc in cell})
    for (year, day), cell in cells.items():
        missing = [sc for sc in classes if sc not in cell]
        if missing:
            raise ValidationError(
                f"{path}: (year={year}, day={day}) is missing size classes {missing}"
            )
    years = sorted({y for y, _ in cells})
    keys = sorted(cells)
    year_index = {y: i for i, y in enumerate(years)}
    row_year = np.array([year_index[y] for y, _ in keys], dtype=np.int64)
    day_arr = np.array([d for _, d in keys], dtype=np.int64)
    counts = np.array(
        [[cells[key][sc] for sc in classes] for key in keys], dtype=float
    )  # (R, J, n_count_cols)
    x = np.column_stack(
        [np.ones(len(keys))] + [np.array([covars[k][0][i] for k in keys]) for i in range(len(x_cols))]
    ) if x_cols else np.ones((len(keys), 1))
    z = np.column_stack(
        [np.ones(len(years))] + [np.array([zvals[y][0][i] for y in years]) for i in range(len(z_cols))]
    ) if z_cols else np.ones((len(years), 1))
    x_names = (INTERCEPT, *x_cols)
    z_names = (INTERCEPT, *z_cols)
    return (
        np.array(years, dtype=np.int64), row_year, day_arr, counts,
        x, x_names, z, z_names, tuple(classes),
    )


def _as_int_counts(values: np.ndarray, what: str, path) -> np.ndarray:
    if np.any(values != np.floor(values)) or np.any(values < 0):
        raise ValidationError(f"{path}: {what} must be non-negative integers")
    return values.astype(np.int64)


def ingest_cr_csv(path) -> CRDataset:
    """Read and validate a capture-recapture CSV (see the module docstring schema)."""
    idx, x_cols, z_cols, rows = _read_rows(
        path, ["year", "day", "size_class", "catch", "recaptures"]
    )
    years, row_year, day, counts, x, x_names, z, z_names, classes = _assemble_grid(
        path, idx, x_cols, z_cols, rows, ["catch", "recaptures"]
    )
    catch = _as_int_counts(counts[:, :, 0], "catch", path)
    recaps = _as_int_counts(counts[:, :, 1], "recaptures", path)
    try:
        return CRDataset(
            years=years, row_year=row_year, day=day, catch=catch, recaptures=recaps,
            x=x, x_names=x_names, z=z, z_names=z_names, size_classes=classes,
        )
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}")


def ingest_cpue_csv(path) -> CPUEDataset:
    """Read and validate a CPUE CSV (see the module docstring schema)."""
    idx, x_cols, z_cols, rows = _read_rows(
        path, ["year", "day", "size_class", "count", "effort_hours"]
    )
    years, row_year, day, counts, x, x_names, z, z_names, classes = _assemble_grid(
        path, idx, x_cols, z_cols, rows, ["count", "effort_hours"]
    )
    count = _as_int_counts(counts[:, :, 0], "count", path)
    effort = counts[:, :, 1]
    if np.any(effort != effort[:, :1]):
        raise ValidationError(f"{path}: effort_hours must agree across size classes within a day")
    try:
        return CPUEDataset(
            years=years, row_year=row_year, day=day, count=count, effort=effort[:, 0].copy(),
            x=x, x_names=x_names, z=z, z_names=z_names, size_classes=classes,
        )
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}")


def ingest_cpue_dir(path) -> dict[str, CPUEDataset]:
    """Ingest every ``*.csv`` in a directory, keyed by file stem (one per river segment)."""
    path = Path(path)
    files = sorted(path.glob("*.csv"))
    if not files:
        raise ValidationError(f"no CSV files found in {path}")
    return {f.stem: ingest_cpue_csv(f) for f in files}


def _export_rows(ds, count_cols: dict[str, np.ndarray]):
    x_cov = [n for n in ds.x_names if n != INTERCEPT]
    z_cov = [n for n in ds.z_names if n != INTERCEPT]
    x_idx = [ds.x_names.index(n) for n in x_cov]
    z_idx = [ds.z_names.index(n) for n in z_cov]
    header = ["year", "day", "size_class", *count_cols, *x_cov, *z_cov]
    rows = []
    for r in range(ds.n_rows):
        t = ds.row_year[r]
        for j, sc in enumerate(ds.size_classes):
            row = [str(int(ds.years[t])), str(int(ds.day[r])), str(int(sc))]
            row += [_fmt(arr[r, j] if arr.ndim == 2 else arr[r]) for arr in count_cols.values()]
            row += [_fmt(ds.x[r, c]) for c in x_idx]
            row += [_fmt(ds.z[t, c]) for c in z_idx]
            rows.append(row)
    return header, rows


def export_cr_csv(ds: CRDataset) -> str:
    header, rows = _export_rows(ds, {"catch": ds.catch, "recaptures": ds.recaptures})
    return "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n"


def export_cpue_csv(ds: CPUEDataset) -> str:
    header, rows = _export_rows(ds, {"count": ds.count, "effort_hours": ds.effort})
    return "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n"


def dataset_hash(ds) -> str:
    """SHA-256 of the canonical CSV form; ties chains to the data that produced them."""
    text = export_cr_csv(ds) if isinstance(ds, CRDataset) else export_cpue_csv(ds)
    return hashlib.sha256(text.encode()).hexdigest()


# --------------------------------------------------------------------------
# covariate helper
# --------------------------------------------------------------------------

def relative_temperature(dates, temps) -> np.ndarray:
    """Temperature anomaly relative to the across-years mean for each day of year.

    ``dates`` are ISO date strings or objects with month/day attributes;
    temperatures with the same (month, day) across years share a baseline.
    """
    dates = list(dates)
    temps = np.asarray(temps, dtype=float)
    if len(dates) == 0 or temps.shape != (len(dates),):
        raise ValidationError("need equally many dates and temperatures, at least one")

    def key(d):
        if isinstance(d, str):
            parts = d.split("-")
            if len(parts) != 3:
                raise ValidationError(f"cannot parse date {d!r}; expected YYYY-MM-DD")
            return (int(parts[1]), int(parts[2]))
        return (d.month, d.day)

    keys = [key(d) for d in dates]
    sums: dict[tuple[int, int], list[float]] = {}
    for k, t in zip(keys, temps):
        sums.setdefault(k, []).append(t)
    means = {k: float(np.mean(v)) for k, v in sums.items()}
    return np.array([t - means[k] for k, t in zip(keys, temps)])


# --------------------------------------------------------------------------
# chain files
# --------------------------------------------------------------------------

def write_chains(path, chains: PosteriorChains) -> None:
    """Persist chains: JSON header under '#' comments, long-format CSV body."""
    meta = {
        "format_version": CHAINFILE_VERSION,
        "dataset_hash": chains.dataset_hash,
        "config": chains.config.to_dict(),
        "moments": chains.moments.to_dict() if chains.moments else None,
        "acceptance": chains.acceptance,
        "param_shapes": {k: list(v) for k, v in chains.shapes.items()},
        "info": chains.info,
    }
    lines = [
        f"# catchtl-chainfile v{CHAINFILE_VERSION}",
        "# " + json.dumps(meta, sort_keys=True, separators=(",", ":")),
        "iteration,parameter,index,value",
    ]
    for name in sorted(chains.draws):
        mat = chains.draws[name]
        for s in range(mat.shape[0]):
            row = mat[s]
            lines.extend(f"{s},{name},{c},{_fmt(row[c])}" for c in range(row.size))
    write_text_atomic(path, "\n".join(lines) + "\n")


def read_chains(path) -> PosteriorChains:
    """Inverse of ``write_chains``; the round trip preserves every draw exactly."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}")
    if not lines or not lines[0].startswith("# catchtl-chainfile"):
        raise ValidationError(f"{path}: not a catchtl chain file")
    try:
        meta = json.loads(lines[1][2:])
    except (IndexError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: malformed chain-file header: {exc}")
    if meta.get("format_version") != CHAINFILE_VERSION:
        raise ValidationError(f"{path}: unsupported chain-file version")
    shapes = {k: tuple(v) for k, v in meta["param_shapes"].items()}
    body = lines[3:]
    per_param: dict[str, dict[tuple[int, int], float]] = {k: {} for k in shapes}
    max_iter = -1
    for line_no, line in enumerate(body, start=4):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValidationError(f"{path}:{line_no}: expected 4 fields")
        try:
            it, name, idx, value = int(parts[0]), parts[1], int(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ValidationError(f"{path}:{line_no}: {exc}")
        if name not in per_param:
            raise ValidationError(f"{path}:{line_no}: parameter {name!r} not in header")
        per_param[name][(it, idx)] = value
        max_iter = max(max_iter, it)
    n_draws = max_iter + 1
    if n_draws < 1:
        raise ValidationError(f"{path}: chain file contains no draws")
    draws = {}
    for name, shape in shapes.items():
        flat = int(np.prod(shape, dtype=int))
        mat = np.empty((n_draws, flat))
        cells = per_param[name]
        if len(cells) != n_draws * flat:
            raise ValidationError(f"{path}: parameter {name!r} has missing/extra cells")
        for (it, idx), value in cells.items():
            if not (0 <= it < n_draws and 0 <= idx < flat):
                raise ValidationError(f"{path}: parameter {name!r} has out-of-range indices")
            mat[it, idx] = value
        draws[name] = mat
    moments = CovariateMoments.from_dict(meta["moments"]) if meta.get("moments") else None
    return PosteriorChains(
        draws=draws,
        shapes=shapes,
        config=McmcConfig.from_dict(meta["config"]),
        dataset_hash=meta["dataset_hash"],
        moments=moments,
        acceptance=dict(meta.get("acceptance", {})),
        info=dict(meta.get("info", {})),
    )


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------

def summary_rows(chains: PosteriorChains) -> list[list[str]]:
    """Posterior mean/sd/95% interval per parameter element, plus diagnostics rows."""
    rows: list[list[str]] = []
    for name in sorted(chains.draws):
        mat = chains.draws[name]
        means = mat.mean(axis=0)
        sds = mat.std(axis=0)
        lo, hi = np.quantile(mat, [0.025, 0.975], axis=0)
        for c in range(mat.shape[1]):
            rows.append(
                ["param", name, str(c), _fmt(means[c]), _fmt(sds[c]), _fmt(lo[c]), _fmt(hi[c])]
            )
    for block in sorted(chains.acceptance):
        rows.append(["acceptance", block, "", _fmt(chains.acceptance[block]), "", "", ""])
    phat = chains.info.get("mean_detection")
    if phat:
        for j, value in enumerate(phat):
            rows.append(["mean_detection", "size_class", str(j), _fmt(value), "", "", ""])
    return rows


def write_summary_csv(path, chains: PosteriorChains) -> None:
    write_csv_atomic(
        path, ["kind", "parameter", "index", "mean", "sd", "q025", "q975"], summary_rows(chains)
    )
