"""Deterministic text exports.

Every data file starts with comment lines carrying the toolkit version and the
hash of the configuration that produced it; JSON files carry the same fields
under ``"provenance"``. Floats are written with 17 significant digits and no
timestamps are recorded, so identical inputs give byte-identical files.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .classical import CriticalPoint, Trajectory, classical_Q
from .poincare import SectionEvent, VisitationHistogram
from .projections import ProbabilityGrid
from .spectra import EigenSystem, EntropyProfile

FLOAT = "%.17g"


def provenance(config_hash: str | None) -> dict:
    return {"toolkit": "triplewell", "version": __version__, "config_hash": config_hash or ""}


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _header(config_hash: str | None) -> str:
    p = provenance(config_hash)
    return f"# {p['toolkit']} {p['version']} config={p['config_hash']}\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return FLOAT % v


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config_hash: str | None = None) -> Path:
    path = Path(path)
    lines = [_header(config_hash), ",".join(columns) + "\n"]
    lines.extend(",".join(_fmt(v) for v in row) + "\n" for row in rows)
    _atomic_write(path, "".join(lines))
    return path


def write_json(path, payload: dict, config_hash: str | None = None) -> Path:
    path = Path(path)
    doc = {"provenance": provenance(config_hash), **payload}
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_matrix(path, values: np.ndarray, config_hash: str | None = None) -> Path:
    """Dense matrix as whitespace-separated text, one row per line."""
    path = Path(path)
    body = "".join(" ".join(FLOAT % v for v in row) + "\n" for row in np.asarray(values, dtype=float))
    _atomic_write(path, _header(config_hash) + body)
    return path


def read_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, comments="#"))


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    columns = lines[0].strip().split(",")
    data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.empty((0, len(columns)))
    return columns, data


# -- domain objects ---------------------------------------------------------------

def write_energies(path, es: EigenSystem, config_hash: str | None = None) -> Path:
    first = es.first_index if es.first_index is not None else -1
    rows = ((first + i if first >= 0 else -1, e, e / es.N) for i, e in enumerate(es.energies))
    return write_csv(path, ("index", "E", "E_over_N"), rows, config_hash)


def write_entropy(path, prof: EntropyProfile, config_hash: str | None = None) -> Path:
    fields = ("sh_total", "sh_upper", "sh_lower", "smooth_total", "smooth_upper", "smooth_lower")
    data = np.column_stack([prof.scaled_energies] + [getattr(prof, f) for f in fields])
    cols = ("E_over_N",) + fields
    return write_csv(path, cols, data, config_hash)


def write_trajectory(path, traj: Trajectory, config_hash: str | None = None, stride: int = 1) -> Path:
    s = traj.states[::stride]
    pops = traj.populations()[::stride]
    ang = traj.angles()[::stride]
    E = traj.energies()[::stride]
    data = np.column_stack([traj.t[::stride], pops, ang[:, 2], ang[:, 3], E, classical_Q(s)])
    return write_csv(path, ("t", "N1_over_N", "N2_over_N", "N3_over_N", "phi12", "phi32", "E", "Q"), data, config_hash)


def write_critical_points(path, points: Sequence[CriticalPoint], config_hash: str | None = None, **extra) -> Path:
    return write_json(path, {"critical_points": [p.as_record() for p in points], **extra}, config_hash)


def write_sections(path, events: Sequence[SectionEvent], config_hash: str | None = None) -> Path:
    rows = ((e.t, e.n1, e.n3, e.phi12, int(e.direction), int(e.seed_id)) for e in events)
    return write_csv(path, ("t", "n1", "n3", "phi12", "direction", "seed_id"), rows, config_hash)


def _with_ext(stem, ext: str) -> Path:
    # stems may contain dots (energies, exponents), so Path.with_suffix is not usable
    stem = Path(stem)
    return stem.parent / (stem.name + ext)


def write_grid(stem, grid: ProbabilityGrid, config_hash: str | None = None, **extra) -> list[Path]:
    """``stem.csv`` (n1, n3, value on the simplex), ``stem.txt`` (dense matrix) and ``stem.json``."""
    stem = Path(stem)
    i = np.arange(grid.N + 1)
    n1, n3 = np.meshgrid(i, i, indexing="ij")
    m = grid.mask
    rows = zip(n1[m], n3[m], grid.values[m])
    out = [
        write_csv(_with_ext(stem, ".csv"), ("n1", "n3", "value"), rows, config_hash),
        write_matrix(_with_ext(stem, ".txt"), grid.values, config_hash),
    ]
    side = {"N": grid.N, "sum": grid.total(), "layout": "values[n1][n3]", **grid.meta, **extra}
    out.append(write_json(_with_ext(stem, ".json"), side, config_hash))
    return out


def write_histogram(stem, hist: VisitationHistogram, config_hash: str | None = None, **extra) -> list[Path]:
    stem = Path(stem)
    return [
        write_matrix(_with_ext(stem, ".txt"), hist.counts, config_hash),
        write_json(_with_ext(stem, ".json"), {"bins": hist.bins, "samples": hist.total, "layout": "counts[i_n1][i_n3]", **extra}, config_hash),
    ]


def read_density(path) -> tuple[np.ndarray, dict]:
    """Matrix file plus its JSON sidecar; returns (matrix, sidecar)."""
    path = Path(path)
    side = path.parent / (path.stem + ".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    return read_matrix(path), meta
