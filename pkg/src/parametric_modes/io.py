"""Flat-file exports and their readers.

Everything is plain text: JSON documents and comma-separated tables with a
header row and LF line endings.  Floats are written with 17 significant
digits so every file reads back to the exact doubles that were written.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import N_RATIOS, SweepRecord
from .grid import FrequencyGrid
from .modes import AppendixReport, ModeStructure
from .propagator import TransferState

FORMAT_VERSION = 1
KERNEL_NAMES = ("h1a_bar", "h2a", "h1b_bar", "h2b")
KERNEL_JSON = "kernels.json"
GRID_JSON = "grid.json"


class BundleError(ValueError):
    """A file on disk does not have the expected layout."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dump_json(obj, path: Path) -> None:
    text = json.dumps(obj, indent=1, sort_keys=True, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def _clean(x):
    # JSON has no NaN; missing values become null
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, list):
        return [_clean(v) for v in x]
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    return x


def _unclean(x):
    return math.nan if x is None else float(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise BundleError(f"{path} is empty")
    return rows[0], rows[1:]


# ---------------------------------------------------------------- kernels

def _records(m: np.ndarray) -> list[list]:
    rows, cols = np.indices(m.shape)
    return [[int(i), int(j), float(v.real), float(v.imag)]
            for i, j, v in zip(rows.ravel(), cols.ravel(), m.ravel())]


def _from_records(records, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    seen = np.zeros(shape, dtype=bool)
    for row in records:
        i, j, re, im = int(row[0]), int(row[1]), float(row[2]), float(row[3])
        if not (0 <= i < shape[0] and 0 <= j < shape[1]):
            raise BundleError(f"record index ({i}, {j}) outside shape {shape}")
        out[i, j] = complex(re, im)
        seen[i, j] = True
    if not seen.all():
        raise BundleError(f"{int((~seen).sum())} entries missing from a {shape} kernel")
    return out


def _kernel_header(state: TransferState) -> dict:
    return {"format": "transfer-kernels", "version": FORMAT_VERSION, "zeta": state.zeta, "steps": state.steps,
            "grid_a": state.grid_a.to_dict(), "grid_b": state.grid_b.to_dict(),
            "layout": {"h1a_bar": "a,a", "h2a": "a,b", "h1b_bar": "b,b", "h2b": "a,b"}}


def _shapes(grid_a: FrequencyGrid, grid_b: FrequencyGrid) -> dict:
    na, nb = grid_a.n, grid_b.n
    return {"h1a_bar": (na, na), "h2a": (na, nb), "h1b_bar": (nb, nb), "h2b": (na, nb)}


def _matrices(state: TransferState) -> dict:
    return {"h1a_bar": state.h1a_bar, "h2a": state.h2a, "h1b_bar": state.h1b_bar, "h2b": state.h2b}


def write_kernels(state: TransferState, out_dir: Path, fmt_: str = "csv") -> list[Path]:
    """Write the four kernels as ``(row, col, re, im)`` records.

    ``csv`` writes ``grid.json`` plus one table per kernel, ``json`` writes a
    single ``kernels.json``; ``both`` writes both.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    mats = _matrices(state)
    if fmt_ in ("json", "both"):
        doc = _kernel_header(state)
        doc["kernels"] = {name: _records(mats[name]) for name in KERNEL_NAMES}
        _dump_json(doc, out_dir / KERNEL_JSON)
        written.append(out_dir / KERNEL_JSON)
    if fmt_ in ("csv", "both"):
        _dump_json(_kernel_header(state), out_dir / GRID_JSON)
        written.append(out_dir / GRID_JSON)
        for name in KERNEL_NAMES:
            write_csv(out_dir / f"{name}.csv", ("row", "col", "re", "im"), _records(mats[name]))
            written.append(out_dir / f"{name}.csv")
    if fmt_ not in ("csv", "json", "both"):
        raise ValueError(f"unknown export format {fmt_!r}")
    return written


def read_kernels(path: Path) -> TransferState:
    """Read a bundle written by :func:`write_kernels`.

    ``path`` may be a ``kernels.json`` file or a directory holding either
    layout (the JSON file wins when both are present).
    """
    path = Path(path)
    if path.is_dir():
        if (path / KERNEL_JSON).exists():
            path = path / KERNEL_JSON
        elif (path / GRID_JSON).exists():
            return _read_kernel_csv(path)
        else:
            raise BundleError(f"{path} contains neither {KERNEL_JSON} nor {GRID_JSON}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    header = _check_header(doc, path)
    ga, gb = header
    shapes = _shapes(ga, gb)
    try:
        mats = {name: _from_records(doc["kernels"][name], shapes[name]) for name in KERNEL_NAMES}
    except KeyError as exc:
        raise BundleError(f"{path}: missing kernel {exc}") from exc
    return TransferState.from_kernels(doc["zeta"], ga, gb, mats["h1a_bar"], mats["h2a"], mats["h1b_bar"],
                                      mats["h2b"], steps=int(doc.get("steps", 0)))


def _check_header(doc: dict, path: Path) -> tuple[FrequencyGrid, FrequencyGrid]:
    if doc.get("format") != "transfer-kernels":
        raise BundleError(f"{path} is not a kernel bundle")
    if doc.get("version") != FORMAT_VERSION:
        raise BundleError(f"{path}: unsupported bundle version {doc.get('version')!r}")
    return FrequencyGrid.from_dict(doc["grid_a"]), FrequencyGrid.from_dict(doc["grid_b"])


def _read_kernel_csv(directory: Path) -> TransferState:
    doc = json.loads((directory / GRID_JSON).read_text(encoding="utf-8"))
    ga, gb = _check_header(doc, directory / GRID_JSON)
    shapes = _shapes(ga, gb)
    mats = {}
    for name in KERNEL_NAMES:
        header, rows = read_csv(directory / f"{name}.csv")
        if header != ["row", "col", "re", "im"]:
            raise BundleError(f"{name}.csv has header {header}")
        mats[name] = _from_records(rows, shapes[name])
    return TransferState.from_kernels(doc["zeta"], ga, gb, mats["h1a_bar"], mats["h2a"], mats["h1b_bar"],
                                      mats["h2b"], steps=int(doc.get("steps", 0)))


def write_contour(path: Path, state: TransferState) -> None:
    """``|h2a|`` as ``(Omega1, Omega2, modulus)`` rows, Omega2 varying fastest."""
    w1, w2 = state.grid_a.points, state.grid_b.points
    mod = np.abs(state.h2a)
    write_csv(path, ("omega1", "omega2", "modulus"),
              ((float(w1[i]), float(w2[j]), float(mod[i, j])) for i in range(len(w1)) for j in range(len(w2))))


def read_contour(path: Path) -> np.ndarray:
    header, rows = read_csv(path)
    if header != ["omega1", "omega2", "modulus"]:
        raise BundleError(f"{path} has header {header}")
    return np.array(rows, dtype=float)


# ---------------------------------------------------------------- modes

def _samples(grid: FrequencyGrid, f: np.ndarray) -> list[list[float]]:
    return [[float(x), float(v.real), float(v.imag)] for x, v in zip(grid.points, f)]


def modes_to_dict(modes: ModeStructure) -> dict:
    per_mode = []
    for k in range(modes.n_modes_kept):
        per_mode.append({
            "index": k + 1,
            "r": float(modes.r[k]),
            "squeezing": float(modes.squeezing[k]),
            "psi_a": _samples(modes.grid_a, modes.psi_a[k]),
            "psi_b": _samples(modes.grid_b, modes.psi_b[k]),
            "phi_a": _samples(modes.grid_a, modes.phi_a[k]),
            "phi_b": _samples(modes.grid_b, modes.phi_b[k]),
        })
    return {"format": "mode-structure", "version": FORMAT_VERSION, "G": modes.G,
            "r": [float(v) for v in modes.r], "n_modes_kept": modes.n_modes_kept,
            "singular_values_h2a": [float(v) for v in modes.sv_h2a],
            "grid_a": modes.grid_a.to_dict(), "grid_b": modes.grid_b.to_dict(), "modes": per_mode}


def write_modes(path: Path, modes: ModeStructure) -> None:
    _dump_json(modes_to_dict(modes), Path(path))


def read_modes(path: Path) -> ModeStructure:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != "mode-structure" or doc.get("version") != FORMAT_VERSION:
        raise BundleError(f"{path} is not a version-{FORMAT_VERSION} mode-structure file")
    ga, gb = FrequencyGrid.from_dict(doc["grid_a"]), FrequencyGrid.from_dict(doc["grid_b"])

    def family(key):
        rows = [np.asarray(m[key], dtype=float) for m in doc["modes"]]
        return np.array([r[:, 1] + 1j * r[:, 2] for r in rows]).reshape(len(rows), -1)

    return ModeStructure(float(doc["G"]), np.asarray(doc["r"], dtype=float), family("psi_a"), family("psi_b"),
                         family("phi_a"), family("phi_b"), np.asarray(doc["singular_values_h2a"], dtype=float),
                         int(doc["n_modes_kept"]), ga, gb)


def write_appendix(path: Path, report: AppendixReport, passed: bool) -> None:
    doc = {"format": "appendix-report", "version": FORMAT_VERSION, "overlaps_pass": passed,
           "worst_defect": report.worst_defect(), "worst_overlap": report.worst_overlap()}
    doc.update(report.to_dict())
    _dump_json(doc, Path(path))


def read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_json(path: Path, obj: dict) -> None:
    _dump_json(_clean(obj), Path(path))


# ---------------------------------------------------------------- sweeps

def sweep_header(n_ratios: int = N_RATIOS) -> list[str]:
    return ["K", "M", "g2", "fwhm_mode1"] + [f"r{k}_r1" for k in range(2, n_ratios + 1)] + ["residual", "G"]


def _sweep_row(rec: SweepRecord, n_ratios: int) -> list[float]:
    ratios = list(rec.r_over_r1) + [math.nan] * (n_ratios - 1 - len(rec.r_over_r1))
    return [rec.K, rec.M, rec.g2, rec.fwhm_mode1, *ratios[: n_ratios - 1], rec.bogoliubov_residual, rec.G]


def write_sweep_csv(path: Path, records: Sequence[SweepRecord], n_ratios: int = N_RATIOS) -> None:
    write_csv(path, sweep_header(n_ratios), (_sweep_row(r, n_ratios) for r in records))


def read_sweep_csv(path: Path) -> tuple[list[str], np.ndarray]:
    header, rows = read_csv(path)
    if header[:4] != ["K", "M", "g2", "fwhm_mode1"] or header[-2:] != ["residual", "G"]:
        raise BundleError(f"{path} has header {header}")
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def write_sweep_json(path: Path, records: Sequence[SweepRecord], extra: dict | None = None) -> None:
    doc = {"format": "k-sweep", "version": FORMAT_VERSION, "records": [r.to_dict() for r in records]}
    doc.update(extra or {})
    write_json(path, doc)


def read_sweep_json(path: Path) -> list[SweepRecord]:
    doc = read_json(path)
    if doc.get("format") != "k-sweep":
        raise BundleError(f"{path} is not a sweep file")
    out = []
    for d in doc["records"]:
        d = dict(d)
        for key in ("K", "M", "g2", "fwhm_mode1", "bogoliubov_residual", "G", "leakage"):
            d[key] = _unclean(d[key])
        d["r_over_r1"] = [_unclean(v) for v in d["r_over_r1"]]
        out.append(SweepRecord(**d))
    return out


def figure_files(records: Sequence[SweepRecord], out_dir: Path, ratio_figure: str = "fig6",
                 n_ratios: int = N_RATIOS) -> list[Path]:
    """Per-figure tables derived from a sweep.

    ``fig4_inset.csv`` -- mode-1 width; ``fig6.csv`` (or ``fig8.csv``) --
    ``r_k/r_1``; ``fig7.csv`` -- mode number and ``g2``.
    """
    out_dir = Path(out_dir)
    width = out_dir / "fig4_inset.csv"
    write_csv(width, ("K", "fwhm_mode1"), ((r.K, r.fwhm_mode1) for r in records))
    ratios = out_dir / f"{ratio_figure}.csv"
    write_csv(ratios, ["K"] + [f"r{k}_r1" for k in range(2, n_ratios + 1)],
              ([r.K] + _sweep_row(r, n_ratios)[4:4 + n_ratios - 1] for r in records))
    number = out_dir / "fig7.csv"
    write_csv(number, ("K", "M", "g2"), ((r.K, r.M, r.g2) for r in records))
    return [width, ratios, number]
