"""Measurement matrices and their CSV/JSON-header file format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class MeasurementMatrix:
    """Dense ``m x N`` matrix plus the provenance needed to regenerate it."""

    entries: np.ndarray
    ensemble_tag: str = "custom"
    seed: int | None = None
    row_l2: float | None = None
    normalization: str | None = None

    def __post_init__(self):
        self.entries = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if self.entries.ndim != 2 or 0 in self.entries.shape:
            raise ValueError("matrix must be 2-d with m, N >= 1")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("matrix entries must be finite")

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    def header(self) -> dict:
        return {
            "kind": self.ensemble_tag,
            "m": self.m,
            "N": self.N,
            "seed": self.seed,
            "M": self.row_l2,
            "normalization": self.normalization,
        }


def as_array(A) -> np.ndarray:
    """Return the raw float array of a matrix or array-like."""
    if isinstance(A, MeasurementMatrix):
        return A.entries
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def header_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_suffix(".json")


def save_matrix(M: MeasurementMatrix, csv_path) -> tuple[Path, Path]:
    """Write row-major CSV (shortest round-trip decimals) and a JSON header."""
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(repr(float(v)) for v in row) for row in M.entries]
    csv_path.write_text("\n".join(lines) + "\n")
    hpath = header_path(csv_path)
    hpath.write_text(json.dumps(M.header(), indent=2, sort_keys=True) + "\n")
    return csv_path, hpath


def load_matrix(csv_path) -> MeasurementMatrix:
    csv_path = Path(csv_path)
    rows = [line for line in csv_path.read_text().splitlines() if line.strip()]
    entries = np.array([[float(v) for v in line.split(",")] for line in rows])
    meta = {}
    hpath = header_path(csv_path)
    if hpath.exists():
        meta = json.loads(hpath.read_text())
        if (meta.get("m"), meta.get("N")) != entries.shape:
            raise ValueError(f"header shape {meta.get('m')}x{meta.get('N')} does not match CSV {entries.shape}")
    return MeasurementMatrix(
        entries,
        ensemble_tag=meta.get("kind", "custom"),
        seed=meta.get("seed"),
        row_l2=meta.get("M"),
        normalization=meta.get("normalization"),
    )
