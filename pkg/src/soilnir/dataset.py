"""Spectral datasets: wavelength grids, soil samples and their CSV format."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

PROPERTIES = ("pH", "OM", "Ca", "Mg", "K", "Na")

GRID_TOL_NM = 1e-6


class DatasetError(ValueError):
    """Raised when spectra or label files violate the CSV contract."""


@dataclass(frozen=True)
class WavelengthGrid:
    """Uniform wavelength axis, in nanometers."""

    start_nm: float
    step_nm: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 3:
            raise DatasetError(f"grid needs at least 3 bands, got {self.count}")
        if not self.step_nm > 0:
            raise DatasetError(f"grid step must be positive, got {self.step_nm}")
        if not math.isfinite(self.start_nm):
            raise DatasetError("grid start must be finite")

    @classmethod
    def canonical(cls) -> "WavelengthGrid":
        """400-2491 nm in 8.5 nm steps (247 bands)."""
        return cls(400.0, 8.5, 247)

    @classmethod
    def from_wavelengths(cls, wavelengths: Sequence[float], tol: float = GRID_TOL_NM) -> "WavelengthGrid":
        wl = np.asarray(wavelengths, dtype=float)
        if wl.ndim != 1 or wl.size < 3:
            raise DatasetError("need at least 3 wavelengths")
        if not np.all(np.isfinite(wl)):
            raise DatasetError("non-finite wavelength in header")
        steps = np.diff(wl)
        if np.any(steps <= 0):
            raise DatasetError("wavelengths must be strictly increasing")
        step = (wl[-1] - wl[0]) / (wl.size - 1)
        expected = wl[0] + step * np.arange(wl.size)
        if np.max(np.abs(expected - wl)) > tol:
            raise DatasetError("wavelengths are not uniformly spaced")
        return cls(float(wl[0]), float(step), int(wl.size))

    @property
    def wavelengths(self) -> np.ndarray:
        return self.start_nm + self.step_nm * np.arange(self.count)

    @property
    def stop_nm(self) -> float:
        return self.start_nm + self.step_nm * (self.count - 1)

    def index_of(self, wavelength_nm: float) -> int:
        """Nearest band index for a wavelength."""
        i = int(round((wavelength_nm - self.start_nm) / self.step_nm))
        return min(max(i, 0), self.count - 1)

    def to_dict(self) -> dict:
        return {"start_nm": self.start_nm, "step_nm": self.step_nm, "count": self.count}


@dataclass(frozen=True)
class SoilSample:
    """One scanned sample and its lab values.

    Missing lab values are stored as ``None``.
    """

    id: str
    reflectance: np.ndarray
    properties: Mapping[str, float | None] = field(default_factory=dict)

    def __post_init__(self):
        r = np.asarray(self.reflectance, dtype=float)
        if r.ndim != 1:
            raise DatasetError(f"sample {self.id!r}: reflectance must be 1-D")
        if not np.all(np.isfinite(r)):
            raise DatasetError(f"sample {self.id!r}: non-finite reflectance")
        r.setflags(write=False)
        object.__setattr__(self, "reflectance", r)
        object.__setattr__(self, "properties", dict(self.properties))

    def get(self, name: str) -> float | None:
        return self.properties.get(name)


class SpectralDataset:
    """Immutable ordered collection of samples sharing one wavelength grid."""

    def __init__(self, grid: WavelengthGrid, samples: Iterable[SoilSample],
                 property_names: Sequence[str] = PROPERTIES):
        self.grid = grid
        self.samples = tuple(samples)
        self.property_names = tuple(property_names)
        seen = set()
        for s in self.samples:
            if s.reflectance.shape[0] != grid.count:
                raise DatasetError(
                    f"sample {s.id!r}: row length mismatch "
                    f"({s.reflectance.shape[0]} values, grid has {grid.count})")
            if s.id in seen:
                raise DatasetError(f"duplicate id {s.id!r}")
            seen.add(s.id)
        self._spectra = None

    def __len__(self):
        return len(self.samples)

    def __repr__(self):
        return f"SpectralDataset(n={len(self)}, grid={self.grid})"

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.samples]

    @property
    def spectra(self) -> np.ndarray:
        """Reflectance matrix, samples x bands (read-only)."""
        if self._spectra is None:
            if self.samples:
                m = np.vstack([s.reflectance for s in self.samples])
            else:
                m = np.empty((0, self.grid.count))
            m.setflags(write=False)
            self._spectra = m
        return self._spectra

    def target(self, name: str) -> np.ndarray:
        """Property values as floats, NaN where the lab value is missing."""
        return np.array([np.nan if s.get(name) is None else s.get(name)
                         for s in self.samples], dtype=float)

    def has_target(self, name: str) -> np.ndarray:
        return np.array([s.get(name) is not None for s in self.samples], dtype=bool)

    def subset(self, indices) -> "SpectralDataset":
        idx = np.asarray(indices)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return SpectralDataset(self.grid, [self.samples[int(i)] for i in idx],
                               self.property_names)


def _parse_float(cell: str, where: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise DatasetError(f"non-numeric cell {cell!r} at {where}") from None
    return v


def _read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]


def load_dataset(spectra_path, labels_path) -> SpectralDataset:
    """Read a spectra CSV and join a labels CSV onto it by sample id.

    Sample order follows the spectra file. Label rows whose id has no
    spectrum are skipped with a warning; spectra without a label row get
    all properties missing.
    """
    spectra_path, labels_path = Path(spectra_path), Path(labels_path)
    for p in (spectra_path, labels_path):
        if not p.is_file():
            raise DatasetError(f"file not found: {p}")

    rows = _read_rows(spectra_path)
    if not rows:
        raise DatasetError(f"{spectra_path}: empty spectra file")
    header = [c.strip() for c in rows[0]]
    if header[0].lower() != "id":
        raise DatasetError(f"{spectra_path}: first header column must be 'id'")
    wl = [_parse_float(c, f"header column {j + 1}") for j, c in enumerate(header[1:])]
    grid = WavelengthGrid.from_wavelengths(wl)

    spectra: dict[str, np.ndarray] = {}
    order: list[str] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DatasetError(
                f"{spectra_path}:{lineno}: row length mismatch "
                f"({len(row) - 1} values, header has {grid.count})")
        sid = row[0].strip()
        if sid in spectra:
            raise DatasetError(f"{spectra_path}:{lineno}: duplicate id {sid!r}")
        vals = np.array([_parse_float(c, f"{spectra_path}:{lineno}") for c in row[1:]])
        if not np.all(np.isfinite(vals)):
            raise DatasetError(f"{spectra_path}:{lineno}: non-finite reflectance")
        spectra[sid] = vals
        order.append(sid)

    labels: dict[str, dict[str, float | None]] = {}
    names = list(PROPERTIES)
    lrows = _read_rows(labels_path)
    if lrows:
        lheader = [c.strip() for c in lrows[0]]
        if lheader[0].lower() != "id":
            raise DatasetError(f"{labels_path}: first header column must be 'id'")
        names = lheader[1:]
        for lineno, row in enumerate(lrows[1:], start=2):
            if len(row) != len(lheader):
                raise DatasetError(f"{labels_path}:{lineno}: row length mismatch")
            sid = row[0].strip()
            if sid in labels:
                raise DatasetError(f"{labels_path}:{lineno}: duplicate id {sid!r}")
            props = {}
            for name, cell in zip(names, row[1:]):
                cell = cell.strip()
                props[name] = None if cell == "" else _parse_float(cell, f"{labels_path}:{lineno}")
            labels[sid] = props

    orphans = [sid for sid in labels if sid not in spectra]
    if orphans:
        warnings.warn(f"{len(orphans)} label id(s) have no spectrum and were skipped: "
                      f"{', '.join(orphans[:5])}{' ...' if len(orphans) > 5 else ''}")

    samples = [SoilSample(sid, spectra[sid], labels.get(sid, {n: None for n in names}))
               for sid in order]
    return SpectralDataset(grid, samples, names)


def _fmt(x: float) -> str:
    return repr(float(x))


def spectra_csv(ds: SpectralDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + [_fmt(v) for v in ds.grid.wavelengths])
    for s in ds.samples:
        w.writerow([s.id] + [_fmt(v) for v in s.reflectance])
    return buf.getvalue()


def labels_csv(ds: SpectralDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + list(ds.property_names))
    for s in ds.samples:
        w.writerow([s.id] + ["" if s.get(n) is None else _fmt(s.get(n))
                             for n in ds.property_names])
    return buf.getvalue()


def save_dataset(ds: SpectralDataset, spectra_path, labels_path) -> None:
    """Write both CSV files; values use shortest round-trip float repr."""
    Path(spectra_path).write_text(spectra_csv(ds), encoding="utf-8", newline="")
    Path(labels_path).write_text(labels_csv(ds), encoding="utf-8", newline="")


def split_train_test(ds: SpectralDataset, train_fraction: float, seed: int):
    """Random train/test partition, deterministic in ``seed``.

    The train part holds ``floor(train_fraction * n)`` samples (at least one
    sample lands on each side when n >= 2). Both parts keep the original
    sample order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(ds)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    # tiny slack so 0.7 * 653 = 457.0999... and exact products like 0.5 * 10 floor as intended
    n_train = int(math.floor(train_fraction * n + 1e-9))
    if n >= 2:
        n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return ds.subset(train_idx), ds.subset(test_idx)
