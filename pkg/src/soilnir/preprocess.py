"""Spectral transforms and the standardized feature matrix.

Column layout of a full feature matrix is four blocks of ``grid.count``
columns each, always in the order RAW, D1, D2, FFT. Column names are
``raw_<nm>``, ``d1_<nm>``, ``d2_<nm>`` and ``fft_bin_<k>``.
"""
from __future__ import annotations

import csv
import io
import json
import re
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .dataset import SpectralDataset, WavelengthGrid


class Block(str, Enum):
    RAW = "raw"
    D1 = "d1"
    D2 = "d2"
    FFT = "fft"


BLOCK_ORDER = (Block.RAW, Block.D1, Block.D2, Block.FFT)

WHOLE = "whole"
TRAIN = "train"


def parse_blocks(spec: str | Iterable) -> tuple[Block, ...]:
    """``"raw,d1"`` or an iterable of names/Blocks -> blocks in canonical order."""
    if isinstance(spec, str):
        items = [s.strip().lower() for s in spec.split(",") if s.strip()]
    else:
        items = [b.value if isinstance(b, Block) else str(b).lower() for b in spec]
    try:
        chosen = {Block(s) for s in items}
    except ValueError as exc:
        raise ValueError(f"unknown feature block in {spec!r}") from exc
    if not chosen:
        raise ValueError("no feature blocks selected")
    return tuple(b for b in BLOCK_ORDER if b in chosen)


def _check_length(f: np.ndarray) -> None:
    if f.shape[-1] < 3:
        raise ValueError(f"derivatives need at least 3 points, got {f.shape[-1]}")


def derivative1(spectrum, step_nm: float = 1.0) -> np.ndarray:
    """First derivative along the last axis.

    Central differences inside, one-sided first differences at both ends,
    so the output keeps the input length.
    """
    f = np.asarray(spectrum, dtype=float)
    _check_length(f)
    d = np.empty_like(f)
    d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * step_nm)
    d[..., 0] = (f[..., 1] - f[..., 0]) / step_nm
    d[..., -1] = (f[..., -1] - f[..., -2]) / step_nm
    return d


def derivative2(spectrum, step_nm: float = 1.0) -> np.ndarray:
    """Second derivative along the last axis; endpoints repeat their neighbour."""
    f = np.asarray(spectrum, dtype=float)
    _check_length(f)
    d = np.empty_like(f)
    d[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / step_nm**2
    d[..., 0] = d[..., 1]
    d[..., -1] = d[..., -2]
    return d


def fft_magnitude(spectrum) -> np.ndarray:
    """|DFT_k| for k = 0..N-1 along the last axis (any N, full length kept)."""
    f = np.asarray(spectrum, dtype=float)
    if f.shape[-1] < 1:
        raise ValueError("empty spectrum")
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite value in spectrum")
    return np.abs(np.fft.fft(f, axis=-1))


_TRANSFORMS = {
    Block.RAW: lambda s, step: np.array(s, dtype=float),
    Block.D1: derivative1,
    Block.D2: derivative2,
    Block.FFT: lambda s, step: fft_magnitude(s),
}


@dataclass(frozen=True)
class FeatureId:
    """Provenance of one feature column.

    ``index`` is the band index for RAW/D1/D2 and the frequency bin for FFT.
    """

    block: Block
    index: int
    wavelength_nm: float | None = None

    @property
    def name(self) -> str:
        if self.block is Block.FFT:
            return f"fft_bin_{self.index}"
        return f"{self.block.value}_{_fmt_nm(self.wavelength_nm)}"

    def sort_key(self):
        return (BLOCK_ORDER.index(self.block), self.index)

    @classmethod
    def parse(cls, name: str, grid: WavelengthGrid) -> "FeatureId":
        m = re.fullmatch(r"fft_bin_(\d+)", name)
        if m:
            k = int(m.group(1))
            if k >= grid.count:
                raise ValueError(f"{name}: bin outside grid")
            return cls(Block.FFT, k)
        m = re.fullmatch(r"(raw|d1|d2)_([-+0-9.eE]+)", name)
        if not m:
            raise ValueError(f"unrecognised feature name {name!r}")
        wl = float(m.group(2))
        i = grid.index_of(wl)
        if abs(grid.wavelengths[i] - wl) > 1e-3:
            raise ValueError(f"{name}: wavelength not on grid")
        return cls(Block(m.group(1)), i, float(grid.wavelengths[i]))

    def to_dict(self) -> dict:
        return {"block": self.block.value, "index": self.index,
                "wavelength_nm": self.wavelength_nm}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureId":
        return cls(Block(d["block"]), int(d["index"]), d.get("wavelength_nm"))


def _fmt_nm(wl: float) -> str:
    return repr(round(float(wl), 6))


def feature_ids(grid: WavelengthGrid, blocks: Sequence[Block] = BLOCK_ORDER) -> list[FeatureId]:
    wl = grid.wavelengths
    out = []
    for b in parse_blocks(blocks):
        for i in range(grid.count):
            out.append(FeatureId(b, i, None if b is Block.FFT else float(wl[i])))
    return out


@dataclass(frozen=True)
class Standardization:
    """Per-column location/scale used to z-score features (population std)."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, raw: np.ndarray) -> np.ndarray:
        safe = np.where(self.std > 0, self.std, 1.0)
        z = (raw - self.mean) / safe
        z[:, self.std == 0] = 0.0
        return z

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float))


@dataclass
class FeatureMatrix:
    """Standardized design matrix with column provenance."""

    values: np.ndarray
    columns: list[FeatureId]
    standardization: Standardization
    mode: str = WHOLE
    sample_ids: list[str] | None = None

    @property
    def shape(self):
        return self.values.shape

    def select(self, blocks) -> "FeatureMatrix":
        keep = set(parse_blocks(blocks))
        idx = [j for j, c in enumerate(self.columns) if c.block in keep]
        st = Standardization(self.standardization.mean[idx], self.standardization.std[idx])
        return FeatureMatrix(self.values[:, idx], [self.columns[j] for j in idx], st,
                             self.mode, self.sample_ids)

    def rows(self, indices) -> "FeatureMatrix":
        idx = np.asarray(indices)
        ids = None if self.sample_ids is None else [self.sample_ids[int(i)] for i in
                                                   (np.flatnonzero(idx) if idx.dtype == bool else idx)]
        return FeatureMatrix(self.values[idx], self.columns, self.standardization, self.mode, ids)

    def raw_values(self) -> np.ndarray:
        """Undo the standardization (constant columns come back as their mean)."""
        return self.values * self.standardization.std + self.standardization.mean

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id"] + [c.name for c in self.columns])
        ids = self.sample_ids or [str(i) for i in range(self.values.shape[0])]
        for sid, row in zip(ids, self.values):
            w.writerow([sid] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def stats_json(self) -> str:
        doc = {"mode": self.mode, "columns": [c.name for c in self.columns],
               **self.standardization.to_dict()}
        return json.dumps(doc, indent=1)


def transform_spectra(spectra: np.ndarray, grid: WavelengthGrid,
                      blocks: Sequence[Block] = BLOCK_ORDER) -> np.ndarray:
    """Unstandardized block concatenation for a samples x bands matrix."""
    spectra = np.atleast_2d(np.asarray(spectra, dtype=float))
    parts = [_TRANSFORMS[b](spectra, grid.step_nm) for b in parse_blocks(blocks)]
    return np.hstack(parts)


def fit_standardization(raw: np.ndarray) -> Standardization:
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    # columns whose spread is at rounding level of their magnitude are constant
    std = np.where(std <= 1e-12 * np.maximum(np.abs(mean), 1e-300), 0.0, std)
    return Standardization(mean, std)


def assemble_features(ds: SpectralDataset, blocks=BLOCK_ORDER, mode: str = WHOLE,
                      reference_stats: Standardization | None = None) -> FeatureMatrix:
    """Build the standardized feature matrix for a dataset.

    ``mode="whole"`` z-scores each column with the dataset's own mean and
    population standard deviation. ``mode="train"`` applies
    ``reference_stats`` (computed on a training split) unchanged; when no
    reference is given the dataset is treated as the training split. Note
    that whole-dataset standardization lets test-set statistics leak into
    the features.
    """
    if len(ds) == 0:
        raise ValueError("cannot build features for an empty dataset")
    if mode not in (WHOLE, TRAIN):
        raise ValueError(f"unknown standardization mode {mode!r}")
    blocks = parse_blocks(blocks)
    raw = transform_spectra(ds.spectra, ds.grid, blocks)
    cols = feature_ids(ds.grid, blocks)
    if mode == TRAIN and reference_stats is not None:
        if reference_stats.mean.shape[0] != raw.shape[1]:
            raise ValueError(f"reference stats have {reference_stats.mean.shape[0]} columns, "
                             f"features have {raw.shape[1]}")
        stats = reference_stats
    else:
        stats = fit_standardization(raw)
    const = np.flatnonzero(stats.std == 0)
    if const.size:
        names = ", ".join(cols[j].name for j in const[:8])
        warnings.warn(f"{const.size} zero-variance column(s) set to 0: {names}"
                      f"{' ...' if const.size > 8 else ''}")
    return FeatureMatrix(stats.apply(raw), cols, stats, mode, ds.ids)
