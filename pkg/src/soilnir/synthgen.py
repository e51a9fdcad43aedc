"""Synthetic reflectance datasets with planted absorption bands.

Each spectrum is a sloped linear baseline minus Gaussian absorption
bands whose depths vary per sample. Properties are linear in the band
depths plus Gaussian noise, so the generating bands are known exactly.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dataset import PROPERTIES, SoilSample, SpectralDataset, WavelengthGrid

# baseline = level + slope * t with t in [0, 1] across the grid; being
# linear, it vanishes from the second derivative
BASELINE_LEVEL = (0.45, 0.75)
BASELINE_SLOPE = (-0.15, 0.15)
MIN_REFLECTANCE = 1e-4
MAX_POOL_FACTOR = 400


class SynthSpecError(ValueError):
    pass


@dataclass(frozen=True)
class Band:
    """Gaussian absorption; ``width_nm`` is its standard deviation."""

    center_nm: float
    width_nm: float
    depth_min: float = 0.0
    depth_max: float = 0.2


@dataclass(frozen=True)
class PropertyRule:
    """value = intercept + sum(weights[k] * depth_k) + noise.

    The noise standard deviation is ``noise_sd + noise_rel * sd(signal)``,
    with the signal spread taken from the band-depth distribution.
    """

    intercept: float = 0.0
    weights: tuple = ()
    noise_sd: float = 0.0
    noise_rel: float = 0.0


@dataclass(frozen=True)
class ImbalanceRule:
    """Exact class counts for one property under the given thresholds."""

    property: str
    thresholds: tuple
    counts: tuple


@dataclass(frozen=True)
class SynthSpec:
    n_samples: int
    bands: tuple
    properties: dict
    grid: WavelengthGrid = field(default_factory=WavelengthGrid.canonical)
    imbalance: ImbalanceRule | None = None
    seed: int = 0
    spectral_noise_sd: float = 0.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_samples < 1:
            raise SynthSpecError("n_samples must be positive")
        if not self.spectral_noise_sd >= 0:
            raise SynthSpecError("spectral_noise_sd must be non-negative")
        lo, hi = self.grid.start_nm, self.grid.stop_nm
        for b in self.bands:
            if not lo <= b.center_nm <= hi:
                raise SynthSpecError(f"band at {b.center_nm} nm lies outside the grid "
                                     f"[{lo}, {hi}] nm")
            if not b.width_nm > 0:
                raise SynthSpecError(f"band at {b.center_nm} nm needs a positive width")
            if not 0 <= b.depth_min <= b.depth_max:
                raise SynthSpecError(f"band at {b.center_nm} nm: need 0 <= depth_min <= depth_max")
        for name, rule in self.properties.items():
            if len(rule.weights) != len(self.bands):
                raise SynthSpecError(f"property {name}: {len(rule.weights)} weights for "
                                     f"{len(self.bands)} bands")
            if rule.noise_sd < 0 or rule.noise_rel < 0:
                raise SynthSpecError(f"property {name}: noise must be non-negative")
        im = self.imbalance
        if im is not None:
            if im.property not in self.properties:
                raise SynthSpecError(f"imbalance rule names unknown property {im.property!r}")
            if len(im.counts) != len(im.thresholds) + 1:
                raise SynthSpecError("imbalance rule needs one count per class")
            if list(im.thresholds) != sorted(im.thresholds):
                raise SynthSpecError("imbalance thresholds must be increasing")
            if any(c < 0 for c in im.counts) or sum(im.counts) != self.n_samples:
                raise SynthSpecError(f"imbalance counts must be non-negative and sum to "
                                     f"{self.n_samples}")

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "seed": self.seed, "grid": self.grid.to_dict(),
                "spectral_noise_sd": self.spectral_noise_sd,
                "bands": [asdict(b) for b in self.bands],
                "properties": {k: {**asdict(r), "weights": list(r.weights)}
                               for k, r in self.properties.items()},
                "imbalance": None if self.imbalance is None else {
                    "property": self.imbalance.property,
                    "thresholds": list(self.imbalance.thresholds),
                    "counts": list(self.imbalance.counts)}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        try:
            grid = WavelengthGrid(**d["grid"]) if "grid" in d else WavelengthGrid.canonical()
            bands = tuple(Band(**b) for b in d["bands"])
            props = {k: PropertyRule(v.get("intercept", 0.0), tuple(v["weights"]),
                                     v.get("noise_sd", 0.0), v.get("noise_rel", 0.0))
                     for k, v in d["properties"].items()}
            im = d.get("imbalance")
            if im is not None:
                im = ImbalanceRule(im["property"], tuple(im["thresholds"]), tuple(im["counts"]))
            return cls(int(d["n_samples"]), bands, props, grid, im, int(d.get("seed", 0)),
                       float(d.get("spectral_noise_sd", 0.0)))
        except (KeyError, TypeError) as e:
            raise SynthSpecError(f"malformed synth spec: {e}") from e

    @classmethod
    def load(cls, path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _draw(spec: SynthSpec, rng, m: int):
    """Latent draws for m candidate samples: depths, baselines, noise."""
    nb = len(spec.bands)
    lo = np.array([b.depth_min for b in spec.bands])
    hi = np.array([b.depth_max for b in spec.bands])
    depths = lo + (hi - lo) * rng.random((m, nb))
    base = np.column_stack([rng.uniform(*BASELINE_LEVEL, m), rng.uniform(*BASELINE_SLOPE, m)])
    noise = rng.standard_normal((m, len(spec.properties)))
    return depths, base, noise


def _property_values(spec: SynthSpec, depths, noise) -> dict:
    lo = np.array([b.depth_min for b in spec.bands])
    hi = np.array([b.depth_max for b in spec.bands])
    depth_var = (hi - lo) ** 2 / 12.0
    out = {}
    for j, (name, rule) in enumerate(spec.properties.items()):
        w = np.asarray(rule.weights, dtype=float)
        signal_sd = float(np.sqrt(np.sum(w ** 2 * depth_var)))
        sd = rule.noise_sd + rule.noise_rel * signal_sd
        out[name] = rule.intercept + depths @ w + sd * noise[:, j]
    return out


def absorption(grid: WavelengthGrid, bands) -> np.ndarray:
    """Unit-depth band shapes, bands x wavelengths."""
    wl = grid.wavelengths
    return np.array([np.exp(-0.5 * ((wl - b.center_nm) / b.width_nm) ** 2) for b in bands]
                    ).reshape(len(bands), grid.count)


def generate(spec: SynthSpec) -> SpectralDataset:
    """Draw the dataset; identical specs give bit-identical datasets.

    With an imbalance rule, candidates are drawn in order and each one is
    kept while its class still has room, until every class is full.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    if spec.imbalance is None:
        depths, base, noise = _draw(spec, rng, n)
    else:
        im = spec.imbalance
        need = np.array(im.counts)
        parts = []
        drawn = 0
        while need.any():
            if drawn >= MAX_POOL_FACTOR * n:
                raise SynthSpecError(
                    f"imbalance rule infeasible: classes {np.flatnonzero(need).tolist()} of "
                    f"{im.property} still short by {need[need > 0].tolist()} after "
                    f"{drawn} candidates")
            d, b, z = _draw(spec, rng, n)
            drawn += n
            cls = np.searchsorted(np.asarray(im.thresholds, float),
                                  _property_values(spec, d, z)[im.property], side="right")
            keep = np.zeros(n, dtype=bool)
            for i, c in enumerate(cls):
                if need[c] > 0:
                    need[c] -= 1
                    keep[i] = True
            parts.append((d[keep], b[keep], z[keep]))
        depths, base, noise = (np.vstack([p[i] for p in parts]) for i in range(3))

    t = np.linspace(0.0, 1.0, spec.grid.count)
    baseline = base[:, :1] + base[:, 1:2] * t
    spectra = baseline - depths @ absorption(spec.grid, spec.bands)
    if spec.spectral_noise_sd > 0:
        # a measurement noise floor keeps far band tails (~1e-13) from
        # surfacing as perfectly informative columns after standardization
        spectra = spectra + spec.spectral_noise_sd * rng.standard_normal(spectra.shape)
    spectra = np.clip(spectra, MIN_REFLECTANCE, 1.0)
    values = _property_values(spec, depths, noise)

    names = tuple(p for p in PROPERTIES if p in values) + tuple(
        p for p in values if p not in PROPERTIES)
    width = len(str(n - 1))
    samples = [SoilSample(f"S{i:0{width}d}", spectra[i],
                          {k: float(values[k][i]) for k in names}) for i in range(n)]
    return SpectralDataset(spec.grid, samples, names)
