import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from soilnir.synthgen import Band, PropertyRule, SynthSpec, generate  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synth():
    """120 samples, a pH-like property driven by one band, a noise property."""
    spec = SynthSpec(120, (Band(600, 15, 0, 0.2), Band(1450, 15, 0, 0.2)),
                     {"pH": PropertyRule(5.0, (10.0, 0.0), 0.0, 0.02),
                      "OM": PropertyRule(2.0, (0.0, 0.0), 1.0, 0.0)},
                     seed=3, spectral_noise_sd=1e-4)
    return generate(spec)


def blobs(rng, centers, per_class, spread=0.3):
    X = np.vstack([rng.normal(c, spread, size=(per_class, len(c))) for c in centers])
    y = np.repeat(np.arange(len(centers)), per_class)
    return X, y
