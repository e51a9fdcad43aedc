import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import direct_dft_magnitude, stencil_d1, stencil_d2
from soilnir.dataset import SoilSample, SpectralDataset, WavelengthGrid
from soilnir.preprocess import (
    TRAIN,
    Block,
    FeatureId,
    assemble_features,
    derivative1,
    derivative2,
    feature_ids,
    fft_magnitude,
    parse_blocks,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def _ds(spectra, grid=None):
    spectra = np.asarray(spectra, dtype=float)
    grid = grid or WavelengthGrid(400.0, 8.5, spectra.shape[1])
    return SpectralDataset(grid, [SoilSample(f"s{i}", r, {}) for i, r in enumerate(spectra)], ())


# derivatives

def test_d1_examples():
    assert derivative1([5, 5, 5, 5]).tolist() == [0, 0, 0, 0]
    step = 8.5
    np.testing.assert_allclose(derivative1(2 * np.arange(6) * step, step), 2.0)
    assert derivative1([0, 1, 4, 9], 1.0).tolist() == [1, 2, 4, 5]


def test_d2_examples():
    np.testing.assert_allclose(derivative2(3.0 * np.arange(7) + 1), 0.0, atol=1e-12)
    np.testing.assert_allclose(derivative2(np.arange(8.0) ** 2), 2.0)
    # interior stencil values are 2, -2, 2; ends copy their neighbour
    assert derivative2([1, 0, 1, 0, 1], 1.0).tolist() == [2, 2, -2, 2, 2]
    assert derivative2([1, 0, 1, 0, 1], 1.0).tolist() == stencil_d2([1, 0, 1, 0, 1], 1.0)


@pytest.mark.parametrize("op", [derivative1, derivative2])
def test_derivatives_need_three_points(op):
    with pytest.raises(ValueError):
        op([1.0, 2.0])


@settings(max_examples=60, deadline=None)
@given(f=arrays(float, st.integers(3, 40), elements=finite), h=st.floats(0.1, 20))
def test_derivatives_match_stencil_oracle(f, h):
    np.testing.assert_allclose(derivative1(f, h), stencil_d1(list(f), h), rtol=1e-12, atol=1e-9)
    np.testing.assert_allclose(derivative2(f, h), stencil_d2(list(f), h), rtol=1e-12, atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(3, 30), a=finite, b=finite, seed=st.integers(0, 1000))
def test_derivatives_are_linear(n, a, b, seed):
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=n), rng.normal(size=n)
    for op in (derivative1, derivative2):
        lhs = op(a * f + b * g, 8.5)
        rhs = a * op(f, 8.5) + b * op(g, 8.5)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (abs(a) + abs(b) + 1))


# FFT

def test_fft_examples():
    np.testing.assert_allclose(fft_magnitude([2.5] * 4), [10, 0, 0, 0], atol=1e-12)
    impulse = np.zeros(8)
    impulse[0] = 1
    np.testing.assert_allclose(fft_magnitude(impulse), 1.0)
    n = 16
    mag = fft_magnitude(np.cos(2 * np.pi * 3 * np.arange(n) / n))
    expect = direct_dft_magnitude(np.cos(2 * np.pi * 3 * np.arange(n) / n))
    np.testing.assert_allclose(mag, expect, atol=1e-9)
    assert mag[3] == pytest.approx(8) and mag[13] == pytest.approx(8)
    assert np.delete(mag, [3, 13]).max() < 1e-9


@pytest.mark.parametrize("n", [1, 2, 5, 16, 31, 64, 247])
def test_fft_matches_direct_dft(n):
    f = np.random.default_rng(n).random(n)
    np.testing.assert_allclose(fft_magnitude(f), direct_dft_magnitude(f), atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(f=arrays(float, st.integers(1, 300), elements=finite))
def test_parseval(f):
    lhs = np.sum(fft_magnitude(f) ** 2)
    rhs = len(f) * np.sum(f ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_fft_rejects_non_finite():
    with pytest.raises(ValueError):
        fft_magnitude([1.0, np.inf, 2.0])


# feature matrix

def test_standardize_hand_column():
    with pytest.warns(UserWarning):
        fm = assemble_features(_ds([[1, 0, 0], [2, 0, 1], [3, 0, 5]]), ("raw",))
    np.testing.assert_allclose(fm.values[:, 0], [-1.224744871391589, 0, 1.224744871391589],
                               atol=1e-12)
    assert fm.standardization.std[0] == pytest.approx(0.816496580927726)


def test_988_columns_and_order():
    rng = np.random.default_rng(0)
    fm = assemble_features(_ds(rng.random((653, 247)), WavelengthGrid.canonical()))
    assert fm.shape == (653, 988)
    assert FeatureId.from_dict(fm.columns[300].to_dict()) == fm.columns[300]
    assert [c.block for c in fm.columns[::247]] == [Block.RAW, Block.D1, Block.D2, Block.FFT]
    names = [c.name for c in fm.columns]
    assert names[0] == "raw_400.0" and names[248] == "d1_408.5" and names[-235] == "fft_bin_12"
    np.testing.assert_allclose(fm.values.mean(axis=0), 0, atol=1e-9)
    np.testing.assert_allclose(fm.values.var(axis=0), 1, atol=1e-9)


def test_blocks_subset_and_parse():
    rng = np.random.default_rng(0)
    assert assemble_features(_ds(rng.random((5, 247)), WavelengthGrid.canonical()),
                             "raw").shape == (5, 247)
    assert parse_blocks("fft, d1") == (Block.D1, Block.FFT)
    with pytest.raises(ValueError):
        parse_blocks("d3")


def test_standardization_idempotent():
    rng = np.random.default_rng(2)
    z = rng.normal(size=(40, 6))
    z = (z - z.mean(0)) / z.std(0)
    fm = assemble_features(_ds(z), ("raw",))
    np.testing.assert_allclose(fm.values, z, atol=1e-9)


def test_constant_column_zeroed_with_warning():
    with pytest.warns(UserWarning, match="zero-variance"):
        fm = assemble_features(_ds([[1, 7, 2], [2, 7, 4], [3, 7, 9]]), ("raw",))
    assert np.all(fm.values[:, 1] == 0)


def test_train_mode_applies_reference_stats():
    rng = np.random.default_rng(3)
    tr, te = _ds(rng.random((20, 5))), _ds(rng.random((8, 5)) + 1)
    ftr = assemble_features(tr, ("raw",), TRAIN)
    fte = assemble_features(te, ("raw",), TRAIN, ftr.standardization)
    expect = (te.spectra - tr.spectra.mean(0)) / tr.spectra.std(0)
    np.testing.assert_allclose(fte.values, expect, atol=1e-12)
    with pytest.raises(ValueError):
        assemble_features(te, ("raw", "d1"), TRAIN, ftr.standardization)


def test_feature_id_round_trip():
    for c in feature_ids(WavelengthGrid.canonical()):
        back = FeatureId.parse(c.name, WavelengthGrid.canonical())
        assert back == c
