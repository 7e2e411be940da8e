import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from genlip.linalg import jacobi_eigvalsh, min_max_eig_sym, spectral_norm


def power_iteration(S, iters=5000):
    v = np.ones(len(S)) / np.sqrt(len(S))
    for _ in range(iters):
        w = S @ v
        v = w / np.linalg.norm(w)
    return float(v @ S @ v)


def test_diag_and_minus_identity():
    assert min_max_eig_sym(np.diag([1.0, 2.0, 3.0])) == (1.0, 3.0)
    assert min_max_eig_sym(-np.eye(8)) == (-1.0, -1.0)


def test_extremes_against_power_iteration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        B = rng.normal(size=(8, 8))
        S = B + B.T
        lo, hi = min_max_eig_sym(S)
        # shift so the wanted end dominates, then power-iterate
        shift = np.abs(S).sum()
        assert hi == pytest.approx(power_iteration(S + shift * np.eye(8)) - shift, abs=1e-9)
        assert lo == pytest.approx(-(power_iteration(-S + shift * np.eye(8)) - shift), abs=1e-9)


def test_asymmetric_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        min_max_eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        min_max_eig_sym(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_batched_jacobi_matches_numpy():
    rng = np.random.default_rng(1)
    B = rng.normal(size=(50, 6, 6))
    S = B + np.swapaxes(B, 1, 2)
    assert np.allclose(jacobi_eigvalsh(S), np.linalg.eigvalsh(S), atol=1e-12)


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(4)) == pytest.approx(1.0)
    assert spectral_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0)


def test_spectral_norm_power_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        M = rng.normal(size=(2, 4))
        assert spectral_norm(M) == pytest.approx(np.sqrt(power_iteration(M @ M.T)), abs=1e-9)


def test_spectral_norm_batch():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(30, 4, 4))
    assert np.allclose(spectral_norm(M), np.linalg.norm(M, 2, axis=(1, 2)), rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-1e3, 1e3)))
def test_spectral_norm_bounds(M):
    s = spectral_norm(M)
    fro = np.linalg.norm(M)
    assert s <= fro * (1 + 1e-12) + 1e-300
    assert s >= fro / 2 * (1 - 1e-12)
