import math

import numpy as np
import pytest

from sosamp import sos, walk
from sosamp.errors import NormalizationError

from conftest import random_params


def _decomposition(rng, n=1, shape=(1, 1, 1)):
    params = random_params(rng, shape, n, scale=0.5)
    h1 = rng.normal(scale=0.4, size=(n, n))
    return sos.decompose(params, h1 + h1.T)


def _identity_generator():
    """Single squared generator equal to the identity (w_B = sqrt 2, w_0 = 0)."""
    w = np.array([[[0.0], [math.sqrt(2.0)]]])
    return sos.SosDecomposition(1, (), (), w, np.ones((1, 1, 1)), -1.0, 0.5)


def _circular_cover(a, b, tol):
    d = np.abs(walk._wrap(np.subtract.outer(a, b)))
    return bool(np.all(d.min(axis=1) < tol) and np.all(d.min(axis=0) < tol))


def test_block_is_scaled_hsqrt(rng):
    dec = _decomposition(rng, 2, (1, 2, 1))
    be = walk.encode_rectangular(dec)
    assert be.unitarity_error() < 1e-11
    np.testing.assert_allclose(be.block(), sos.build_hsqrt(dec) / dec.lambda_sqrt, atol=1e-11)


def test_unitary_generator_encodes_itself():
    dec = _identity_generator()
    assert dec.lambdas.tolist() == pytest.approx([1.0])
    be = walk.encode_rectangular(dec)
    np.testing.assert_allclose(be.block(), np.eye(4), atol=1e-12)


def test_empty_decomposition_encoding():
    be = walk.encode_rectangular(sos.empty_decomposition(1))
    assert be.unitarity_error() < 1e-11 and np.max(np.abs(be.block())) == 0.0
    h, spec = walk.hermitian_dilation(sos.empty_decomposition(1))
    assert h.shape == (4, 4) and np.max(np.abs(h)) == 0.0


def test_normalization_violation():
    dec = sos.SosDecomposition(1, ((1.0, np.array([2.0])),), (), np.zeros((0, 1, 0)),
                               np.zeros((0, 0, 1)), 0.0, 1.0)
    with pytest.raises(NormalizationError):
        walk.encode_rectangular(dec)
    with pytest.raises(NormalizationError):
        walk.unitary_dilation(2 * np.eye(2))


def test_singular_values_are_root_energies(rng):
    dec = _decomposition(rng)
    be = walk.encode_rectangular(dec)
    sv = np.sort(np.linalg.svd(be.block(), compute_uv=False))
    np.testing.assert_allclose(sv, np.sqrt(walk.sa_energies(dec)) / dec.lambda_sqrt, atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_walk_once_phases(seed):
    dec = _decomposition(np.random.default_rng(seed))
    be = walk.encode_rectangular(dec)
    out = walk.walk_once(be)
    target = walk.single_walk_targets(walk.sa_energies(dec), dec.lambda_sqrt)
    assert walk.match_phases(out["W1"], target) < 1e-8
    assert walk.match_phases(out["W2"], target) < 1e-8
    np.testing.assert_allclose(np.sort(out["W1"]), np.sort(-out["W1"]), atol=1e-8)


def test_walk_once_endpoints():
    # generator = identity: every SA energy saturates lambda_sqrt^2, phase 0
    out = walk.walk_once(walk.encode_rectangular(_identity_generator()))
    np.testing.assert_allclose(out["W1"], 0.0, atol=1e-10)
    # a single annihilator leaves the vacuum frustration-free: phases +-pi/2
    dec = sos.SosDecomposition(1, ((1.0, np.array([1.0])),), (), np.zeros((0, 1, 0)),
                               np.zeros((0, 0, 1)), 0.0, 1.0)
    out = walk.walk_once(walk.encode_rectangular(dec))
    assert np.min(np.abs(out["W1"] - math.pi / 2)) < 1e-10 and np.min(np.abs(out["W1"] + math.pi / 2)) < 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_walk_twice_phases_and_block(seed):
    dec = _decomposition(np.random.default_rng(seed), 2, (1, 1, 1))
    be = walk.encode_rectangular(dec)
    out = walk.walk_twice(be)
    energies = walk.sa_energies(dec)
    assert walk.match_phases(out["phases"], walk.double_walk_targets(energies, dec.Lambda)) < 1e-8
    h_sa = sos.build_hsqrt(dec).conj().T @ sos.build_hsqrt(dec)
    np.testing.assert_allclose(out["block"], 2 * h_sa / dec.lambda_sqrt**2 - np.eye(16), atol=1e-10)
    assert out["invariance_residual"] < 1e-9 and out["min_overlap"] > 1 - 1e-8
    once = walk.walk_once(be)["W1"]
    assert _circular_cover(out["phases"], 2 * once, 1e-8)


def test_walk_twice_frustration_free_phase_pi():
    dec = sos.SosDecomposition(1, ((1.0, np.array([1.0])),), (), np.zeros((0, 1, 0)),
                               np.zeros((0, 0, 1)), 0.0, 1.0)
    phases = walk.walk_twice(walk.encode_rectangular(dec))["phases"]
    assert np.min(np.abs(np.abs(phases) - math.pi)) < 1e-10
    assert walk.double_walk_targets(np.array([1.0]), 1.0).tolist() == pytest.approx([-math.pi / 2, math.pi / 2])


@pytest.mark.parametrize("seed", range(3))
def test_hermitian_dilation_spectrum(seed):
    dec = _decomposition(np.random.default_rng(seed), 1, (1, 2, 1))
    h, spec = walk.hermitian_dilation(dec)
    energies = walk.sa_energies(dec)
    np.testing.assert_allclose(spec, walk.dilation_targets(energies, dec.n_generators), atol=1e-9)
    np.testing.assert_allclose(spec, -spec[::-1], atol=1e-12)
    hs = sos.build_hsqrt(dec)
    np.testing.assert_allclose((h @ h)[:4, :4], hs.conj().T @ hs, atol=1e-12)


def test_rectangular_uses_fewer_ancilla_dimensions(rng):
    dims = walk.ancilla_dimensions(_decomposition(rng, 2, (2, 2, 2)))
    assert dims["rectangular"] < dims["hermitian"]


def test_spectrum_csv(rng):
    dec = _decomposition(rng)
    phases = walk.walk_twice(walk.encode_rectangular(dec))["phases"]
    lines = walk.spectrum_csv(phases, walk.sa_energies(dec), dec.Lambda).splitlines()
    assert lines[0] == "phase,energy,residual" and len(lines) == phases.size + 1
    assert max(float(line.split(",")[2]) for line in lines[1:]) < 1e-8


def test_match_phases_count_mismatch():
    assert walk.match_phases(np.zeros(2), np.zeros(3)) == math.inf
    assert walk.match_phases(np.array([math.pi]), np.array([-math.pi])) < 1e-12
