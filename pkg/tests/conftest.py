import itertools

import numpy as np
import pytest

from sosamp import dfthc, tensors


def kron_annihilators(n_orb: int) -> list[np.ndarray]:
    """Independent Jordan-Wigner build: mode m = sigma*N + p is bit m of the index."""
    modes = 2 * n_orb
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    out = []
    for m in range(modes):
        mat = np.ones((1, 1))
        for k in reversed(range(modes)):
            factor = eye if k > m else (lower if k == m else z)
            mat = np.kron(mat, factor)
        out.append(mat)
    return out


def kron_hamiltonian(h1, h2, const=0.0) -> np.ndarray:
    n = h1.shape[0]
    a = kron_annihilators(n)
    E = [[sum(a[s * n + p].T @ a[s * n + q] for s in (0, 1)) for q in range(n)] for p in range(n)]
    out = const * np.eye(4**n)
    for p, q in itertools.product(range(n), repeat=2):
        out = out + h1[p, q] * E[p][q]
    for p, q, r, s in itertools.product(range(n), repeat=4):
        if h2[p, q, r, s] != 0.0:
            out = out + 0.5 * h2[p, q, r, s] * E[p][q] @ E[r][s]
    return out


def naive_contract(params: dfthc.DfthcParams) -> np.ndarray:
    n = params.n_orb
    out = np.zeros((n,) * 4)
    for r in range(params.R):
        for c in range(params.C):
            for p, q, m, nn in itertools.product(range(n), repeat=4):
                left = sum(params.w[r, b, c] * params.u[r, b, p] * params.u[r, b, q] for b in range(params.B))
                right = sum(params.w[r, b, c] * params.u[r, b, m] * params.u[r, b, nn] for b in range(params.B))
                out[p, q, m, nn] += left * right
    return out


def random_params(rng, shape, n, scale=0.3, shift=False) -> dfthc.DfthcParams:
    return dfthc.DfthcParams.random(shape, n, rng, w_scale=scale, h_sym_scale=0.1,
                                    beta1_scale=0.1, shift=shift)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def planted_small(rng):
    params = random_params(rng, (1, 2, 1), 2)
    h1 = rng.normal(scale=0.2, size=(2, 2))
    return params, dfthc.planted_problem(params, h1=h1 + h1.T, eta=2)


def problem_from(h1, h2, eta=None):
    n = h1.shape[0]
    return tensors.Problem(n, (h1 + h1.T) / 2, tensors.symmetrize_h2(h2), 0.0, n if eta is None else eta)
