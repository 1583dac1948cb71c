import io
import itertools
import warnings

import numpy as np
import pytest

from sosamp import tensors
from sosamp.errors import NormalizationError, OracleLimitError, ParseError

from conftest import kron_annihilators, kron_hamiltonian

HEADER = " &FCI NORB={n},NELEC={e},MS2=0,\n  ORBSYM=1,1,\n  ISYM=1,\n &END\n"


def test_parse_minimal_fcidump():
    text = HEADER.format(n=1, e=2) + "0.5 1 1 1 1\n-1.0 1 1 0 0\n0.7 0 0 0 0\n"
    p = tensors.parse_fcidump(text)
    assert p.n_orb == 1 and p.eta == 2
    assert p.h2[0, 0, 0, 0] == 0.5 and p.h1[0, 0] == -1.0 and p.e_core == 0.7


def test_parse_fills_all_permutations():
    p = tensors.parse_fcidump(io.StringIO(HEADER.format(n=2, e=2) + "0.3 2 1 1 1\n"))
    hits = {idx for idx in itertools.product(range(2), repeat=4) if p.h2[idx] != 0}
    assert hits == {(1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)}
    assert all(p.h2[i] == 0.3 for i in hits)


def test_parse_fortran_exponent():
    p = tensors.parse_fcidump(HEADER.format(n=1, e=0) + "1.5D-01 1 1 0 0\n")
    assert p.h1[0, 0] == 0.15


@pytest.mark.parametrize("body, err", [
    ("0.1 3 1 1 1\n", IndexError),
    ("abc 1 1 1 1\n", ParseError),
    ("0.1 1 1 1\n", ParseError),
])
def test_parse_errors(body, err):
    with pytest.raises(err):
        tensors.parse_fcidump(HEADER.format(n=2, e=2) + body)


def test_parse_bad_header():
    with pytest.raises(ParseError):
        tensors.parse_fcidump("NORB=2\n0.1 1 1 0 0\n")
    with pytest.raises(ParseError):
        tensors.parse_fcidump(" &FCI NELEC=2 &END\n")


def test_conflicting_records_warn_last_wins():
    with pytest.warns(UserWarning):
        p = tensors.parse_fcidump(HEADER.format(n=2, e=2) + "0.1 1 2 0 0\n0.2 2 1 0 0\n")
    assert p.h1[0, 1] == p.h1[1, 0] == 0.2


def test_fcidump_round_trip_is_bit_exact(rng):
    p = tensors.Problem.random(3, rng, eta=2).replace(e_core=np.pi)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        q = tensors.parse_fcidump(tensors.write_fcidump(p))
    assert np.array_equal(p.h1, q.h1) and np.array_equal(p.h2, q.h2)
    assert q.e_core == p.e_core and q.eta == p.eta


def test_json_and_binary_round_trip(rng):
    p = tensors.Problem.random(2, rng)
    for q in (tensors.Problem.from_json(p.to_json()), tensors.Problem.from_bytes(p.to_bytes())):
        assert np.array_equal(p.h1, q.h1) and np.array_equal(p.h2, q.h2) and q.eta == p.eta
    with pytest.raises(ParseError):
        tensors.Problem.from_bytes(b"XXXXXXXX" + p.to_bytes()[8:])
    with pytest.raises(ParseError):
        tensors.Problem.from_bytes(p.to_bytes()[:-8])


def test_problem_invariants():
    with pytest.raises(ValueError):
        tensors.Problem(1, [[1.0]], np.zeros((1,) * 4), 0.0, 3)
    with pytest.raises(ValueError):
        tensors.Problem(2, [[0, 1], [2, 0]], np.zeros((2,) * 4))
    h2 = np.zeros((2,) * 4)
    h2[1, 0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        tensors.Problem(2, np.zeros((2, 2)), h2)


def test_annihilators_match_kron_construction():
    ref = kron_annihilators(2)
    for s, p in itertools.product((0, 1), range(2)):
        np.testing.assert_array_equal(tensors.annihilator(p, s, 2).toarray(), ref[s * 2 + p])


def test_number_operator_spectrum():
    v = -0.7
    op = tensors.build_dense_hamiltonian(tensors.Problem(1, [[v]], np.zeros((1,) * 4)))
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(op.data)), sorted([0, v, v, 2 * v]))
    assert tensors.ground_energy(op) == pytest.approx(2 * v)
    assert tensors.ground_energy(op, eta=1) == pytest.approx(v)


def test_onsite_repulsion_explicit():
    u = 0.9
    h2 = np.full((1,) * 4, u)
    H = tensors.build_dense_hamiltonian(tensors.Problem(1, np.zeros((1, 1)), h2)).data
    a = kron_annihilators(1)
    n_tot = a[0].T @ a[0] + a[1].T @ a[1]
    np.testing.assert_allclose(H, 0.5 * u * n_tot @ n_tot, atol=1e-14)
    assert H[3, 3] == pytest.approx(2 * u)


def test_dense_hamiltonian_matches_kron_oracle(rng):
    p = tensors.Problem.random(2, rng).replace(e_core=0.3)
    H = tensors.build_dense_hamiltonian(p)
    np.testing.assert_allclose(H.data, kron_hamiltonian(p.h1, p.h2, 0.3), atol=1e-12)
    assert H.hermiticity_error() < 1e-12
    assert H.commutator_error(tensors.number_operator(2)) < 1e-10
    assert H.commutator_error(tensors.spin_z_operator(2)) < 1e-10


def test_ground_energy_matches_second_solver(rng):
    p = tensors.Problem.random(2, rng)
    H = tensors.build_dense_hamiltonian(p).data
    assert tensors.ground_energy(H) == pytest.approx(np.linalg.eigvals(H).real.min(), abs=1e-10)
    assert tensors.ground_energy(np.zeros((16, 16))) == 0.0


def test_dense_hamiltonian_is_linear(rng):
    p1, p2 = tensors.Problem.random(2, rng), tensors.Problem.random(2, rng)
    a, b = 0.7, -1.3
    lhs = tensors.hamiltonian_matrix(a * p1.h1 + b * p2.h1, a * p1.h2 + b * p2.h2)
    rhs = a * tensors.hamiltonian_matrix(p1.h1, p1.h2) + b * tensors.hamiltonian_matrix(p2.h1, p2.h2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_excitation_algebra():
    n = 2
    E = [[tensors.excitation(p, q, n).toarray() for q in range(n)] for p in range(n)]
    for p, q, r, s in itertools.product(range(n), repeat=4):
        assert np.array_equal(E[p][q].T, E[q][p])
        comm = E[p][q] @ E[r][s] - E[r][s] @ E[p][q]
        rhs = (q == r) * E[p][s] - (s == p) * E[r][q]
        np.testing.assert_allclose(comm, rhs, atol=1e-14)


def test_majoranas(rng):
    n = 2
    gam = [tensors.build_majorana(p, s, x, n).data for p in range(n) for s in (0, 1) for x in (0, 1)]
    for i, g in enumerate(gam):
        for j, h in enumerate(gam):
            np.testing.assert_allclose(g @ h + h @ g, 2.0 * (i == j) * np.eye(16), atol=1e-14)
    e1 = np.array([0.0, 1.0])
    np.testing.assert_array_equal(tensors.build_rotated_majorana(e1, 1, 0, n).data,
                                  tensors.build_majorana(1, 1, 0, n).data)
    u = rng.normal(size=n)
    u /= np.linalg.norm(u)
    g = tensors.build_rotated_majorana(u, 0, 1, n).data
    ref = sum(u[j] * tensors.build_majorana(j, 0, 1, n).data for j in range(n))
    np.testing.assert_allclose(g, ref, atol=1e-14)
    np.testing.assert_allclose(g @ g, np.eye(16), atol=1e-12)
    with pytest.raises(NormalizationError):
        tensors.build_rotated_majorana(np.array([1.0, 1.0]), 0, 0, n)


def test_oracle_limit(monkeypatch):
    assert tensors.oracle_limit() == 7
    with pytest.raises(OracleLimitError):
        tensors.build_dense_hamiltonian(tensors.Problem.zeros(8))
    monkeypatch.setenv(tensors.ORACLE_LIMIT_ENV, "1")
    with pytest.raises(OracleLimitError):
        tensors.build_dense_hamiltonian(tensors.Problem.zeros(2))
