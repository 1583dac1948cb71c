"""Explicit sum-of-squares generators of the DFTHC Hamiltonian.

For a corrected one-body matrix ``h1'`` and DFTHC parameters the Hamiltonian

    H_DFTHC = sum h1'_pq E_pq + 1/2 sum_rc (W_rc + sum_b w_b n_{u_b})^2 - 1/2 sum_rc W_rc^2

equals ``sum_a O_a^dag O_a + E_SOS`` with generators ordered as D1 (spin up
then down, ascending eigen-index), Q1 (same order) and SF in (r, c) order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from sosamp import tensors
from sosamp.dfthc import (
    DfthcParams,
    effective_h1,
    identity_offset,
    lambda_sos,
    shifted_tensors,
)

JACOBI_TOL = 1e-13


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigensolver for a small real symmetric matrix.

    Returns ascending eigenvalues and orthonormal eigenvectors as columns.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ rot
                a[idx, :] = rot.T @ a[idx, :]
                v[:, idx] = v[:, idx] @ rot
    evals = np.diag(a).copy()
    order = np.argsort(evals, kind="stable")
    return evals[order], v[:, order]


def one_body_sos(h1_eff: np.ndarray) -> tuple[list[tuple[float, np.ndarray]], list[tuple[float, np.ndarray]], float]:
    """Split ``sum h1' E`` into annihilator and creator squares.

    Non-negative eigenvalues give ``(w+, u)`` pairs for ``sqrt(w+) a_u``;
    negative ones give ``(w-, u)`` for ``sqrt(w-) a_u^dag``. The returned shift
    is ``-2 sum w-`` (both spins).
    """
    h1_eff = np.asarray(h1_eff, dtype=float)
    evals, evecs = jacobi_eigh((h1_eff + h1_eff.T) / 2)
    d1, q1 = [], []
    for lam, vec in zip(evals, evecs.T):
        if lam >= 0:
            d1.append((float(lam), vec.copy()))
        else:
            q1.append((float(-lam), vec.copy()))
    shift = -2.0 * sum(w for w, _ in q1)
    return d1, q1, shift


def e_sos(params: DfthcParams, one_body_shift: float) -> float:
    """``E_SOS = -2 sum w- - 1/2 sum_rc W_rc^2``."""
    return float(one_body_shift) - 0.5 * float(np.sum(identity_offset(params) ** 2))


@dataclass(frozen=True)
class SosDecomposition:
    n_orb: int
    d1: tuple[tuple[float, np.ndarray], ...]
    q1: tuple[tuple[float, np.ndarray], ...]
    sf_w: np.ndarray
    sf_u: np.ndarray
    e_sos: float
    Lambda: float
    e_gap: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_generators(self) -> int:
        return 2 * len(self.d1) + 2 * len(self.q1) + self.sf_w.shape[0] * self.sf_w.shape[2]

    @property
    def labels(self) -> list[tuple]:
        out = [("D1", s, j) for s in (0, 1) for j in range(len(self.d1))]
        out += [("Q1", s, j) for s in (0, 1) for j in range(len(self.q1))]
        R, _, C = self.sf_w.shape
        out += [("SF", r, c) for r in range(R) for c in range(C)]
        return out

    @property
    def lambdas(self) -> np.ndarray:
        """Per-generator normalizations in canonical order."""
        lam = [math.sqrt(w) for _ in (0, 1) for w, _ in self.d1]
        lam += [math.sqrt(w) for _ in (0, 1) for w, _ in self.q1]
        s = np.abs(self.sf_w).sum(axis=1) / math.sqrt(2.0)
        lam += s.ravel().tolist()
        return np.array(lam, dtype=float)

    @property
    def lambda_sqrt(self) -> float:
        return float(math.sqrt(np.sum(self.lambdas**2)))

    @property
    def delta_gap(self) -> float | None:
        if self.e_gap is None:
            return None
        return self.e_gap / (2.0 * self.Lambda) if self.Lambda > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "format": "sosamp.sos",
            "version": 1,
            "n_orb": self.n_orb,
            "d1": [{"weight": w, "u": u.tolist()} for w, u in self.d1],
            "q1": [{"weight": w, "u": u.tolist()} for w, u in self.q1],
            "sf": {"shape": list(self.sf_w.shape), "w": self.sf_w.ravel().tolist(),
                   "u": self.sf_u.ravel().tolist()},
            "lambdas": self.lambdas.tolist(),
            "labels": [list(x) for x in self.labels],
            "E_SOS": self.e_sos,
            "Lambda": self.Lambda,
            "E_gap": self.e_gap,
            "delta_gap": self.delta_gap,
            "metadata": {"identity_generator": "absorbed into w_B; none emitted", **self.metadata},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def decompose(params: DfthcParams, h1_eff: np.ndarray, e_gs: float | None = None) -> SosDecomposition:
    """SOS generators for ``params`` and a given ``h1'``.

    When ``e_gs`` (ground energy of the represented operator) is supplied the
    gap is recorded as ``e_gs - E_SOS``.
    """
    d1, q1, shift = one_body_sos(h1_eff)
    es = e_sos(params, shift)
    return SosDecomposition(
        n_orb=params.n_orb,
        d1=tuple(d1),
        q1=tuple(q1),
        sf_w=params.w.copy(),
        sf_u=params.u.copy(),
        e_sos=es,
        Lambda=lambda_sos(params, h1_eff),
        e_gap=None if e_gs is None else float(e_gs) - es,
    )


def empty_decomposition(n_orb: int) -> SosDecomposition:
    return SosDecomposition(n_orb, (), (), np.zeros((0, 1, 0)), np.zeros((0, 0, n_orb)), 0.0, 0.0)


def generator_matrices(dec: SosDecomposition) -> list[np.ndarray]:
    """Dense ``O_a`` in canonical order."""
    n = dec.n_orb
    tensors.check_oracle_limit(n)
    dim = 4**n
    out = []
    for s in (0, 1):
        for w, u in dec.d1:
            out.append(math.sqrt(w) * tensors.rotated_annihilator(u, s, n))
    for s in (0, 1):
        for w, u in dec.q1:
            out.append(math.sqrt(w) * tensors.rotated_annihilator(u, s, n).T)
    R, B1, C = dec.sf_w.shape
    B = B1 - 1
    eye = np.eye(dim)
    for r in range(R):
        # (i/2) sum_sigma gamma_{u sigma 0} gamma_{u sigma 1} for each basis vector
        pair_terms = []
        for b in range(B):
            acc = np.zeros((dim, dim), dtype=complex)
            for s in (0, 1):
                g0 = tensors.build_rotated_majorana(dec.sf_u[r, b], s, 0, n).data
                g1 = tensors.build_rotated_majorana(dec.sf_u[r, b], s, 1, n).data
                acc += 0.5j * (g0 @ g1)
            pair_terms.append(acc)
        for c in range(C):
            op = dec.sf_w[r, B, c] * eye.astype(complex)
            for b in range(B):
                op = op + dec.sf_w[r, b, c] * pair_terms[b]
            out.append(op / math.sqrt(2.0))
    return out


def build_hsqrt(dec: SosDecomposition, n_orb: int | None = None) -> np.ndarray:
    """Stacked generators ``sum_a |a> (x) O_a`` as an ``(L 4^N) x 4^N`` matrix."""
    n = dec.n_orb if n_orb is None else n_orb
    if n != dec.n_orb:
        raise ValueError("orbital count does not match the decomposition")
    tensors.check_oracle_limit(n)
    mats = generator_matrices(dec)
    if not mats:
        return np.zeros((0, 4**n))
    return np.vstack(mats)


def dfthc_hamiltonian(params: DfthcParams, h1_eff: np.ndarray) -> np.ndarray:
    """Dense ``H_DFTHC`` assembled from excitation operators (no generators involved)."""
    n = params.n_orb
    tensors.check_oracle_limit(n)
    dim = 4**n
    E = [[tensors.excitation(p, q, n) for q in range(n)] for p in range(n)]
    out = tensors.one_body_matrix(np.asarray(h1_eff), n).toarray()
    W = identity_offset(params)
    eye = np.eye(dim)
    for r in range(params.R):
        nb = []
        for b in range(params.B):
            u = params.u[r, b]
            nb.append(sum(u[p] * u[q] * E[p][q] for p in range(n) for q in range(n)).toarray())
        for c in range(params.C):
            x = W[r, c] * eye + sum(params.w[r, b, c] * nb[b] for b in range(params.B))
            out += 0.5 * (x @ x) - 0.5 * W[r, c] ** 2 * eye
    return out


def verify_sos_identity(params: DfthcParams, p: tensors.Problem, use_shift: bool = True) -> dict:
    """Max-norm residuals of the SOS identity and of the factorization itself.

    ``sos_residual`` compares ``H_DFTHC`` with ``sum O^dag O + E_SOS``.
    ``hamiltonian_residual`` compares the (shifted) target operator without
    constants with ``H_DFTHC``; it vanishes when ``h2`` is reproduced exactly.
    Both use ``h1'`` with the factorized trace term.
    """
    tensors.check_oracle_limit(p.n_orb)
    h1p = effective_h1(params, p, use_shift=use_shift, replace_trace=False)
    dec = decompose(params, h1p)
    h_dfthc = dfthc_hamiltonian(params, h1p)
    hs = build_hsqrt(dec)
    sos = hs.conj().T @ hs + dec.e_sos * np.eye(4**p.n_orb)
    h2_s, h1_s, _ = shifted_tensors(params, p, use_shift)
    target = tensors.hamiltonian_matrix(h1_s, h2_s)
    return {
        "sos_residual": float(np.max(np.abs(h_dfthc - sos))),
        "hamiltonian_residual": float(np.max(np.abs(target - h_dfthc))),
        "E_SOS": dec.e_sos,
        "Lambda": dec.Lambda,
    }
