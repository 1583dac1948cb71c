"""Spin-free sum-of-squares lower bound via a low-rank augmented Lagrangian.

Operator basis (spin-tied, ``m_b = 1 + 2N + 2N^2``):

* ``D`` block: ``a_p`` with ``sum_sigma a_p^dag a_q`` products,
* ``Q`` block: ``a_p^dag`` with ``sum_sigma a_p a_q^dag`` products,
* even block: ``I``, ``E_ij`` and hole rotations ``Ebar_ij = 2 delta_ij - E_ji``.

Products are expanded in the canonical normal-ordered operators ``I``,
``E_pq`` and ``e_pqrs = sum_{st} a^dag_ps a^dag_rt a_st a_qs`` (taken modulo
``e_pqrs = e_rspq``). The Gram matrix is block diagonal because the target
conserves particle number and parity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt

from sosamp import tensors
from sosamp.tensors import Problem

NORM_I, NORM_E, NORM_E2 = 1.0, 2.0, 4.0
MU_CAP = 1e8


def _orbit_index(n: int) -> tuple[np.ndarray, int]:
    """Map every ``(p,q,r,s)`` to the row of its ``(pq)<->(rs)`` orbit."""
    n2 = n * n
    idx = np.empty((n2, n2), dtype=np.int64)
    k = 0
    for a in range(n2):
        for b in range(a, n2):
            idx[a, b] = idx[b, a] = k
            k += 1
    return idx.reshape(n, n, n, n), k


@dataclass(frozen=True)
class ConstraintSystem:
    """Linear map from Gram blocks to canonical coefficients, plus targets.

    Rows: identity, ``E_pq`` (row-major), two-body orbits. ``A`` acts on the
    concatenation of ``vec(G_D)``, ``vec(G_Q)``, ``vec(G_even)`` where
    ``G_even`` is over the full even basis; ``T`` maps that basis onto
    ``(I, E_kl)``.
    """

    n_orb: int
    A: np.ndarray
    target: np.ndarray
    h0: float
    T: np.ndarray
    norms: np.ndarray
    labels: tuple

    @property
    def n_constraints(self) -> int:
        return self.A.shape[0]

    @property
    def basis_size(self) -> int:
        return 2 * self.n_orb + self.T.shape[0]

    @property
    def block_sizes(self) -> tuple[int, int, int]:
        return self.n_orb, self.n_orb, self.T.shape[0]

    def coefficients(self, g: np.ndarray) -> np.ndarray:
        return self.A @ g

    def e_sos(self, g: np.ndarray) -> float:
        """``E_SOS = h0 - c_I(G)``."""
        return self.h0 - float(self.A[0] @ g)

    def residual(self, g: np.ndarray) -> np.ndarray:
        """Mismatch on all non-identity rows."""
        return (self.A @ g - self.target)[1:]

    def slack(self, g: np.ndarray) -> float:
        """Rigorous ``sum |r_k| ||B_k||`` bound on the operator left over."""
        return float(np.abs(self.residual(g)) @ self.norms[1:])


def even_basis_map(n: int) -> np.ndarray:
    """``T`` with ``v = T f`` for ``v = (I, E_ij, Ebar_ij)``, ``f = (I, E_kl)``."""
    n2 = n * n
    T = np.zeros((1 + 2 * n2, 1 + n2))
    T[0, 0] = 1.0
    for i in range(n):
        for j in range(n):
            T[1 + i * n + j, 1 + i * n + j] = 1.0
            row = 1 + n2 + i * n + j
            if i == j:
                T[row, 0] = 2.0
            T[row, 1 + j * n + i] = -1.0
    return T


def target_coefficients(p: Problem) -> np.ndarray:
    """Canonical coefficients of ``e_core + sum h1 E + 1/2 sum h2 E E``."""
    n = p.n_orb
    orbit, n_orb2 = _orbit_index(n)
    c1 = p.h1 + 0.5 * np.einsum("pqqs->ps", p.h2)
    c2 = np.zeros(n_orb2)
    np.add.at(c2, orbit.ravel(), 0.5 * p.h2.ravel())
    return np.concatenate([[p.e_core], c1.ravel(), c2])


def assemble_constraints(p: Problem) -> ConstraintSystem:
    n = p.n_orb
    n2 = n * n
    orbit, n_two = _orbit_index(n)
    rows = 1 + n2 + n_two
    T = even_basis_map(n)
    m_even = T.shape[0]
    cols = 2 * n2 + m_even * m_even
    A = np.zeros((rows, cols))

    def c1_row(p_, q_):
        return 1 + p_ * n + q_

    # D: G_D[p,q] a^dag_p a_q
    for a in range(n):
        for b in range(n):
            A[c1_row(a, b), a * n + b] += 1.0
    # Q: G_Q[p,q] a_p a^dag_q = 2 delta_pq - E_qp
    off = n2
    for a in range(n):
        for b in range(n):
            col = off + a * n + b
            if a == b:
                A[0, col] += 2.0
            A[c1_row(b, a), col] -= 1.0
    # even block in the minimal basis f = (I, E_kl), then pulled back through T
    nf = 1 + n2
    Amin = np.zeros((rows, nf * nf))
    Amin[0, 0] = 1.0
    for k in range(n):
        for l in range(n):
            x = 1 + k * n + l
            Amin[c1_row(k, l), x] += 1.0            # I^dag E_kl
            Amin[c1_row(l, k), x * nf] += 1.0       # E_kl^dag I = E_lk
            for m in range(n):
                for nn in range(n):
                    y = 1 + m * n + nn
                    col = x * nf + y
                    # E_lk E_mn = e_lkmn + delta_km E_ln
                    Amin[1 + n2 + orbit[l, k, m, nn], col] += 1.0
                    if k == m:
                        Amin[c1_row(l, nn), col] += 1.0
    # vec(T^t G T) = (T (x) T)^t vec(G) for row-major vec
    A[:, 2 * n2:] = Amin @ np.kron(T, T).T
    norms = np.concatenate([[NORM_I], np.full(n2, NORM_E), np.full(n_two, NORM_E2)])
    labels = (("I",),) + tuple(("E", a, b) for a in range(n) for b in range(n)) + tuple(
        ("e",) + tuple(int(v) for v in np.argwhere(orbit == k)[0]) for k in range(n_two))
    return ConstraintSystem(n, A, target_coefficients(p), float(p.e_core), T, norms, labels)


@dataclass(frozen=True)
class GramFactor:
    """Low-rank factors of the three Gram blocks (``G_b = L_b L_b^t``)."""

    L_d: np.ndarray
    L_q: np.ndarray
    L_e: np.ndarray

    @property
    def rank(self) -> int:
        return self.L_d.shape[1]

    @property
    def basis_size(self) -> int:
        return self.L_d.shape[0] + self.L_q.shape[0] + self.L_e.shape[0]

    @property
    def L(self) -> np.ndarray:
        """Stacked ``m_b x k`` factor of the block-diagonal Gram matrix."""
        return np.vstack([self.L_d, self.L_q, self.L_e])

    def gram_vector(self) -> np.ndarray:
        return np.concatenate([(self.L_d @ self.L_d.T).ravel(), (self.L_q @ self.L_q.T).ravel(),
                               (self.L_e @ self.L_e.T).ravel()])

    @classmethod
    def from_flat(cls, x: np.ndarray, n: int, m_even: int, k: int) -> GramFactor:
        a = n * k
        return cls(x[:a].reshape(n, k), x[a:2 * a].reshape(n, k), x[2 * a:].reshape(m_even, k))


def default_rank(system: ConstraintSystem) -> int:
    return min(math.ceil(math.log2(system.n_constraints)) + 2, system.basis_size)


@dataclass(frozen=True)
class BoundResult:
    bound: float
    e_sos: float
    slack: float
    residual: float
    certified: bool
    factor: GramFactor
    rank: int
    iterations: int
    seed: int
    history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"bound": self.bound, "E_SOS_candidate": self.e_sos, "slack": self.slack,
                "residual": self.residual, "certified": self.certified, "rank": self.rank,
                "iterations": self.iterations, "seed": self.seed}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _objective(x, system: ConstraintSystem, shapes, y, mu):
    n, m_even, k = shapes
    gf = GramFactor.from_flat(x, n, m_even, k)
    g = gf.gram_vector()
    c = system.A @ g
    r = c[1:] - system.target[1:]
    f = c[0] + y @ r + 0.5 * mu * (r @ r)
    # d f / d g, then back through G = L L^t (G symmetric in every block)
    dg = system.A[0] + system.A[1:].T @ (y + mu * r)
    n2 = n * n
    Sd = dg[:n2].reshape(n, n)
    Sq = dg[n2:2 * n2].reshape(n, n)
    Se = dg[2 * n2:].reshape(m_even, m_even)
    grad = np.concatenate([((Sd + Sd.T) @ gf.L_d).ravel(), ((Sq + Sq.T) @ gf.L_q).ravel(),
                           ((Se + Se.T) @ gf.L_e).ravel()])
    return f, grad


def solve_lower_bound(p: Problem, rank_k: int | None = None, iters: int = 60,
                      mu0: float = 10.0, mu_growth: float = 2.0, seed: int = 0,
                      tol: float = 1e-8, inner_iters: int = 2000,
                      system: ConstraintSystem | None = None) -> BoundResult:
    """Certified SOS lower bound ``E_SOS(G) - slack``.

    Outer loop: multiplier updates with the penalty doubled each round up to
    ``1e8``; a residual-triggered schedule stalls because the optimum sits on
    the boundary of the cone. Inner loop: L-BFGS on the factor. The result is flagged
    certified when the residual 2-norm falls below ``tol``; the returned
    bound subtracts the rigorous slack either way.
    """
    system = system or assemble_constraints(p)
    k = default_rank(system) if rank_k is None else int(rank_k)
    if k < 1:
        raise ValueError("rank_k must be >= 1")
    n = p.n_orb
    m_even = system.T.shape[0]
    shapes = (n, m_even, k)
    rng = np.random.Generator(np.random.Philox(seed))
    x = 0.1 * rng.standard_normal((2 * n + m_even) * k)
    y = np.zeros(system.n_constraints - 1)
    mu = mu0
    best = None
    history = []
    it = 0
    for it in range(1, iters + 1):
        res = sopt.minimize(_objective, x, args=(system, shapes, y, mu), jac=True,
                            method="L-BFGS-B", options={"maxiter": inner_iters, "gtol": 1e-12,
                                                        "ftol": 1e-15})
        x = res.x
        g = GramFactor.from_flat(x, n, m_even, k).gram_vector()
        r = system.residual(g)
        rn = float(np.linalg.norm(r))
        bound = system.e_sos(g) - system.slack(g)
        history.append({"iter": it, "mu": mu, "residual": rn, "bound": bound})
        if best is None or bound > best[0]:
            best = (bound, x.copy(), rn)
        y = y + mu * r
        mu = min(mu * mu_growth, MU_CAP)
        if rn < tol * 1e-2:
            break
    bound, x, rn = best
    gf = GramFactor.from_flat(x, n, m_even, k)
    g = gf.gram_vector()
    return BoundResult(bound=float(bound), e_sos=system.e_sos(g), slack=system.slack(g),
                       residual=rn, certified=rn <= tol, factor=gf, rank=k, iterations=it,
                       seed=seed, history=history)


@dataclass(frozen=True)
class Generator:
    """``O = sum_x coeffs[x] B_x`` in one Gram block.

    ``kind`` is "a" (annihilators of spin ``spin``), "adag" (creators) or
    "even" (spin-summed ``I, E, Ebar``).
    """

    kind: str
    coeffs: np.ndarray
    spin: int | None = None

    def dense(self, n_orb: int) -> np.ndarray:
        tensors.check_oracle_limit(n_orb)
        dim = 4**n_orb
        out = np.zeros((dim, dim))
        if self.kind in ("a", "adag"):
            for q, c in enumerate(self.coeffs):
                if c != 0.0:
                    a = tensors.annihilator(q, self.spin, n_orb).toarray()
                    out += c * (a if self.kind == "a" else a.T)
            return out
        for x, c in enumerate(self.coeffs):
            if c != 0.0:
                out += c * even_operator(x, n_orb)
        return out


def even_operator(x: int, n_orb: int) -> np.ndarray:
    """Dense ``x``-th element of ``(I, E_ij, Ebar_ij)``."""
    n2 = n_orb * n_orb
    dim = 4**n_orb
    if x == 0:
        return np.eye(dim)
    if x <= n2:
        i, j = divmod(x - 1, n_orb)
        return tensors.excitation(i, j, n_orb).toarray()
    i, j = divmod(x - 1 - n2, n_orb)
    return 2.0 * (i == j) * np.eye(dim) - tensors.excitation(j, i, n_orb).toarray()


def extract_generators(gf: GramFactor, tol: float = 0.0) -> list[Generator]:
    """One generator per nonzero column and spin (two spins for D and Q blocks).

    A column counts as zero when its largest coefficient is at most ``tol``;
    even columns are judged after mapping to the independent ``(I, E)`` basis.
    """
    out = []
    for col in gf.L_d.T:
        if np.max(np.abs(col), initial=0.0) > tol:
            out.extend(Generator("a", col.copy(), s) for s in (0, 1))
    for col in gf.L_q.T:
        if np.max(np.abs(col), initial=0.0) > tol:
            out.extend(Generator("adag", col.copy(), s) for s in (0, 1))
    # even columns in the null space of the (I, E, Ebar) redundancy are the zero operator
    T = even_basis_map(gf.L_d.shape[0])
    for col in gf.L_e.T:
        if np.max(np.abs(T.T @ col), initial=0.0) > tol:
            out.append(Generator("even", col.copy()))
    return out


def gram_from_generators(gens: list[Generator], n_orb: int, m_even: int) -> GramFactor:
    """Inverse of :func:`extract_generators` (spin copies collapse to one column)."""
    d = [g.coeffs for g in gens if g.kind == "a" and g.spin == 0]
    q = [g.coeffs for g in gens if g.kind == "adag" and g.spin == 0]
    e = [g.coeffs for g in gens if g.kind == "even"]
    k = max(len(d), len(q), len(e), 1)

    def pad(cols, rows):
        m = np.zeros((rows, k))
        for j, c in enumerate(cols):
            m[:, j] = c
        return m

    return GramFactor(pad(d, n_orb), pad(q, n_orb), pad(e, m_even))


def gram_from_sos(dec) -> GramFactor:
    """Gram factors of a DFTHC sum-of-squares decomposition.

    One-body generators land in the D and Q blocks; each squared generator
    ``(W I + L^rc . E)/sqrt(2)`` becomes one column of the even block.
    """
    n = dec.n_orb
    d = [math.sqrt(w) * np.asarray(u) for w, u in dec.d1]
    q = [math.sqrt(w) * np.asarray(u) for w, u in dec.q1]
    R, B1, C = dec.sf_w.shape
    e = []
    for r in range(R):
        for c in range(C):
            w = dec.sf_w[r, :, c]
            L = np.einsum("b,bp,bq->pq", w[:-1], dec.sf_u[r], dec.sf_u[r])
            W = w[-1] - w[:-1].sum()
            e.append(np.concatenate([[W], L.ravel(), np.zeros(n * n)]) / math.sqrt(2.0))
    gens = ([Generator("a", v, 0) for v in d] + [Generator("adag", v, 0) for v in q]
            + [Generator("even", v) for v in e])
    return gram_from_generators(gens, n, 1 + 2 * n * n)


def sos_operator(gens: list[Generator], n_orb: int) -> np.ndarray:
    """Dense ``sum O^dag O``."""
    dim = 4**n_orb
    out = np.zeros((dim, dim))
    for g in gens:
        o = g.dense(n_orb)
        out += o.conj().T @ o
    return out


def quadratic_form(gf: GramFactor, n_orb: int) -> np.ndarray:
    """Dense ``(o^dag)^t G o`` built directly from basis products."""
    dim = 4**n_orb
    out = np.zeros((dim, dim))
    Gd = gf.L_d @ gf.L_d.T
    Gq = gf.L_q @ gf.L_q.T
    Ge = gf.L_e @ gf.L_e.T
    for s in (0, 1):
        a = [tensors.annihilator(p, s, n_orb).toarray() for p in range(n_orb)]
        for i in range(n_orb):
            for j in range(n_orb):
                out += Gd[i, j] * a[i].T @ a[j] + Gq[i, j] * a[i] @ a[j].T
    ev = [even_operator(x, n_orb) for x in range(Ge.shape[0])]
    for x in range(Ge.shape[0]):
        for y in range(Ge.shape[0]):
            if Ge[x, y] != 0.0:
                out += Ge[x, y] * ev[x].T @ ev[y]
    return out


def canonical_operator(system: ConstraintSystem, coeffs: np.ndarray) -> np.ndarray:
    """Dense operator with canonical coefficients ``coeffs`` (one member per orbit)."""
    n = system.n_orb
    dim = 4**n
    out = coeffs[0] * np.eye(dim)
    n2 = n * n
    E = [[tensors.excitation(p_, q_, n).toarray() for q_ in range(n)] for p_ in range(n)]
    for a in range(n):
        for b in range(n):
            out += coeffs[1 + a * n + b] * E[a][b]
    for k, lab in enumerate(system.labels[1 + n2:]):
        _, p_, q_, r_, s_ = lab
        # e_pqrs = E_pq E_rs - delta_qr E_ps
        op = E[p_][q_] @ E[r_][s_] - (q_ == r_) * E[p_][s_]
        out += coeffs[1 + n2 + k] * op
    return out
