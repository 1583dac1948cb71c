"""Matrix-level block-encodings of ``H_sqrt`` and the quantum walks built from them.

Register layout of the rectangular encoding, most significant first:
generator index ``alpha`` (L values), one block-encoding qubit ``B``, system.
``U = SEL (PREP (x) I)`` where ``SEL`` applies a unitary dilation of
``O_alpha / lambda_alpha`` controlled on ``alpha`` and ``PREP`` is a real
Householder reflection whose first column is ``lambda_alpha / lambda_sqrt``.
"""

from __future__ import annotations

import io
import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from sosamp import tensors
from sosamp.errors import NormalizationError
from sosamp.sos import SosDecomposition, build_hsqrt, generator_matrices

UNITARY_TOL = 1e-11
NORM_TOL = 1e-10
SV_TOL = 1e-9


@dataclass(frozen=True)
class BlockEncoding:
    """Unitary ``U`` whose ``(rows, cols)`` block is ``A / lam``."""

    U: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    lam: float
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    def block(self) -> np.ndarray:
        return self.U[np.ix_(self.rows, self.cols)]

    def unitarity_error(self) -> float:
        return float(np.max(np.abs(self.U.conj().T @ self.U - np.eye(self.dim))))

    def reflection(self, which: str) -> np.ndarray:
        """Diagonal ``2 Pi - I`` for ``which`` in {"rows", "cols"}."""
        idx = self.rows if which == "rows" else self.cols
        d = -np.ones(self.dim)
        d[idx] = 1.0
        return d


def householder_completion(v: np.ndarray) -> np.ndarray:
    """Real orthogonal matrix with first column ``v`` (unit norm)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    e0 = np.zeros(n)
    e0[0] = 1.0
    x = e0 - v
    nx = np.linalg.norm(x)
    if nx < 1e-15:
        return np.eye(n)
    x /= nx
    return np.eye(n) - 2.0 * np.outer(x, x)


def unitary_dilation(a: np.ndarray) -> np.ndarray:
    """``[[A, sqrt(I - A A^dag)], [sqrt(I - A^dag A), -A^dag]]`` for ``||A|| <= 1``."""
    d = a.shape[0]
    left, s, right_h = np.linalg.svd(a)
    if s.size and s[0] > 1.0 + NORM_TOL:
        raise NormalizationError(f"operator norm {s[0]:.6g} exceeds 1")
    c = np.sqrt(np.clip(1.0 - s**2, 0.0, None))
    top = (left * c) @ left.conj().T
    bottom = (right_h.conj().T * c) @ right_h
    out = np.empty((2 * d, 2 * d), dtype=complex)
    out[:d, :d] = a
    out[:d, d:] = top
    out[d:, :d] = bottom
    out[d:, d:] = -a.conj().T
    return out


def encode_rectangular(dec: SosDecomposition, n_orb: int | None = None) -> BlockEncoding:
    """Block-encode ``H_sqrt / lambda_sqrt`` with ``Pi_l`` = (B=0) and ``Pi_m`` = (alpha=0, B=0)."""
    n = dec.n_orb if n_orb is None else n_orb
    if n != dec.n_orb:
        raise ValueError("orbital count does not match the decomposition")
    tensors.check_oracle_limit(n)
    d = 4**n
    ops = generator_matrices(dec)
    lams = dec.lambdas
    lam_sqrt = dec.lambda_sqrt
    if not ops or lam_sqrt == 0.0:
        # zero block: a single dummy generator O = 0 with unit weight
        ops = [np.zeros((d, d))]
        lams = np.array([1.0])
        lam_sqrt = 0.0
        weights = np.array([1.0])
    else:
        weights = lams / lam_sqrt
    L = len(ops)
    blocks = []
    for op, lam in zip(ops, lams):
        if lam == 0.0:
            if np.max(np.abs(op), initial=0.0) > NORM_TOL:
                raise NormalizationError("nonzero generator with zero normalization")
            blocks.append(unitary_dilation(np.zeros((d, d))))
            continue
        norm = np.linalg.norm(op, 2)
        if norm > lam * (1.0 + NORM_TOL) + NORM_TOL:
            raise NormalizationError(f"lambda {lam:.6g} below operator norm {norm:.6g}")
        blocks.append(unitary_dilation(op / lam))
    sel = sla.block_diag(*blocks)
    prep = np.kron(householder_completion(weights), np.eye(2 * d))
    U = sel @ prep
    alpha, b, s = np.meshgrid(np.arange(L), np.arange(2), np.arange(d), indexing="ij")
    flat = (alpha * 2 * d + b * d + s).ravel()
    rows = np.sort(flat[(b == 0).ravel()])
    cols = np.arange(d)
    return BlockEncoding(U, rows, cols, lam_sqrt, {"L": L, "system_dim": d, "kind": "rectangular"})


def _sa_spectrum(dec: SosDecomposition) -> np.ndarray:
    hs = build_hsqrt(dec)
    if hs.shape[0] == 0:
        return np.zeros(4**dec.n_orb)
    return np.clip(np.linalg.eigvalsh(hs.conj().T @ hs), 0.0, None)


def _wrap(x: np.ndarray) -> np.ndarray:
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def _singular_frames(be: BlockEncoding):
    """Per singular triple: (s, m, m_perp or None, l, l_perp or None)."""
    a = be.block()
    l_mat, s, mh = np.linalg.svd(a, full_matrices=True)
    U = be.U
    d = a.shape[1]
    frames = []
    for j in range(d):
        m = np.zeros(be.dim, dtype=complex)
        m[be.cols] = mh[j].conj()
        # for s = 0 the left vector lies in the complement of the block range
        l = np.zeros(be.dim, dtype=complex)
        l[be.rows] = l_mat[:, j]
        sj = float(min(s[j], 1.0))
        if sj > 1.0 - SV_TOL:
            frames.append((1.0, m, None, l, None))
            continue
        c = math.sqrt(1.0 - sj * sj)
        l_perp = (U @ m - sj * l) / c
        m_perp = (U.conj().T @ l - sj * m) / c
        frames.append((sj, m, m_perp, l, l_perp))
    return frames


def walk_once(be: BlockEncoding) -> dict:
    """Phases of ``W1 = Ref_B U`` and ``W2 = Ref_aB U^dag`` on their 2D transfer subspaces.

    ``W1`` maps ``span(m, m_perp)`` onto ``span(l, l_perp)``; its eigenphases
    are those of the 2x2 matrix of that map, which are ``+-arccos(s)`` with
    ``s = sqrt(E)/lambda_sqrt``. ``W2`` is treated with the roles swapped.
    """
    r_rows = be.reflection("rows")
    r_cols = be.reflection("cols")
    W1 = r_rows[:, None] * be.U
    W2 = r_cols[:, None] * be.U.conj().T
    out1, out2, svals = [], [], []
    for s, m, mp, l, lp in _singular_frames(be):
        svals.append(s)
        if mp is None:
            out1.append(float(np.angle(np.vdot(l, W1 @ m))))
            out2.append(float(np.angle(np.vdot(m, W2 @ l))))
            continue
        t1 = np.array([[np.vdot(l, W1 @ m), np.vdot(l, W1 @ mp)],
                       [np.vdot(lp, W1 @ m), np.vdot(lp, W1 @ mp)]])
        t2 = np.array([[np.vdot(m, W2 @ l), np.vdot(m, W2 @ lp)],
                       [np.vdot(mp, W2 @ l), np.vdot(mp, W2 @ lp)]])
        out1.extend(np.angle(np.linalg.eigvals(t1)).tolist())
        out2.extend(np.angle(np.linalg.eigvals(t2)).tolist())
    return {"W1": np.sort(out1), "W2": np.sort(out2), "singular_values": np.array(svals)}


def single_walk_targets(energies: np.ndarray, lam_sqrt: float) -> np.ndarray:
    """Expected ``W1`` multiset ``+-arccos(sqrt(E)/lambda_sqrt)``."""
    out = []
    for e in energies:
        s = min(math.sqrt(max(e, 0.0)) / lam_sqrt, 1.0) if lam_sqrt > 0 else 0.0
        if s > 1.0 - SV_TOL:
            out.append(0.0)
        else:
            th = math.acos(s)
            out.extend([th, -th])
    return np.sort(out)


def _invariant_basis(be: BlockEncoding) -> np.ndarray:
    vecs = []
    for _, m, mp, _, _ in _singular_frames(be):
        vecs.append(m)
        if mp is not None:
            vecs.append(mp)
    q, _ = np.linalg.qr(np.array(vecs).T)
    return q


def walk_twice(be: BlockEncoding) -> dict:
    """Eigenphases of ``W2 W1`` on the walk subspace plus the ``U^dag Ref U`` block check.

    Phases come from a complex Schur form of the walk restricted to the
    analytically constructed invariant subspace. Each Schur vector is lifted
    back and its overlap with that subspace reported.
    """
    r_rows = be.reflection("rows")
    r_cols = be.reflection("cols")
    W = r_cols[:, None] * (be.U.conj().T @ (r_rows[:, None] * be.U))
    q = _invariant_basis(be)
    wq = W @ q
    invariance = float(np.linalg.norm(wq - q @ (q.conj().T @ wq), 2))
    t, z = sla.schur(q.conj().T @ wq, output="complex")
    phases = np.angle(np.diag(t))
    lifted = q @ z
    proj = be.U.conj().T @ (r_rows[:, None] * be.U)
    block = proj[np.ix_(be.cols, be.cols)]
    overlaps = np.sum(np.abs(q.conj().T @ lifted) ** 2, axis=0)
    return {
        "phases": np.sort(phases),
        "invariance_residual": invariance,
        "min_overlap": float(np.min(overlaps)) if overlaps.size else 1.0,
        "block": block,
    }


def double_walk_targets(energies: np.ndarray, Lambda: float) -> np.ndarray:
    """``+-arccos(E/Lambda - 1)``; the endpoints 0 and pi appear once."""
    out = []
    for e in energies:
        x = float(np.clip(e / Lambda - 1.0, -1.0, 1.0)) if Lambda > 0 else -1.0
        th = math.acos(x)
        # arccos amplifies round-off near +-1, so endpoints snap to 0 or pi
        if th < 1e-7 or th > math.pi - 1e-7:
            out.append(0.0 if th < 1 else math.pi)
        else:
            out.extend([th, -th])
    return np.sort(out)


def match_phases(found: np.ndarray, expected: np.ndarray) -> float:
    """Max circular distance after sorted matching; inf on a count mismatch."""
    found = np.asarray(found, dtype=float)
    expected = np.asarray(expected, dtype=float)
    if found.size != expected.size:
        return math.inf
    # compare on the circle: canonicalize pi to -pi ambiguity by wrapping
    a = np.sort(_wrap(found + 1e-12))
    b = np.sort(_wrap(expected + 1e-12))
    return float(np.max(np.abs(_wrap(a - b)), initial=0.0))


def hermitian_dilation(dec: SosDecomposition, n_orb: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``sum_a (|chi_a><0| (x) O_a + h.c.)`` and its ascending spectrum."""
    n = dec.n_orb if n_orb is None else n_orb
    tensors.check_oracle_limit(n)
    d = 4**n
    hs = build_hsqrt(dec)
    L = hs.shape[0] // d
    h = np.zeros(((L + 1) * d, (L + 1) * d), dtype=complex)
    h[d:, :d] = hs
    h[:d, d:] = hs.conj().T
    return h, np.linalg.eigvalsh(h)


def dilation_targets(energies: np.ndarray, L: int) -> np.ndarray:
    """``+-sqrt(E_j)`` for each SA eigenvalue plus ``(L-1) d`` zeros."""
    r = np.sqrt(np.clip(energies, 0.0, None))
    return np.sort(np.concatenate([r, -r, np.zeros(max(L - 1, 0) * len(energies))]))


def ancilla_dimensions(dec: SosDecomposition) -> dict:
    """Ancilla Hilbert-space dimensions of the two encodings.

    The rectangular encoding needs the generator register and one qubit. The
    Hermitian dilation needs the ``L + 1`` dilated register, two qubits to
    split each Hermitian term into four unitaries, and one block qubit.
    """
    L = max(len(dec.lambdas), 1)
    return {"rectangular": 2 * L, "hermitian": 8 * (L + 1)}


def sa_energies(dec: SosDecomposition) -> np.ndarray:
    """Ascending eigenvalues of ``H_SA = H_sqrt^dag H_sqrt``."""
    return _sa_spectrum(dec)


def spectrum_csv(phases: np.ndarray, energies: np.ndarray, Lambda: float) -> str:
    """CSV of (phase, matched E, residual) for the double walk."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["phase", "energy", "residual"])
    cand = np.array([(e, t) for e in energies for t in (math.acos(np.clip(e / Lambda - 1, -1, 1)),)]) \
        if Lambda > 0 else np.zeros((0, 2))
    for ph in np.sort(phases):
        if cand.size:
            res = np.abs(np.abs(_wrap(ph)) - cand[:, 1])
            k = int(np.argmin(res))
            writer.writerow([repr(float(ph)), repr(float(cand[k, 0])), repr(float(res[k]))])
        else:
            writer.writerow([repr(float(ph)), "", ""])
    return buf.getvalue()
