"""Finite-precision truncation of DFTHC parameters with unbiased randomized rounding.

Unit vectors are stored as a Givens chain ``u = G_{N-2}(t_{N-2}) ... G_0(t_0) e_0``
where ``G_j`` rotates coordinates ``(j, j+1)``. Angles are rounded to a grid of
``2^(b_rot-1)`` points with a Bernoulli last bit, and coefficient vectors are
quantized by assigning ``M = len(w) 2^(b_coeff-1)`` alias bins.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from sosamp import tensors
from sosamp.dfthc import DfthcParams, contract_h2
from sosamp.errors import DegenerateDistributionError, NormalizationError

TWO_PI = 2.0 * math.pi


def make_stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based (Philox) stream; ``path`` selects an independent branch."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(x) for x in path))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class AngleVector:
    theta: np.ndarray
    bits: int | None = None

    @property
    def n_orb(self) -> int:
        return self.theta.size + 1


def angles_from_unit(u: np.ndarray, bits: int | None = None) -> AngleVector:
    """Inverse of :func:`unit_from_angles`.

    The overall sign is lost only for ``N = 1`` where no angles exist.
    """
    u = np.asarray(u, dtype=float)
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        raise NormalizationError("cannot parameterize the zero vector")
    if abs(norm - 1.0) > 1e-10:
        raise NormalizationError(f"vector norm {norm:.12g} is not 1")
    n = u.size
    theta = np.zeros(max(n - 1, 0))
    # tails[j] = ||u[j:]||
    tails = np.sqrt(np.cumsum((u[::-1] ** 2))[::-1])
    for j in range(n - 2):
        theta[j] = math.atan2(tails[j + 1], u[j])
    if n >= 2:
        theta[n - 2] = math.atan2(u[n - 1], u[n - 2]) % TWO_PI
    return AngleVector(theta, bits)


def unit_from_angles(theta: np.ndarray | AngleVector) -> np.ndarray:
    if isinstance(theta, AngleVector):
        theta = theta.theta
    theta = np.asarray(theta, dtype=float)
    u = np.zeros(theta.size + 1)
    u[0] = 1.0
    for j, t in enumerate(theta):
        a, b = u[j], u[j + 1]
        c, s = math.cos(t), math.sin(t)
        u[j], u[j + 1] = c * a - s * b, s * a + c * b
    return u


def round_angle(theta, b_rot: int, stream: np.random.Generator):
    """Round to the ``2^(b_rot-1)`` grid with ``E[out] = theta``.

    Output is ``2 pi (x + Bern(p)) / 2^(b_rot-1)``; the value ``2 pi`` may
    appear and is equivalent to 0 for periodic use.
    """
    g = 2 ** (b_rot - 1)
    t = np.asarray(theta, dtype=float)
    scaled = t * g / TWO_PI
    x = np.floor(scaled)
    p = scaled - x
    bit = stream.random(t.shape) < p
    out = TWO_PI * (x + bit) / g
    return float(out) if np.ndim(theta) == 0 else out


@dataclass(frozen=True)
class AliasAssignment:
    counts: np.ndarray
    floors: np.ndarray
    M: int

    def bins(self) -> np.ndarray:
        """Label of every bin, grouped by entry."""
        return np.repeat(np.arange(self.counts.size), self.counts)

    def magnitudes(self, l1: float) -> np.ndarray:
        return self.counts / self.M * l1


def alias_bins(w: np.ndarray, b_coeff: int, stream: np.random.Generator) -> AliasAssignment:
    """Assign ``M`` bins to entries of ``w`` with unbiased marginals.

    Each entry gets ``floor(M |w_b| / |w|_1)`` bins. The ``K`` leftovers go to
    a size-``K`` subset drawn by systematic sampling over the fractional
    residuals, so every entry is included with probability exactly equal to
    its residual.
    """
    a = np.abs(np.asarray(w, dtype=float))
    l1 = float(a.sum())
    if l1 == 0.0:
        raise DegenerateDistributionError("coefficient vector is all zero")
    M = a.size * 2 ** (b_coeff - 1)
    q = M * a / l1
    floors = np.floor(q).astype(np.int64)
    K = int(M - floors.sum())
    counts = floors.copy()
    if K > 0:
        r = np.clip(q - floors, 0.0, None)
        c = np.cumsum(r)
        c *= K / c[-1]
        start = float(stream.random())
        hits = np.maximum(0, np.ceil(c - start)).astype(np.int64)
        counts += np.diff(np.concatenate([[0], hits]))
    return AliasAssignment(counts, floors, M)


def round_unit(u: np.ndarray, b_rot: int, stream: np.random.Generator) -> np.ndarray:
    av = angles_from_unit(u)
    return unit_from_angles(round_angle(av.theta, b_rot, stream))


def truncate_params(params: DfthcParams, b_rot: int, b_coeff: int,
                    stream: np.random.Generator) -> DfthcParams:
    """One truncation draw: grid unit vectors and alias-bin coefficients with original signs."""
    u = np.empty_like(params.u)
    for r in range(params.R):
        for b in range(params.B):
            u[r, b] = round_unit(params.u[r, b], b_rot, stream)
    w = params.w.copy()
    for r in range(params.R):
        for c in range(params.C):
            col = params.w[r, :, c]
            l1 = float(np.abs(col).sum())
            if l1 == 0.0:
                continue
            w[r, :, c] = np.sign(col) * alias_bins(col, b_coeff, stream).magnitudes(l1)
    return DfthcParams(params.R, params.B, params.C, u, w, params.beta1, params.h_sym)


@dataclass(frozen=True)
class OneBodyBound:
    bound: float
    envelope: float
    h1_rounded: np.ndarray


def one_body_residual_bound(h1_eff: np.ndarray, b_rot: int,
                            stream: np.random.Generator) -> OneBodyBound:
    """Bound ``2 sum |lambda_j| ||u_j - u_j^b||`` on the rounded one-body operator.

    ``envelope`` is the worst case ``8 pi ||h1'||_1 (N-1) 2^-b_rot``.
    """
    h1 = np.asarray(h1_eff, dtype=float)
    n = h1.shape[0]
    evals, evecs = np.linalg.eigh((h1 + h1.T) / 2)
    bound = 0.0
    rounded = np.zeros_like(h1)
    for lam, vec in zip(evals, evecs.T):
        vb = round_unit(vec, b_rot, stream)
        dev = min(np.linalg.norm(vec - vb), np.linalg.norm(vec + vb))
        bound += 2.0 * abs(lam) * dev
        rounded += lam * np.outer(vb, vb)
    envelope = 8.0 * math.pi * float(np.abs(evals).sum()) * (n - 1) * 2.0 ** (-b_rot)
    return OneBodyBound(float(bound), envelope, rounded)


def truncation_observable(params: DfthcParams, truncated: DfthcParams, h1: np.ndarray,
                          eta: int | None, e0: float | None = None) -> float:
    """Ground-energy shift from replacing the factorized two-body tensor by its truncation."""
    tensors.check_oracle_limit(params.n_orb)
    if e0 is None:
        e0 = tensors.ground_energy(tensors.hamiltonian_matrix(h1, contract_h2(params)), eta)
    e1 = tensors.ground_energy(tensors.hamiltonian_matrix(h1, contract_h2(truncated)), eta)
    return e1 - e0


def truncation_study(params: DfthcParams, h1: np.ndarray, eta: int | None,
                     bits: list[tuple[int, int]], samples: int, seed: int) -> list[dict]:
    """Rows ``(b_rot, b_coeff, sample, shift)``; each cell uses its own stream branch."""
    tensors.check_oracle_limit(params.n_orb)
    e0 = tensors.ground_energy(tensors.hamiltonian_matrix(h1, contract_h2(params)), eta)
    rows = []
    for k, (b_rot, b_coeff) in enumerate(bits):
        for s in range(samples):
            t = truncate_params(params, b_rot, b_coeff, make_stream(seed, k, s))
            rows.append({"b_rot": b_rot, "b_coeff": b_coeff, "sample": s,
                         "shift": truncation_observable(params, t, h1, eta, e0)})
    return rows


def truncation_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["b_rot", "b_coeff", "sample", "shift"], lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({**row, "shift": repr(float(row["shift"]))})
    return buf.getvalue()


def loglog_slope(bits: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of ``log2(values)`` against ``bits``."""
    return float(np.polyfit(np.asarray(bits, dtype=float), np.log2(values), 1)[0])
