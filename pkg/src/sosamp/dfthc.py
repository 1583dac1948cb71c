"""DFTHC factorization of the two-electron tensor and its variational fit.

The two-body part is represented as ``h2'_pqmn = sum_rc L^rc_pq L^rc_mn`` with
``L^rc = sum_{b<B} w[r,b,c] u[r,b] u[r,b]^T``. Slot ``B`` of ``w`` stores the
identity coefficient ``w_B``, related to the constant of each squared
generator by ``w_B = W + sum_{b<B} w_b``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from sosamp.errors import DivergenceError, ParseError
from sosamp.tensors import (
    Problem,
    build_dense_hamiltonian,
    check_oracle_limit,
    ground_energy,
    hamiltonian_matrix,
    oracle_limit,
    symmetrize_h2,
)

SCHATTEN_ZERO_TOL = 1e-12
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class DfthcParams:
    R: int
    B: int
    C: int
    u: np.ndarray
    w: np.ndarray
    beta1: float = 0.0
    h_sym: np.ndarray | None = None

    def __post_init__(self):
        for name in ("R", "B", "C"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1 (the ansatz is empty otherwise)")
        u = np.array(self.u, dtype=float)
        w = np.array(self.w, dtype=float)
        if u.ndim != 3 or u.shape[:2] != (self.R, self.B):
            raise ValueError(f"u has shape {u.shape}, expected (R, B, N) = ({self.R}, {self.B}, N)")
        if w.shape != (self.R, self.B + 1, self.C):
            raise ValueError(f"w has shape {w.shape}, expected {(self.R, self.B + 1, self.C)}")
        n = u.shape[2]
        h_sym = np.zeros((n, n)) if self.h_sym is None else np.array(self.h_sym, dtype=float)
        if h_sym.shape != (n, n):
            raise ValueError(f"h_sym has shape {h_sym.shape}, expected {(n, n)}")
        if not np.allclose(h_sym, h_sym.T, atol=1e-14, rtol=0):
            raise ValueError("h_sym must be symmetric")
        for arr in (u, w, h_sym):
            arr.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "h_sym", h_sym)
        object.__setattr__(self, "beta1", float(self.beta1))

    @property
    def n_orb(self) -> int:
        return self.u.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.R, self.B, self.C)

    @property
    def w_basis(self) -> np.ndarray:
        """Coefficients ``w[r, b, c]`` for ``b < B``."""
        return self.w[:, : self.B, :]

    @property
    def w_identity(self) -> np.ndarray:
        """Identity coefficients ``w_B`` with shape (R, C)."""
        return self.w[:, self.B, :]

    def unit_error(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.u, axis=2) - 1.0)))

    def evolve(self, **changes) -> DfthcParams:
        return replace(self, **changes)

    @classmethod
    def random(cls, shape: tuple[int, int, int], n_orb: int, rng: np.random.Generator,
               w_scale: float = 0.01, h_sym_scale: float = 0.01, beta1_scale: float = 0.05,
               shift: bool = True) -> DfthcParams:
        """Initial guess: random unit vectors and small Gaussian coefficients."""
        R, B, C = shape
        u = rng.normal(size=(R, B, n_orb))
        u /= np.linalg.norm(u, axis=2, keepdims=True)
        w = rng.normal(scale=w_scale, size=(R, B + 1, C))
        if shift:
            hs = rng.normal(scale=h_sym_scale, size=(n_orb, n_orb))
            hs = (hs + hs.T) / 2
            beta1 = float(rng.normal(scale=beta1_scale))
        else:
            hs, beta1 = np.zeros((n_orb, n_orb)), 0.0
        return cls(R, B, C, u, w, beta1, hs)

    def to_dict(self) -> dict:
        return {
            "shape": [self.R, self.B, self.C],
            "n_orb": self.n_orb,
            "u": self.u.ravel().tolist(),
            "w": self.w.ravel().tolist(),
            "beta1": self.beta1,
            "h_sym": self.h_sym.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> DfthcParams:
        R, B, C = (int(x) for x in data["shape"])
        n = int(data["n_orb"])
        return cls(
            R, B, C,
            np.asarray(data["u"], dtype=float).reshape(R, B, n),
            np.asarray(data["w"], dtype=float).reshape(R, B + 1, C),
            float(data["beta1"]),
            np.asarray(data["h_sym"], dtype=float).reshape(n, n),
        )


@dataclass(frozen=True)
class Hyper:
    """Regularizers and optimizer schedule.

    ``lambda_reg`` or ``e_reg`` set to ``None`` drops the matching loss term.
    ``use_shift`` toggles the particle-number-preserving shift variables.
    """

    eps_reg: float = 1e-2
    lambda_reg: float | None = 1.0
    e_reg: float | None = None
    lr_init: float = 1e-1
    lr_final: float = 1e-4
    steps: int = 2000
    seed: int = 0
    use_shift: bool = True
    lambda_reg_final: float | None = None

    def __post_init__(self):
        if not self.eps_reg > 0:
            raise ValueError("eps_reg must be positive")
        for name in ("lambda_reg", "e_reg"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive or None")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not (self.lr_init > 0 and self.lr_final > 0):
            raise ValueError("learning rates must be positive")

    def lambda_weight(self, step: int | None = None) -> float:
        """Coefficient ``1/lambda_reg`` at ``step``; geometric when ``lambda_reg_final`` is set."""
        if self.lambda_reg is None:
            return 0.0
        if step is None or self.lambda_reg_final is None or self.steps == 1:
            return 1.0 / self.lambda_reg
        ratio = self.lambda_reg_final / self.lambda_reg
        return 1.0 / (self.lambda_reg * ratio ** (step / (self.steps - 1)))

    def learning_rate(self, step: int) -> float:
        if self.steps == 1:
            return self.lr_init
        return self.lr_init * (self.lr_final / self.lr_init) ** (step / (self.steps - 1))


# ---------------------------------------------------------------- tensors

def l_factors(params: DfthcParams) -> np.ndarray:
    """``L[r, c] = sum_{b<B} w[r,b,c] u[r,b] u[r,b]^T`` with shape (R, C, N, N)."""
    return np.einsum("rbc,rbp,rbq->rcpq", params.w_basis, params.u, params.u, optimize=True)


def contract_h2(params: DfthcParams) -> np.ndarray:
    """Two-body tensor represented by the factorization."""
    L = l_factors(params)
    return np.einsum("rcpq,rcmn->pqmn", L, L, optimize=True)


def identity_offset(params: DfthcParams) -> np.ndarray:
    """Per-(r, c) constant ``W = w_B - sum_{b<B} w_b`` of the squared generators."""
    return params.w_identity - params.w_basis.sum(axis=1)


def bliss_tensors(p: Problem, beta1: float, h_sym: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Shifted tensors ``(h2_S, h1_S, h0_S)`` with the same eta-sector spectrum.

    ``h2_S = h2 + (h_sym x 1 + 1 x h_sym)/2``, ``h1_S = h1 - eta/2 h_sym + beta1 1``
    and ``h0_S = e_core - eta beta1``.
    """
    n = p.n_orb
    eye = np.eye(n)
    h_sym = np.asarray(h_sym, dtype=float)
    h2_s = p.h2 + 0.5 * (np.einsum("pq,rs->pqrs", h_sym, eye) + np.einsum("pq,rs->pqrs", eye, h_sym))
    h1_s = p.h1 - 0.5 * p.eta * h_sym + beta1 * eye
    h0_s = p.e_core - p.eta * beta1
    return h2_s, h1_s, h0_s


def shifted_tensors(params: DfthcParams, p: Problem, use_shift: bool) -> tuple[np.ndarray, np.ndarray, float]:
    if use_shift:
        return bliss_tensors(p, params.beta1, params.h_sym)
    return np.asarray(p.h2), np.asarray(p.h1), p.e_core


def effective_h1(params: DfthcParams, p: Problem, use_shift: bool = True,
                 replace_trace: bool = True) -> np.ndarray:
    """Corrected one-body matrix ``h1'``.

    ``h1' = h1 + sum_r T_pqrr - sum_rc w_B L^rc`` where ``T`` is the target
    tensor when ``replace_trace`` (the form used during fitting) and the
    factorized tensor otherwise. The latter makes the factorized Hamiltonian
    equal to the original one with ``h2`` swapped for ``h2'``.
    """
    h2_s, h1_s, _ = shifted_tensors(params, p, use_shift)
    L = l_factors(params)
    trace_src = h2_s if replace_trace else np.einsum("rcpq,rcmn->pqmn", L, L)
    h1p = h1_s + np.einsum("pqrr->pq", trace_src) - np.einsum("rc,rcpq->pq", params.w_identity, L)
    return (h1p + h1p.T) / 2


def schatten1(a: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(a))))


def lambda_sos(params: DfthcParams, h1_eff: np.ndarray) -> float:
    """Block-encoding normalization ``Lambda = ||h1'||_1 + 1/4 sum_rc (sum_b |w_b|)^2``."""
    s = np.abs(params.w).sum(axis=1)
    return schatten1(h1_eff) + 0.25 * float(np.sum(s**2))


def e_gap(params: DfthcParams, h1_eff: np.ndarray, e_gs: float, p: Problem,
          use_shift: bool = True) -> float:
    """Ground energy of the SOS Hamiltonian in closed form.

    ``e_gs`` is the ground energy of the (shifted) operator without constant
    terms. The expression equals ``e_gs - E_SOS`` exactly when ``h1_eff`` was
    built with ``replace_trace=False`` and the ``u`` vectors are unit.
    """
    _, h1_s, _ = shifted_tensors(params, p, use_shift)
    tr_l = np.einsum("rcpp->rc", l_factors(params))
    return (
        e_gs
        + schatten1(h1_eff)
        - float(np.trace(h1_s))
        - 0.5 * float(np.sum(tr_l**2))
        + 0.5 * float(np.sum(params.w_identity**2))
    )


def eps_fro(params: DfthcParams, p: Problem, use_shift: bool = True) -> float:
    h2_s, _, _ = shifted_tensors(params, p, use_shift)
    return float(np.linalg.norm(h2_s - contract_h2(params)))


def operator_ground_energy(p: Problem, e_gs: float | None = None) -> float:
    """Eta-sector ground energy of ``p`` without ``e_core``; dense when not supplied.

    A supplied ``e_gs`` is taken to include ``e_core``.
    """
    if e_gs is not None:
        return float(e_gs) - p.e_core
    if p.n_orb > oracle_limit():
        raise ValueError("E_gs must be supplied above the dense oracle limit")
    return ground_energy(hamiltonian_matrix(p.h1, p.h2), p.eta)


def fit_summary(params: DfthcParams, p: Problem, use_shift: bool = True,
                e_gs: float | None = None) -> dict:
    """``eps_fro`` (absolute and relative), ``Lambda`` and ``E_gap`` of a fit.

    ``E_gap`` is ``None`` when no ground energy is supplied and the dense
    oracle is out of reach.
    """
    h1p = effective_h1(params, p, use_shift)
    fro = eps_fro(params, p, use_shift)
    h2_s, _, _ = shifted_tensors(params, p, use_shift)
    norm = float(np.linalg.norm(h2_s))
    gap = None
    if e_gs is not None or p.n_orb <= oracle_limit():
        e_op = operator_ground_energy(p, e_gs) + (p.eta * params.beta1 if use_shift else 0.0)
        gap = e_gap(params, h1p, e_op, p, use_shift)
    return {"eps_fro": fro, "eps_fro_rel": fro / norm if norm > 0 else fro,
            "Lambda": lambda_sos(params, h1p), "E_gap": gap}


# ---------------------------------------------------------------- loss and gradient

@dataclass(frozen=True)
class LossTerms:
    total: float
    fro: float
    Lambda: float
    e_gap: float
    relu: float


@dataclass(frozen=True)
class Gradient:
    u: np.ndarray
    w: np.ndarray
    beta1: float
    h_sym: np.ndarray

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(self.u))), float(np.max(np.abs(self.w))),
                   abs(self.beta1), float(np.max(np.abs(self.h_sym))))


def _value_and_grad(params: DfthcParams, p: Problem, hyper: Hyper, e_gs_op: float | None,
                    need_grad: bool = True):
    return _evaluate(params.u, params.w, params.beta1, params.h_sym, p, hyper, e_gs_op, need_grad)


def _evaluate(u, w, beta1, h_sym, p: Problem, hyper: Hyper, e_gs_op, need_grad=True, step=None):
    use_shift = hyper.use_shift
    R, B1, C = w.shape
    B = B1 - 1
    n = u.shape[2]
    n2 = n * n
    eta = p.eta
    eye = np.eye(n)
    if use_shift:
        h2_s = p.h2 + 0.5 * (np.multiply.outer(h_sym, eye) + np.multiply.outer(eye, h_sym))
        h1_s = p.h1 - 0.5 * eta * h_sym + beta1 * eye
    else:
        h2_s, h1_s = p.h2, p.h1
    wb, wB = w[:, :B, :], w[:, B, :]

    uu = u[:, :, :, None] * u[:, :, None, :]                      # (R, B, N, N)
    L = np.matmul(wb.transpose(0, 2, 1), uu.reshape(R, B, n2))   # (R, C, N^2)
    L2 = L.reshape(R * C, n2)
    D = h2_s.reshape(n2, n2) - L2.T @ L2
    F = float(np.linalg.norm(D))
    h2_diag = np.einsum("pqrr->pq", h2_s)
    h1p = h1_s + h2_diag - (wB.reshape(-1) @ L2).reshape(n, n)
    h1p = (h1p + h1p.T) / 2
    lam, V = np.linalg.eigh(h1p)
    schat = float(np.sum(np.abs(lam)))
    S = np.abs(w).sum(axis=1)
    Lam = schat + 0.25 * float(np.sum(S**2))

    c_lam = hyper.lambda_weight(step)
    total = F / hyper.eps_reg + Lam * c_lam
    gap = math.nan
    relu = 0.0
    c_rel = 0.0
    diag_idx = np.arange(0, n2, n + 1)
    if hyper.e_reg is not None:
        if e_gs_op is None:
            raise ValueError("the gap term needs a ground energy")
        tr_l = L[:, :, diag_idx].sum(axis=2)
        shift_e = eta * beta1 if use_shift else 0.0
        gap = (e_gs_op + shift_e + schat - float(np.trace(h1_s))
               - 0.5 * float(np.sum(tr_l**2)) + 0.5 * float(np.sum(wB**2)))
        x = (gap - hyper.e_reg) / hyper.e_reg
        if x > 0:
            relu = x
            c_rel = 1.0 / hyper.e_reg
        total += relu
    terms = LossTerms(total, F, Lam, gap, relu)
    if not need_grad:
        return terms, None

    sgn = np.where(np.abs(lam) < SCHATTEN_ZERO_TOL, 0.0, np.sign(lam))
    S1 = (V * sgn) @ V.T
    Gh = (c_lam + c_rel) * S1

    # round-off residuals count as an exact fit: 0 is a valid subgradient there
    exact = F <= SCHATTEN_ZERO_TOL * max(1.0, float(np.linalg.norm(h2_s)))
    G2 = np.zeros_like(D) if exact else D * (1.0 / (hyper.eps_reg * F))
    gL = -(L2 @ (G2 + G2.T)).reshape(R, C, n2)
    gL -= wB[:, :, None] * Gh.reshape(1, 1, n2)
    if c_rel:
        tr_l = L[:, :, diag_idx].sum(axis=2)
        gL[:, :, diag_idx] -= c_rel * tr_l[:, :, None]

    gw = 0.5 * c_lam * S[:, None, :] * np.sign(w)
    # <gL[r,c], u u^T> for every (r, b, c)
    gw[:, :B, :] += np.matmul(uu.reshape(R, B, n2), gL.transpose(0, 2, 1))
    gw[:, B, :] += -(L @ Gh.reshape(n2)) + c_rel * wB
    gLm = gL.reshape(R, C, n, n)
    gLs = gLm + gLm.transpose(0, 1, 3, 2)
    # sum_c w[r,b,c] gLs[r,c] u[r,b]
    M = np.matmul(wb, gLs.reshape(R, C, n2)).reshape(R, B, n, n)
    gu = np.matmul(M, u[..., None])[..., 0]

    if use_shift:
        G2t = G2.reshape(n, n, n, n)
        gb1 = float(np.trace(Gh)) + c_rel * (eta - n)
        ghs = 0.5 * (np.einsum("pqrr->pq", G2t) + np.einsum("rrpq->pq", G2t))
        ghs += 0.5 * (n - eta) * Gh + 0.5 * float(np.trace(Gh)) * eye
        ghs += 0.5 * c_rel * eta * eye
        ghs = (ghs + ghs.T) / 2
    else:
        gb1, ghs = 0.0, np.zeros((n, n))
    return terms, Gradient(gu, gw, gb1, ghs)


def loss_terms(params: DfthcParams, p: Problem, hyper: Hyper, e_gs: float | None = None) -> LossTerms:
    """All components of the fitting objective.

    ``e_gs`` is the eta-sector ground energy of ``p`` including ``e_core``; it
    is computed with the dense oracle when omitted and the gap term is active.
    """
    e_op = operator_ground_energy(p, e_gs) if hyper.e_reg is not None else None
    return _value_and_grad(params, p, hyper, e_op, need_grad=False)[0]


def loss(params: DfthcParams, p: Problem, hyper: Hyper, e_gs: float | None = None) -> float:
    return loss_terms(params, p, hyper, e_gs).total


def project_tangent(u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Remove the radial component of ``g`` along each unit vector ``u[r, b]``."""
    return g - np.sum(g * u, axis=-1, keepdims=True) * u


def gradient(params: DfthcParams, p: Problem, hyper: Hyper, e_gs: float | None = None,
             project: bool = True) -> Gradient:
    """Analytic gradient of :func:`loss`; ``u`` gradients are tangent when ``project``."""
    e_op = operator_ground_energy(p, e_gs) if hyper.e_reg is not None else None
    g = _value_and_grad(params, p, hyper, e_op)[1]
    if project:
        g = replace(g, u=project_tangent(params.u, g.u))
    return g


# ---------------------------------------------------------------- optimizer

class _Adam:
    def __init__(self, shapes: dict[str, tuple[int, ...]], betas=ADAM_BETAS, eps=ADAM_EPS):
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0

    def step(self, values: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> dict[str, np.ndarray]:
        self.t += 1
        out = {}
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mhat = self.m[k] / (1 - self.b1**self.t)
            vhat = self.v[k] / (1 - self.b2**self.t)
            out[k] = values[k] - lr * mhat / (np.sqrt(vhat) + self.eps)
        return out


def _pack(template: DfthcParams, values: dict[str, np.ndarray]) -> DfthcParams:
    return DfthcParams(template.R, template.B, template.C, values["u"], values["w"],
                       float(values["beta1"]), values["h_sym"])


@dataclass(frozen=True)
class OptimizeResult:
    params: DfthcParams
    trace: np.ndarray
    terms: LossTerms
    hyper: Hyper
    seed: int
    steps: int
    e_gs: float | None = None
    snapshots: tuple[DfthcParams, ...] = field(default_factory=tuple)


def optimize(p: Problem, shape: tuple[int, int, int], hyper: Hyper, e_gs: float | None = None,
             init: DfthcParams | None = None, snapshot_every: int = 0) -> OptimizeResult:
    """Fit DFTHC parameters with Adam and a geometric learning-rate schedule.

    Unit vectors follow projected gradients and are renormalized after each
    step. Runs are bit-reproducible for a fixed ``hyper.seed``.
    """
    e_op = operator_ground_energy(p, e_gs) if hyper.e_reg is not None else None
    if init is None:
        rng = np.random.Generator(np.random.Philox(hyper.seed))
        params = DfthcParams.random(shape, p.n_orb, rng, shift=hyper.use_shift)
    else:
        params = init
        if params.shape != tuple(shape) or params.n_orb != p.n_orb:
            raise ValueError("initial parameters do not match the requested shape")

    values = {"u": params.u.copy(), "w": params.w.copy(),
              "beta1": np.array(params.beta1), "h_sym": params.h_sym.copy()}
    adam = _Adam({k: v.shape for k, v in values.items()})
    trace = np.empty(hyper.steps)
    snapshots = []
    for step in range(hyper.steps):
        terms, g = _evaluate(values["u"], values["w"], float(values["beta1"]), values["h_sym"],
                             p, hyper, e_op, step=step)
        if not math.isfinite(terms.total):
            raise DivergenceError(step)
        trace[step] = terms.total
        grads = {"u": project_tangent(values["u"], g.u), "w": g.w}
        if hyper.use_shift:
            grads["beta1"] = np.array(g.beta1)
            grads["h_sym"] = g.h_sym
        new = adam.step(values, grads, hyper.learning_rate(step))
        new["u"] = new["u"] / np.linalg.norm(new["u"], axis=2, keepdims=True)
        if "h_sym" in new:
            new["h_sym"] = (new["h_sym"] + new["h_sym"].T) / 2
        values.update(new)
        if snapshot_every and (step + 1) % snapshot_every == 0:
            snapshots.append(_pack(params, values))
    params = _pack(params, values)
    final = _value_and_grad(params, p, hyper, e_op, need_grad=False)[0]
    if not math.isfinite(final.total):
        raise DivergenceError(hyper.steps)
    return OptimizeResult(params, trace, final, hyper, hyper.seed, hyper.steps, e_gs, tuple(snapshots))


# ---------------------------------------------------------------- restarts

def error_proxy(params: DfthcParams, p: Problem, use_shift: bool = True) -> float:
    """Eta-sector ground-energy error from replacing ``h2`` by the factorized tensor."""
    check_oracle_limit(p.n_orb)
    h2_s, h1_s, h0_s = shifted_tensors(params, p, use_shift)
    approx = hamiltonian_matrix(h1_s, contract_h2(params), h0_s)
    exact = build_dense_hamiltonian(p)
    return ground_energy(approx, p.eta) - ground_energy(exact, p.eta)


@dataclass(frozen=True)
class RestartStatistics:
    proxies: np.ndarray
    mean: float
    std: float
    seeds: tuple[int, ...]
    results: tuple[OptimizeResult, ...]


def restart_seeds(seed: int, k: int) -> tuple[int, ...]:
    children = np.random.SeedSequence(seed).spawn(k)
    return tuple(int(c.generate_state(1, dtype=np.uint64)[0]) for c in children)


def restart_statistics(p: Problem, shape: tuple[int, int, int], hyper: Hyper, K: int,
                       e_gs: float | None = None, seeds: tuple[int, ...] | None = None,
                       workers: int = 1) -> RestartStatistics:
    """Independent restarts and the spread of their ground-energy error proxy."""
    if K < 2:
        raise ValueError("K must be >= 2")
    seeds = restart_seeds(hyper.seed, K) if seeds is None else tuple(seeds)
    if len(seeds) != K:
        raise ValueError("need exactly K seeds")

    def run(s):
        return optimize(p, shape, replace(hyper, seed=s), e_gs)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = tuple(pool.map(run, seeds))
    else:
        results = tuple(run(s) for s in seeds)
    proxies = np.array([error_proxy(r.params, p, hyper.use_shift) for r in results])
    return RestartStatistics(proxies, float(proxies.mean()), float(proxies.std(ddof=1)), seeds, results)


# ---------------------------------------------------------------- checkpoints

CHECKPOINT_FORMAT = "sosamp.checkpoint"
CHECKPOINT_VERSION = 1


def checkpoint_dict(result: OptimizeResult) -> dict:
    """Versioned checkpoint: format, version, params, hyper, seed, step, loss trace."""
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "params": result.params.to_dict(),
        "hyper": asdict(result.hyper),
        "seed": result.seed,
        "step": result.steps,
        "e_gs": result.e_gs,
        "loss_trace": result.trace.tolist(),
    }


def save_checkpoint(result: OptimizeResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(result), fh)


def load_checkpoint(path) -> tuple[DfthcParams, dict]:
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{path} is not a checkpoint")
    if data.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {data.get('version')}")
    return DfthcParams.from_dict(data["params"]), data


def planted_problem(params: DfthcParams, h1: np.ndarray | None = None, eta: int | None = None,
                    e_core: float = 0.0) -> Problem:
    """Problem whose two-body tensor is exactly representable by ``params``."""
    n = params.n_orb
    h1 = np.zeros((n, n)) if h1 is None else np.asarray(h1, dtype=float)
    return Problem(n, (h1 + h1.T) / 2, symmetrize_h2(contract_h2(params)), e_core,
                   n if eta is None else eta)
