"""Electronic-structure data model, FCIDUMP I/O and the dense Fock-space oracle.

Fermionic modes are labelled ``m = sigma * N + p`` so that modes ``0..N-1``
are spin-up orbitals and ``N..2N-1`` spin-down orbitals. Mode ``m`` is bit
``m`` of the computational basis index, and the Jordan-Wigner string runs
over all modes with a smaller label.
"""

from __future__ import annotations

import io
import json
import os
import re
import struct
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from sosamp.errors import NormalizationError, OracleLimitError, ParseError

ORACLE_LIMIT_ENV = "SOSAMP_ORACLE_LIMIT"
DEFAULT_ORACLE_LIMIT = 7

_BINARY_MAGIC = b"SOSAMPPB"
_BINARY_VERSION = 1
_CONFLICT_TOL = 1e-10


def oracle_limit() -> int:
    """Largest orbital count accepted by the dense oracle."""
    raw = os.environ.get(ORACLE_LIMIT_ENV)
    if raw is None:
        return DEFAULT_ORACLE_LIMIT
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{ORACLE_LIMIT_ENV} must be an integer, got {raw!r}") from exc


def check_oracle_limit(n_orb: int) -> None:
    limit = oracle_limit()
    if n_orb > limit:
        raise OracleLimitError(
            f"N={n_orb} exceeds the dense oracle limit {limit} "
            f"(set {ORACLE_LIMIT_ENV} to override)"
        )


def symmetrize_h2(h2: np.ndarray) -> np.ndarray:
    """Average a two-body tensor over the 8-fold real permutation group."""
    h2 = np.asarray(h2, dtype=float)
    avg = (
        h2
        + h2.transpose(1, 0, 2, 3)
        + h2.transpose(0, 1, 3, 2)
        + h2.transpose(1, 0, 3, 2)
        + h2.transpose(2, 3, 0, 1)
        + h2.transpose(3, 2, 0, 1)
        + h2.transpose(2, 3, 1, 0)
        + h2.transpose(3, 2, 1, 0)
    ) / 8.0
    # Copy one representative per orbit so symmetric slots are bit-identical.
    n = h2.shape[0]
    p, q, r, s = np.indices(h2.shape)
    pq = np.maximum(p, q) * n + np.minimum(p, q)
    rs = np.maximum(r, s) * n + np.minimum(r, s)
    lo, hi = np.minimum(pq, rs), np.maximum(pq, rs)
    return avg[hi // n, hi % n, lo // n, lo % n]


def h2_symmetry_error(h2: np.ndarray) -> float:
    perms = [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)]
    return max(float(np.max(np.abs(h2 - h2.transpose(t)), initial=0.0)) for t in perms)


@dataclass(frozen=True)
class Problem:
    """Second-quantized Hamiltonian in a spatial-orbital basis.

    ``h2`` is stored in chemists' notation, ``h2[p, q, r, s] = (pq|rs)``, and
    the Hamiltonian reads ``sum h1_pq E_pq + 1/2 sum h2_pqrs E_pq E_rs + e_core``.
    """

    n_orb: int
    h1: np.ndarray
    h2: np.ndarray
    e_core: float = 0.0
    eta: int = 0

    def __post_init__(self):
        n = int(self.n_orb)
        if n < 1:
            raise ValueError("n_orb must be >= 1")
        h1 = np.array(self.h1, dtype=float)
        h2 = np.array(self.h2, dtype=float)
        if h1.shape != (n, n):
            raise ValueError(f"h1 has shape {h1.shape}, expected {(n, n)}")
        if h2.shape != (n,) * 4:
            raise ValueError(f"h2 has shape {h2.shape}, expected {(n,) * 4}")
        if not np.array_equal(h1, h1.T):
            raise ValueError("h1 must be exactly symmetric")
        scale = max(1.0, float(np.max(np.abs(h2), initial=0.0)))
        if h2_symmetry_error(h2) > 1e-12 * scale:
            raise ValueError("h2 lacks 8-fold permutational symmetry")
        if not 0 <= int(self.eta) <= 2 * n:
            raise ValueError(f"eta={self.eta} outside [0, {2 * n}]")
        h1.setflags(write=False)
        h2.setflags(write=False)
        object.__setattr__(self, "n_orb", n)
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", h2)
        object.__setattr__(self, "e_core", float(self.e_core))
        object.__setattr__(self, "eta", int(self.eta))

    @classmethod
    def zeros(cls, n_orb: int, eta: int = 0) -> Problem:
        return cls(n_orb, np.zeros((n_orb, n_orb)), np.zeros((n_orb,) * 4), 0.0, eta)

    @classmethod
    def random(cls, n_orb: int, rng: np.random.Generator, eta: int | None = None,
               scale: float = 1.0) -> Problem:
        """Random instance with symmetric h1 and an 8-fold symmetric h2."""
        h1 = rng.normal(scale=scale, size=(n_orb, n_orb))
        h1 = (h1 + h1.T) / 2
        h2 = symmetrize_h2(rng.normal(scale=scale, size=(n_orb,) * 4))
        return cls(n_orb, h1, h2, 0.0, n_orb if eta is None else eta)

    def replace(self, **changes) -> Problem:
        fields_ = dict(n_orb=self.n_orb, h1=self.h1, h2=self.h2, e_core=self.e_core, eta=self.eta)
        fields_.update(changes)
        return Problem(**fields_)

    # JSON form: {"format", "version", "n_orb", "eta", "e_core", "h1", "h2"}
    # with h1 and h2 flattened in C order.
    def to_dict(self) -> dict:
        return {
            "format": "sosamp.problem",
            "version": 1,
            "n_orb": self.n_orb,
            "eta": self.eta,
            "e_core": self.e_core,
            "h1": self.h1.ravel().tolist(),
            "h2": self.h2.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Problem:
        if data.get("format") != "sosamp.problem":
            raise ParseError("not a serialized Problem")
        n = int(data["n_orb"])
        return cls(
            n,
            np.asarray(data["h1"], dtype=float).reshape(n, n),
            np.asarray(data["h2"], dtype=float).reshape((n,) * 4),
            float(data["e_core"]),
            int(data["eta"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> Problem:
        return cls.from_dict(json.loads(text))

    # Binary form, all little-endian: magic (8 bytes), version u32, n_orb u32,
    # eta u32, e_core f64, h1 (N^2 f64), h2 (N^4 f64), both in C order.
    def to_bytes(self) -> bytes:
        head = _BINARY_MAGIC + struct.pack("<IIId", _BINARY_VERSION, self.n_orb, self.eta, self.e_core)
        return head + self.h1.astype("<f8").tobytes() + self.h2.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> Problem:
        if blob[:8] != _BINARY_MAGIC:
            raise ParseError("bad magic in binary Problem")
        version, n, eta, e_core = struct.unpack_from("<IIId", blob, 8)
        if version != _BINARY_VERSION:
            raise ParseError(f"unsupported binary Problem version {version}")
        off = 8 + struct.calcsize("<IIId")
        expected = off + 8 * (n * n + n**4)
        if len(blob) != expected:
            raise ParseError(f"binary Problem has {len(blob)} bytes, expected {expected}")
        h1 = np.frombuffer(blob, dtype="<f8", count=n * n, offset=off).reshape(n, n)
        h2 = np.frombuffer(blob, dtype="<f8", count=n**4, offset=off + 8 * n * n).reshape((n,) * 4)
        return cls(n, h1.astype(float), h2.astype(float), e_core, eta)


# ---------------------------------------------------------------- FCIDUMP

_HEADER_RE = re.compile(r"&FCI\b(.*?)(?:&END|/)", re.IGNORECASE | re.DOTALL)


def _fortran_float(token: str) -> float:
    try:
        return float(token.replace("D", "E").replace("d", "e"))
    except ValueError as exc:
        raise ParseError(f"non-numeric value {token!r}") from exc


def _parse_header(body: str) -> dict[str, list[str]]:
    pieces = re.split(r"([A-Za-z_][A-Za-z0-9_]*)\s*=", body)
    if pieces[0].strip(" ,\n\t"):
        raise ParseError(f"unexpected header text {pieces[0].strip()!r}")
    out: dict[str, list[str]] = {}
    for key, raw in zip(pieces[1::2], pieces[2::2]):
        out[key.upper()] = [v for v in re.split(r"[,\s]+", raw) if v]
    return out


def parse_fcidump(text: str | IO[str]) -> Problem:
    """Parse FCIDUMP text (or a readable text stream) into a :class:`Problem`.

    Records are ``value p q r s`` with 1-based orbital labels; ``p q 0 0`` is a
    one-body entry and ``0 0 0 0`` the core energy. Each record fills every
    symmetry-equivalent slot. Conflicting duplicates are resolved by the last
    record, with a warning.
    """
    if not isinstance(text, str):
        text = text.read()
    match = _HEADER_RE.search(text)
    if match is None:
        raise ParseError("missing &FCI ... &END header")
    header = _parse_header(match.group(1))
    try:
        norb = int(header["NORB"][0])
        nelec = int(header.get("NELEC", ["0"])[0])
    except (KeyError, IndexError, ValueError) as exc:
        raise ParseError("header must define integer NORB and NELEC") from exc
    if norb < 1 or nelec < 0:
        raise ParseError(f"invalid NORB={norb} or NELEC={nelec}")

    h1 = np.zeros((norb, norb))
    h2 = np.zeros((norb,) * 4)
    seen1 = np.zeros((norb, norb), dtype=bool)
    seen2 = np.zeros((norb,) * 4, dtype=bool)
    e_core = 0.0

    for lineno, line in enumerate(text[match.end():].splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise ParseError(f"record {lineno}: expected 5 fields, got {len(parts)}")
        value = _fortran_float(parts[0])
        try:
            p, q, r, s = (int(x) for x in parts[1:])
        except ValueError as exc:
            raise ParseError(f"record {lineno}: non-integer index") from exc
        for idx in (p, q, r, s):
            if not 0 <= idx <= norb:
                raise IndexError(f"record {lineno}: index {idx} outside [0, {norb}]")
        if p == q == r == s == 0:
            e_core = value
        elif r == 0 and s == 0:
            if p == 0 or q == 0:
                raise ParseError(f"record {lineno}: malformed one-body indices")
            for a, b in {(p - 1, q - 1), (q - 1, p - 1)}:
                if seen1[a, b] and abs(h1[a, b] - value) > _CONFLICT_TOL:
                    warnings.warn(f"conflicting h1[{a},{b}] records; keeping the last", stacklevel=2)
                h1[a, b] = value
                seen1[a, b] = True
        else:
            if 0 in (p, q, r, s):
                raise ParseError(f"record {lineno}: malformed two-body indices")
            p, q, r, s = p - 1, q - 1, r - 1, s - 1
            slots = {(p, q, r, s), (q, p, r, s), (p, q, s, r), (q, p, s, r),
                     (r, s, p, q), (s, r, p, q), (r, s, q, p), (s, r, q, p)}
            for slot in slots:
                if seen2[slot] and abs(h2[slot] - value) > _CONFLICT_TOL:
                    warnings.warn(f"conflicting h2{slot} records; keeping the last", stacklevel=2)
                h2[slot] = value
                seen2[slot] = True
    return Problem(norb, h1, h2, e_core, nelec)


def write_fcidump(problem: Problem, ms2: int = 0) -> str:
    """Serialize to FCIDUMP with one record per symmetry-unique entry.

    Values use the shortest round-trip representation, so parsing the output
    reproduces every stored double exactly.
    """
    n = problem.n_orb
    buf = io.StringIO()
    buf.write(f" &FCI NORB={n},NELEC={problem.eta},MS2={ms2},\n")
    buf.write("  ORBSYM=" + ",".join(["1"] * n) + ",\n  ISYM=1,\n &END\n")
    h1, h2 = problem.h1, problem.h2
    for p in range(n):
        for q in range(p + 1):
            for r in range(n):
                for s in range(r + 1):
                    if p * (p + 1) // 2 + q < r * (r + 1) // 2 + s:
                        continue
                    v = h2[p, q, r, s]
                    if v != 0.0:
                        buf.write(f"{float(v)!r} {p + 1} {q + 1} {r + 1} {s + 1}\n")
    for p in range(n):
        for q in range(p + 1):
            if h1[p, q] != 0.0:
                buf.write(f"{float(h1[p, q])!r} {p + 1} {q + 1} 0 0\n")
    buf.write(f"{problem.e_core!r} 0 0 0 0\n")
    return buf.getvalue()


# ---------------------------------------------------------------- dense oracle

@dataclass(frozen=True)
class DenseOperator:
    """Fock-space matrix on ``2N`` spin-orbitals (dimension ``4**N``)."""

    n_orb: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.shape != (4**self.n_orb, 4**self.n_orb):
            raise ValueError(f"data shape {data.shape} does not match N={self.n_orb}")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return 4**self.n_orb

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def commutator_error(self, other: np.ndarray) -> float:
        other = np.asarray(other)
        return float(np.max(np.abs(self.data @ other - other @ self.data)))

    def __matmul__(self, other: DenseOperator) -> DenseOperator:
        return DenseOperator(self.n_orb, self.data @ other.data)


def mode_index(p: int, sigma: int, n_orb: int) -> int:
    return sigma * n_orb + p


@lru_cache(maxsize=16)
def _annihilators(n_orb: int) -> tuple[sp.csr_matrix, ...]:
    n_modes = 2 * n_orb
    dim = 1 << n_modes
    idx = np.arange(dim, dtype=np.int64)
    ops = []
    for m in range(n_modes):
        occupied = (idx >> m) & 1 == 1
        cols = idx[occupied]
        rows = cols ^ (1 << m)
        below = cols & ((1 << m) - 1)
        parity = np.array([bin(int(x)).count("1") & 1 for x in below], dtype=np.int64)
        vals = np.where(parity == 1, -1.0, 1.0)
        ops.append(sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim)))
    return tuple(ops)


def annihilator(p: int, sigma: int, n_orb: int) -> sp.csr_matrix:
    """Sparse matrix of ``a_{p sigma}``."""
    return _annihilators(n_orb)[mode_index(p, sigma, n_orb)]


@lru_cache(maxsize=16)
def _excitations(n_orb: int) -> tuple[tuple[sp.csr_matrix, ...], ...]:
    a = _annihilators(n_orb)
    out = []
    for p in range(n_orb):
        row = []
        for q in range(n_orb):
            e = sp.csr_matrix((4**n_orb, 4**n_orb))
            for s in (0, 1):
                e = e + a[s * n_orb + p].T @ a[s * n_orb + q]
            row.append(e.tocsr())
        out.append(tuple(row))
    return tuple(out)


def excitation(p: int, q: int, n_orb: int) -> sp.csr_matrix:
    """Sparse matrix of the spin-summed excitation ``E_pq``."""
    return _excitations(n_orb)[p][q]


@lru_cache(maxsize=16)
def occupation_numbers(n_orb: int) -> np.ndarray:
    """Total particle number of every basis state."""
    idx = np.arange(4**n_orb, dtype=np.int64)
    counts = np.zeros(idx.shape, dtype=np.int64)
    for m in range(2 * n_orb):
        counts += (idx >> m) & 1
    counts.setflags(write=False)
    return counts


def number_operator(n_orb: int) -> np.ndarray:
    return np.diag(occupation_numbers(n_orb).astype(float))


def spin_z_operator(n_orb: int) -> np.ndarray:
    idx = np.arange(4**n_orb, dtype=np.int64)
    up = sum(((idx >> m) & 1) for m in range(n_orb))
    down = sum(((idx >> (n_orb + m)) & 1) for m in range(n_orb))
    return np.diag(0.5 * (up - down).astype(float))


def one_body_matrix(h1: np.ndarray, n_orb: int) -> sp.csr_matrix:
    """Sparse ``sum_pq h1_pq E_pq``."""
    out = sp.csr_matrix((4**n_orb, 4**n_orb))
    for p in range(n_orb):
        for q in range(n_orb):
            if h1[p, q] != 0.0:
                out = out + h1[p, q] * excitation(p, q, n_orb)
    return out


def hamiltonian_matrix(h1: np.ndarray, h2: np.ndarray, constant: float = 0.0) -> np.ndarray:
    """Dense real matrix of ``sum h1 E + 1/2 sum h2 E E + constant``.

    ``h2`` need not carry any permutational symmetry.
    """
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    n = h1.shape[0]
    check_oracle_limit(n)
    dim = 4**n
    total = one_body_matrix(h1, n)
    for p in range(n):
        for q in range(n):
            block = h2[p, q]
            if not np.any(block):
                continue
            inner = one_body_matrix(block, n)
            total = total + 0.5 * (excitation(p, q, n) @ inner)
    dense = total.toarray() if sp.issparse(total) else np.asarray(total)
    dense = dense + constant * np.eye(dim)
    return dense


def build_dense_hamiltonian(p: Problem) -> DenseOperator:
    """Dense matrix of ``H + e_core`` for a :class:`Problem`."""
    check_oracle_limit(p.n_orb)
    return DenseOperator(p.n_orb, hamiltonian_matrix(p.h1, p.h2, p.e_core))


def build_majorana(p_index: int, sigma: int, x: int, n_orb: int) -> DenseOperator:
    """``gamma_{p sigma x}`` with ``a = (gamma_0 + i gamma_1) / 2``."""
    check_oracle_limit(n_orb)
    a = annihilator(p_index, sigma, n_orb)
    if x == 0:
        mat = (a + a.T).toarray().astype(complex)
    elif x == 1:
        mat = 1j * (a.T - a).toarray()
    else:
        raise ValueError("x must be 0 or 1")
    return DenseOperator(n_orb, mat)


def _check_unit(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > tol:
        raise NormalizationError(f"vector norm {np.linalg.norm(u)!r} is not 1")
    return u


def build_rotated_majorana(u: np.ndarray, sigma: int, x: int, n_orb: int) -> DenseOperator:
    """``gamma_{u sigma x} = sum_j u_j gamma_{j sigma x}`` for a unit vector ``u``."""
    u = _check_unit(u)
    if u.shape != (n_orb,):
        raise ValueError(f"u has shape {u.shape}, expected {(n_orb,)}")
    check_oracle_limit(n_orb)
    a = sp.csr_matrix((4**n_orb, 4**n_orb))
    for j, uj in enumerate(u):
        if uj != 0.0:
            a = a + uj * annihilator(j, sigma, n_orb)
    if x == 0:
        mat = (a + a.T).toarray().astype(complex)
    elif x == 1:
        mat = 1j * (a.T - a).toarray()
    else:
        raise ValueError("x must be 0 or 1")
    return DenseOperator(n_orb, mat)


def rotated_annihilator(u: np.ndarray, sigma: int, n_orb: int) -> np.ndarray:
    """Dense ``a_{u sigma} = sum_j u_j a_{j sigma}`` (``u`` need not be unit)."""
    out = sp.csr_matrix((4**n_orb, 4**n_orb))
    for j, uj in enumerate(np.asarray(u, dtype=float)):
        if uj != 0.0:
            out = out + uj * annihilator(j, sigma, n_orb)
    return out.toarray()


def ground_energy(op: DenseOperator | np.ndarray, eta: int | None = None) -> float:
    """Lowest eigenvalue, optionally restricted to the ``eta``-particle sector."""
    data = op.data if isinstance(op, DenseOperator) else np.asarray(op)
    n_orb = int(round(np.log(data.shape[0]) / np.log(4)))
    if eta is not None:
        sector = np.flatnonzero(occupation_numbers(n_orb) == eta)
        if sector.size == 0:
            raise ValueError(f"no basis states with {eta} particles")
        data = data[np.ix_(sector, sector)]
    return float(scipy.linalg.eigvalsh(data, subset_by_index=[0, 0])[0])


def sector_spectrum(op: DenseOperator | np.ndarray, eta: int) -> np.ndarray:
    """Sorted eigenvalues within the ``eta``-particle sector."""
    data = op.data if isinstance(op, DenseOperator) else np.asarray(op)
    n_orb = int(round(np.log(data.shape[0]) / np.log(4)))
    sector = np.flatnonzero(occupation_numbers(n_orb) == eta)
    return scipy.linalg.eigvalsh(data[np.ix_(sector, sector)])
