"""Truncated bosonic and two-level operator algebra on dense complex matrices.

Subsystem ordering for the full model is fixed as (atom A, atom B, field a,
field b).  Two-level bases are ordered (|e>, |g>); Fock bases start at |0>.
"""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

TOL_HERM = 1e-10
TOL_TRACE = 1e-8
TOL_PSD = 1e-8
TOL_UNITARY = 1e-8

SLOTS = {"A": 0, "B": 1, "a": 2, "b": 3}


class DensityError(ValueError):
    """A matrix failed the density-matrix checks."""


@dataclass(frozen=True)
class HilbertLayout:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("layout needs at least one subsystem")
        if any(d < 1 for d in dims):
            raise ValueError(f"subsystem dimensions must be >= 1, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def canonical(cls, n_max: int) -> "HilbertLayout":
        return cls((2, 2, n_max, n_max))

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)

    def concat(self, other: "HilbertLayout") -> "HilbertLayout":
        return HilbertLayout(self.dims + other.dims)

    def slot(self, key) -> int:
        idx = SLOTS[key] if isinstance(key, str) else int(key)
        if not 0 <= idx < len(self.dims):
            raise IndexError(f"subsystem {key!r} not in layout {self.dims}")
        return idx


def annihilation(n_max: int) -> np.ndarray:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return np.diag(np.sqrt(np.arange(1, n_max, dtype=float)), 1).astype(complex)


def creation(n_max: int) -> np.ndarray:
    return annihilation(n_max).T.copy()


def number(n_max: int) -> np.ndarray:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    return np.diag(np.arange(n_max, dtype=float)).astype(complex)


def pauli_ops():
    """Return (sigma_z, sigma_plus, sigma_minus) in the (|e>, |g>) basis."""
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    splus = np.array([[0, 1], [0, 0]], dtype=complex)
    sminus = splus.T.copy()
    return sz, splus, sminus


def displacement(alpha: complex, n_max: int) -> np.ndarray:
    a = annihilation(n_max)
    return la.expm(alpha * a.conj().T - np.conj(alpha) * a)


def squeeze(zeta: complex, n_max: int) -> np.ndarray:
    """exp(-zeta a^dag^2 / 2 + conj(zeta) a^2 / 2), truncated."""
    a = annihilation(n_max)
    ad = a.conj().T
    return la.expm(-0.5 * zeta * (ad @ ad) + 0.5 * np.conj(zeta) * (a @ a))


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max())


def tensor(*ops):
    if len(ops) == 1 and isinstance(ops[0], (list, tuple)):
        ops = tuple(ops[0])
    if not ops:
        raise ValueError("tensor needs at least one operand")
    if any(sp.issparse(o) for o in ops):
        return reduce(lambda x, y: sp.kron(x, y, format="csr"), ops)
    return reduce(np.kron, ops)


def embed(op, slot, layout: HilbertLayout, sparse: bool = False):
    """Place `op` on one factor of `layout`, identity elsewhere."""
    idx = layout.slot(slot)
    if op.shape != (layout.dims[idx], layout.dims[idx]):
        raise ValueError(
            f"operator shape {op.shape} does not match slot dimension {layout.dims[idx]}"
        )
    if sparse:
        factors = [sp.identity(d, dtype=complex, format="csr") for d in layout.dims]
        factors[idx] = sp.csr_matrix(op)
    else:
        factors = [np.eye(d, dtype=complex) for d in layout.dims]
        factors[idx] = np.asarray(op, dtype=complex)
    return tensor(factors)


def hermiticity_defect(h) -> float:
    if sp.issparse(h):
        d = h - h.conj().T
        return float(abs(d).max()) if d.nnz else 0.0
    return float(np.abs(h - h.conj().T).max())


class SpectralPropagator:
    """Cached eigendecomposition h = V diag(w) V^dag; evaluates exp(-i h t)."""

    def __init__(self, h: np.ndarray):
        h = np.asarray(h)
        if hermiticity_defect(h) > TOL_HERM:
            raise ValueError("hamiltonian is not Hermitian within tolerance")
        self.evals, self.evecs = la.eigh(h)
        self.dim = h.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        return (self.evecs * np.exp(-1j * self.evals * t)) @ self.evecs.conj().T

    def evolve(self, rho: np.ndarray, t: float) -> np.ndarray:
        u = self(t)
        return u @ rho @ u.conj().T


_PROP_CACHE: "OrderedDict[tuple, SpectralPropagator]" = OrderedDict()
_PROP_LOCK = threading.Lock()
_PROP_CACHE_SIZE = 8


def propagator_for(h: np.ndarray) -> SpectralPropagator:
    h = np.ascontiguousarray(h, dtype=complex)
    key = (h.shape, hash(h.tobytes()))
    with _PROP_LOCK:
        prop = _PROP_CACHE.get(key)
        if prop is not None:
            _PROP_CACHE.move_to_end(key)
            return prop
    prop = SpectralPropagator(h)
    with _PROP_LOCK:
        _PROP_CACHE[key] = prop
        while len(_PROP_CACHE) > _PROP_CACHE_SIZE:
            _PROP_CACHE.popitem(last=False)
    return prop


def hermitian_evolve(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) through the (cached) spectral decomposition of h."""
    return propagator_for(h)(t)


def _letters(n):
    return "abcdefghijklmnopqrstuvwxyz"[:n]


def partial_trace(rho: np.ndarray, keep, layout: HilbertLayout) -> np.ndarray:
    keep_idx = sorted({layout.slot(k) for k in keep})
    if not keep_idx:
        raise ValueError("keep set must be nonempty")
    n = len(layout)
    if rho.shape != (layout.total, layout.total):
        raise ValueError("matrix does not match layout")
    row = list(_letters(n))
    col = [c.upper() for c in row]
    for i in range(n):
        if i not in keep_idx:
            col[i] = row[i]
    out = "".join(row[i] for i in keep_idx) + "".join(col[i] for i in keep_idx)
    t = rho.reshape(layout.dims * 2)
    red = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    d = int(np.prod([layout.dims[i] for i in keep_idx]))
    return red.reshape(d, d)


def partial_transpose(rho: np.ndarray, subsystem, layout: HilbertLayout) -> np.ndarray:
    idx = layout.slot(subsystem)
    n = len(layout)
    t = rho.reshape(layout.dims * 2)
    t = np.swapaxes(t, idx, n + idx)
    return t.reshape(layout.total, layout.total)


def check_density(rho: np.ndarray, tol_herm=TOL_HERM, tol_trace=TOL_TRACE, tol_psd=TOL_PSD):
    """Raise DensityError unless rho is Hermitian, unit-trace and PSD within tolerance."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DensityError(f"not a square matrix: {rho.shape}")
    herm = hermiticity_defect(rho)
    if herm > tol_herm:
        raise DensityError(f"hermiticity defect {herm:.3g}")
    tr = np.trace(rho)
    if abs(tr - 1) > tol_trace:
        raise DensityError(f"trace {tr.real:.12g} differs from 1")
    lo = la.eigvalsh(rho)[0]
    if lo < -tol_psd:
        raise DensityError(f"smallest eigenvalue {lo:.3g}")
    return rho
