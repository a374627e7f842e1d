"""Representations of the composite state rho(t) on (A, B, a, b).

Three forms share one reduction interface (`reduced`, `field_pair`, and the
conservation diagnostics), so the measures never need the dense matrix:

DenseSnapshot     the full 4 N^2 square matrix (small N only)
ProductSnapshot   sum_k c_k M_k (x) M'_k across the (A, a) | (B, b) split
EnsembleSnapshot  sum_k |psi_k><psi_k| with unnormalized pure components
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from . import fock
from .fock import SLOTS, HilbertLayout
from .hamiltonians import excitation_numbers

DENSE_EIG_LIMIT = 2500


def _keep_slots(keep) -> tuple[int, ...]:
    idx = sorted({SLOTS[k] if isinstance(k, str) else int(k) for k in keep})
    if not idx:
        raise ValueError("keep set must be nonempty")
    if idx[0] < 0 or idx[-1] > 3:
        raise ValueError(f"invalid subsystems {keep!r}")
    return tuple(idx)


class _Snapshot:
    n_max: int

    @property
    def layout(self) -> HilbertLayout:
        return HilbertLayout.canonical(self.n_max)

    def excitation(self) -> float:
        n = self.n_max
        arm = np.diag(excitation_numbers(HilbertLayout((2, n))).astype(float))
        return float(np.real(np.trace(self.reduced("Aa") @ arm) + np.trace(self.reduced("Bb") @ arm)))

    def reduced_min_eig(self) -> float:
        return min(float(la.eigvalsh(self.reduced(k))[0]) for k in ("AB", "Aa", "Ab", "Bb"))

    def diagnostics(self) -> dict:
        return {
            "trace": self.trace(),
            "purity": self.purity(),
            "min_eig": self.min_eig(),
            "excitation": self.excitation(),
        }


class DenseSnapshot(_Snapshot):
    def __init__(self, rho: np.ndarray, n_max: int | None = None):
        rho = np.asarray(rho)
        if n_max is None:
            n_max = int(round(np.sqrt(rho.shape[0] / 4)))
        if rho.shape != (4 * n_max * n_max,) * 2:
            raise ValueError(f"matrix of shape {rho.shape} is not on a (2, 2, N, N) layout")
        self.rho = rho
        self.n_max = n_max

    def reduced(self, keep) -> np.ndarray:
        return fock.partial_trace(self.rho, _keep_slots(keep), self.layout)

    def field_pair(self, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
        rab = self.reduced("ab")
        q = np.kron(pa, pb)
        return q.conj().T @ rab @ q

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho.conj().T, self.rho)))

    def min_eig(self) -> float:
        if self.rho.shape[0] <= DENSE_EIG_LIMIT:
            return float(la.eigvalsh(self.rho)[0])
        return self.reduced_min_eig()

    def dense(self) -> np.ndarray:
        return self.rho


def _arm_reduce(m: np.ndarray, n: int, keep_atom: bool, keep_field: bool):
    t = m.reshape(2, n, 2, n)
    if keep_atom and keep_field:
        return m
    if keep_atom:
        return np.einsum("iaja->ij", t)
    if keep_field:
        return np.einsum("iaib->ab", t)
    return np.trace(m)


class ProductSnapshot(_Snapshot):
    """rho = sum_k coef_k * arm1_k (x) arm2_k, arm matrices on (atom, field)."""

    def __init__(self, terms, n_max: int, spectrum_floor: float | None = None):
        self.terms = [(complex(c), m1, m2) for c, m1, m2 in terms]
        self.n_max = n_max
        # certified lower bound on the spectrum, used when the matrix is too large
        self.spectrum_floor = spectrum_floor

    def reduced(self, keep) -> np.ndarray:
        idx = _keep_slots(keep)
        n = self.n_max
        k1 = (0 in idx, 2 in idx)   # (A, a)
        k2 = (1 in idx, 3 in idx)   # (B, b)
        out = None
        for c, m1, m2 in self.terms:
            r1 = _arm_reduce(m1, n, *k1)
            r2 = _arm_reduce(m2, n, *k2)
            if np.ndim(r1) == 0 or np.ndim(r2) == 0:
                term = c * r1 * r2
            else:
                term = c * np.kron(r1, r2)
            out = term if out is None else out + term
        # kron above orders the kept factors (arm1..., arm2...); restore canonical order
        arm_order = [s for s in (0, 2) if s in idx] + [s for s in (1, 3) if s in idx]
        if arm_order != list(idx) and np.ndim(out) == 2:
            dims = [2 if s < 2 else n for s in arm_order]
            perm = [arm_order.index(s) for s in idx]
            k = len(dims)
            t = out.reshape(dims * 2).transpose(perm + [p + k for p in perm])
            d = out.shape[0]
            out = t.reshape(d, d)
        return out

    def field_pair(self, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
        n = self.n_max
        out = None
        for c, m1, m2 in self.terms:
            x = pa.conj().T @ _arm_reduce(m1, n, False, True) @ pa
            y = pb.conj().T @ _arm_reduce(m2, n, False, True) @ pb
            term = c * np.kron(x, y)
            out = term if out is None else out + term
        return out

    def trace(self) -> float:
        return float(np.real(sum(c * np.trace(m1) * np.trace(m2) for c, m1, m2 in self.terms)))

    def purity(self) -> float:
        tot = 0.0
        for c, m1, m2 in self.terms:
            for d, n1, n2 in self.terms:
                tot += c * d * np.vdot(m1.conj().T, n1) * np.vdot(m2.conj().T, n2)
        return float(np.real(tot))

    def min_eig(self) -> float:
        if self.spectrum_floor is not None:
            return self.spectrum_floor
        if 4 * self.n_max**2 > DENSE_EIG_LIMIT:
            raise ValueError("snapshot too large for a dense eigensolve and no spectral floor given")
        return float(la.eigvalsh(self.dense())[0])

    def dense(self) -> np.ndarray:
        n = self.n_max
        out = np.zeros((4 * n * n,) * 2, dtype=complex)
        for c, m1, m2 in self.terms:
            out += c * np.kron(m1, m2)
        # (A, a, B, b) -> (A, B, a, b)
        t = out.reshape([2, n, 2, n] * 2).transpose(0, 2, 1, 3, 4, 6, 5, 7)
        return t.reshape(out.shape)


class EnsembleSnapshot(_Snapshot):
    """rho = sum_k |psi_k><psi_k|, psi of shape (K, 2, 2, N, N)."""

    def __init__(self, psi: np.ndarray):
        if psi.ndim != 5 or psi.shape[1:3] != (2, 2) or psi.shape[3] != psi.shape[4]:
            raise ValueError(f"ensemble array has shape {psi.shape}")
        self.psi = psi
        self.n_max = psi.shape[3]

    def reduced(self, keep) -> np.ndarray:
        idx = _keep_slots(keep)
        rest = [s for s in range(4) if s not in idx]
        dims = self.psi.shape[1:]
        dk = int(np.prod([dims[s] for s in idx]))
        dr = int(np.prod([dims[s] for s in rest])) if rest else 1
        k = self.psi.shape[0]
        x = self.psi.transpose([0] + [s + 1 for s in idx] + [s + 1 for s in rest])
        x = x.reshape(k, dk, dr).transpose(1, 0, 2).reshape(dk, k * dr)
        return x @ x.conj().T

    def field_pair(self, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
        n = self.n_max
        w = self.psi.reshape(-1, n, n)
        wp = pa.conj().T @ w @ pb.conj()
        x = wp.reshape(w.shape[0], -1)
        return x.T @ x.conj()

    def _flat(self):
        return self.psi.reshape(self.psi.shape[0], -1)

    def trace(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2))

    def gram(self) -> np.ndarray:
        f = self._flat()
        return f.conj() @ f.T

    def purity(self) -> float:
        return float(np.sum(np.abs(self.gram()) ** 2))

    def min_eig(self) -> float:
        # nonzero spectrum of rho equals the Gram spectrum; the rest is exactly 0
        lo = float(la.eigvalsh(self.gram())[0])
        k, d = self._flat().shape
        return lo if k >= d else min(lo, 0.0)

    def dense(self) -> np.ndarray:
        f = self._flat()
        return f.T @ f.conj()
