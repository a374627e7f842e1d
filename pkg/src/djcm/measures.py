"""Entanglement measures, sudden-death intervals and Wigner functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .fock import HilbertLayout
from .snapshots import DenseSnapshot

MEASURES = ("C_AB", "N_Aa", "N_Ab", "N_ab", "N_Ba", "N_Bb")
DEFAULT_MEASURES = MEASURES[:4]
ESD_THRESHOLD = 1e-4
SUPPORT_TOL = 1e-15
IMAG_TOL = 1e-8
SWAP_TOL = 1e-12

_SY = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(_SY, _SY)


def spin_flip(rho: np.ndarray) -> np.ndarray:
    return _YY @ rho.conj() @ _YY


def concurrence(rho: np.ndarray, method: str = "svd") -> float:
    """Two-qubit concurrence max(0, L1 - L2 - L3 - L4).

    L_i are the square roots of the eigenvalues of rho rho~.  With rho = W W^dag
    they are also the singular values of W^T (sy x sy) W, which avoids taking
    square roots of round-off sized eigenvalues ("svd", default).  "eig" runs the
    general eigensolve of rho rho~ directly.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"concurrence needs a two-qubit (4x4) state, got {rho.shape}")
    if method == "svd":
        w, v = la.eigh(0.5 * (rho + rho.conj().T))
        half = v * np.sqrt(np.clip(w, 0.0, None))
        lam = la.svdvals(half.T @ _YY @ half)
    elif method == "eig":
        ev = la.eigvals(rho @ spin_flip(rho))
        if np.abs(ev.imag).max() > IMAG_TOL:
            raise ArithmeticError(f"rho rho~ has complex eigenvalues ({np.abs(ev.imag).max():.3g})")
        lam = np.sqrt(np.clip(ev.real, 0.0, None))
    else:
        raise ValueError(f"unknown method {method!r}")
    lam = np.sort(lam)[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def _split_groups(layout: HilbertLayout, split):
    n = len(layout)
    if split is None:
        if n != 2:
            raise ValueError("a split is required for layouts with more than two factors")
        split = ((0,), (1,))
    try:
        g1, g2 = (tuple(sorted({layout.slot(s) for s in g})) for g in split)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid split {split!r}") from exc
    if not g1 or not g2 or set(g1) & set(g2) or sorted(g1 + g2) != list(range(n)):
        raise ValueError(f"split {split!r} is not a bipartition of {layout.dims}")
    return g1, g2


def negativity(rho: np.ndarray, layout=None, split=None) -> float:
    """Sum of |negative eigenvalues| of the partial transpose.

    The factor with the smaller dimension is transposed (the second one on a tie).
    """
    rho = np.asarray(rho, dtype=complex)
    if layout is None:
        d = rho.shape[0]
        q = int(round(math.sqrt(d)))
        if q * q != d:
            raise ValueError("layout required for a non-square dimension")
        layout = HilbertLayout((q, q))
    elif not isinstance(layout, HilbertLayout):
        layout = HilbertLayout(tuple(layout))
    if rho.shape != (layout.total, layout.total):
        raise ValueError(f"matrix {rho.shape} does not match layout {layout.dims}")
    g1, g2 = _split_groups(layout, split)
    d1 = math.prod(layout.dims[i] for i in g1)
    d2 = math.prod(layout.dims[i] for i in g2)
    group = g1 if d1 < d2 else g2
    n = len(layout)
    t = rho.reshape(layout.dims * 2)
    perm = list(range(2 * n))
    for i in group:
        perm[i], perm[n + i] = n + i, i
    pt = t.transpose(perm).reshape(rho.shape)
    ev = la.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(max(0.0, -ev[ev < 0].sum()))


def support(rho: np.ndarray, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Orthonormal columns spanning the eigenvectors of rho above tol."""
    w, v = la.eigh(0.5 * (rho + rho.conj().T))
    keep = w > tol
    if not keep.any():
        raise ArithmeticError("reduced state has empty support")
    return v[:, keep]


def _swap_real_basis(r: int) -> sp.csr_matrix:
    """Unitary onto {e_ii, (e_ij + e_ji)/sqrt2, i(e_ij - e_ji)/sqrt2} of C^r x C^r.

    A matrix X with X = S conj(X) S (S the factor swap) is real in this basis.
    """
    rows, cols, vals = [], [], []
    col = 0
    h = 1 / math.sqrt(2)
    for i in range(r):
        rows.append(i * r + i); cols.append(col); vals.append(1.0)
        col += 1
        for j in range(i + 1, r):
            rows += [i * r + j, j * r + i]; cols += [col, col]; vals += [h, h]
            rows += [i * r + j, j * r + i]; cols += [col + 1, col + 1]; vals += [1j * h, -1j * h]
            col += 2
    return sp.csr_matrix((vals, (rows, cols)), shape=(r * r, r * r), dtype=complex)


def _pt_second(m: np.ndarray, r1: int, r2: int) -> np.ndarray:
    return m.reshape(r1, r2, r1, r2).transpose(0, 3, 2, 1).reshape(m.shape)


def _negativity_swap_symmetric(m: np.ndarray, r: int) -> float:
    pt = _pt_second(m, r, r)
    q = _swap_real_basis(r)
    qx = q.conj().T @ pt
    y = np.real((q.T @ qx.T).T)
    ev = la.eigvalsh(0.5 * (y + y.T))
    return float(max(0.0, -ev[ev < 0].sum()))


def field_negativity(state, support_tol: float | None = None) -> float:
    """Field a | field b negativity, computed on supp(rho_a) x supp(rho_b).

    The partial transpose of rho_ab lives in supp(rho_a) x conj(supp(rho_b)),
    so projecting first loses only the discarded eigenvalue weight.  When the
    state is symmetric under exchanging the two arms, the transposed matrix is
    real in a symmetric/antisymmetric basis and a real eigensolve is used.
    """
    tol = SUPPORT_TOL if support_tol is None else support_tol
    ra, rb = state.reduced("a"), state.reduced("b")
    pa = support(ra, tol)
    symmetric = np.abs(ra - rb).max() < SWAP_TOL
    pb = pa if symmetric else support(rb, tol)
    m = state.field_pair(pa, pb)
    r = pa.shape[1]
    if symmetric:
        t = m.reshape(r, r, r, r)
        if np.abs(t - t.transpose(1, 0, 3, 2)).max() < SWAP_TOL:
            return _negativity_swap_symmetric(m, r)
    return negativity(m, HilbertLayout((r, pb.shape[1])))


def measure_suite(state, names=DEFAULT_MEASURES, support_tol: float | None = None) -> dict:
    """Requested measures of a composite state (array on (A, B, a, b) or snapshot)."""
    if isinstance(state, np.ndarray):
        state = DenseSnapshot(state)
    bad = [k for k in names if k not in MEASURES]
    if bad:
        raise ValueError(f"unknown measures {bad}; choose from {MEASURES}")
    n = state.n_max
    out = {}
    for k in names:
        if k == "C_AB":
            out[k] = concurrence(state.reduced("AB"))
        elif k == "N_ab":
            out[k] = field_negativity(state, support_tol)
        else:
            out[k] = negativity(state.reduced(k[2:]), HilbertLayout((2, n)))
    return out


# -- sudden death --------------------------------------------------------------

@dataclass
class EsdIntervals:
    threshold: float = ESD_THRESHOLD
    intervals: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def after(self, t0: float) -> "EsdIntervals":
        """Intervals ending after t0, clipped to start no earlier than t0."""
        return EsdIntervals(self.threshold, [(max(a, t0), b) for a, b in self.intervals if b > t0])

    def __len__(self):
        return len(self.intervals)


def _crossing(t0, t1, v0, v1, thr):
    if v1 == v0:
        return t0
    return t0 + (thr - v0) * (t1 - t0) / (v1 - v0)


def esd_intervals(times, values, threshold: float = ESD_THRESHOLD) -> EsdIntervals:
    """Maximal runs with value < threshold, ends interpolated at the crossings."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.size == 0 or t.shape != v.shape:
        raise ValueError("times and values must be matching nonempty 1-D arrays")
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    below = v < threshold
    out = []
    i = 0
    while i < t.size:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < t.size and below[j + 1]:
            j += 1
        start = t[0] if i == 0 else _crossing(t[i - 1], t[i], v[i - 1], v[i], threshold)
        end = t[-1] if j == t.size - 1 else _crossing(t[j], t[j + 1], v[j], v[j + 1], threshold)
        out.append((float(start), float(end)))
        i = j + 1
    return EsdIntervals(threshold, out)


# -- Wigner function -----------------------------------------------------------

@dataclass
class WignerGrid:
    re: np.ndarray
    im: np.ndarray
    values: np.ndarray   # values[i, j] at alpha = re[j] + 1j * im[i]

    @property
    def re_range(self):
        return (float(self.re[0]), float(self.re[-1]))

    @property
    def im_range(self):
        return (float(self.im[0]), float(self.im[-1]))

    @property
    def resolution(self):
        return (self.re.size, self.im.size)

    def integral(self) -> float:
        dx = (self.re[-1] - self.re[0]) / (self.re.size - 1)
        dy = (self.im[-1] - self.im[0]) / (self.im.size - 1)
        return float(self.values.sum() * dx * dy)


def wigner_values(rho: np.ndarray, alphas) -> np.ndarray:
    """W(alpha) = (2/pi) Tr[rho D(alpha) P D(alpha)^dag], P the parity.

    Uses the ladder recurrence for the displaced-parity matrix elements
    w_mn(alpha), so no displacement operator is ever formed.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("wigner needs a single-mode density matrix")
    a = np.asarray(alphas, dtype=complex)
    shape = a.shape
    a = a.ravel()
    n = rho.shape[0]
    sq = np.sqrt(np.arange(n, dtype=float))
    two_a, two_ac = 2 * a, 2 * np.conj(a)
    row = np.empty((n, a.size), dtype=complex)
    row[0] = (2 / np.pi) * np.exp(-2 * np.abs(a) ** 2)
    for k in range(1, n):
        row[k] = two_ac * row[k - 1] / sq[k]
    # row m holds w_mk for k >= m; W = sum_mk rho_km w_mk, w Hermitian in (m, k)
    w = np.real(rho[0, 0] * row[0])
    if n > 1:
        w = w + 2 * np.real(rho[1:, 0] @ row[1:])
    for m in range(1, n):
        new = np.zeros_like(row)
        new[m:] = (two_a * row[m:] - sq[m:, None] * row[m - 1:n - 1]) / sq[m]
        w = w + np.real(rho[m, m] * new[m])
        if m + 1 < n:
            w = w + 2 * np.real(rho[m + 1:, m] @ new[m + 1:])
        row = new
    return w.reshape(shape)


def wigner(rho: np.ndarray, re_range=(-5.0, 5.0), im_range=(-5.0, 5.0), resolution=201) -> WignerGrid:
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 points per axis")
    re = np.linspace(*re_range, int(nx))
    im = np.linspace(*im_range, int(ny))
    alphas = re[None, :] + 1j * im[:, None]
    return WignerGrid(re, im, wigner_values(rho, alphas))
