"""Time evolution of the composite state.

Four routes, all exact for the truncated (time-independent) Hamiltonian:

dense        U rho0 U^dag with one eigendecomposition of the full H
factorized   closed-form Rabi-doublet blocks per arm (pure JC only)
product      per-arm spectral propagators (JC plus Kerr and/or detuning)
sector       full H split into conserved-excitation blocks, applied to the
             pure-state ensemble of rho0 (needed once the arms interact)

The dense route is the literal definition and serves as the oracle; the others
exist because a dense rho(t) at N ~ 60 no longer fits in memory.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from . import fock
from .fock import HilbertLayout
from .hamiltonians import ModelConfig, arm_hamiltonian, build_hamiltonian, excitation_numbers
from .measures import DEFAULT_MEASURES, measure_suite
from .snapshots import DenseSnapshot, EnsembleSnapshot, ProductSnapshot
from .states import ProductInitial

ROUTES = ("auto", "dense", "factorized", "product", "sector")
ENSEMBLE_DROP = 1e-14
LOW_RANK_TOL = 1e-15


@dataclass
class Trajectory:
    times: np.ndarray
    measures: dict[str, np.ndarray]
    states: list | None = None
    diagnostics: dict[str, np.ndarray] | None = None
    n_max: int = 0
    route: str = ""

    def __post_init__(self):
        self.times = check_times(self.times)
        for k, v in self.measures.items():
            if len(v) != len(self.times):
                raise ValueError(f"measure {k} has {len(v)} values for {len(self.times)} times")

    def record(self, i: int) -> dict:
        return {k: float(v[i]) for k, v in self.measures.items()}


def check_times(times) -> np.ndarray:
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(t)) or t[0] < 0:
        raise ValueError("times must be finite and >= 0")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    return t


def time_grid(t_max: float = 25.0, points: int = 400) -> np.ndarray:
    if t_max <= 0 or points < 2:
        raise ValueError("time grid needs t_max > 0 and at least 2 points")
    return np.linspace(0.0, t_max, points)


# -- closed-form blocks --------------------------------------------------------

@dataclass(frozen=True)
class PropagatorBlocks:
    """Single-arm propagator [[C, S'], [S, C']] on the (|e,n>, |g,n>) blocks."""

    c: np.ndarray
    c_p: np.ndarray
    s: np.ndarray
    s_p: np.ndarray

    def assemble(self, check: bool = True) -> np.ndarray:
        u = np.block([[self.c, self.s_p], [self.s, self.c_p]])
        if check:
            d = fock.unitarity_defect(u)
            if d > fock.TOL_UNITARY:
                raise ArithmeticError(f"assembled propagator not unitary (defect {d:.3g})")
        return u


def rabi_frequencies(model: str, lam: float, n_max: int) -> np.ndarray:
    """Omega_n for the doublet {|e,n>, |g,n+1>}, n = 0..n_max-2."""
    m = np.arange(1, n_max, dtype=float)
    model = model.upper()
    if model == "DJCM":
        return lam * np.sqrt(m)
    if model == "IDDJCM":
        return lam * m
    raise ValueError(f"unknown model {model!r}")


def factorized_blocks(model: str, lam: float, t: float, n_max: int) -> PropagatorBlocks:
    if t < 0:
        raise ValueError("t must be >= 0")
    w = rabi_frequencies(model, lam, n_max) * t
    cos, sin = np.cos(w), np.sin(w)
    # |e, N-1> has no partner inside the truncation, so it stays put
    c = np.diag(np.append(cos, 1.0)).astype(complex)
    c_p = np.diag(np.insert(cos, 0, 1.0)).astype(complex)
    s = np.diag(-1j * sin, -1)
    return PropagatorBlocks(c, c_p, s, s.T.copy())


# -- shared helpers ------------------------------------------------------------

def _parallel_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _collect(times, snapshots_fn, names, keep_states, diagnostics, threads, n_max, route,
             support_tol):
    """Evaluate measures (and optionally diagnostics/snapshots) at every time."""

    def one(t):
        snap = snapshots_fn(t)
        rec = measure_suite(snap, names, support_tol=support_tol)
        diag = snap.diagnostics() if diagnostics else None
        return rec, diag, (snap if keep_states else None)

    results = _parallel_map(one, list(times), threads)
    measures = {k: np.array([r[0][k] for r in results]) for k in results[0][0]}
    diag = None
    if diagnostics:
        diag = {k: np.array([r[1][k] for r in results]) for k in results[0][1]}
    states = [r[2] for r in results] if keep_states else None
    return Trajectory(times, measures, states, diag, n_max, route)


def _as_dense_initial(rho0, layout):
    if isinstance(rho0, ProductInitial):
        return rho0.dense()
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (layout.total, layout.total):
        raise ValueError(f"state of shape {rho0.shape} does not match layout {layout.dims}")
    return rho0


# -- dense route ---------------------------------------------------------------

def spectral_propagate(rho0, h, times, n_max: int | None = None, measures=DEFAULT_MEASURES,
                       keep_states: bool = False, diagnostics: bool = False, threads: int = 1,
                       support_tol: float | None = None) -> Trajectory:
    """rho(t) = U(t) rho0 U(t)^dag with U from one cached eigendecomposition of h."""
    times = check_times(times)
    h = h.toarray() if hasattr(h, "toarray") else np.asarray(h)
    if n_max is None:
        n_max = int(round(math.sqrt(h.shape[0] / 4)))
    layout = HilbertLayout.canonical(n_max)
    if h.shape != (layout.total, layout.total):
        raise ValueError(f"hamiltonian of shape {h.shape} does not match layout {layout.dims}")
    rho0 = _as_dense_initial(rho0, layout)
    prop = fock.propagator_for(h)
    v = prop.evecs
    w = prop.evals
    # low-rank rho0 = F F^dag: propagate the factor, dropping only round-off eigenvalues
    p, q = la.eigh(rho0)
    keep = p > LOW_RANK_TOL * p[-1]
    if 2 * keep.sum() <= len(p):
        ft = v.conj().T @ (q[:, keep] * np.sqrt(p[keep]))

        def snap(t):
            x = v @ (np.exp(-1j * w * t)[:, None] * ft)
            return DenseSnapshot(x @ x.conj().T, n_max)
    else:
        rt = v.conj().T @ rho0 @ v

        def snap(t):
            ph = np.exp(-1j * w * t)
            rho = v @ (rt * np.outer(ph, ph.conj())) @ v.conj().T
            return DenseSnapshot(rho, n_max)

    return _collect(times, snap, measures, keep_states, diagnostics, threads, n_max, "dense",
                    support_tol)


# -- product-form routes -------------------------------------------------------

def _product_terms(initial: ProductInitial, u1: np.ndarray, u2: np.ndarray, n: int):
    r = initial.rho_atoms
    x1 = [u1[:, i * n:(i + 1) * n] for i in range(2)]
    x2 = [u2[:, i * n:(i + 1) * n] for i in range(2)]
    cache1, cache2, terms = {}, {}, []
    for ia in range(2):
        for ib in range(2):
            for ja in range(2):
                for jb in range(2):
                    c = r[2 * ia + ib, 2 * ja + jb]
                    if c == 0:
                        continue
                    if (ia, ja) not in cache1:
                        cache1[ia, ja] = x1[ia] @ initial.rho_a @ x1[ja].conj().T
                    if (ib, jb) not in cache2:
                        cache2[ib, jb] = x2[ib] @ initial.rho_b @ x2[jb].conj().T
                    terms.append((c, cache1[ia, ja], cache2[ib, jb]))
    return terms


def spectrum_floor(initial: ProductInitial, u1: np.ndarray, u2: np.ndarray) -> float:
    """Lower bound on the spectrum of (U1 x U2) rho0 (U1 x U2)^dag.

    With s_min, s_max the extreme singular values of U1 x U2, the congruence
    maps rho0 >= l into >= l s_max^2 (l < 0) or >= l s_min^2 (l >= 0).
    """
    lo = hi = 1.0
    for u in (u1, u2):
        s = la.svdvals(u)
        lo, hi = lo * s[-1], hi * s[0]
    ext = [la.eigvalsh(m)[[0, -1]] for m in (initial.rho_atoms, initial.rho_a, initial.rho_b)]
    l = min(x * y * z for x in ext[0] for y in ext[1] for z in ext[2])
    return float(l * (hi**2 if l < 0 else lo**2))


def _check_initial(initial):
    if not isinstance(initial, ProductInitial):
        raise TypeError("product-form routes need a ProductInitial state")
    if initial.rho_a.shape != initial.rho_b.shape:
        raise ValueError("both cavities must share one Fock cutoff")
    if initial.rho_atoms.shape != (4, 4):
        raise ValueError("atomic state must be 4x4")
    return initial.n_max


def factorized_propagate(initial: ProductInitial, cfg: ModelConfig | str, lam: float = 1.0,
                         times=None, measures=DEFAULT_MEASURES, keep_states: bool = False,
                         diagnostics: bool = False, threads: int = 1,
                         support_tol: float | None = None) -> Trajectory:
    """Closed-form block propagation, U = U1 (x) U2; interaction-free models only."""
    if isinstance(cfg, str):
        cfg = ModelConfig(model=cfg, lam=lam)
    if not cfg.interaction_free:
        raise ValueError("factorized propagation requires all interaction strengths to be zero")
    times = check_times(time_grid() if times is None else times)
    n = _check_initial(initial)

    def snap(t):
        u = factorized_blocks(cfg.model, cfg.lam, t, n).assemble()
        floor = spectrum_floor(initial, u, u) if diagnostics else None
        return ProductSnapshot(_product_terms(initial, u, u, n), n, floor)

    return _collect(times, snap, measures, keep_states, diagnostics, threads, n, "factorized",
                    support_tol)


def product_propagate(initial: ProductInitial, cfg: ModelConfig, times, measures=DEFAULT_MEASURES,
                      keep_states: bool = False, diagnostics: bool = False, threads: int = 1,
                      support_tol: float | None = None) -> Trajectory:
    """Per-arm spectral propagation; allows Kerr and detuning but no cross-arm term."""
    times = check_times(times)
    n = _check_initial(initial)
    prop = fock.propagator_for(arm_hamiltonian(cfg, n))

    def snap(t):
        u = prop(t)
        floor = spectrum_floor(initial, u, u) if diagnostics else None
        return ProductSnapshot(_product_terms(initial, u, u, n), n, floor)

    return _collect(times, snap, measures, keep_states, diagnostics, threads, n, "product",
                    support_tol)


# -- excitation-sector route ---------------------------------------------------

def initial_ensemble(initial: ProductInitial, drop: float = ENSEMBLE_DROP) -> np.ndarray:
    """Pure components sqrt(p) |psi> of rho0, shape (K, 2, 2, N, N).

    Components are taken from the eigen-decompositions of the three factors and
    the lightest ones discarded while their summed weight stays below `drop`.
    """
    n = initial.n_max
    parts = []
    for m in (initial.rho_atoms, initial.rho_a, initial.rho_b):
        w, v = la.eigh(m)
        parts.append((np.clip(w, 0.0, None), v))
    (wa, va), (w1, v1), (w2, v2) = parts
    weights = wa[:, None, None] * w1[None, :, None] * w2[None, None, :]
    flat = weights.ravel()
    order = np.argsort(flat)
    dropped = np.cumsum(flat[order])
    n_drop = int(np.searchsorted(dropped, drop, side="right"))
    keep = np.sort(order[n_drop:])
    i, j, k = np.unravel_index(keep, weights.shape)
    amp = np.sqrt(flat[keep])
    psi = np.einsum("m,xm,am,bm->mxab", amp, va[:, i], v1[:, j], v2[:, k])
    return psi.reshape(len(keep), 2, 2, n, n)


@dataclass
class SectorPropagator:
    """Eigendecompositions of H restricted to each conserved-excitation block."""

    n_max: int
    blocks: list = field(default_factory=list)   # (indices, evals, evecs)

    @classmethod
    def build(cls, cfg: ModelConfig, n_max: int) -> "SectorPropagator":
        layout = HilbertLayout.canonical(n_max)
        h = build_hamiltonian(cfg, layout, sparse=True)
        exc = excitation_numbers(layout)
        out = cls(n_max)
        for e in np.unique(exc):
            idx = np.nonzero(exc == e)[0]
            sub = h[idx][:, idx].toarray()
            w, v = la.eigh(sub)
            out.blocks.append((idx, w, v))
        return out

    def check_conserving(self, cfg: ModelConfig) -> float:
        """Largest H element linking different excitation sectors (0 if conserved)."""
        layout = HilbertLayout.canonical(self.n_max)
        h = build_hamiltonian(cfg, layout, sparse=True).tocoo()
        exc = excitation_numbers(layout)
        off = exc[h.row] != exc[h.col]
        return float(np.abs(h.data[off]).max()) if off.any() else 0.0

    def prepare(self, psi0: np.ndarray):
        flat = psi0.reshape(psi0.shape[0], -1)
        return [(idx, w, v, v.conj().T @ flat[:, idx].T) for idx, w, v in self.blocks]

    def evolve(self, prepared, k: int, t: float) -> np.ndarray:
        n = self.n_max
        out = np.empty((k, 4 * n * n), dtype=complex)
        for idx, w, v, coef in prepared:
            out[:, idx] = (v @ (np.exp(-1j * w * t)[:, None] * coef)).T
        return out.reshape(k, 2, 2, n, n)


def sector_propagate(initial: ProductInitial, cfg: ModelConfig, times, measures=DEFAULT_MEASURES,
                     keep_states: bool = False, diagnostics: bool = False, threads: int = 1,
                     support_tol: float | None = None, drop: float = ENSEMBLE_DROP) -> Trajectory:
    """Any configuration; exact because every term conserves the total excitation."""
    times = check_times(times)
    n = _check_initial(initial)
    prop = SectorPropagator.build(cfg, n)
    leak = prop.check_conserving(cfg)
    if leak:
        raise ArithmeticError(f"hamiltonian couples excitation sectors (|H_ij| = {leak:.3g})")
    psi0 = initial_ensemble(initial, drop)
    prepared = prop.prepare(psi0)
    k = psi0.shape[0]

    def snap(t):
        return EnsembleSnapshot(prop.evolve(prepared, k, t))

    return _collect(times, snap, measures, keep_states, diagnostics, threads, n, "sector",
                    support_tol)


def choose_route(cfg: ModelConfig) -> str:
    if cfg.interaction_free:
        return "factorized"
    if not cfg.cross_arm:
        return "product"
    return "sector"


def evolve(initial: ProductInitial, cfg: ModelConfig, times, route: str = "auto", **kw) -> Trajectory:
    """Dispatch to a propagation route; 'auto' picks the cheapest exact one."""
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}")
    if route == "auto":
        route = choose_route(cfg)
    if route == "dense":
        layout = HilbertLayout.canonical(initial.n_max)
        kw.pop("drop", None)
        return spectral_propagate(initial, build_hamiltonian(cfg, layout), times,
                                  n_max=initial.n_max, **kw)
    if route == "factorized":
        kw.pop("drop", None)
        return factorized_propagate(initial, cfg, times=times, **kw)
    if route == "product":
        kw.pop("drop", None)
        return product_propagate(initial, cfg, times, **kw)
    return sector_propagate(initial, cfg, times, **kw)
