"""Initial states: thermal, squeezed coherent thermal (SCTS), atomic Bell pair.

Also carries the closed-form photon-counting distribution of an SCTS, which is
used to pick the Fock truncation and to cross-check the numerical density
matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from . import fock

TAIL_TOL = 1e-8
TAIL_MOMENT_TOL = 1e-7
N_MAX_FLOOR = 20


class TruncationError(ValueError):
    """The Fock cutoff leaves too much photon-number probability outside."""


@dataclass(frozen=True)
class SctsParams:
    alpha: complex = 0.0
    r: float = 0.0
    phi: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        if not self.r >= 0:
            raise ValueError(f"squeeze magnitude r must be >= 0, got {self.r}")
        if not self.n_th >= 0:
            raise ValueError(f"thermal photon number must be >= 0, got {self.n_th}")
        object.__setattr__(self, "alpha", complex(self.alpha))

    @classmethod
    def from_photon_numbers(cls, nbar_c=0.0, nbar_s=0.0, nbar_th=0.0, phi=0.0, alpha_phase=0.0):
        if nbar_c < 0 or nbar_s < 0 or nbar_th < 0:
            raise ValueError("mean photon numbers must be >= 0")
        alpha = math.sqrt(nbar_c) * np.exp(1j * alpha_phase)
        return cls(alpha=alpha, r=math.asinh(math.sqrt(nbar_s)), phi=phi, n_th=nbar_th)

    @property
    def nbar_c(self) -> float:
        return abs(self.alpha) ** 2

    @property
    def nbar_s(self) -> float:
        return math.sinh(self.r) ** 2


@dataclass(frozen=True)
class BellParams:
    theta: float = math.pi / 4


@dataclass(frozen=True)
class PcdAuxiliaries:
    x: float
    y: complex
    z: complex
    x_t: float
    y_t: complex
    z_t: complex
    r00: float


def thermal_density(n_th: float, n_max: int) -> np.ndarray:
    if n_th < 0:
        raise ValueError("thermal photon number must be >= 0")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n = np.arange(n_max)
    if n_th == 0:
        p = (n == 0).astype(float)
    else:
        p = np.exp(n * math.log(n_th / (n_th + 1.0))) / (1.0 + n_th)
    p = p / p.sum()
    return np.diag(p).astype(complex)


def pcd_auxiliaries(p: SctsParams) -> PcdAuxiliaries:
    """Gaussian-state auxiliaries for the photon-counting distribution.

    The squeeze cross term y carries a + sign so that it matches the squeeze
    operator exp(-zeta a^dag^2/2 + conj(zeta) a^2/2) used by `scts_density`.
    """
    sh, ch = math.sinh(p.r), math.cosh(p.r)
    x = p.n_th + (2 * p.n_th + 1) * sh**2
    y = (2 * p.n_th + 1) * np.exp(1j * p.phi) * sh * ch
    z = p.alpha
    den = (1 + x) ** 2 - abs(y) ** 2
    x_t = (x * (1 + x) - abs(y) ** 2) / den
    y_t = y / den
    z_t = ((1 + x) * z + y * np.conj(z)) / den
    expo = ((1 + x) * abs(z) ** 2 + 0.5 * (y * np.conj(z) ** 2 + np.conj(y) * z**2).real) / den
    r00 = den**-0.5 * math.exp(-expo)
    return PcdAuxiliaries(x, complex(y), complex(z), float(x_t), complex(y_t), complex(z_t), float(r00))


def _scaled_hermite(q_max: int, z_t: complex, y_h: complex) -> np.ndarray:
    # g_q = u^q H_q(z_t / 2u) / sqrt(q!), u^2 = y_h / 2; regular at y_h = 0
    g = np.zeros(q_max + 1, dtype=complex)
    g[0] = 1.0
    if q_max >= 1:
        g[1] = z_t
    for q in range(1, q_max):
        g[q + 1] = (z_t * g[q] - math.sqrt(q) * y_h * g[q - 1]) / math.sqrt(q + 1)
    return g


def pcd_table(l_max: int, p: SctsParams, hermite_y: str = "tilde") -> np.ndarray:
    """P(0..l_max) from the closed-form Hermite sum, evaluated in log space.

    hermite_y selects the squeeze quantity inside the Hermite argument:
    "tilde" (y_t, the reading that agrees with the density-matrix diagonal) or
    "plain" (y).
    """
    aux = pcd_auxiliaries(p)
    if hermite_y == "tilde":
        g = _scaled_hermite(l_max, aux.z_t, aux.y_t)
        log_ratio = 0.0
    elif hermite_y == "plain":
        g = _scaled_hermite(l_max, aux.z_t, aux.y)
        den = (1 + aux.x) ** 2 - abs(aux.y) ** 2
        log_ratio = -math.log(den)
    else:
        raise ValueError(f"unknown hermite_y {hermite_y!r}")
    with np.errstate(divide="ignore"):
        log_g2 = np.log(np.abs(g) ** 2)
        log_x = math.log(aux.x_t) if aux.x_t > 0 else -np.inf
    q = np.arange(l_max + 1)
    out = np.empty(l_max + 1)
    for l in range(l_max + 1):
        qs = q[: l + 1]
        log_binom = gammaln(l + 1) - gammaln(qs + 1) - gammaln(l - qs + 1)
        with np.errstate(invalid="ignore"):
            log_xpow = np.where(qs == l, 0.0, (l - qs) * log_x)
        terms = log_binom + log_xpow + log_g2[: l + 1] + qs * log_ratio
        out[l] = aux.r00 * math.exp(logsumexp(terms)) if np.isfinite(terms).any() else 0.0
    return out


def pcd_closed_form(l: int, p: SctsParams, hermite_y: str = "tilde") -> float:
    if l < 0:
        raise ValueError("photon number must be >= 0")
    return float(pcd_table(l, p, hermite_y)[l])


def pcd_numeric(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("expected a single-mode density matrix")
    return np.real(np.diag(rho)).copy()


def tail_mass(p: SctsParams, n_max: int) -> float:
    """Probability of finding n_max or more photons."""
    return max(0.0, 1.0 - float(pcd_table(n_max - 1, p).sum()))


def adaptive_n_max(*params: SctsParams, tol: float = TAIL_TOL, moment_tol: float = TAIL_MOMENT_TOL,
                   floor: int = N_MAX_FLOOR, ceiling: int = 400) -> int:
    """Smallest cutoff (>= floor) valid for every field.

    The probability beyond the cutoff must stay below `tol` and its photon
    number weight, sum_{n >= N} n P(n), below `moment_tol`; the second bound
    keeps <n> of the truncated state accurate.
    """
    n_needed = floor
    l = np.arange(ceiling + 1)
    for p in params:
        probs = pcd_table(ceiling, p)
        tails = 1.0 - np.cumsum(probs)                  # tails[k] = P(n > k)
        moments = np.cumsum((l * probs)[::-1])[::-1]    # moments[k] = sum_{n >= k} n P(n)
        ok = np.nonzero((tails[:-1] < tol) & (moments[1:] < moment_tol))[0]
        if not ok.size:
            raise TruncationError(f"no cutoff up to {ceiling} reaches tail {tol} for {p}")
        n_needed = max(n_needed, int(ok[0]) + 1)
    return n_needed


def scts_density(p: SctsParams, n_max: int, tail_tol: float | None = TAIL_TOL,
                 pad: int | None = None) -> np.ndarray:
    """D(alpha) S(zeta) rho_th S^dag(zeta) D^dag(alpha) on n_max Fock levels.

    The operator sandwich is formed on n_max + pad levels so that the
    truncated exponentials are exact on the kept block, then cut to n_max and
    renormalized.
    """
    if tail_tol is not None:
        tail = tail_mass(p, n_max)
        if tail > tail_tol:
            raise TruncationError(
                f"n_max={n_max} leaves tail mass {tail:.3g} > {tail_tol:g} for {p}"
            )
    if pad is None:
        pad = max(20, n_max // 2)
    m = n_max + pad
    d = fock.displacement(p.alpha, m)
    s = fock.squeeze(p.r * np.exp(1j * p.phi), m)
    th = np.real(np.diag(thermal_density(p.n_th, m)))
    u = d @ s
    rho = (u * th) @ u.conj().T
    rho = rho[:n_max, :n_max]
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def scts_ensemble(p: SctsParams, n_max: int, weight_cut: float = 0.0, **kw):
    """Eigen-ensemble (weights, vectors as columns) of the truncated SCTS."""
    rho = scts_density(p, n_max, **kw)
    w, v = np.linalg.eigh(rho)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    keep = w > weight_cut
    return np.clip(w[keep], 0.0, None), v[:, keep]


def bell_vector(p: BellParams) -> np.ndarray:
    """cos(theta)|e,g> + sin(theta)|g,e> in the (ee, eg, ge, gg) basis."""
    return np.array([0.0, math.cos(p.theta), math.sin(p.theta), 0.0], dtype=complex)


def bell_density(p: BellParams) -> np.ndarray:
    v = bell_vector(p)
    return np.outer(v, v.conj())


def total_initial(bell: BellParams, field_a: SctsParams, field_b: SctsParams, n_max: int,
                  **kw) -> np.ndarray:
    """Dense product state on the canonical (A, B, a, b) layout."""
    return fock.tensor(bell_density(bell), scts_density(field_a, n_max, **kw),
                       scts_density(field_b, n_max, **kw))


@dataclass
class ProductInitial:
    """rho_AB(0) x rho_a(0) x rho_b(0), kept as factors."""

    rho_atoms: np.ndarray
    rho_a: np.ndarray
    rho_b: np.ndarray

    @property
    def n_max(self) -> int:
        return self.rho_a.shape[0]

    @classmethod
    def build(cls, bell: BellParams, field_a: SctsParams, field_b: SctsParams, n_max: int, **kw):
        return cls(bell_density(bell), scts_density(field_a, n_max, **kw),
                   scts_density(field_b, n_max, **kw))

    def dense(self) -> np.ndarray:
        return fock.tensor(self.rho_atoms, self.rho_a, self.rho_b)
