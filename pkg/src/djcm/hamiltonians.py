"""Interaction-picture Hamiltonians for the double JC model and its
intensity-dependent variant, plus the optional coupling terms.

Every builder assembles T + T^dag (or a real diagonal), so the result is
Hermitian entry by entry.  All strengths are in units of the atom-field
coupling; hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
import scipy.sparse as sp

from . import fock
from .fock import HilbertLayout

MODELS = ("DJCM", "IDDJCM")


@dataclass(frozen=True)
class ModelConfig:
    model: str = "IDDJCM"
    lam: float = 1.0
    kappa: float = 0.0
    g_d: float = 0.0
    j_z: float = 0.0
    chi: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        model = str(self.model).upper()
        if model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        object.__setattr__(self, "model", model)
        for f in fields(self):
            if f.name == "model":
                continue
            v = float(getattr(self, f.name))
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite")
            object.__setattr__(self, f.name, v)
        if self.lam <= 0:
            raise ValueError("lambda must be > 0")
        for name in ("kappa", "g_d", "j_z", "chi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def cross_arm(self) -> bool:
        """True when some term couples the (A, a) arm to the (B, b) arm."""
        return bool(self.kappa or self.g_d or self.j_z)

    @property
    def interaction_free(self) -> bool:
        return not (self.cross_arm or self.chi or self.delta)


def _zero(layout, sparse):
    if sparse:
        return sp.csr_matrix((layout.total, layout.total), dtype=complex)
    return np.zeros((layout.total, layout.total), dtype=complex)


def _herm(t):
    return t + t.conj().T


def _field_raise(model: str, n_max: int) -> np.ndarray:
    """Field factor multiplying sigma_minus: a^dag (DJCM) or sqrt(N) a^dag (IDDJCM)."""
    ad = fock.creation(n_max)
    if model == "DJCM":
        return ad
    if model == "IDDJCM":
        return np.diag(np.sqrt(np.arange(n_max, dtype=float))) @ ad
    raise ValueError(f"unknown model {model!r}")


def _jc_arm_term(model, lam, layout, atom_slot, field_slot, sparse):
    _, _, sminus = fock.pauli_ops()
    f = _field_raise(model, layout.dims[layout.slot(field_slot)])
    t = fock.embed(f, field_slot, layout, sparse) @ fock.embed(sminus, atom_slot, layout, sparse)
    return lam * _herm(t)


def jc_interaction(model: str, lam: float, layout: HilbertLayout, sparse: bool = False):
    """Resonant atom-field coupling for both arms (or one arm on a 2-factor layout)."""
    if len(layout) == 2:
        return _jc_arm_term(model, lam, layout, 0, 1, sparse)
    return (_jc_arm_term(model, lam, layout, "A", "a", sparse)
            + _jc_arm_term(model, lam, layout, "B", "b", sparse))


def photon_exchange_term(kappa: float, layout: HilbertLayout, sparse: bool = False):
    if kappa == 0:
        return _zero(layout, sparse)
    n_a, n_b = layout.dims[2], layout.dims[3]
    t = fock.embed(fock.creation(n_a), "a", layout, sparse) @ fock.embed(fock.annihilation(n_b), "b", layout, sparse)
    return kappa * _herm(t)


def dipole_dipole_term(g_d: float, layout: HilbertLayout, sparse: bool = False):
    if g_d == 0:
        return _zero(layout, sparse)
    _, splus, sminus = fock.pauli_ops()
    t = fock.embed(splus, "A", layout, sparse) @ fock.embed(sminus, "B", layout, sparse)
    return g_d * _herm(t)


def ising_term(j_z: float, layout: HilbertLayout, sparse: bool = False):
    if j_z == 0:
        return _zero(layout, sparse)
    sz, _, _ = fock.pauli_ops()
    return j_z * (fock.embed(sz, "A", layout, sparse) @ fock.embed(sz, "B", layout, sparse))


def _kerr_diag(n_max):
    n = np.arange(n_max, dtype=float)
    return np.diag(n * (n - 1)).astype(complex)


def kerr_term(chi: float, layout: HilbertLayout, sparse: bool = False):
    """chi (a^dag^2 a^2 + b^dag^2 b^2); on a 2-factor arm layout, the single mode."""
    if chi == 0:
        return _zero(layout, sparse)
    if len(layout) == 2:
        return chi * fock.embed(_kerr_diag(layout.dims[1]), 1, layout, sparse)
    return chi * (fock.embed(_kerr_diag(layout.dims[2]), "a", layout, sparse)
                  + fock.embed(_kerr_diag(layout.dims[3]), "b", layout, sparse))


def ground_projector():
    """sigma_minus sigma_plus = |g><g|."""
    _, splus, sminus = fock.pauli_ops()
    return sminus @ splus


def detuning_term(delta: float, layout: HilbertLayout, sparse: bool = False):
    if delta == 0:
        return _zero(layout, sparse)
    pg = ground_projector()
    if len(layout) == 2:
        return delta * fock.embed(pg, 0, layout, sparse)
    return delta * (fock.embed(pg, "A", layout, sparse) + fock.embed(pg, "B", layout, sparse))


def build_hamiltonian(cfg: ModelConfig, layout: HilbertLayout, sparse: bool = False):
    h = jc_interaction(cfg.model, cfg.lam, layout, sparse)
    if cfg.kappa:
        h = h + photon_exchange_term(cfg.kappa, layout, sparse)
    if cfg.g_d:
        h = h + dipole_dipole_term(cfg.g_d, layout, sparse)
    if cfg.j_z:
        h = h + ising_term(cfg.j_z, layout, sparse)
    if cfg.chi:
        h = h + kerr_term(cfg.chi, layout, sparse)
    if cfg.delta:
        h = h + detuning_term(cfg.delta, layout, sparse)
    return h.tocsr() if sparse else h


def arm_hamiltonian(cfg: ModelConfig, n_max: int) -> np.ndarray:
    """One atom-cavity arm on the (atom, field) layout: JC + Kerr + detuning."""
    if cfg.cross_arm:
        raise ValueError("cross-arm couplings do not factor into single arms")
    arm = HilbertLayout((2, n_max))
    h = jc_interaction(cfg.model, cfg.lam, arm)
    if cfg.chi:
        h = h + kerr_term(cfg.chi, arm)
    if cfg.delta:
        h = h + detuning_term(cfg.delta, arm)
    return h


def excitation_numbers(layout: HilbertLayout) -> np.ndarray:
    """Total excitation (photons + excited atoms) of every basis index."""
    grids = []
    for d, slot_is_atom in zip(layout.dims, _atom_mask(layout)):
        grids.append(np.array([1, 0]) if slot_is_atom else np.arange(d))
    total = np.zeros(layout.dims, dtype=int)
    for i, g in enumerate(grids):
        shape = [1] * len(layout)
        shape[i] = -1
        total = total + g.reshape(shape)
    return total.ravel()


def _atom_mask(layout):
    if len(layout) == 4:
        return (True, True, False, False)
    if len(layout) == 2:
        return (True, False)
    raise ValueError("excitation counting needs a 2- or 4-factor layout")


def excitation_operator(layout: HilbertLayout) -> np.ndarray:
    return np.diag(excitation_numbers(layout).astype(float)).astype(complex)
