import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from djcm import fock, states
from djcm.states import SctsParams, TruncationError


def test_photon_number_parametrization():
    p = SctsParams.from_photon_numbers(2.0, 0.5, 0.1, phi=0.3, alpha_phase=1.0)
    assert p.nbar_c == pytest.approx(2.0)
    assert p.nbar_s == pytest.approx(0.5)
    assert np.angle(p.alpha) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        SctsParams.from_photon_numbers(-1.0)
    with pytest.raises(ValueError):
        SctsParams(r=-0.1)
    with pytest.raises(ValueError):
        SctsParams(n_th=float("nan"))


def test_thermal_is_geometric():
    rho = states.thermal_density(0.5, 60)
    p = np.real(np.diag(rho))
    assert p[0] == pytest.approx(1 / 1.5)
    assert np.allclose(p[1:] / p[:-1], 0.5 / 1.5)
    assert np.diag(states.thermal_density(0.0, 5)).real.tolist() == [1, 0, 0, 0, 0]


def test_pcd_coherent_is_poisson():
    p = SctsParams.from_photon_numbers(nbar_c=2.0)
    l = np.arange(30)
    poisson = np.exp(-2.0) * 2.0**l / np.array([math.factorial(k) for k in l], dtype=float)
    assert np.abs(states.pcd_table(29, p) - poisson).max() < 1e-14


def test_pcd_squeezed_vacuum():
    p = SctsParams(r=0.6, phi=1.3)
    got = states.pcd_table(30, p)
    t = math.tanh(p.r)
    for m in range(15):
        expect = t ** (2 * m) * math.comb(2 * m, m) / 4**m / math.cosh(p.r)
        assert got[2 * m] == pytest.approx(expect, rel=1e-12)
        assert abs(got[2 * m + 1]) < 1e-15


def test_pcd_thermal():
    got = states.pcd_table(40, SctsParams(n_th=0.7))
    l = np.arange(41)
    assert np.allclose(got, 0.7**l / 1.7 ** (l + 1), rtol=1e-12, atol=0)


def test_pcd_plain_reading_differs():
    p = SctsParams.from_photon_numbers(1.0, 0.5, 0.1)
    num = states.pcd_numeric(states.scts_density(p, 60))
    tilde = states.pcd_table(59, p, "tilde")
    plain = states.pcd_table(59, p, "plain")
    assert np.abs(tilde - num).max() < 1e-8
    assert np.abs(plain - num).max() > 1e-3
    with pytest.raises(ValueError):
        states.pcd_table(3, p, "other")
    with pytest.raises(ValueError):
        states.pcd_closed_form(-1, p)


@settings(max_examples=25, deadline=None)
@given(nc=st.floats(0, 3), ns=st.floats(0, 1), nth=st.floats(0, 1), phi=st.floats(0, 2 * math.pi),
       ph=st.floats(0, 2 * math.pi))
def test_pcd_matches_density_diagonal(nc, ns, nth, phi, ph):
    p = SctsParams.from_photon_numbers(nc, ns, nth, phi, ph)
    n = states.adaptive_n_max(p)
    closed = states.pcd_table(n - 1, p)
    num = states.pcd_numeric(states.scts_density(p, n))
    assert np.abs(closed - num).max() < 1e-8
    assert closed.sum() >= 1 - 1e-8


def test_scts_density_is_a_state():
    p = SctsParams.from_photon_numbers(2.0, 0.5, 0.1, phi=0.4)
    rho = states.scts_density(p, 45)
    fock.check_density(rho)
    assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_scts_squeeze_phase_convention():
    # <a^2> of the squeezed vacuum is -e^{i phi} sinh r cosh r
    p = SctsParams(r=0.3, phi=0.8)
    rho = states.scts_density(p, 40)
    a = fock.annihilation(40)
    assert np.trace(rho @ a @ a) == pytest.approx(-np.exp(0.8j) * math.sinh(0.3) * math.cosh(0.3), abs=1e-10)


def test_truncation_guard():
    p = SctsParams.from_photon_numbers(4.0, 1.0, 1.0)
    with pytest.raises(TruncationError):
        states.scts_density(p, 10)
    states.scts_density(p, 10, tail_tol=None)
    assert states.tail_mass(p, 10) > 1e-3


def test_adaptive_cutoff():
    assert states.adaptive_n_max(SctsParams()) == states.N_MAX_FLOOR
    p = SctsParams.from_photon_numbers(2.0, 1.0, 0.1)
    n = states.adaptive_n_max(p)
    probs = states.pcd_table(300, p)
    moment = lambda k: float(np.sum(np.arange(k, 301) * probs[k:]))
    assert states.tail_mass(p, n) < 1e-8 and moment(n) < 1e-7
    assert states.tail_mass(p, n - 1) >= 1e-8 or moment(n - 1) >= 1e-7
    # the moment condition is the binding one here
    assert states.adaptive_n_max(p, moment_tol=1.0) < n
    with pytest.raises(TruncationError):
        states.adaptive_n_max(SctsParams.from_photon_numbers(nbar_th=50.0), ceiling=60)


def test_bell_state():
    b = states.BellParams(theta=0.3)
    v = states.bell_vector(b)
    assert v.tolist() == [0, math.cos(0.3), math.sin(0.3), 0]
    assert np.allclose(states.bell_density(b), np.outer(v, v))


def test_product_initial(small_initial):
    rho = small_initial.dense()
    assert rho.shape == (4 * 144,) * 2
    assert small_initial.n_max == 12
    lay = fock.HilbertLayout.canonical(12)
    assert np.allclose(fock.partial_trace(rho, (2,), lay), small_initial.rho_a)
    assert np.allclose(fock.partial_trace(rho, (0, 1), lay), small_initial.rho_atoms)
