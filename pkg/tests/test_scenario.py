import math

import numpy as np
import pytest

from djcm import scenario as sc
from djcm.scenario import ScenarioError, parse_scenario

BASIC = """
# minimal document
[model]
model = DJCM
kappa = 0.5
[field]
nbar_c = 2
nbar_th = 0.1
[field_b]
nbar_c = 1
[atoms]
theta = pi/3
[time]
t_max = 5
points = 11
[sweep]
nbar_s = 0.1, 0.5
chi = linspace(0, 1, 3)
[output]
measures = C_AB, N_ab
esd_threshold = 1e-3
"""


def test_parse_basic():
    s = parse_scenario(BASIC, "demo")
    assert s.name == "demo"
    assert s.model.model == "DJCM" and s.model.kappa == 0.5
    assert s.theta == pytest.approx(math.pi / 3)
    assert s.grid.times().size == 11
    assert s.sweep_names == ("nbar_s", "chi")
    pts = s.sweep_points()
    assert len(pts) == 6
    assert pts[1] == {"nbar_s": 0.1, "chi": 0.5}
    cfg, fa, fb, theta = s.resolve(pts[-1])
    assert cfg.chi == 1.0 and cfg.kappa == 0.5
    assert fa.nbar_s == 0.5 and fb.nbar_s == 0.5
    assert fa.nbar_c == 2 and fb.nbar_c == 1
    assert s.outputs.measures == ("C_AB", "N_ab")


def test_bare_keys_and_defaults():
    s = parse_scenario("model = DJCM\nnbar_c = 1\nt_max = 3\npoints = 4\n")
    assert s.model.model == "DJCM"
    assert s.field_a.nbar_c == 1
    assert s.sweep == ()
    assert s.sweep_points() == [{}]
    assert s.outputs.esd is True


def test_number_expressions():
    assert sc.parse_number("2*pi/4") == pytest.approx(math.pi / 2)
    assert sc.parse_number("sqrt(2)**2") == pytest.approx(2)
    assert sc.parse_number("-1e-3") == -1e-3
    assert sc.parse_values("linspace(0, 1, 5)") == (0, 0.25, 0.5, 0.75, 1.0)
    for bad in ("__import__('os')", "x", "1/0", "[1]", "linspace(0,1)", ""):
        with pytest.raises(ValueError):
            sc.parse_values(bad)


@pytest.mark.parametrize("text,fragment", [
    ("[model]\nkappa = -1\n", "line 2: [model] kappa"),
    ("[model]\nfoo = 1\n", "line 2: unknown key 'foo'"),
    ("[nope]\n", "line 1: unknown section"),
    ("[model]\nkappa = 1\nkappa = 2\n", "duplicate key"),
    ("[time]\npoints = 2.5\n", "expected an integer"),
    ("[time]\nt_max = 0\n", "must be > 0"),
    ("[output]\nmeasures = C_AB, X\n", "unknown measures"),
    ("[output]\nwigner = maybe\n", "expected true/false"),
    ("[output]\nwigner_field = c\n", "must be 'a' or 'b'"),
    ("[sweep]\nchi = 1\nkappa = 1\ng_d = 1\n", "at most two"),
    ("[model]\nmodel = JC\n", "[model]"),
    ("just text\n", "expected key = value"),
    ("[model\n", "malformed section"),
    ("nbar_q = 1\n", "unknown key"),
])
def test_errors(text, fragment):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text)
    assert fragment in str(exc.value)


def test_bundled_scenarios_validate():
    names = sc.bundled_names()
    assert names == [f"fig{i:02d}" for i in range(1, 19)]
    for n in names:
        s = sc.bundled_scenario(n)
        assert s.name == n
        assert s.theta == pytest.approx(math.pi / 4)
    assert sc.bundled_scenario(5).name == "fig05"
    assert sc.bundled_scenario("05").model.kappa == 0
    assert sc.bundled_scenario("fig05").sweep == (("kappa", (0.1, 1.0, 5.0, 10.0)),)
    with pytest.raises(ScenarioError):
        sc.bundled_scenario(99)
    with pytest.raises(ScenarioError):
        sc.bundled_scenario("abc")


def test_load_uses_file_stem(tmp_path):
    p = tmp_path / "mine.scenario"
    p.write_text("[model]\nmodel = IDDJCM\n")
    assert sc.load_scenario(p).name == "mine"


def test_first_peak():
    t = np.linspace(0, 6, 61)
    v = 1 + np.cos(t * math.pi / 2)  # declines, minimum at 2, peak at 4
    assert sc.first_peak(t, v) == pytest.approx(4.0)


def test_threads_env(monkeypatch):
    monkeypatch.setenv(sc.THREADS_ENV, "3")
    assert sc.default_threads() == 3
    monkeypatch.setenv(sc.THREADS_ENV, "many")
    with pytest.raises(ScenarioError):
        sc.default_threads()


def test_run_small_sweep():
    s = parse_scenario("[model]\nmodel=DJCM\n[field]\nnbar_c=1\n[time]\nt_max=2\npoints=5\n"
                       "[sweep]\nnbar_s = 0, 0.1\n[output]\npcd = true\n", "small")
    res = sc.run(s, threads=1, diagnostics=True)
    assert len(res.points) == 2
    p = res.points[0]
    assert p.route == "factorized" and p.n_max == 20
    assert p.measures["C_AB"][0] == pytest.approx(1.0, abs=1e-12)
    assert np.abs(p.pcd["closed_form"] - p.pcd["numeric"]).max() < 1e-8
    assert np.abs(p.diagnostics["trace"] - 1).max() < 1e-12
    assert res.provenance["n_max"] == [20, 20]
    par = sc.run(s, threads=2)
    assert np.allclose(par.points[1].measures["N_ab"], res.points[1].measures["N_ab"], atol=1e-14)


def test_run_reports_truncation():
    s = parse_scenario("[field]\nnbar_th = 5\n[truncation]\nn_max = 10\n", "trunc")
    with pytest.raises(sc.TruncationError, match="trunc"):
        sc.run_point(s, {}, times=[0.0])


def test_wigner_peak_output():
    s = sc.with_grid(sc.bundled_scenario(3), 6, 61)
    s = sc.replace(s, outputs=sc.replace(s.outputs, wigner_points=41))
    pr = sc.run_point(s, {})
    (t0, g0), (tp, gp) = pr.wigner
    assert t0 == 0 and 0 < tp <= 6
    assert tp == sc.first_peak(pr.times, pr.measures["C_AB"])
    assert g0.values.shape == (41, 41)


def test_dict_round_trip():
    s = parse_scenario(BASIC, "demo")
    assert sc.scenario_from_dict(sc.scenario_dict(s)) == s
