"""Declarative experiment files, sweeps and the sweep runner.

A scenario file is line oriented::

    # comment
    name = fig01
    [model]
    model = IDDJCM
    [field]
    nbar_c = 2
    nbar_th = 0.1
    [sweep]
    nbar_s = 0.1, 0.3, 0.5, 1.0

Keys placed before any section header are resolved by name.  Unknown keys,
duplicate keys and out-of-range values are rejected with the offending line.
"""

from __future__ import annotations

import ast
import itertools
import math
import operator
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

import numpy as np

from . import __version__, evolution, states
from .hamiltonians import ModelConfig
from .measures import (DEFAULT_MEASURES, ESD_THRESHOLD, MEASURES, SUPPORT_TOL, EsdIntervals,
                       WignerGrid, esd_intervals, wigner)
from .states import BellParams, ProductInitial, SctsParams, TruncationError

THREADS_ENV = "DJCM_THREADS"


class ScenarioError(ValueError):
    """A scenario document failed validation."""


# -- schema --------------------------------------------------------------------

@dataclass(frozen=True)
class FieldSpec:
    nbar_c: float = 0.0
    nbar_s: float = 0.0
    nbar_th: float = 0.0
    phi: float = 0.0
    alpha_phase: float = 0.0

    def params(self) -> SctsParams:
        return SctsParams.from_photon_numbers(self.nbar_c, self.nbar_s, self.nbar_th, self.phi,
                                              self.alpha_phase)


@dataclass(frozen=True)
class TimeGrid:
    t_max: float = 25.0
    points: int = 400

    def times(self) -> np.ndarray:
        return evolution.time_grid(self.t_max, self.points)


@dataclass(frozen=True)
class Outputs:
    measures: tuple = DEFAULT_MEASURES
    esd: bool = True
    esd_threshold: float = ESD_THRESHOLD
    wigner: bool = False
    wigner_times: tuple = (0.0,)
    wigner_field: str = "a"
    wigner_range: float = 5.0
    wigner_points: int = 201
    pcd: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    description: str = ""
    model: ModelConfig = field(default_factory=ModelConfig)
    field_a: FieldSpec = field(default_factory=FieldSpec)
    field_b: dict = field(default_factory=dict)        # overrides on top of field_a
    theta: float = math.pi / 4
    grid: TimeGrid = field(default_factory=TimeGrid)
    sweep: tuple = ()                                  # ((name, (values...)), ...)
    outputs: Outputs = field(default_factory=Outputs)
    n_max: int | None = None

    @property
    def sweep_names(self) -> tuple:
        return tuple(k for k, _ in self.sweep)

    def sweep_points(self) -> list[dict]:
        if not self.sweep:
            return [{}]
        names = self.sweep_names
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.sweep))]

    def resolve(self, point: dict):
        """(ModelConfig, field a, field b, theta) at one sweep point."""
        model_kw, field_kw, theta = {}, {}, self.theta
        for k, v in point.items():
            if k in MODEL_KEYS:
                model_kw[MODEL_KEYS[k]] = v
            elif k in FIELD_KEYS:
                field_kw[k] = v
            elif k == "theta":
                theta = v
        cfg = replace(self.model, **model_kw)
        fa = replace(self.field_a, **field_kw)
        fb = replace(fa, **self.field_b)
        return cfg, fa, fb, theta


MODEL_KEYS = {"model": "model", "lambda": "lam", "kappa": "kappa", "g_d": "g_d", "j_z": "j_z",
              "chi": "chi", "delta": "delta"}
FIELD_KEYS = ("nbar_c", "nbar_s", "nbar_th", "phi", "alpha_phase")
SWEEPABLE = tuple(k for k in MODEL_KEYS if k != "model") + FIELD_KEYS + ("theta",)
OUTPUT_KEYS = ("measures", "esd", "esd_threshold", "wigner", "wigner_times", "wigner_field",
               "wigner_range", "wigner_points", "pcd")
SECTIONS = {
    "scenario": ("name", "description"),
    "model": tuple(MODEL_KEYS),
    "field": FIELD_KEYS,
    "field_b": FIELD_KEYS,
    "atoms": ("theta",),
    "time": ("t_max", "points"),
    "sweep": SWEEPABLE,
    "output": OUTPUT_KEYS,
    "truncation": ("n_max",),
}
NONNEGATIVE = {"lambda", "kappa", "g_d", "j_z", "chi", "nbar_c", "nbar_s", "nbar_th"}


# -- value parsing -------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "e": math.e}
_FUNCS = {"sqrt": math.sqrt}


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
            and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval_node(node.args[0]))
    raise ValueError("not a numeric expression")


def parse_number(text: str) -> float:
    """Numbers and simple arithmetic on them, e.g. '0.5', 'pi/4', '2*pi'."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
        val = float(_eval_node(tree.body))
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError, OverflowError) as exc:
        raise ValueError(f"cannot read {text.strip()!r} as a number") from exc
    if not math.isfinite(val):
        raise ValueError(f"{text.strip()!r} is not finite")
    return val


def parse_values(text: str) -> tuple:
    """Comma list or linspace(a, b, n)."""
    s = text.strip()
    if s.startswith("linspace(") and s.endswith(")"):
        parts = _split_list(s[len("linspace("):-1])
        if len(parts) != 3:
            raise ValueError("linspace needs (start, stop, count)")
        a, b, n = (parse_number(p) for p in parts)
        if n < 1 or n != int(n):
            raise ValueError("linspace count must be a positive integer")
        return tuple(float(x) for x in np.linspace(a, b, int(n)))
    vals = tuple(parse_number(p) for p in _split_list(s))
    if not vals:
        raise ValueError("empty value list")
    return vals


def _split_list(s: str) -> list[str]:
    parts = [p.strip() for p in s.split(",")]
    if any(not p for p in parts):
        raise ValueError(f"empty entry in list {s!r}")
    return parts


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text.strip()!r}")


def _parse_int(text: str) -> int:
    v = parse_number(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text.strip()!r}")
    return int(v)


# -- document parsing ----------------------------------------------------------

def _resolve_bare_key(key: str) -> str:
    homes = [s for s, keys in SECTIONS.items() if key in keys and s not in ("sweep", "field_b")]
    if len(homes) != 1:
        raise KeyError(key)
    return homes[0]


def _read_entries(text: str):
    section = None
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"line {lineno}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise ScenarioError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        sec = section
        if sec is None:
            try:
                sec = _resolve_bare_key(key)
            except KeyError:
                raise ScenarioError(f"line {lineno}: unknown key {key!r}") from None
        elif key not in SECTIONS[sec]:
            raise ScenarioError(f"line {lineno}: unknown key {key!r} in [{sec}]")
        if (sec, key) in seen:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r} (first set on line {seen[sec, key]})")
        seen[sec, key] = lineno
        yield lineno, sec, key, value


def parse_scenario(text: str, name: str | None = None) -> Scenario:
    """Validate a scenario document and fill in defaults."""
    model_kw, field_kw, field_b, time_kw, out_kw = {}, {}, {}, {}, {}
    meta = {"name": name or "scenario", "description": ""}
    theta = math.pi / 4
    sweep = []
    n_max = None

    for lineno, sec, key, value in _read_entries(text):
        where = f"line {lineno}: [{sec}] {key}"
        try:
            if sec == "scenario":
                meta[key] = value
            elif sec == "model":
                if key == "model":
                    model_kw["model"] = value
                else:
                    model_kw[MODEL_KEYS[key]] = _checked(key, parse_number(value))
            elif sec in ("field", "field_b"):
                (field_kw if sec == "field" else field_b)[key] = _checked(key, parse_number(value))
            elif sec == "atoms":
                theta = parse_number(value)
            elif sec == "time":
                if key == "t_max":
                    time_kw[key] = parse_number(value)
                    if time_kw[key] <= 0:
                        raise ValueError("must be > 0")
                else:
                    time_kw[key] = _parse_int(value)
                    if time_kw[key] < 2:
                        raise ValueError("must be >= 2")
            elif sec == "sweep":
                vals = tuple(_checked(key, v) for v in parse_values(value))
                sweep.append((key, vals))
            elif sec == "output":
                out_kw[key] = _parse_output(key, value)
            elif sec == "truncation":
                if value.strip().lower() == "auto":
                    n_max = None
                else:
                    n_max = _parse_int(value)
                    if n_max < 2:
                        raise ValueError("must be >= 2 or 'auto'")
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from None

    if len(sweep) > 2:
        raise ScenarioError(f"at most two swept parameters are supported, got {len(sweep)}")
    try:
        model = ModelConfig(**model_kw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"[model]: {exc}") from None
    scn = Scenario(name=meta["name"], description=meta["description"], model=model,
                   field_a=FieldSpec(**field_kw), field_b=field_b, theta=theta,
                   grid=TimeGrid(**time_kw), sweep=tuple(sweep), outputs=Outputs(**out_kw),
                   n_max=n_max)
    for point in scn.sweep_points():
        try:
            cfg, fa, fb, _ = scn.resolve(point)
            fa.params(), fb.params()
        except ValueError as exc:
            raise ScenarioError(f"sweep point {point}: {exc}") from None
    return scn


def _checked(key: str, v: float) -> float:
    if key in NONNEGATIVE and v < 0:
        raise ValueError(f"must be >= 0, got {v:g}")
    if key == "lambda" and v == 0:
        raise ValueError("must be > 0")
    return v


def _parse_output(key: str, value: str):
    if key == "measures":
        names = tuple(_split_list(value))
        bad = [n for n in names if n not in MEASURES]
        if bad:
            raise ValueError(f"unknown measures {bad}; choose from {', '.join(MEASURES)}")
        return names
    if key in ("esd", "wigner", "pcd"):
        return _parse_bool(value)
    if key == "esd_threshold":
        v = parse_number(value)
        if v <= 0:
            raise ValueError("must be > 0")
        return v
    if key == "wigner_times":
        out = []
        for p in _split_list(value):
            out.append("peak" if p.lower() == "peak" else parse_number(p))
            if out[-1] != "peak" and out[-1] < 0:
                raise ValueError("times must be >= 0")
        return tuple(out)
    if key == "wigner_field":
        v = value.strip()
        if v not in ("a", "b"):
            raise ValueError("must be 'a' or 'b'")
        return v
    if key == "wigner_range":
        v = parse_number(value)
        if v <= 0:
            raise ValueError("must be > 0")
        return v
    if key == "wigner_points":
        v = _parse_int(value)
        if v < 2:
            raise ValueError("must be >= 2")
        return v
    raise ValueError("unknown output key")


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_scenario(text, name=stem)


def bundled_names() -> list[str]:
    files = resources.files("djcm").joinpath("scenarios")
    return sorted(p.name[:-len(".scenario")] for p in files.iterdir()
                  if p.name.endswith(".scenario"))


def bundled_text(fig_id) -> tuple[str, str]:
    """(name, text) of a bundled scenario, given 'fig05', '05' or 5."""
    s = str(fig_id).strip().lower()
    if s.startswith("fig"):
        s = s[3:]
    try:
        name = f"fig{int(s):02d}"
    except ValueError:
        raise ScenarioError(f"unknown figure id {fig_id!r}") from None
    path = resources.files("djcm").joinpath("scenarios", f"{name}.scenario")
    if not path.is_file():
        raise ScenarioError(f"no bundled scenario {name}; available: {', '.join(bundled_names())}")
    return name, path.read_text(encoding="utf-8")


def bundled_scenario(fig_id) -> Scenario:
    name, text = bundled_text(fig_id)
    return parse_scenario(text, name=name)


# -- running -------------------------------------------------------------------

@dataclass
class PointResult:
    params: dict
    n_max: int
    route: str
    times: np.ndarray
    measures: dict
    esd: dict = field(default_factory=dict)             # measure -> EsdIntervals
    diagnostics: dict | None = None
    wigner: list = field(default_factory=list)          # [(t, WignerGrid)]
    pcd: dict | None = None
    wall_time: float = 0.0


@dataclass
class ResultSet:
    scenario: Scenario
    points: list
    provenance: dict

    @property
    def sweep_names(self) -> tuple:
        return self.scenario.sweep_names


def first_peak(times, values) -> float:
    """Time of the first local maximum after the series has first decreased."""
    v = np.asarray(values)
    i = 1
    while i < v.size and v[i] >= v[i - 1]:
        i += 1
    while i < v.size and v[i] <= v[i - 1]:
        i += 1
    while i < v.size and v[i] > v[i - 1]:
        i += 1
    return float(times[min(i - 1, v.size - 1)])


def run_point(scenario: Scenario, point: dict, n_max: int | None = None, threads: int = 1,
              diagnostics: bool = False, route: str = "auto", times=None) -> PointResult:
    start = time.perf_counter()
    cfg, fa, fb, theta = scenario.resolve(point)
    pa, pb = fa.params(), fb.params()
    n = n_max or scenario.n_max
    try:
        if n is None:
            n = states.adaptive_n_max(pa, pb)
        initial = ProductInitial.build(BellParams(theta), pa, pb, n)
    except TruncationError as exc:
        label = ", ".join(f"{k}={v:g}" for k, v in point.items()) or "base point"
        raise TruncationError(f"{scenario.name} [{label}]: {exc}") from None
    out = scenario.outputs
    ts = scenario.grid.times() if times is None else evolution.check_times(times)
    traj = evolution.evolve(initial, cfg, ts, route=route, measures=out.measures,
                            diagnostics=diagnostics, threads=threads)
    esd = {}
    if out.esd:
        esd = {k: esd_intervals(ts, v, out.esd_threshold) for k, v in traj.measures.items()}
    grids = []
    if out.wigner:
        wt = []
        for t in out.wigner_times:
            if t == "peak":
                series = traj.measures.get("C_AB")
                t = first_peak(ts, series) if series is not None else 0.0
            wt.append(float(t))
        snaps = evolution.evolve(initial, cfg, sorted(set(wt)), route=route, measures=("C_AB",),
                                 keep_states=True).states
        by_t = dict(zip(sorted(set(wt)), snaps))
        r = out.wigner_range
        for t in wt:
            rho = by_t[t].reduced(out.wigner_field)
            grids.append((t, wigner(rho, (-r, r), (-r, r), out.wigner_points)))
    pcd = None
    if out.pcd:
        pcd = {"l": np.arange(n), "closed_form": states.pcd_table(n - 1, pa),
               "numeric": states.pcd_numeric(initial.rho_a)}
    return PointResult(dict(point), n, traj.route, ts, traj.measures, esd, traj.diagnostics,
                       grids, pcd, time.perf_counter() - start)


def _run_point_star(args):
    return run_point(*args)


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ScenarioError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def with_grid(scenario: Scenario, t_max: float | None = None, points: int | None = None) -> Scenario:
    g = scenario.grid
    return replace(scenario, grid=TimeGrid(t_max if t_max is not None else g.t_max,
                                           points if points is not None else g.points))


def run(scenario: Scenario, threads: int | None = None, n_max: int | None = None,
        diagnostics: bool = False, route: str = "auto") -> ResultSet:
    """Evaluate every sweep point; points run in worker processes when threads > 1."""
    threads = default_threads() if threads is None else max(1, int(threads))
    start = time.perf_counter()
    points = scenario.sweep_points()
    if threads > 1 and len(points) > 1:
        args = [(scenario, p, n_max, 1, diagnostics, route) for p in points]
        with ProcessPoolExecutor(max_workers=min(threads, len(points))) as pool:
            results = list(pool.map(_run_point_star, args))
    else:
        results = [run_point(scenario, p, n_max, threads, diagnostics, route) for p in points]
    provenance = {
        "engine": "djcm",
        "engine_version": __version__,
        "n_max": [r.n_max for r in results],
        "routes": [r.route for r in results],
        "tolerances": {
            "tail": states.TAIL_TOL,
            "esd_threshold": scenario.outputs.esd_threshold,
            "support": SUPPORT_TOL,
            "ensemble_drop": evolution.ENSEMBLE_DROP,
        },
        "threads": threads,
        "wall_time_s": time.perf_counter() - start,
    }
    return ResultSet(scenario, results, provenance)


def scenario_dict(scn: Scenario) -> dict:
    """Plain-data echo of a scenario."""
    d = {
        "name": scn.name,
        "description": scn.description,
        "model": asdict(scn.model),
        "field": asdict(scn.field_a),
        "field_b": dict(scn.field_b),
        "theta": scn.theta,
        "time": asdict(scn.grid),
        "sweep": [[k, list(v)] for k, v in scn.sweep],
        "output": {f.name: getattr(scn.outputs, f.name) for f in fields(Outputs)},
        "n_max": scn.n_max,
    }
    d["output"]["measures"] = list(d["output"]["measures"])
    d["output"]["wigner_times"] = list(d["output"]["wigner_times"])
    return d


def scenario_from_dict(d: dict) -> Scenario:
    out = dict(d["output"])
    out["measures"] = tuple(out["measures"])
    out["wigner_times"] = tuple(out["wigner_times"])
    return Scenario(name=d["name"], description=d["description"], model=ModelConfig(**d["model"]),
                    field_a=FieldSpec(**d["field"]), field_b=dict(d["field_b"]), theta=d["theta"],
                    grid=TimeGrid(**d["time"]), sweep=tuple((k, tuple(v)) for k, v in d["sweep"]),
                    outputs=Outputs(**out), n_max=d["n_max"])


__all__ = ["Scenario", "ScenarioError", "FieldSpec", "TimeGrid", "Outputs", "ResultSet",
           "PointResult", "EsdIntervals", "WignerGrid", "parse_scenario", "load_scenario",
           "bundled_scenario", "bundled_names", "run", "run_point"]
