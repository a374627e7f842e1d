"""CSV and JSON persistence of result sets."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .measures import EsdIntervals, WignerGrid
from .scenario import PointResult, ResultSet, scenario_dict, scenario_from_dict

FORMATS = ("csv", "json")


def _g(x) -> str:
    return format(float(x), ".17g")


def measure_columns(results: ResultSet) -> list[str]:
    return list(results.scenario.outputs.measures)


def write_csv(results: ResultSet, path) -> None:
    """One row per (sweep point, time): sweep values, t, then the measures."""
    names = list(results.sweep_names)
    cols = measure_columns(results)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["t"] + cols)
        for pr in results.points:
            lead = [_g(pr.params[k]) for k in names]
            for i, t in enumerate(pr.times):
                w.writerow(lead + [_g(t)] + [_g(pr.measures[c][i]) for c in cols])


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


def write_wigner_csv(grid: WignerGrid, path) -> None:
    """Matrix with Re(alpha) across the header row and Im(alpha) down the first column."""
    if hasattr(path, "write"):
        _wigner_rows(grid, path)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _wigner_rows(grid, fh)


def _wigner_rows(grid: WignerGrid, fh) -> None:
    w = csv.writer(fh)
    w.writerow(["im\\re"] + [_g(x) for x in grid.re])
    for y, row in zip(grid.im, grid.values):
        w.writerow([_g(y)] + [_g(v) for v in row])


def read_wigner_csv(path) -> WignerGrid:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    re = np.array([float(x) for x in rows[0][1:]])
    im = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return WignerGrid(re, im, vals)


def _point_dict(pr: PointResult) -> dict:
    d = {
        "params": pr.params,
        "n_max": pr.n_max,
        "route": pr.route,
        "wall_time_s": pr.wall_time,
        "times": pr.times.tolist(),
        "measures": {k: np.asarray(v).tolist() for k, v in pr.measures.items()},
        "esd": {k: {"threshold": e.threshold, "intervals": [list(x) for x in e.intervals]}
                for k, e in pr.esd.items()},
    }
    if pr.diagnostics is not None:
        d["diagnostics"] = {k: np.asarray(v).tolist() for k, v in pr.diagnostics.items()}
    if pr.pcd is not None:
        d["pcd"] = {k: np.asarray(v).tolist() for k, v in pr.pcd.items()}
    if pr.wigner:
        d["wigner"] = [{"t": t, "re": g.re.tolist(), "im": g.im.tolist(), "values": g.values.tolist()}
                       for t, g in pr.wigner]
    return d


def to_json_dict(results: ResultSet) -> dict:
    return {
        "scenario": scenario_dict(results.scenario),
        "provenance": results.provenance,
        "points": [_point_dict(p) for p in results.points],
    }


def write_json(results: ResultSet, path) -> None:
    # json writes floats with repr(), which round-trips every double exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(results), fh, indent=1)


def read_json(path) -> ResultSet:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    points = []
    for p in d["points"]:
        esd = {k: EsdIntervals(e["threshold"], [tuple(x) for x in e["intervals"]])
               for k, e in p["esd"].items()}
        wig = [(w["t"], WignerGrid(np.array(w["re"]), np.array(w["im"]), np.array(w["values"])))
               for w in p.get("wigner", [])]
        diag = p.get("diagnostics")
        pcd = p.get("pcd")
        points.append(PointResult(
            params=p["params"], n_max=p["n_max"], route=p["route"], times=np.array(p["times"]),
            measures={k: np.array(v) for k, v in p["measures"].items()}, esd=esd,
            diagnostics=None if diag is None else {k: np.array(v) for k, v in diag.items()},
            wigner=wig, pcd=None if pcd is None else {k: np.array(v) for k, v in pcd.items()},
            wall_time=p["wall_time_s"]))
    return ResultSet(scenario_from_dict(d["scenario"]), points, d["provenance"])


def export(results: ResultSet, fmt: str, destination) -> list[str]:
    """Write results into directory `destination`; returns the files written."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    os.makedirs(destination, exist_ok=True)
    name = results.scenario.name
    written = []
    main = os.path.join(destination, f"{name}.{fmt}")
    (write_csv if fmt == "csv" else write_json)(results, main)
    written.append(main)
    for i, pr in enumerate(results.points):
        for t, grid in pr.wigner:
            path = os.path.join(destination, f"{name}_p{i}_wigner_t{t:.4g}.csv")
            write_wigner_csv(grid, path)
            written.append(path)
    return written
