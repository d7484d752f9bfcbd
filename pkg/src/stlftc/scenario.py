"""Scenario files: schema-checked JSON describing one closed-loop or offline problem."""

from __future__ import annotations

import copy
import json
import math
import os
from importlib import resources

from .errors import ScenarioError

SCHEMA = 1

_TOP = {"schema", "name", "workspace", "grid", "predicates", "formula", "dynamics", "inputs_per_axis",
        "convention", "controller", "fault", "initial_state", "horizon", "seed", "monitor",
        "description"}
_REQUIRED = {"schema", "workspace", "predicates", "formula", "dynamics"}
_GRID = {"resolution", "shape", "periodic", "conservative"}
_DYN = {"kind", "dt", "u_lo", "u_hi"}
_CTRL = {"T_prime", "mu", "k", "r", "d", "c", "N", "Q", "R", "Q_f", "planner_rate", "lowlevel_rate",
         "u_m_bound", "lookahead", "slack_weight", "branch", "guard"}
_FAULT = {"kind", "t_start", "value"}
_MONITOR = {"representation"}
FAULT_KINDS = ("actuator_scale", "stuck_input", "additive_bias")

CONTROLLER_DEFAULTS = {"T_prime": 0.2, "mu": 2.0, "k": 0.5, "r": 0.5, "d": 0.6, "c": 0.005, "N": 60,
                       "Q": 1.0, "R": 0.1, "Q_f": 1.0, "planner_rate": 5.0, "lowlevel_rate": 100.0,
                       "u_m_bound": 0.8, "lookahead": 1.0, "slack_weight": None, "branch": None,
                       "guard": True}


def _unknown(found, allowed, where):
    extra = sorted(set(found) - allowed)
    if extra:
        raise ScenarioError(f"unknown key(s) {extra} in {where}; allowed: {sorted(allowed)}")


def _num_list(v, where, n=None):
    if not isinstance(v, list) or not all(isinstance(a, (int, float)) and not isinstance(a, bool) for a in v):
        raise ScenarioError(f"{where} must be a list of numbers")
    if n is not None and len(v) != n:
        raise ScenarioError(f"{where} must have {n} entries, got {len(v)}")
    return [float(a) for a in v]


def validate(sc: dict) -> dict:
    """Check the structure and fill defaults; returns a new dict."""
    if not isinstance(sc, dict):
        raise ScenarioError("scenario must be a JSON object")
    _unknown(sc, _TOP, "scenario")
    missing = sorted(_REQUIRED - set(sc))
    if missing:
        raise ScenarioError(f"missing key(s) {missing}")
    if sc["schema"] != SCHEMA:
        raise ScenarioError(f"unsupported schema version {sc['schema']!r}, expected {SCHEMA}")
    out = copy.deepcopy(sc)
    ws = out["workspace"]
    if not isinstance(ws, list) or not ws:
        raise ScenarioError("workspace must be a list of [lo, hi] pairs")
    for k, iv in enumerate(ws):
        lo, hi = _num_list(iv, f"workspace[{k}]", 2)
        if not lo < hi:
            raise ScenarioError(f"workspace[{k}] is empty")
    n = len(ws)
    grid = out.setdefault("grid", {})
    _unknown(grid, _GRID, "grid")
    grid.setdefault("resolution", 0.25)
    grid.setdefault("periodic", [False] * n)
    grid.setdefault("conservative", False)
    if len(grid["periodic"]) != n:
        raise ScenarioError("grid.periodic needs one flag per workspace dim")
    preds = out["predicates"]
    if not isinstance(preds, dict) or not preds:
        raise ScenarioError("predicates must be a non-empty object")
    for name, p in preds.items():
        if not isinstance(p, dict):
            raise ScenarioError(f"predicate {name} must be an object")
        if "box" in p:
            _unknown(p, {"box"}, f"predicate {name}")
            for k, iv in enumerate(p["box"]):
                _num_list(iv, f"predicate {name} box[{k}]", 2)
        elif "normal" in p:
            _unknown(p, {"normal", "offset"}, f"predicate {name}")
            _num_list(p["normal"], f"predicate {name} normal")
            if not isinstance(p.get("offset", 0.0), (int, float)):
                raise ScenarioError(f"predicate {name} offset must be a number")
        else:
            raise ScenarioError(f"predicate {name} needs 'box' or 'normal'")
    if not isinstance(out["formula"], str):
        raise ScenarioError("formula must be a string")
    dyn = out["dynamics"]
    _unknown(dyn, _DYN, "dynamics")
    if dyn.get("kind") not in ("integrator", "unicycle"):
        raise ScenarioError("dynamics.kind must be 'integrator' or 'unicycle'")
    dyn.setdefault("dt", 1.0)
    m = n if dyn["kind"] == "integrator" else 2
    dyn.setdefault("u_lo", [-1.0] * m)
    dyn.setdefault("u_hi", [1.0] * m)
    _num_list(dyn["u_lo"], "dynamics.u_lo", m)
    _num_list(dyn["u_hi"], "dynamics.u_hi", m)
    if dyn["kind"] == "unicycle" and n != 3:
        raise ScenarioError("unicycle scenarios need a 3-D workspace (x1, x2, heading)")
    out.setdefault("inputs_per_axis", 3)
    out.setdefault("convention", "spanning")
    if out["convention"] not in ("spanning", "formula"):
        raise ScenarioError("convention must be 'spanning' or 'formula'")
    mon = out.setdefault("monitor", {})
    _unknown(mon, _MONITOR, "monitor")
    mon.setdefault("representation", "grid")
    if mon["representation"] not in ("grid", "box"):
        raise ScenarioError("monitor.representation must be 'grid' or 'box'")
    ctrl = out.get("controller")
    if ctrl is not None:
        _unknown(ctrl, _CTRL, "controller")
        out["controller"] = {**CONTROLLER_DEFAULTS, **ctrl}
    fault = out.get("fault")
    if fault is not None:
        _unknown(fault, _FAULT, "fault")
        if fault.get("kind") not in FAULT_KINDS:
            raise ScenarioError(f"fault.kind must be one of {FAULT_KINDS}")
        fault.setdefault("t_start", 0.0)
        fault.setdefault("value", 0.0)
    if "initial_state" in out:
        _num_list(out["initial_state"], "initial_state", n)
    out.setdefault("horizon", None)
    out.setdefault("seed", 0)
    out.setdefault("name", "scenario")
    return out


def load(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file {path} is not valid JSON: {exc}") from None
    return validate(data)


def bundled_path(name) -> str:
    return str(resources.files("stlftc").joinpath("scenarios", f"{name}.json"))


def bundled(name) -> dict:
    path = bundled_path(name)
    if not os.path.exists(path):
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return load(path)


def golden_dir(name) -> str:
    return str(resources.files("stlftc").joinpath("scenarios", "golden", name))


def heading_cells(n):
    return 2 * math.pi / n
