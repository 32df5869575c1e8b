"""JSON scenario files.

A config names two groups, the institution's utilities, the constraints to
study, initial states and optional sweep and generation blocks.  Every
validation error is a ``ConfigError`` whose message starts with the dotted path
of the offending field.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any

import numpy as np

from ._validation import check_unit
from .dist import from_dict as dist_from_dict
from .model import Constraint, GroupModel, QualState, Scenario, TransitionMatrix

TRANSITION_KEYS = ("t00", "t01", "t10", "t11")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(obj: dict, key: str, path: str, default=...):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    if key not in obj:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "missing field")
        return default
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _transitions(value, path: str) -> TransitionMatrix:
    if isinstance(value, dict):
        vals = [_number(_get(value, k, path), f"{path}.{k}") for k in TRANSITION_KEYS]
    elif isinstance(value, list) and len(value) == 4:
        vals = [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]
    else:
        raise ConfigError(path, "expected [t00, t01, t10, t11]")
    try:
        return TransitionMatrix(*vals)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _distribution(value, path: str):
    try:
        return dist_from_dict(value, path)
    except ValueError as exc:
        msg = str(exc)
        if msg.startswith(path):
            sub, _, rest = msg.partition(": ")
            raise ConfigError(sub, rest) from None
        raise ConfigError(path, msg) from None


def _group(value, path: str) -> GroupModel:
    share = _number(_get(value, "share", path), f"{path}.share")
    trans = _transitions(_get(value, "transitions", path), f"{path}.transitions")
    if "features" in value:
        return _highdim_group(value["features"], trans, share, f"{path}.features")
    g0 = _distribution(_get(value, "g0", path), f"{path}.g0")
    g1 = _distribution(_get(value, "g1", path), f"{path}.g1")
    try:
        return GroupModel(g0, g1, trans, share)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _highdim_group(value, trans, share, path) -> GroupModel:
    from .highdim import GaussianClass, gaussian_group, reduce_to_1d

    try:
        c0 = _get(value, "class0", path)
        c1 = _get(value, "class1", path)
        g = gaussian_group(GaussianClass(_get(c0, "mean", f"{path}.class0"),
                                         _get(c0, "cov", f"{path}.class0")),
                           GaussianClass(_get(c1, "mean", f"{path}.class1"),
                                         _get(c1, "cov", f"{path}.class1")),
                           trans, share)
        n = int(value.get("samples_per_class", 100_000))
        return reduce_to_1d(g, n, int(value.get("seed", 0)))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass(frozen=True)
class SweepTarget:
    """A field set to ``value + shift`` at each grid point."""

    field: str
    shift: float = 0.0

    def to_dict(self):
        return {"field": self.field, "shift": self.shift} if self.shift else self.field


@dataclass(frozen=True)
class SweepSpec:
    targets: tuple[SweepTarget, ...]
    values: tuple[float, ...]

    def to_dict(self):
        return {"targets": [t.to_dict() for t in self.targets], "values": list(self.values)}


SWEEP_FIELDS = {f"{g}.{k}" for g in "ab" for k in TRANSITION_KEYS} | {"u_ratio"}


def _sweep(value, path) -> SweepSpec:
    raw_targets = _get(value, "targets", path)
    if isinstance(raw_targets, str):
        raw_targets = [raw_targets]
    if not isinstance(raw_targets, list) or not raw_targets:
        raise ConfigError(f"{path}.targets", "expected a non-empty list")
    targets = []
    for i, t in enumerate(raw_targets):
        p = f"{path}.targets[{i}]"
        if isinstance(t, str):
            name, shift = t, 0.0
        else:
            name = _get(t, "field", p)
            shift = _number(t.get("shift", 0.0), f"{p}.shift")
        if name not in SWEEP_FIELDS:
            raise ConfigError(p, f"unknown sweep field {name!r}")
        targets.append(SweepTarget(name, shift))
    values = _get(value, "values", path)
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{path}.values", "sweep grid must be non-empty")
    vals = tuple(_number(v, f"{path}.values[{i}]") for i, v in enumerate(values))
    for i, v in enumerate(vals):
        for t in targets:
            x = v + t.shift
            if t.field != "u_ratio" and not 0.0 < x < 1.0:
                raise ConfigError(f"{path}.values[{i}]",
                                  f"{t.field} = {x!r} is outside (0, 1)")
            if t.field == "u_ratio" and x <= 0:
                raise ConfigError(f"{path}.values[{i}]", "utility ratio must be positive")
    return SweepSpec(tuple(targets), vals)


def apply_sweep_value(scenario: Scenario, spec: SweepSpec, value: float) -> Scenario:
    for t in spec.targets:
        v = value + t.shift
        if t.field == "u_ratio":
            scenario = replace(scenario, u_plus=v * scenario.u_minus)
            continue
        grp, key = t.field.split(".")
        g = scenario.group_a if grp == "a" else scenario.group_b
        g = g.with_transitions(g.transitions.with_entry(int(key[1]), int(key[2]), v))
        scenario = scenario.with_group(grp, g)
    return scenario


@dataclass(frozen=True)
class GenerationSpec:
    model: Any
    initial_alpha: float = 0.5

    def to_dict(self):
        m = self.model
        return {"g00": m.g00.to_dict(), "g01": m.g01.to_dict(), "g10": m.g10.to_dict(),
                "g11": m.g11.to_dict(), "transitions": list(m.transitions.as_tuple()),
                "u_plus": m.u_plus, "u_minus": m.u_minus, "initial_alpha": self.initial_alpha}


def _generation(value, path) -> GenerationSpec:
    from .gendyn import GenModel

    dists = {k: _distribution(_get(value, k, path), f"{path}.{k}")
             for k in ("g00", "g01", "g10", "g11")}
    trans = _transitions(_get(value, "transitions", path), f"{path}.transitions")
    up = _number(value.get("u_plus", 1.0), f"{path}.u_plus")
    um = _number(value.get("u_minus", 1.0), f"{path}.u_minus")
    a0 = _number(value.get("initial_alpha", 0.5), f"{path}.initial_alpha")
    try:
        model = GenModel(dists["g00"], dists["g01"], dists["g10"], dists["g11"], trans, up, um)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None
    try:
        return GenerationSpec(model, check_unit(a0, "initial_alpha"))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    constraints: tuple[Constraint, ...] = (Constraint.UN, Constraint.DP, Constraint.EQOPT)
    initial_states: tuple[QualState, ...] = ()
    seed: int = 0
    max_steps: int = 10_000
    tol: float = 1e-8
    sweep: SweepSpec | None = None
    generation: GenerationSpec | None = None
    name: str = "scenario"
    out: str | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        def grp(g: GroupModel):
            return {"g0": g.g0.to_dict(), "g1": g.g1.to_dict(),
                    "transitions": list(g.transitions.as_tuple()), "share": g.share}

        sc = self.scenario
        d = {"name": self.name,
             "groups": {"a": grp(sc.group_a), "b": grp(sc.group_b)},
             "utility": {"u_plus": sc.u_plus, "u_minus": sc.u_minus},
             "constraints": [c.value for c in self.constraints],
             "initial_states": [[s.alpha_a, s.alpha_b] for s in self.initial_states],
             "seed": self.seed,
             "simulation": {"max_steps": self.max_steps, "tol": self.tol}}
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        if self.generation is not None:
            d["generation"] = self.generation.to_dict()
        if self.out is not None:
            d["output"] = self.out
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _initial_states(value, seed: int, path: str) -> tuple[QualState, ...]:
    if isinstance(value, dict):
        n = _get(value, "random", path)
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise ConfigError(f"{path}.random", "expected a positive integer")
        rng = np.random.default_rng([seed, 7919])
        pts = rng.uniform(0.02, 0.98, size=(n, 2))
        return tuple(QualState(float(a), float(b)) for a, b in pts)
    if not isinstance(value, list):
        raise ConfigError(path, "expected a list of [alphaA, alphaB] pairs or {\"random\": n}")
    out = []
    for i, pair in enumerate(value):
        p = f"{path}[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(p, "expected [alphaA, alphaB]")
        try:
            out.append(QualState(_number(pair[0], f"{p}[0]"), _number(pair[1], f"{p}[1]")))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(p, str(exc)) from None
    return tuple(out)


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    groups = _get(data, "groups", "<root>")
    ga = _group(_get(groups, "a", "groups"), "groups.a")
    gb = _group(_get(groups, "b", "groups"), "groups.b")
    util = data.get("utility", {})
    up = _number(_get(util, "u_plus", "utility", 1.0), "utility.u_plus")
    um = _number(_get(util, "u_minus", "utility", 1.0), "utility.u_minus")
    try:
        scenario = Scenario(ga, gb, up, um)
    except ValueError as exc:
        raise ConfigError("groups", str(exc)) from None

    raw_c = data.get("constraints") or []
    if not isinstance(raw_c, list):
        raise ConfigError("constraints", "expected a list")
    try:
        constraints = tuple(Constraint.parse(c) for c in raw_c) or (
            Constraint.UN, Constraint.DP, Constraint.EQOPT)
    except ValueError as exc:
        raise ConfigError("constraints", str(exc)) from None

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "expected a non-negative integer")
    init = _initial_states(data.get("initial_states", []), seed, "initial_states")
    sim = data.get("simulation", {})
    max_steps = _get(sim, "max_steps", "simulation", 10_000)
    if isinstance(max_steps, bool) or not isinstance(max_steps, int) or max_steps < 1:
        raise ConfigError("simulation.max_steps", "expected a positive integer")
    tol = _number(_get(sim, "tol", "simulation", 1e-8), "simulation.tol")
    if tol <= 0:
        raise ConfigError("simulation.tol", "must be positive")
    sweep = _sweep(data["sweep"], "sweep") if data.get("sweep") else None
    gen = _generation(data["generation"], "generation") if data.get("generation") else None
    out = data.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output", "expected a directory path")
    known = {"name", "groups", "utility", "constraints", "initial_states", "seed",
             "simulation", "sweep", "generation", "output"}
    extra = {k: v for k, v in data.items() if k not in known}
    return ScenarioConfig(scenario, constraints, init, seed, max_steps, tol, sweep, gen,
                          str(data.get("name", "scenario")), out, extra)


def loads(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return config_from_dict(data)


def bundled_names() -> list[str]:
    root = resources.files("fairdyn") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def load(path) -> ScenarioConfig:
    """Read a config file; bare bundled names such as ``fig2`` or ``fig2.cfg`` also resolve."""
    path = os.fspath(path)
    if not os.path.exists(path) and os.path.basename(path) == path:
        name = path if path.endswith(".cfg") else path + ".cfg"
        res = resources.files("fairdyn") / "configs" / name
        if res.is_file():
            return loads(res.read_text(encoding="utf-8"))
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return loads(text)
