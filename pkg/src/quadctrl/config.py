"""Run configuration: INI files, dotted-key overrides, typed sections.

A run is described by six sections (model, cost, grid, solver, sim, output).
Files use INI syntax.  Without a file, built-in defaults give the standard
demonstration setup; a provided file must spell out the model, cost and
grid sections completely (solver, sim and output keys keep their defaults),
so a run description never silently inherits physics it did not state.
Unknown sections or keys are rejected by name rather than silently ignored,
because a typo like `n_path = 100000` quietly running the default would
waste hours.

Command-line overrides arrive as dotted assignments ("model.gamma=2.0") and
go through exactly the same parsing and validation as file keys.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import GridSpec
from .model import CostParams, ModelParams

__all__ = ["SolverSection", "SimSection", "OutputSection", "RunConfig",
           "load_config", "parse_overrides"]

_SCHEMA: dict[str, dict[str, type]] = {
    "model": {"theta1": float, "theta2": float, "sigma11": float,
              "sigma12": float, "sigma22": float, "gamma": float},
    "cost": {"a": float, "b1": float, "b2": float},
    "grid": {"l1": float, "l2": float, "n1": int, "n2": int},
    "solver": {"tol": float, "max_iters": int, "omega": float},
    "sim": {"dt": float, "t": float, "tail_tol": float, "n_paths": int,
            "seed": int},
    "output": {"directory": str, "formats": str},
}

_DEFAULTS: dict[str, dict[str, str]] = {
    "model": {"theta1": "0.0", "theta2": "0.0", "sigma11": "1.0",
              "sigma12": "0.0", "sigma22": "1.0", "gamma": "1.0"},
    "cost": {"a": "1.0", "b1": "1.0", "b2": "0.0"},
    "grid": {"l1": "8.0", "l2": "8.0", "n1": "256", "n2": "256"},
    "solver": {"tol": "1e-8", "max_iters": "200000", "omega": "1.5"},
    "sim": {"dt": "1e-3", "n_paths": "10000", "seed": "0"},
    "output": {"directory": "out", "formats": "csv"},
}


@dataclass(frozen=True)
class SolverSection:
    tol: float = 1e-8
    max_iters: int = 200_000
    omega: float = 1.5


@dataclass(frozen=True)
class SimSection:
    dt: float = 1e-3
    t: float | None = None
    tail_tol: float | None = None
    n_paths: int = 10_000
    seed: int = 0


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description; the single argument every CLI
    subcommand and the verification suite consume."""

    model: ModelParams
    cost: CostParams
    grid: GridSpec
    solver: SolverSection = field(default_factory=SolverSection)
    sim: SimSection = field(default_factory=SimSection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def default(cls) -> "RunConfig":
        return _build({})

    def flat(self) -> dict:
        """Dotted-key dict of every setting, for reproducibility sidecars."""
        m, c, g = self.model, self.cost, self.grid
        out = {
            "model.theta1": m.theta[0], "model.theta2": m.theta[1],
            "model.sigma11": m.sigma[0, 0], "model.sigma12": m.sigma[0, 1],
            "model.sigma22": m.sigma[1, 1], "model.gamma": m.gamma,
            "cost.a": c.a, "cost.b1": c.b1, "cost.b2": c.b2,
            "grid.l1": g.L1, "grid.l2": g.L2, "grid.n1": g.n1, "grid.n2": g.n2,
            "solver.tol": self.solver.tol,
            "solver.max_iters": self.solver.max_iters,
            "solver.omega": self.solver.omega,
            "sim.dt": self.sim.dt, "sim.n_paths": self.sim.n_paths,
            "sim.seed": self.sim.seed,
            "output.directory": self.output.directory,
            "output.formats": ",".join(self.output.formats),
        }
        if self.sim.t is not None:
            out["sim.t"] = self.sim.t
        if self.sim.tail_tol is not None:
            out["sim.tail_tol"] = self.sim.tail_tol
        return out


def _convert(section: str, key: str, raw: str):
    kind = _SCHEMA[section][key]
    try:
        if kind is int:
            val = int(raw)
        elif kind is float:
            val = float(raw)
        else:
            val = raw.strip()
    except ValueError:
        raise ConfigError(
            f"config key '{section}.{key}': cannot parse {raw!r} as {kind.__name__}"
        ) from None
    return val


def _merge(raw: dict[str, dict[str, str]]) -> dict[str, dict[str, str]]:
    merged = {s: dict(kv) for s, kv in _DEFAULTS.items()}
    for section, kv in raw.items():
        s = section.lower()
        if s not in _SCHEMA:
            raise ConfigError(f"unknown config section '{section}'")
        for key, value in kv.items():
            k = key.lower()
            if k not in _SCHEMA[s]:
                raise ConfigError(f"unknown config key '{s}.{key}'")
            merged[s][k] = value
    return merged


def _build(raw: dict[str, dict[str, str]]) -> RunConfig:
    merged = _merge(raw)
    vals = {s: {k: _convert(s, k, v) for k, v in kv.items()}
            for s, kv in merged.items()}

    m = vals["model"]
    model = ModelParams(
        theta=(m["theta1"], m["theta2"]),
        sigma=np.array([[m["sigma11"], m["sigma12"]],
                        [m["sigma12"], m["sigma22"]]]),
        gamma=m["gamma"])
    c = vals["cost"]
    cost = CostParams(a=c["a"], b1=c["b1"], b2=c["b2"])
    g = vals["grid"]
    if g["n1"] < 4 or g["n2"] < 4:
        raise ConfigError("grid.n1 and grid.n2 must be at least 4")
    if g["l1"] <= 0.0 or g["l2"] <= 0.0:
        raise ConfigError("grid.l1 and grid.l2 must be positive")
    grid = GridSpec(L1=g["l1"], L2=g["l2"], n1=g["n1"], n2=g["n2"])

    s = vals["solver"]
    if s["tol"] <= 0.0 or s["max_iters"] < 1:
        raise ConfigError("solver.tol must be positive and solver.max_iters >= 1")
    if not 0.0 < s["omega"] < 2.0:
        raise ConfigError("solver.omega must lie in (0, 2)")
    solver = SolverSection(tol=s["tol"], max_iters=s["max_iters"], omega=s["omega"])

    sm = vals["sim"]
    if "t" in sm and "tail_tol" in sm:
        raise ConfigError("set either sim.t or sim.tail_tol, not both")
    if sm["dt"] <= 0.0 or sm["n_paths"] < 2:
        raise ConfigError("sim.dt must be positive and sim.n_paths >= 2")
    sim = SimSection(dt=sm["dt"], t=sm.get("t"), tail_tol=sm.get("tail_tol"),
                     n_paths=sm["n_paths"], seed=sm["seed"])

    o = vals["output"]
    formats = tuple(f.strip() for f in o["formats"].split(",") if f.strip())
    for f in formats:
        if f != "csv":
            raise ConfigError(f"output.formats: unsupported format '{f}'")
    output = OutputSection(directory=o["directory"], formats=formats)

    return RunConfig(model=model, cost=cost, grid=grid, solver=solver,
                     sim=sim, output=output)


def parse_overrides(pairs) -> dict[str, dict[str, str]]:
    """Turn ["section.key=value", ...] into the nested raw-string layout."""
    raw: dict[str, dict[str, str]] = {}
    for item in pairs or ():
        head, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section, dot, key = head.partition(".")
        if not dot or not section or not key:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        raw.setdefault(section.strip(), {})[key.strip()] = value.strip()
    return raw


def load_config(path: str | Path | None = None, overrides=None) -> RunConfig:
    """Read an INI file (optional), apply dotted overrides, validate.

    All validation problems raise ConfigError naming the offending key.
    """
    raw: dict[str, dict[str, str]] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        parser = configparser.ConfigParser()
        try:
            parser.read_string(p.read_text(), source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {p}: {exc}") from None
        raw = {s: dict(parser.items(s)) for s in parser.sections()}
    for section, kv in parse_overrides(overrides).items():
        raw.setdefault(section, {}).update(kv)
    if path is not None:
        # a run description must pin the physical problem completely;
        # only solver/sim/output keys may fall back to defaults
        lowered = {s.lower(): {k.lower() for k in kv} for s, kv in raw.items()}
        for section in ("model", "cost", "grid"):
            for key in _SCHEMA[section]:
                if key not in lowered.get(section, set()):
                    raise ConfigError(f"missing required config key '{section}.{key}'")
    try:
        return _build(raw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
