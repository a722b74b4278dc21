"""Run configuration: YAML files with a fixed schema, unknown keys rejected.

Schema (every section optional unless marked)::

    seed: 0                       # int >= 0
    instance:                     # required, or a path to a YAML file holding this mapping
      family: example_esempio     # linear | power | polynomial | example_esempio; "example_esempio(3)" ok
      T: 2                        # int >= 1
      lambda: 1.0                 # > 0
      params: {gamma: 3}          # family parameters (value, q, coefficients, gamma, nu)
      exponents:                  # one of
        constant: 2.0
        alternating: [3.0, 2.0]   # p(0) = first, then alternate
        values: [3, 2, 3, 2]      # explicit p(0..T+1)
    solver:
      tol: 1.0e-10
      rel_tol: null
      max_iter: 100
      deflation_power: 2.0
      deflation_shift: 1.0
      distinct_tol: 1.0e-8
      n_starts: 16
      radius: 1.0
    theory:
      probes: {t0: 1.0, n_terms: 40}   # or an explicit decreasing list
      tail: null
    cascade:
      m_range: [4, 7]             # example family: c_j = s_m for m in the range
      c_seq: null                 # explicit decreasing radii (wins over m_range)
      tol: 1.0e-9
      rel_tol: 1.0e-10
    example:
      m_range: [4, 7]
    sweep:
      n_points: 9
      clamp: 0.01                 # relative distance kept from each endpoint
      fallback: [0.1, 10.0]       # used when an endpoint is 0 or infinite
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import yaml

from .gallery import ExampleG, make_instance
from .problem import ExponentMap, ProblemInstance
from .solver import SolverConfig

COMMANDS = ("validate", "theory", "solve", "cascade", "multistart", "example", "sweep")


class ConfigError(ValueError):
    pass


@dataclass
class InstanceSpec:
    family: str
    T: int
    lam: float = 1.0
    params: dict = field(default_factory=dict)
    exponents: dict | None = None

    def build(self) -> ProblemInstance:
        params = dict(self.params)
        if "gamma" in params:
            params["gamma"] = Fraction(str(params["gamma"]))
        if self.exponents is not None:
            params["exponents"] = _exponent_map(self.exponents, self.T)
        return make_instance(self.family, self.T, lam=self.lam, **params)

    def as_dict(self) -> dict:
        return {
            "family": self.family,
            "T": self.T,
            "lambda": self.lam,
            "params": _plain(self.params),
            "exponents": _plain(self.exponents),
        }


@dataclass
class SolverSection:
    tol: float = 1e-10
    rel_tol: float | None = None
    max_iter: int = 100
    deflation_power: float = 2.0
    deflation_shift: float = 1.0
    distinct_tol: float = 1e-8
    n_starts: int = 16
    radius: float = 1.0

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            tol=self.tol,
            rel_tol=self.rel_tol,
            max_iter=self.max_iter,
            deflation_power=self.deflation_power,
            deflation_shift=self.deflation_shift,
            distinct_tol=self.distinct_tol,
        )


@dataclass
class TheorySection:
    probes: object = None  # None | {t0, n_terms} | list
    tail: int | None = None

    def probe_points(self) -> list | None:
        if self.probes is None:
            return None
        if isinstance(self.probes, dict):
            t0 = float(self.probes.get("t0", 1.0))
            n = int(self.probes.get("n_terms", 40))
            return [t0 * 2.0**-j for j in range(n)]
        return [float(t) for t in self.probes]


@dataclass
class CascadeSection:
    m_range: tuple = (4, 7)
    c_seq: list | None = None
    tol: float = 1e-9
    rel_tol: float | None = 1e-10

    def radii(self, instance: ProblemInstance) -> list:
        if self.c_seq is not None:
            return [float(c) for c in self.c_seq]
        ex = instance.meta.get("example") or ExampleG(3)
        lo, hi = self.m_range
        return [ex.s(m) for m in range(lo, hi + 1)]


@dataclass
class ExampleSection:
    m_range: tuple | None = None


@dataclass
class SweepSection:
    n_points: int = 9
    clamp: float = 0.01
    fallback: tuple = (0.1, 10.0)


@dataclass
class RunConfig:
    instance: InstanceSpec
    command: str | None = None
    seed: int = 0
    out: str | None = None
    format: str = "json"
    source: str | None = None
    solver: SolverSection = field(default_factory=SolverSection)
    theory: TheorySection = field(default_factory=TheorySection)
    cascade: CascadeSection = field(default_factory=CascadeSection)
    example: ExampleSection = field(default_factory=ExampleSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    def as_dict(self) -> dict:
        d = {
            "command": self.command,
            "seed": self.seed,
            "instance": self.instance.as_dict(),
        }
        for name in ("solver", "theory", "cascade", "example", "sweep"):
            d[name] = _plain(dataclasses.asdict(getattr(self, name)))
        return d


_TOP_KEYS = {"seed", "instance", "solver", "theory", "cascade", "example", "sweep", "command", "out", "format"}
_INSTANCE_KEYS = {"family", "T", "lambda", "params", "exponents"}
_SECTIONS = {
    "solver": SolverSection,
    "theory": TheorySection,
    "cascade": CascadeSection,
    "example": ExampleSection,
    "sweep": SweepSection,
}


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, Fraction):
        return str(v)
    return v


def _reject_unknown(d: dict, allowed: set, where: str):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _exponent_map(spec: dict, T: int) -> ExponentMap:
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("exponents must have exactly one of: constant, alternating, values")
    (kind, val), = spec.items()
    if kind == "constant":
        return ExponentMap.constant(float(val), T)
    if kind == "alternating":
        high, low = val
        return ExponentMap.alternating(float(high), float(low), T)
    if kind == "values":
        if len(val) != T + 2:
            raise ConfigError(f"exponents.values needs T+2 = {T + 2} entries, got {len(val)}")
        return ExponentMap(tuple(val))
    raise ConfigError(f"unknown exponent profile {kind!r}")


def _positive(x, name):
    if not x > 0:
        raise ConfigError(f"{name} must be positive, got {x!r}")


def parse_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a mapping against the schema; raises ConfigError on the first problem."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    _reject_unknown(raw, _TOP_KEYS, "config")
    inst = raw.get("instance")
    if inst is None:
        raise ConfigError("config needs an 'instance' section")
    if isinstance(inst, str):
        path = Path(inst) if base_dir is None else base_dir / inst
        if not path.is_file():
            raise ConfigError(f"instance file not found: {path}")
        inst = yaml.safe_load(path.read_text())
    if not isinstance(inst, dict):
        raise ConfigError("instance must be a mapping or a file path")
    _reject_unknown(inst, _INSTANCE_KEYS, "instance")
    for key in ("family", "T"):
        if key not in inst:
            raise ConfigError(f"instance.{key} is required")
    T = inst["T"]
    if not isinstance(T, int) or isinstance(T, bool) or T < 1:
        raise ConfigError(f"instance.T must be an integer >= 1, got {T!r}")
    lam = float(inst.get("lambda", 1.0))
    _positive(lam, "instance.lambda")
    spec = InstanceSpec(str(inst["family"]), T, lam, dict(inst.get("params") or {}), inst.get("exponents"))

    sections = {}
    for name, cls in _SECTIONS.items():
        sec = raw.get(name) or {}
        if not isinstance(sec, dict):
            raise ConfigError(f"{name} must be a mapping")
        _reject_unknown(sec, {f.name for f in dataclasses.fields(cls)}, name)
        sections[name] = cls(**sec)
    s = sections["solver"]
    _positive(s.tol, "solver.tol")
    _positive(s.max_iter, "solver.max_iter")
    _positive(s.n_starts, "solver.n_starts")
    _positive(s.radius, "solver.radius")
    c = sections["cascade"]
    c.m_range = tuple(c.m_range)
    if len(c.m_range) != 2 or c.m_range[0] > c.m_range[1] or c.m_range[0] < 2:
        raise ConfigError("cascade.m_range must be [lo, hi] with 2 <= lo <= hi")
    if c.c_seq is not None and any(not (a > b > 0) for a, b in zip(c.c_seq, c.c_seq[1:])):
        raise ConfigError("cascade.c_seq must be positive and strictly decreasing")
    e = sections["example"]
    if e.m_range is not None:
        e.m_range = tuple(e.m_range)
    w = sections["sweep"]
    w.fallback = tuple(w.fallback)
    if w.n_points < 2 or not 0 <= w.clamp < 0.5:
        raise ConfigError("sweep.n_points must be >= 2 and sweep.clamp in [0, 0.5)")
    if not 0 < w.fallback[0] < w.fallback[1]:
        raise ConfigError("sweep.fallback must be 0 < lo < hi")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    command = raw.get("command")
    if command is not None and command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    fmt = raw.get("format", "json")
    if fmt not in ("json", "csv", "both"):
        raise ConfigError(f"format must be json, csv or both, got {fmt!r}")
    return RunConfig(spec, command, seed, raw.get("out"), fmt, None, **sections)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cfg = parse_config(yaml.safe_load(path.read_text()) or {}, path.parent)
    cfg.source = str(path)
    return cfg
