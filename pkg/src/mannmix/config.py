"""YAML run configuration.

Schema (every key optional; unset values fall back to the selected builtin
case, and the builtin defaults to ``golden``)::

    problem:
      builtin: golden          # golden | kepler, or leave null and give:
      expression: null         # one-variable map in x, e.g. "sqrt(x + 1)"
      c: null                  # declared contraction constant
      domain: null             # [lo, hi]
      x_star: null             # known fixed point, if any
    mann:
      a: 0.25
      x1: 1.3
      N: null                  # default |x1 - x*| (required without x*)
      n_max: 100000
      clamp: false
    noise:
      phi: 0.8
      scale: 1.0
      seed: 42
    bounds:
      p: 100.0
      beta: 100.0
      d: 1.0
      rho: 0.05
      r: 50.0
      delta: 1.0
      K1: 1.0
      K3: 1.0
      c_fn: 1.0
      S: null                  # default: the series constant for (a, c)
      s_n_sq: null
      n_cap: 1000000000000
      t3_form: final           # final | intermediate
    ensemble:
      M: 100
      checkpoints: [100, 1000, 10000, 100000]
"""
import ast
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .bounds import BoundConstants, MixingParams
from .core import FixedPointProblem, MannConfig
from .errors import ConfigError
from .examples import builtin_case
from .montecarlo import DEFAULT_CHECKPOINTS
from .noise import NoiseSpec

__all__ = ["RunConfig", "ResolvedRun", "compile_expression", "load_config"]

_FUNCS = {
    "sqrt": np.sqrt, "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos,
    "tan": np.tan, "arctan": np.arctan, "atan": np.arctan, "sinh": np.sinh,
    "cosh": np.cosh, "tanh": np.tanh, "abs": np.abs,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def compile_expression(text):
    """Turn ``"sqrt(x + 1)"`` into a numpy-vectorised callable of ``x``."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise ConfigError(f"unsupported syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Name) and node.id != "x" and node.id not in _FUNCS and node.id not in _CONSTS:
            raise ConfigError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ConfigError(f"only {sorted(_FUNCS)} may be called in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigError(f"non-numeric constant in {text!r}")
    namespace = {"__builtins__": {}, **_FUNCS, **_CONSTS}
    # numba resolves globals through the function's __globals__, so exec into namespace
    exec(compile(f"def expr_map(x):\n    return {text}\n", "<expression>", "exec"), namespace)
    return namespace["expr_map"]


@dataclass
class ProblemSection:
    builtin: str = "golden"
    expression: str = None
    c: float = None
    domain: list = None
    x_star: float = None


@dataclass
class MannSection:
    a: float = None
    x1: float = None
    N: float = None
    n_max: int = None
    clamp: bool = False


@dataclass
class NoiseSection:
    phi: float = None
    scale: float = None
    seed: int = 42


@dataclass
class BoundsSection:
    p: float = 100.0
    beta: float = 100.0
    d: float = 1.0
    rho: float = 0.05
    r: float = 50.0
    delta: float = 1.0
    K1: float = 1.0
    K3: float = 1.0
    c_fn: float = 1.0
    S: float = None
    s_n_sq: float = None
    n_cap: int = 10**12
    t3_form: str = "final"


@dataclass
class EnsembleSection:
    M: int = 100
    checkpoints: list = field(default_factory=lambda: list(DEFAULT_CHECKPOINTS))


_SECTIONS = {
    "problem": ProblemSection,
    "mann": MannSection,
    "noise": NoiseSection,
    "bounds": BoundsSection,
    "ensemble": EnsembleSection,
}


@dataclass
class ResolvedRun:
    problem: FixedPointProblem
    mann: MannConfig
    noise: NoiseSpec
    params: MixingParams
    consts: BoundConstants
    M: int
    checkpoints: tuple
    n_cap: int
    t3_form: str
    case: object = None


@dataclass
class RunConfig:
    problem: ProblemSection = field(default_factory=ProblemSection)
    mann: MannSection = field(default_factory=MannSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    bounds: BoundsSection = field(default_factory=BoundsSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)

    # -- serialisation ------------------------------------------------------

    def to_dict(self):
        return asdict(self)

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data):
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        unknown = set(data) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        kwargs = {}
        for name, section_cls in _SECTIONS.items():
            body = data.get(name) or {}
            if not isinstance(body, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            allowed = {f.name for f in fields(section_cls)}
            bad = set(body) - allowed
            if bad:
                raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
            kwargs[name] = section_cls(**body)
        return cls(**kwargs)

    @classmethod
    def from_yaml(cls, text):
        try:
            return cls.from_dict(yaml.safe_load(text))
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from None

    def set(self, dotted, raw):
        """Apply an override such as ``mann.n_max=10000`` (value parsed as YAML)."""
        try:
            section, key = dotted.split(".", 1)
            target = getattr(self, section)
        except (ValueError, AttributeError):
            raise ConfigError(f"override key must look like section.key, got {dotted!r}") from None
        if section not in _SECTIONS or key not in {f.name for f in fields(target)}:
            raise ConfigError(f"unknown config key {dotted!r}")
        setattr(target, key, yaml.safe_load(raw) if isinstance(raw, str) else raw)

    # -- resolution ---------------------------------------------------------

    def resolve(self, strict=True):
        """Build the domain objects, applying builtin defaults.

        With ``strict`` the Mann preconditions (H1, H2, the step window) are
        enforced; the validator resolves non-strictly so it can report them.
        """
        p = self.problem
        case = None
        try:
            if p.expression is not None:
                if p.c is None or p.domain is None:
                    raise ConfigError("an expression problem needs both c and domain")
                problem = FixedPointProblem(
                    compile_expression(p.expression), float(p.c), tuple(p.domain),
                    None if p.x_star is None else float(p.x_star), name="expression")
            else:
                case = builtin_case(p.builtin or "golden", seed=int(self.noise.seed))
                base = case.problem
                problem = FixedPointProblem(
                    base.f,
                    base.c if p.c is None else float(p.c),
                    base.domain if p.domain is None else tuple(p.domain),
                    base.known_fixed_point if p.x_star is None else float(p.x_star),
                    name=base.name)

            m = self.mann
            fallback = case.config if case is not None else None
            a = _pick(m.a, fallback and fallback.a, "mann.a")
            x1 = _pick(m.x1, fallback and fallback.x1, "mann.x1")
            n_max = _pick(m.n_max, fallback and fallback.n_max, "mann.n_max")
            N = m.N
            if N is None:
                if problem.known_fixed_point is None:
                    raise ConfigError("mann.N is required when the fixed point is unknown")
                N = abs(float(x1) - problem.known_fixed_point)
            mann = MannConfig(float(a), float(x1), float(N), int(n_max), bool(m.clamp))
            if strict:
                mann.check(problem)

            nz = self.noise
            base_noise = case.noise if case is not None else NoiseSpec()
            noise = NoiseSpec(
                base_noise.phi if nz.phi is None else float(nz.phi),
                base_noise.innovation_scale if nz.scale is None else float(nz.scale),
                int(nz.seed))

            b = self.bounds
            params = MixingParams(float(b.p), float(b.beta), float(b.d), float(b.rho))
            consts = BoundConstants(
                r=float(b.r), delta=float(b.delta), K1=float(b.K1), K3=float(b.K3),
                c_fn=float(b.c_fn), S=None if b.S is None else float(b.S),
                s_n_sq=None if b.s_n_sq is None else float(b.s_n_sq))
            if consts.S is None and 0.0 < mann.a * (1.0 - problem.c) < 1.0 and 0.0 < problem.c < 1.0:
                consts = consts.with_series(mann.a, problem.c)
            if b.t3_form not in ("final", "intermediate"):
                raise ConfigError(f"bounds.t3_form must be final or intermediate, got {b.t3_form!r}")

            e = self.ensemble
            M = int(e.M)
            if M < 1:
                raise ConfigError(f"ensemble.M must be >= 1, got {M}")
            checkpoints = tuple(sorted({int(n) for n in e.checkpoints}))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None
        return ResolvedRun(problem, mann, noise, params, consts, M, checkpoints,
                           int(b.n_cap), b.t3_form, case)


def _pick(value, fallback, name):
    if value is not None:
        return value
    if fallback is None:
        raise ConfigError(f"{name} is required for an expression problem")
    return fallback


def load_config(path):
    if path is None:
        return RunConfig()
    try:
        with open(path) as fh:
            return RunConfig.from_yaml(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
