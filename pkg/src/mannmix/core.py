"""Picard baseline and the stochastic Mann recursion.

With steps ``a_n = b_n = a/n`` and noise weight ``c_n = a/n**2`` the update is::

    x_{n+1} = (1 - a/n) x_n + (a/n) [ f(x_n) + xi_n / n ]

Iteration starts at ``n = 1`` and uses the ``n``-th AR(1) state at step ``n``.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _accel, _kernels
from .errors import (
    BoundNotApplicableError,
    ConfigError,
    DomainEscapeError,
    InvalidStateError,
    UnsupportedError,
)

__all__ = [
    "FixedPointProblem",
    "MannConfig",
    "IterationTrace",
    "PathwiseBound",
    "NegativeCoefficientWarning",
    "picard_run",
    "mann_step",
    "run_mann",
    "pathwise_error_bound",
]

BOUND_SLACK = 1e-12


class NegativeCoefficientWarning(RuntimeWarning):
    """Raised as a warning when ``n < a`` makes ``1 - a/n`` negative."""


@dataclass(frozen=True)
class FixedPointProblem:
    """A real map ``f`` with declared contraction constant ``c`` on ``[lo, hi]``.

    ``f`` should accept floats and, ideally, numpy arrays (the numpy backend
    vectorises across replications).  Construction does not reject
    ``c >= 1`` so that the hypothesis validator can report it; call
    :meth:`check` (done by every solver entry point) to enforce it.
    """

    f: object
    c: float
    domain: tuple = (-math.inf, math.inf)
    known_fixed_point: float = None
    name: str = "custom"
    _jit: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise ConfigError(f"domain must satisfy lo < hi, got {self.domain}")
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    @property
    def lo(self):
        return self.domain[0]

    @property
    def hi(self):
        return self.domain[1]

    @property
    def f_jit(self):
        """Numba-compiled ``f`` (None when numba is off or ``f`` will not compile)."""
        if not self._jit:
            self._jit.append(_accel.jit_callable(self.f))
        return self._jit[0]

    def contains(self, x):
        return self.lo <= x <= self.hi

    def check(self):
        if not (0.0 < self.c < 1.0):
            raise ConfigError(f"H2 violated: contraction constant must lie in (0, 1), got c={self.c}")
        x_star = self.known_fixed_point
        if x_star is not None:
            resid = abs(float(self.f(x_star)) - x_star)
            if resid > 1e-12 * max(1.0, abs(x_star)):
                raise ConfigError(f"known fixed point is not fixed: |f(x*) - x*| = {resid:.3e}")


@dataclass(frozen=True)
class MannConfig:
    a: float
    x1: float
    N: float
    n_max: int
    clamp_to_domain: bool = False

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError(f"step constant a must be > 0, got {self.a}")
        if not self.N > 0:
            raise ConfigError(f"a-priori radius N must be > 0, got {self.N}")
        if int(self.n_max) < 1 or int(self.n_max) != self.n_max:
            raise ConfigError(f"n_max must be a positive integer, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))

    def rate(self, problem):
        """The exponent ``a(1 - c)`` that governs every bound."""
        return self.a * (1.0 - problem.c)

    def check(self, problem):
        problem.check()
        g = self.rate(problem)
        if not 0.0 < g < 1.0:
            raise ConfigError(f"step window violated: need 0 < a(1-c) < 1, got a(1-c)={g}")
        if not problem.contains(self.x1):
            raise ConfigError(f"x1={self.x1} lies outside the domain {problem.domain}")
        x_star = problem.known_fixed_point
        if x_star is not None and abs(self.x1 - x_star) > self.N:
            raise ConfigError(f"H1 violated: |x1 - x*| = {abs(self.x1 - x_star)} exceeds N={self.N}")


@dataclass(frozen=True, eq=False)
class IterationTrace:
    """Iterates ``x_1, x_2, ...`` and the errors ``xi_n`` used at each step.

    ``states`` has one entry ``(n, x_n, xi_n)`` per step taken.  For a Mann
    trace ``x`` additionally holds the successor of the last state,
    ``x_{n_max+1}``.  Arrays are read-only.
    """

    x: np.ndarray
    xi: np.ndarray
    x_star: float = None
    clamp_events: int = 0
    kind: str = "mann"

    def __post_init__(self):
        for name in ("x", "xi"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.xi)

    def __eq__(self, other):
        if not isinstance(other, IterationTrace):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.clamp_events == other.clamp_events
            and self.x_star == other.x_star
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.xi, other.xi)
        )

    __hash__ = None

    @property
    def n_max(self):
        return len(self.xi)

    @property
    def states(self):
        return [(n + 1, float(self.x[n]), float(self.xi[n])) for n in range(len(self.xi))]

    @property
    def x_final(self):
        return float(self.x[-1])

    @property
    def recorded_errors(self):
        if self.x_star is None:
            return None
        return np.abs(self.x - self.x_star)

    def x_at(self, n):
        """The iterate ``x_n`` (1-based)."""
        if not 1 <= n <= len(self.x):
            raise IndexError(f"n={n} outside 1..{len(self.x)}")
        return float(self.x[n - 1])


def picard_run(problem, x1, n, clamp=False):
    """Plain successive substitution ``x_{k+1} = f(x_k)``, ``n`` states."""
    n = int(n)
    if n < 1:
        raise ConfigError(f"iteration count must be >= 1, got {n}")
    if not problem.contains(x1):
        raise ConfigError(f"x1={x1} lies outside the domain {problem.domain}")
    lo, hi = problem.domain
    if clamp:
        # projection has to happen inside the loop, so stay in Python
        x = np.empty(n)
        x[0] = x1
        clamps = 0
        for k in range(1, n):
            y = float(problem.f(x[k - 1]))
            if y < lo or y > hi:
                clamps += 1
                y = min(max(y, lo), hi)
            x[k] = y
    else:
        x = _kernels.picard_path(problem.f, problem.f_jit, float(x1), n)
        clamps = 0
        bad = ~((x >= lo) & (x <= hi))
        if bad.any():
            k = int(np.argmax(bad))
            raise DomainEscapeError(f"Picard iterate x_{k + 1}={x[k]} left the domain {problem.domain}", step=k)
    return IterationTrace(x=x, xi=np.zeros(n), x_star=problem.known_fixed_point,
                          clamp_events=clamps, kind="picard")


def _warn_negative(a):
    warnings.warn(
        f"a={a} > 1: the coefficient (1 - a/n) is negative for n < a",
        NegativeCoefficientWarning,
        stacklevel=3,
    )


def mann_step(x_n, n, problem, config, xi_n):
    """One stochastic Mann update; returns ``x_{n+1}``."""
    if n < 1:
        raise ConfigError(f"step index must be >= 1, got {n}")
    if not (math.isfinite(x_n) and math.isfinite(xi_n)):
        raise InvalidStateError(f"non-finite state at step {n}: x={x_n}, xi={xi_n}", step=n)
    if n < config.a:
        _warn_negative(config.a)
    step = config.a / n
    x = (1.0 - step) * x_n + step * (float(problem.f(x_n)) + xi_n / n)
    if not math.isfinite(x):
        raise InvalidStateError(f"update produced non-finite x at step {n}", step=n)
    if config.clamp_to_domain:
        x = min(max(x, problem.lo), problem.hi)
    return x


def run_mann(problem, config, noise):
    """Run ``config.n_max`` Mann steps with errors drawn from ``noise``."""
    config.check(problem)
    if config.a > 1:
        _warn_negative(config.a)
    x, xi, fail, clamps = _kernels.mann_path(
        problem.f, problem.f_jit, config.x1, config.a, config.n_max,
        noise.stream.key, noise.phi, noise.innovation_scale,
        config.clamp_to_domain, problem.lo, problem.hi,
    )
    if fail:
        raise InvalidStateError(f"non-finite iterate produced at step {fail}", step=fail)
    return IterationTrace(x=x, xi=xi, x_star=problem.known_fixed_point, clamp_events=clamps)


@dataclass(frozen=True, eq=False)
class PathwiseBound:
    n: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def gap(self):
        return self.lhs - self.rhs

    @property
    def max_violation(self):
        return float(np.max(self.gap))

    @property
    def violations(self):
        """Steps where ``lhs > rhs + slack``."""
        return int(np.count_nonzero(self.gap > BOUND_SLACK))

    def __iter__(self):
        return zip(self.n.tolist(), self.lhs.tolist(), self.rhs.tolist())

    def __len__(self):
        return len(self.n)


def pathwise_error_bound(trace, problem, config):
    """Compare ``|x_{n+1} - x*|`` with its pathwise bound at every step.

    The bound is ``N prod_{i<=n}(1 - g/i) + sum_i (a/i^2) prod_{j=i+1..n}(1 - g/j) |xi_i|``
    with ``g = a(1-c)``, evaluated from the ``xi`` stored in the trace.
    """
    x_star = problem.known_fixed_point
    if x_star is None:
        raise UnsupportedError("pathwise bound needs a known fixed point")
    if trace.clamp_events:
        raise BoundNotApplicableError(
            f"trace has {trace.clamp_events} clamp events; the bound covers the unclamped recursion only"
        )
    if len(trace.x) != len(trace.xi) + 1:
        raise BoundNotApplicableError("trace does not carry the successor of its last state")
    rhs = _kernels.pathwise_bound_rhs(float(config.N), float(config.a), float(problem.c),
                              np.abs(np.asarray(trace.xi)))
    lhs = np.abs(trace.x[1:] - x_star)
    n = np.arange(1, len(trace.xi) + 1)
    return PathwiseBound(n=n, lhs=lhs, rhs=np.asarray(rhs))
