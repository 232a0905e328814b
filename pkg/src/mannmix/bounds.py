"""Executable forms of the convergence inequalities.

Notation: ``g = a(1 - c)`` is the contraction-adjusted step exponent and
``q = (beta + 1) p / (beta + p)`` the Fuk-Nagaev polynomial exponent.  The
constants ``K1``, ``K3`` and the Fuk-Nagaev constant ``c_fn`` are not pinned
down by the theory; they default to 1, so every bound here is meaningful up
to those constants.
"""
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import hyp2f1

from . import _kernels
from .errors import InvalidWindowError, NotFoundError, ParameterError

__all__ = [
    "MixingParams",
    "BoundConstants",
    "HypothesisCheck",
    "HypothesisReport",
    "LipschitzGrid",
    "PASS",
    "FAIL",
    "NOT_CHECKABLE",
    "product_bound",
    "series_constant_S",
    "weighted_sum_bound",
    "inequality_worst_gaps",
    "fuk_nagaev_bound",
    "rate_epsilon",
    "tail_terms",
    "tail_sum",
    "validate_hypotheses",
    "find_n_sigma",
    "estimate_lipschitz",
]

PASS = "pass"
FAIL = "fail"
NOT_CHECKABLE = "not-checkable"

T3_FINAL = "final"
T3_INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class MixingParams:
    """Tail exponent ``p``, mixing decay ``d n**-beta`` and rate exponent ``rho``."""

    p: float
    beta: float
    d: float = 1.0
    rho: float = 0.05

    def __post_init__(self):
        if not self.p > 2:
            raise ParameterError(f"p must exceed 2, got {self.p}")
        if not self.beta > 1:
            raise ParameterError(f"beta must exceed 1, got {self.beta}")
        if not self.d >= 1:
            raise ParameterError(f"d must be >= 1, got {self.d}")
        if not self.rho > 0:
            raise ParameterError(f"rho must be > 0, got {self.rho}")

    @property
    def q(self):
        return (self.beta + 1.0) * self.p / (self.beta + self.p)

    @property
    def window_lower(self):
        """``2(beta + p) / (p (beta + 1))``, i.e. ``2 / q``."""
        return 2.0 * (self.beta + self.p) / (self.p * (self.beta + 1.0))

    @property
    def h5_product(self):
        return self.rho * self.q


@dataclass(frozen=True)
class BoundConstants:
    r: float = 50.0
    delta: float = 1.0
    K1: float = 1.0
    K3: float = 1.0
    c_fn: float = 1.0
    S: float = None
    s_n_sq: float = None

    def __post_init__(self):
        if not self.r >= 1:
            raise ParameterError(f"r must be >= 1, got {self.r}")
        if not self.delta >= 0:
            raise ParameterError(f"delta must be >= 0, got {self.delta}")
        for name in ("K1", "K3", "c_fn"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.S is not None and self.S < 0:
            raise ParameterError("S must be >= 0")

    @property
    def K2(self):
        if self.S is None:
            raise ParameterError("K2 needs S; build the constants with with_series(a, c) or pass S")
        return (self.r * self.S / (1.0 + self.delta)) ** (self.r / 2.0)

    def with_series(self, a, c, tol=1e-12):
        return _replace(self, S=series_constant_S(a, c, tol))


def _replace(obj, **kw):
    d = asdict(obj)
    d.update(kw)
    return type(obj)(**d)


# ---------------------------------------------------------------------------
# product / sum inequalities


def _check_rate(a, c, need_a_below_one=True):
    if need_a_below_one and not a < 1:
        raise ParameterError(f"the product inequality needs a < 1, got a={a}")
    if not 0.0 < c < 1.0:
        raise ParameterError(f"contraction constant must lie in (0, 1), got c={c}")
    g = a * (1.0 - c)
    if not 0.0 < g < 1.0:
        raise ParameterError(f"need 0 < a(1-c) < 1, got {g}")
    return g


def product_bound(i, n, a, c):
    """``prod_{j=i+1..n} (1 - g/j)`` and its closed-form bound ``((i+1)/(n+1))**g``."""
    i, n = int(i), int(n)
    if i < 0 or n < i:
        raise ParameterError(f"need 0 <= i <= n, got i={i}, n={n}")
    g = _check_rate(a, c)
    j = np.arange(i + 1, n + 1, dtype=float)
    if j.size and g / j[0] >= 1.0:
        raise ParameterError(f"factor 1 - a(1-c)/j is not positive at j={i + 1}")
    exact = float(np.prod(1.0 - g / j)) if j.size else 1.0
    bound = ((i + 1.0) / (n + 1.0)) ** g
    return exact, bound


def _series_exponent(g, tol):
    if not tol > 0:
        raise ParameterError(f"tol must be > 0, got {tol}")
    if not 0.0 <= g < 1.0:
        raise ParameterError(f"series exponent a(1-c) must lie in [0, 1), got {g}")
    # Euler-Maclaurin tail for h(x) = (x+1)^g / x^2:
    #   sum_{i>N} h(i) = I(N) - h(N)/2 - h'(N)/12 + R,  |R| <= |h''(N)| / 120
    # and |h''(x)| <= 6 (x+1)^g / x^4 for x >= 16, which picks N.
    N = 16
    while 6.0 * (N + 1.0) ** g / N ** 4 / 120.0 > tol:
        N *= 2
    i = np.arange(1, N + 1, dtype=float)
    head = math.fsum((i + 1.0) ** g / i ** 2)
    b = 1.0 - g
    # int_N^inf (x+1)^g x^-2 dx, via t = 1/x
    integral = (1.0 / N) ** b / b * float(hyp2f1(-g, b, b + 1.0, -1.0 / N))
    h = (N + 1.0) ** g / N ** 2
    dh = h * (g / (N + 1.0) - 2.0 / N)
    return head + integral - h / 2.0 - dh / 12.0


def series_constant_S(a, c, tol=1e-12):
    """``S = sum_{i>=1} (i+1)**g / i**2`` with ``g = a(1-c)``, to absolute accuracy ``tol``."""
    return _series_exponent(a * (1.0 - c), tol)


def weighted_sum_bound(n, a, c, S=None):
    """``sum_i (a/i^2) prod_{j=i+1..n}(1 - g/j)`` and its bound ``a S / (n+1)**g``."""
    n = int(n)
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    g = _check_rate(a, c)
    if S is None:
        S = series_constant_S(a, c)
    i = np.arange(n, 0, -1, dtype=float)  # n, n-1, ..., 1
    prods = np.empty(n)
    prods[0] = 1.0
    if n > 1:
        prods[1:] = np.cumprod(1.0 - g / i[:-1])
    exact = float(np.sum(a / i ** 2 * prods))
    return exact, a * S / (n + 1.0) ** g


def inequality_worst_gaps(a, c, n_max, S=None):
    """Largest ``exact - bound`` of both inequalities over ``1 <= i < n <= n_max``."""
    _check_rate(a, c)
    if S is None:
        S = series_constant_S(a, c)
    return _kernels.inequality_scan(a, c, S, n_max)


# ---------------------------------------------------------------------------
# Fuk-Nagaev and the rate


def fuk_nagaev_bound(lam, r, n, s_n_sq, c_fn, beta, p):
    """Two-term Fuk-Nagaev tail bound for ``P{max_k |S_k| >= 4 lam}``::

        4 (1 + lam^2 / (r s_n^2))^(-r/2) + 2 c_fn n r^-1 (2 r / lam)^q
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be > 0, got {lam}")
    if not r >= 1:
        raise ParameterError(f"r must be >= 1, got {r}")
    if not (n > 0 and s_n_sq > 0 and c_fn > 0):
        raise ParameterError("n, s_n_sq and c_fn must be positive")
    if not (p > 2 and beta > 1):
        raise ParameterError("need p > 2 and beta > 1")
    q = (beta + 1.0) * p / (beta + p)
    gaussian = 4.0 * math.exp(-0.5 * r * math.log1p(lam * lam / (r * s_n_sq)))
    poly = 2.0 * c_fn * n / r * (2.0 * r / lam) ** q
    return gaussian + poly


def rate_epsilon(n, a, c, rho, delta):
    """Confidence radius ``sqrt(1+delta) sqrt(ln n) / n**(a(1-c) - rho)``."""
    n = int(n)
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    g = a * (1.0 - c)
    if not g > rho:
        raise InvalidWindowError(f"need a(1-c) > rho, got a(1-c)={g}, rho={rho}", "rho < a(1-c)")
    if delta < 0:
        raise ParameterError("delta must be >= 0")
    return math.sqrt(1.0 + delta) * math.sqrt(math.log(n)) / n ** (g - rho)


def _check_window(params, consts, rate=None):
    if not params.h5_product > 2:
        raise InvalidWindowError(
            f"H5 violated: rho*q = {params.h5_product:.6g} <= 2", "rho*q > 2")
    if not consts.r > 2.0 / params.rho:
        raise InvalidWindowError(
            f"need r > 2/rho = {2.0 / params.rho:.6g}, got r={consts.r}", "r > 2/rho")
    if rate is not None and not (params.rho < rate < 1.0):
        raise InvalidWindowError(
            f"need rho < a(1-c) < 1, got rho={params.rho}, a(1-c)={rate}", "rho < a(1-c) < 1")


def tail_terms(n, params, consts, rate=None, t3_form=T3_FINAL):
    """``(T1, T2, T3)`` at ``n``; their sum bounds ``P{|x_{n+1} - x*| > eps_n}``.

    ``t3_form="intermediate"`` uses the exponent ``rho q - 1`` on ``n`` from
    the unsimplified bound instead of the final ``rho q``.
    """
    n = int(n)
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    _check_window(params, consts, rate)
    q = params.q
    if t3_form == T3_FINAL:
        t3_exp = params.rho * q
    elif t3_form == T3_INTERMEDIATE:
        t3_exp = params.rho * q - 1.0
    else:
        raise ParameterError(f"unknown T3 form {t3_form!r}")
    t1 = consts.K1 / n ** (1.0 + consts.delta)
    t2 = consts.K2 / n ** (params.rho * consts.r / 2.0)
    t3 = consts.K3 / (n ** t3_exp * math.log(n) ** q)
    return t1, t2, t3


def tail_sum(n, params, consts, rate=None, t3_form=T3_FINAL):
    return math.fsum(tail_terms(n, params, consts, rate, t3_form))


def find_n_sigma(sigma, params, consts, n_cap=10**12, rate=None, t3_form=T3_FINAL):
    """Smallest ``n >= 2`` with ``T1 + T2 + T3 <= sigma`` (exponential then binary search)."""
    if not 0.0 < sigma < 1.0:
        raise ParameterError(f"sigma must lie in (0, 1), got {sigma}")
    n_cap = int(n_cap)
    if n_cap < 2:
        raise ParameterError("n_cap must be >= 2")

    def bound(n):
        return tail_sum(n, params, consts, rate, t3_form)

    if bound(2) <= sigma:
        return 2
    lo, hi = 2, 4
    while True:
        if hi >= n_cap:
            hi = n_cap
            at_cap = bound(hi)
            if at_cap > sigma:
                raise NotFoundError(
                    f"bound {at_cap:.6g} still exceeds sigma={sigma} at n_cap={n_cap}",
                    bound_at_cap=at_cap)
            break
        if bound(hi) <= sigma:
            break
        lo, hi = hi, 2 * hi
    # invariant: bound(lo) > sigma >= bound(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound(mid) <= sigma:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# hypothesis report


@dataclass(frozen=True)
class LipschitzGrid:
    n_grid: int = 10_000
    n_pairs: int = 10_000
    seed: int = 0
    tol: float = 1e-6


@dataclass(frozen=True)
class HypothesisCheck:
    status: str
    value: object = None
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    checks: dict = field(default_factory=dict)


    def __getitem__(self, key):
        return self.checks[key]

    @property
    def failed(self):
        return [k for k, v in self.checks.items() if v.status == FAIL]

    @property
    def ok(self):
        return not self.failed

    def to_dict(self):
        return {k: {"status": v.status, "value": v.value, "detail": v.detail}
                for k, v in self.checks.items()}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, default=float)

    def render(self):
        lines = []
        for k, v in self.checks.items():
            value = "" if v.value is None else f"  value={v.value}"
            lines.append(f"{k:<12} {v.status:<14}{value}  {v.detail}".rstrip())
        return "\n".join(lines)


def _lipschitz_window(problem, config):
    lo, hi = problem.domain
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi
    centre = config.x1
    half = 10.0 * config.N
    return max(lo, centre - half), min(hi, centre + half)


def estimate_lipschitz(f, lo, hi, grid=LipschitzGrid()):
    """Max of ``|f(x) - f(y)| / |x - y|`` over a uniform grid and random pairs."""
    x = np.linspace(lo, hi, grid.n_grid)
    fx = np.array([float(f(v)) for v in x])
    best = float(np.max(np.abs(np.diff(fx)) / np.diff(x)))
    rng = np.random.default_rng(grid.seed)
    u = rng.uniform(lo, hi, size=(grid.n_pairs, 2))
    fu = np.array([[float(f(a)), float(f(b))] for a, b in u])
    dx = np.abs(u[:, 0] - u[:, 1])
    ok = dx > 0
    if ok.any():
        best = max(best, float(np.max(np.abs(fu[ok, 0] - fu[ok, 1]) / dx[ok])))
    return best


def validate_hypotheses(problem, config, params, consts, grid=LipschitzGrid()):
    """Check what can be checked of H1-H5 and the rate window; never raises on failure."""
    checks = {}

    x_star = problem.known_fixed_point
    if x_star is None:
        checks["H1"] = HypothesisCheck(NOT_CHECKABLE, None, "fixed point unknown")
    else:
        dist = abs(config.x1 - x_star)
        checks["H1"] = HypothesisCheck(
            PASS if dist <= config.N else FAIL, dist, f"|x1 - x*| <= N={config.N}")

    lo, hi = _lipschitz_window(problem, config)
    try:
        lip = estimate_lipschitz(problem.f, lo, hi, grid)
    except (ValueError, ArithmeticError) as exc:
        lip = float("nan")
        detail = f"Lipschitz estimate failed: {exc}"
    else:
        detail = f"Lipschitz estimate on [{lo:g}, {hi:g}] <= c + {grid.tol:g} with c={problem.c}"
    h2_ok = 0.0 < problem.c < 1.0 and lip <= problem.c + grid.tol
    if not 0.0 < problem.c < 1.0:
        detail = f"contraction constant c={problem.c} outside (0, 1)"
    checks["H2"] = HypothesisCheck(PASS if h2_ok else FAIL, lip, detail)

    checks["H3"] = HypothesisCheck(
        NOT_CHECKABLE, params.p, "tail decay is an empirical question; see noise diagnostics")
    checks["H4"] = HypothesisCheck(
        PASS, params.beta,
        "AR(1) with |phi| < 1 is geometrically mixing, which dominates d n^-beta")

    h5 = params.h5_product
    checks["H5"] = HypothesisCheck(PASS if h5 > 2 else FAIL, h5, "rho*q > 2")

    g = config.rate(problem)
    lower = params.window_lower
    in_window = lower < params.rho < g < 1.0
    checks["rate_window"] = HypothesisCheck(
        PASS if in_window else FAIL, (lower, params.rho, g),
        f"{lower:.6g} < rho={params.rho:g} < a(1-c)={g:.6g} < 1")

    r_min = 2.0 / params.rho
    checks["r_condition"] = HypothesisCheck(
        PASS if consts.r > r_min else FAIL, consts.r, f"r > 2/rho = {r_min:.6g}")
    return HypothesisReport(checks)
