"""Seeded replication engine and the statistics computed from it.

Replication ``k`` always draws its errors from stream ``k`` of the template's
seed, and its results land in row ``k`` of pre-allocated arrays, so an
ensemble is bitwise identical whatever the worker count or completion order.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _accel, _kernels
from .errors import ConfigError, ParameterError, ReplicationError
from .noise import generate_noise_sequence

__all__ = [
    "DEFAULT_CHECKPOINTS",
    "EnsembleResult",
    "run_replications",
    "empirical_coverage",
    "loglog_fit",
    "estimate_rate_slope",
    "estimate_covariance_sum",
]

DEFAULT_CHECKPOINTS = (10**2, 10**3, 10**4, 10**5)
# numpy backend: fixed block so results never depend on the worker count
_REP_BLOCK = 32


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Iterates of ``M`` replications at each checkpoint.

    ``x[k, j]`` is ``x_n`` of replication ``k`` at ``n = checkpoints[j]``;
    ``x_prev`` holds ``x_{n-1}`` (NaN at ``n = 1``).
    """

    seed: int
    checkpoints: tuple
    x: np.ndarray
    x_prev: np.ndarray
    x_star: float = None
    clamp_events: np.ndarray = None

    def __post_init__(self):
        for name in ("x", "x_prev", "clamp_events"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "checkpoints", tuple(int(n) for n in self.checkpoints))

    @property
    def M(self):
        return self.x.shape[0]

    def __eq__(self, other):
        if not isinstance(other, EnsembleResult):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.checkpoints == other.checkpoints
            and self.x_star == other.x_star
            and np.array_equal(self.x, other.x, equal_nan=True)
            and np.array_equal(self.x_prev, other.x_prev, equal_nan=True)
            and np.array_equal(self.clamp_events, other.clamp_events)
        )

    __hash__ = None

    def column(self, n):
        try:
            return self.checkpoints.index(int(n))
        except ValueError:
            raise ParameterError(f"checkpoint {n} was not recorded; have {self.checkpoints}") from None

    @property
    def errors(self):
        """``|x_n - x*|`` when the fixed point is known, else ``x_n`` itself."""
        if self.x_star is None:
            return self.x
        return np.abs(self.x - self.x_star)

    @property
    def successive_differences(self):
        return np.abs(self.x - self.x_prev)

    def median_errors(self):
        return np.median(self.errors, axis=0)

    def median_successive_differences(self):
        return np.median(self.successive_differences, axis=0)


def _normalise_checkpoints(checkpoints, n_max):
    cps = sorted({int(n) for n in checkpoints})
    if not cps:
        raise ConfigError("at least one checkpoint is required")
    if cps[0] < 1 or cps[-1] > n_max:
        raise ConfigError(f"checkpoints must lie in [1, n_max={n_max}], got {cps}")
    return tuple(cps)


def _run_indexed(fn, count, threads):
    threads = _accel.default_threads() if threads is None else int(threads)
    if threads < 1:
        raise ConfigError("thread count must be >= 1")
    if threads == 1 or count == 1:
        for k in range(count):
            fn(k)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # list() re-raises the first worker exception
        list(pool.map(fn, range(count)))


def run_replications(problem, config, noise_template, M, checkpoints=DEFAULT_CHECKPOINTS, threads=None):
    """Run ``M`` independent Mann traces; replication ``k`` uses stream ``k``."""
    M = int(M)
    if M < 1:
        raise ConfigError(f"replication count must be >= 1, got {M}")
    config.check(problem)
    cps = _normalise_checkpoints(checkpoints, config.n_max)
    # positions into x_1 .. x_{n_max+1}
    pos = np.array(cps, dtype=np.int64) - 1
    record = np.unique(np.concatenate([pos, pos[pos >= 1] - 1]))
    where = {int(p): s for s, p in enumerate(record)}
    cols = [where[int(p)] for p in pos]
    prev_cols = [where[int(p) - 1] if p >= 1 else -1 for p in pos]

    x_out = np.empty((M, len(cps)))
    prev_out = np.empty((M, len(cps)))
    clamp_out = np.zeros(M, dtype=np.int64)
    keys = [noise_template.with_stream(k).stream.key for k in range(M)]
    args = (config.x1, config.a, config.n_max)
    tail = (noise_template.phi, noise_template.innovation_scale,
            config.clamp_to_domain, problem.lo, problem.hi)

    def store(rows, vals, clamps):
        for j, (c, pc) in enumerate(zip(cols, prev_cols)):
            x_out[rows, j] = vals[:, c]
            prev_out[rows, j] = vals[:, pc] if pc >= 0 else np.nan
        clamp_out[rows] = clamps

    f_jit = problem.f_jit
    if f_jit is not None and _accel.USE_NUMBA:
        def work(k):
            x, _, fail, clamps = _kernels.mann_path(problem.f, f_jit, *args, keys[k], *tail)
            if fail:
                raise ReplicationError(
                    f"replication {k}: non-finite iterate at step {fail}", replication=k, step=fail)
            store(slice(k, k + 1), x[record][None, :], clamps)

        _run_indexed(work, M, threads)
    else:
        n_blocks = math.ceil(M / _REP_BLOCK)

        def work(b):
            rows = slice(b * _REP_BLOCK, min(M, (b + 1) * _REP_BLOCK))
            vals, _, fail, clamps = _kernels.mann_paths_numpy(
                problem.f, *args, keys[rows], *tail, record=record)
            bad = np.nonzero(fail)[0]
            if bad.size:
                k = rows.start + int(bad[0])
                raise ReplicationError(
                    f"replication {k}: non-finite iterate at step {int(fail[bad[0]])}",
                    replication=k, step=int(fail[bad[0]]))
            store(rows, vals, clamps)

        _run_indexed(work, n_blocks, threads)

    return EnsembleResult(seed=noise_template.seed, checkpoints=cps, x=x_out, x_prev=prev_out,
                          x_star=problem.known_fixed_point, clamp_events=clamp_out)


def empirical_coverage(ensemble, n, x_star, eps):
    """Fraction of replications with ``|x_n - x*| <= eps``."""
    col = ensemble.column(n)
    if eps < 0:
        raise ParameterError("eps must be >= 0")
    return float(np.mean(np.abs(ensemble.x[:, col] - x_star) <= eps))


def loglog_fit(ns, values):
    """Least-squares line through ``(log n, log value)``; returns ``(slope, intercept)``."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.size < 3:
        raise ParameterError("a rate fit needs at least 3 points")
    if np.any(values <= 0):
        raise ParameterError("degenerate fit: non-positive value in the series")
    slope, intercept = np.polyfit(np.log(ns), np.log(values), 1)
    return float(slope), float(intercept)


def estimate_rate_slope(ensemble, window=None):
    """Slope of log(median error) against log n over checkpoints inside ``window``."""
    cps = np.array(ensemble.checkpoints)
    lo, hi = window if window is not None else (cps[0], cps[-1])
    keep = (cps >= lo) & (cps <= hi)
    if keep.sum() < 3:
        raise ParameterError(f"window {window} holds fewer than 3 checkpoints")
    med = ensemble.median_errors()[keep]
    if np.any(med == 0):
        raise ParameterError("degenerate fit: zero median error")
    return loglog_fit(cps[keep], med)


def _z_weights(n, a, c):
    """``a n^g / i^2 * prod_{j=i+1..n}(1 - g/j)`` for i = 1..n."""
    g = a * (1.0 - c)
    i = np.arange(1, n + 1, dtype=float)
    tail = np.ones(n)
    if n > 1:
        tail[:-1] = np.cumprod((1.0 - g / i[:0:-1]))[::-1]
    return a * n ** g / i ** 2 * tail


def estimate_covariance_sum(noise_spec, n, a, c, M, threads=None):
    """Plug-in estimate of ``s_n^2 = sum_i sum_k |Cov(Z_i, Z_k)|``.

    ``Z_i`` is the weighted, centred ``|xi_i|`` from the rate argument;
    ``E|xi_i|`` is replaced by the cross-replication mean, which biases the
    estimate by O(1/sqrt(M)).  Cost is O(M n + n^2), so keep ``n`` moderate.
    """
    n, M = int(n), int(M)
    if M < 100:
        raise ParameterError(f"covariance estimation needs M >= 100 replications, got {M}")
    if n < 1:
        raise ParameterError("n must be >= 1")
    paths = np.empty((M, n))

    def fill(k):
        paths[k] = generate_noise_sequence(noise_spec.with_stream(k), n)

    _run_indexed(fill, M, threads)
    mag = np.abs(paths)
    z = (mag - mag.mean(axis=0)) * _z_weights(n, a, c)
    cov = z.T @ z / (M - 1)
    return float(np.sum(np.abs(cov)))
