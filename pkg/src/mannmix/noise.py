"""AR(1) error sequences driven by Box-Muller Gaussians, plus diagnostics.

The error fed to the Mann update at step ``n`` is the ``n``-th state of::

    xi_0 = 0,    xi_{k+1} = phi * xi_k + g_k,    g_k = scale * BoxMuller(u1, u2)

so ``xi_1 = g_0``.  Innovation ``g_k`` uses uniform draws ``2k`` and ``2k+1``
of the stream (see :mod:`mannmix.rng`), with ``u1 = 1 - U`` mapped into
``(0, 1]``.  Only the cosine branch of Box-Muller is used; the sine
companion is discarded.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import ParameterError
from .rng import RngStream

__all__ = [
    "NoiseSpec",
    "NoiseDiagnostics",
    "box_muller",
    "ar1_next",
    "generate_noise_sequence",
    "tail_diagnostic",
    "empirical_autocorrelation",
    "noise_diagnostics",
]


@dataclass(frozen=True)
class NoiseSpec:
    phi: float = 0.8
    innovation_scale: float = 1.0
    seed: int = 42
    stream_id: int = 0

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ParameterError(f"AR(1) coefficient must satisfy |phi| < 1, got {self.phi}")
        if not (self.innovation_scale >= 0.0 and math.isfinite(self.innovation_scale)):
            raise ParameterError(f"innovation_scale must be finite and >= 0, got {self.innovation_scale}")

    @property
    def stream(self):
        return RngStream(self.seed, self.stream_id)

    def with_stream(self, stream_id):
        return replace(self, stream_id=int(stream_id))

    @property
    def stationary_variance(self):
        return self.innovation_scale ** 2 / (1.0 - self.phi ** 2)


@dataclass(frozen=True)
class NoiseDiagnostics:
    empirical_mean: float
    empirical_variance: float
    lag_autocorrelations: tuple = ()
    tail_ratio_sup: float = float("nan")
    tail_argmax: float = float("nan")
    p: float = float("nan")
    sample_size: int = 0
    extra: dict = field(default_factory=dict)


def box_muller(u1, u2):
    """Cosine-branch Box-Muller transform ``sqrt(-2 ln u1) cos(2 pi u2)``.

    ``u1`` must lie in ``(0, 1]`` and ``u2`` in ``[0, 1)``.
    """
    if not (0.0 < u1 <= 1.0):
        raise ParameterError(f"u1 must lie in (0, 1], got {u1}")
    if not (0.0 <= u2 < 1.0):
        raise ParameterError(f"u2 must lie in [0, 1), got {u2}")
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_kernels.TWO_PI * u2)


def ar1_next(xi, phi, g):
    if not abs(phi) < 1.0:
        raise ParameterError(f"|phi| < 1 required, got {phi}")
    if not (math.isfinite(xi) and math.isfinite(g)):
        raise ParameterError("non-finite AR(1) input")
    return phi * xi + g


def generate_noise_sequence(spec, n):
    """Return ``xi_1 .. xi_n`` for ``spec`` as a float64 array.

    Deterministic in ``(spec.seed, spec.stream_id)`` and prefix-consistent:
    the first ``m`` values do not depend on ``n``.
    """
    n = int(n)
    if n < 1:
        raise ParameterError(f"sequence length must be >= 1, got {n}")
    return _kernels.noise_sequence(spec.stream.key, spec.phi, spec.innovation_scale, n)


def tail_diagnostic(samples, p, t_grid):
    """Sup over ``t_grid`` of ``t**p * P_hat{|xi| > t}``.

    This only reports the number; whether it is small enough is the
    caller's call (a stationary AR(1) with unit innovations need not satisfy
    the ``t**-p`` tail condition literally).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ParameterError("tail diagnostic needs at least one sample")
    if not p > 2:
        raise ParameterError(f"tail exponent p must exceed 2, got {p}")
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0 or np.any(t <= 0):
        raise ParameterError("t_grid must be a nonempty set of positive reals")
    mag = np.sort(np.abs(x))
    # exceedances |x| > t via the sorted magnitudes
    exceed = (mag.size - np.searchsorted(mag, t, side="right")) / mag.size
    ratios = t ** p * exceed
    k = int(np.argmax(ratios))
    return NoiseDiagnostics(
        empirical_mean=float(np.mean(x)),
        empirical_variance=float(np.var(x)),
        tail_ratio_sup=float(ratios[k]),
        tail_argmax=float(t[k]),
        p=float(p),
        sample_size=int(x.size),
    )


def empirical_autocorrelation(samples, max_lag):
    """Sample autocorrelation at lags ``0 .. max_lag`` (lag 0 is exactly 1)."""
    x = np.asarray(samples, dtype=float).ravel()
    max_lag = int(max_lag)
    if max_lag < 0 or max_lag >= x.size:
        raise ParameterError(f"max_lag must lie in [0, {x.size - 1}], got {max_lag}")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0.0:
        raise ParameterError("autocorrelation undefined for zero-variance samples")
    acf = np.empty(max_lag + 1)
    acf[0] = 1.0
    for k in range(1, max_lag + 1):
        acf[k] = np.dot(d[:-k], d[k:]) / denom
    return acf


def noise_diagnostics(samples, p=3.0, t_grid=None, max_lag=10):
    """Mean, variance, autocorrelations and tail ratio in one report."""
    if t_grid is None:
        t_grid = np.arange(1.0, 5.0 + 1e-9, 0.5)
    tail = tail_diagnostic(samples, p, t_grid)
    acf = empirical_autocorrelation(samples, max_lag)
    return replace(tail, lag_autocorrelations=tuple(float(v) for v in acf))
