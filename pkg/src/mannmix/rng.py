"""Counter-based 64-bit uniform streams.

Algorithm (pinned; every port must reproduce it bit for bit)::

    GAMMA = 0x9E3779B97F4A7C15
    SALT  = 0xD1B54A32D192ED03

    mix64(z):                                  # SplitMix64 finalizer
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

    key(seed, stream) = mix64(seed ^ mix64(stream ^ SALT))
    raw(k)            = mix64(key + (k + 1) * GAMMA)          k = 0, 1, 2, ...
    uniform(k)        = (raw(k) >> 11) * 2**-53               in [0, 1)

All arithmetic is modulo 2**64; seeds and stream ids are reduced modulo
2**64 first.  Because draw ``k`` depends only on ``(key, k)``, any prefix
of a stream can be regenerated without replaying it, and streams never
share state.
"""
from dataclasses import dataclass

import numpy as np

from . import _accel
from ._accel import njit
from .errors import ParameterError

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
SALT = 0xD1B54A32D192ED03
MUL1 = 0xBF58476D1CE4E5B9
MUL2 = 0x94D049BB133111EB
INV_2_53 = 1.0 / 9007199254740992.0

_U_GAMMA = np.uint64(GAMMA)
_U_MUL1 = np.uint64(MUL1)
_U_MUL2 = np.uint64(MUL2)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U1 = np.uint64(1)


def mix64_int(z):
    """SplitMix64 finalizer on Python ints (reference path)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MUL1) & MASK64
    z = ((z ^ (z >> 27)) * MUL2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed, stream_id):
    """Per-stream 64-bit key derived from ``(seed, stream_id)``."""
    return mix64_int((seed & MASK64) ^ mix64_int((stream_id & MASK64) ^ SALT))


def raw_int(key, k):
    return mix64_int(key + (k + 1) * GAMMA)


@njit(cache=True)
def _mix64_scalar(z):
    z = (z ^ (z >> _U30)) * _U_MUL1
    z = (z ^ (z >> _U27)) * _U_MUL2
    return z ^ (z >> _U31)


@njit(cache=True)
def uniform_at(key, k):
    """Uniform draw number ``k`` (0-based) of the stream with ``key``."""
    z = _mix64_scalar(key + (k + _U1) * _U_GAMMA)
    return np.float64(z >> _U11) * INV_2_53


if not _accel.USE_NUMBA:
    # uncompiled numpy scalars warn on the intended uint64 wraparound; use exact ints
    def uniform_at(key, k):
        """Uniform draw number ``k`` (0-based) of the stream with ``key``."""
        return (raw_int(int(key), int(k)) >> 11) * INV_2_53


def uniforms_numpy(key, start, count):
    """Vectorised draws ``start .. start+count-1`` of one stream."""
    k = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + k * _U_GAMMA
        z = (z ^ (z >> _U30)) * _U_MUL1
        z = (z ^ (z >> _U27)) * _U_MUL2
        z = z ^ (z >> _U31)
    return (z >> _U11).astype(np.float64) * INV_2_53


@dataclass(frozen=True)
class RngStream:
    """Reproducible uniform stream identified by ``(seed, stream_id)``.

    The object itself is immutable; callers address draws by index, which is
    what makes replications schedule-independent.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 0 <= v <= MASK64:
                raise ParameterError(f"{name} must be an integer in [0, 2**64), got {v!r}")

    @property
    def key(self):
        return stream_key(self.seed, self.stream_id)

    def raw(self, count, start=0):
        """Raw 64-bit outputs as Python ints (reference path, slow)."""
        key = self.key
        return [raw_int(key, k) for k in range(start, start + count)]

    def uniforms(self, count, start=0):
        return uniforms_numpy(self.key, start, count)
