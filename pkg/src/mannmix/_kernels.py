"""Hot loops.

Each loop exists twice: a scalar version compiled by numba, and a numpy
version that vectorises across replications (or across the inner index)
for when numba is disabled.  Both use the same floating-point expression
order, so they agree to the last few ulps; they are bitwise identical
wherever only IEEE-exact operations (``+ - * / sqrt``) are involved.
"""
import math

import numpy as np
from scipy.signal import lfilter

from . import _accel
from ._accel import njit
from .rng import uniform_at, uniforms_numpy

TWO_PI = 2.0 * math.pi
_BLOCK = 2048


# ---------------------------------------------------------------------------
# noise


@njit(cache=True)
def _gaussian_at(key, j):
    # innovation j consumes uniform draws 2j and 2j+1; u1 is shifted into (0, 1]
    u1 = 1.0 - uniform_at(key, np.uint64(2 * j))
    u2 = uniform_at(key, np.uint64(2 * j + 1))
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)


@njit(cache=True)
def _noise_fill_nb(key, phi, scale, out):
    xi = 0.0
    for j in range(out.shape[0]):
        xi = phi * xi + scale * _gaussian_at(key, j)
        out[j] = xi


def _innovations_numpy(keys, start, count, scale):
    """Gaussian innovations ``start .. start+count-1`` for each key, shape (R, count)."""
    g = np.empty((len(keys), count))
    for r, key in enumerate(keys):
        u = uniforms_numpy(int(key), 2 * start, 2 * count)
        u1 = 1.0 - u[0::2]
        u2 = u[1::2]
        g[r] = scale * (np.sqrt(-2.0 * np.log(u1)) * np.cos(TWO_PI * u2))
    return g


def noise_sequence(key, phi, scale, n):
    """AR(1) states xi_1..xi_n driven by the stream with ``key``."""
    out = np.empty(n)
    if _accel.USE_NUMBA:
        _noise_fill_nb(np.uint64(key), float(phi), float(scale), out)
        return out
    zi = np.zeros(1)
    for start in range(0, n, 1 << 16):
        count = min(1 << 16, n - start)
        g = _innovations_numpy([key], start, count, scale)[0]
        out[start:start + count], zi = lfilter([1.0], [1.0, -phi], g, zi=zi)
    return out


# ---------------------------------------------------------------------------
# Mann recursion


@njit(cache=True)
def _mann_path_nb(f, x1, a, key, phi, scale, clamp, lo, hi, x_out, xi_out):
    n_max = xi_out.shape[0]
    x = x1
    xi = 0.0
    clamps = 0
    x_out[0] = x
    for n in range(1, n_max + 1):
        xi = phi * xi + scale * _gaussian_at(key, n - 1)
        xi_out[n - 1] = xi
        step = a / n
        x = (1.0 - step) * x + step * (f(x) + xi / n)
        if not math.isfinite(x):
            x_out[n] = x
            return n, clamps
        if clamp:
            if x < lo:
                x = lo
                clamps += 1
            elif x > hi:
                x = hi
                clamps += 1
        x_out[n] = x
    return 0, clamps


def _vector_map(f):
    try:
        f(np.array([0.5, 1.0]))
    except Exception:
        return np.vectorize(f, otypes=[float])
    return f


def mann_paths_numpy(f, x1, a, n_max, keys, phi, scale, clamp, lo, hi, record=None):
    """Vectorised Mann recursion for a block of replications.

    Returns ``(x, xi, fail_step, clamps)`` with ``x`` of shape
    ``(R, n_max + 1)`` holding ``x_1 .. x_{n_max+1}``.  With ``record`` (sorted
    0-based positions into that sequence) only those columns are kept and
    ``xi`` is None.
    """
    f = _vector_map(f)
    R = len(keys)
    full = record is None
    if full:
        x_all = np.empty((R, n_max + 1))
        xi_all = np.empty((R, n_max))
        slot = None
    else:
        record = np.asarray(record, dtype=np.int64)
        x_all = np.empty((R, len(record)))
        xi_all = None
        slot = {int(k): s for s, k in enumerate(record)}
    fail = np.zeros(R, dtype=np.int64)
    clamps = np.zeros(R, dtype=np.int64)
    finite = np.ones(R, dtype=bool)
    x = np.full(R, float(x1))
    if full:
        x_all[:, 0] = x
    elif 0 in slot:
        x_all[:, slot[0]] = x
    zi = np.zeros((R, 1))
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        for start in range(0, n_max, _BLOCK):
            count = min(_BLOCK, n_max - start)
            g = _innovations_numpy(keys, start, count, scale)
            xi_blk, zi = lfilter([1.0], [1.0, -phi], g, axis=1, zi=zi)
            if full:
                xi_all[:, start:start + count] = xi_blk
            for j in range(count):
                n = start + j + 1
                step = a / n
                x = (1.0 - step) * x + step * (f(x) + xi_blk[:, j] / n)
                if clamp:
                    low = x < lo
                    high = x > hi
                    clamps += low
                    clamps += high
                    x = np.where(low, lo, np.where(high, hi, x))
                if full:
                    x_all[:, n] = x
                elif n in slot:
                    x_all[:, slot[n]] = x
            # first non-finite step per replication (NaN propagates, so block ends suffice)
            now_bad = finite & ~np.isfinite(x)
            if now_bad.any():
                for r in np.nonzero(now_bad)[0]:
                    if full:
                        fail[r] = int(np.argmax(~np.isfinite(x_all[r, :start + count + 1])))
                    else:
                        fail[r] = _first_bad_step(f, x1, a, n_max, keys[r], phi, scale, clamp, lo, hi)
                finite &= ~now_bad
    return x_all, xi_all, fail, clamps


def _first_bad_step(f, x1, a, n_max, key, phi, scale, clamp, lo, hi):
    x, _, _, _ = mann_paths_numpy(f, x1, a, n_max, [key], phi, scale, clamp, lo, hi)
    return int(np.argmax(~np.isfinite(x[0])))


def mann_path(f, f_jit, x1, a, n_max, key, phi, scale, clamp, lo, hi):
    """One replication; uses numba when ``f_jit`` is available."""
    if f_jit is not None and _accel.USE_NUMBA:
        x = np.empty(n_max + 1)
        xi = np.empty(n_max)
        fail, clamps = _mann_path_nb(
            f_jit, float(x1), float(a), np.uint64(key), float(phi), float(scale),
            bool(clamp), float(lo), float(hi), x, xi,
        )
        return x, xi, int(fail), int(clamps)
    x, xi, fail, clamps = mann_paths_numpy(f, x1, a, n_max, [key], phi, scale, clamp, lo, hi)
    return x[0], xi[0], int(fail[0]), int(clamps[0])


# ---------------------------------------------------------------------------
# deterministic recursions


@njit(cache=True)
def _picard_nb(f, x1, n, out):
    x = x1
    out[0] = x
    for k in range(1, n):
        x = f(x)
        out[k] = x


def picard_path(f, f_jit, x1, n):
    out = np.empty(n)
    if f_jit is not None and _accel.USE_NUMBA:
        _picard_nb(f_jit, float(x1), n, out)
        return out
    x = float(x1)
    out[0] = x
    for k in range(1, n):
        x = float(f(x))
        out[k] = x
    return out


@njit(cache=True)
def pathwise_bound_rhs(N, a, c, abs_xi):
    """Right-hand side of the pathwise bound for n = 1..len(abs_xi).

    Uses the recursions ``A_n = A_{n-1}(1 - g/n)`` and
    ``B_n = B_{n-1}(1 - g/n) + a|xi_n|/n^2`` with ``g = a(1-c)``.
    """
    g = a * (1.0 - c)
    out = np.empty(abs_xi.shape[0])
    A = N
    B = 0.0
    for k in range(abs_xi.shape[0]):
        n = k + 1
        factor = 1.0 - g / n
        A = A * factor
        B = B * factor + a / (n * n) * abs_xi[k]
        out[k] = A + B
    return out


@njit(cache=True)
def _inequality_scan_nb(a, c, S, n_max):
    g = a * (1.0 - c)
    # k^g for k = 0..n_max+1, so ((i+1)/(n+1))^g is one multiply in the inner loop
    pw = np.empty(n_max + 2)
    for k in range(n_max + 2):
        pw[k] = k ** g
    worst_prod = -np.inf
    worst_sum = a - a * S / 2.0 ** g
    for n in range(2, n_max + 1):
        inv = 1.0 / pw[n + 1]
        prod = 1.0
        wsum = a / (n * n)
        for i in range(n - 1, 0, -1):
            prod *= 1.0 - g / (i + 1)
            gap = prod - pw[i + 1] * inv
            if gap > worst_prod:
                worst_prod = gap
            wsum += a / (i * i) * prod
        gap = wsum - a * S * inv
        if gap > worst_sum:
            worst_sum = gap
    return worst_prod, worst_sum


def _inequality_scan_numpy(a, c, S, n_max):
    g = a * (1.0 - c)
    pw = np.arange(n_max + 2, dtype=float) ** g
    worst_prod = -np.inf
    worst_sum = a - a * S / 2.0 ** g
    for n in range(2, n_max + 1):
        inv = 1.0 / pw[n + 1]
        # i runs n-1 .. 1; factor for step i is (1 - g/(i+1))
        i = np.arange(n - 1, 0, -1)
        prod = np.cumprod(1.0 - g / (i + 1))
        worst_prod = max(worst_prod, float(np.max(prod - pw[i + 1] * inv)))
        wsum = a / (n * n) + np.sum(a / (i * i) * prod)
        worst_sum = max(worst_sum, wsum - a * S * inv)
    return worst_prod, worst_sum


def inequality_scan(a, c, S, n_max):
    """Largest ``exact - bound`` over both inequalities on ``1 <= i < n <= n_max``."""
    if _accel.USE_NUMBA:
        p, s = _inequality_scan_nb(float(a), float(c), float(S), int(n_max))
        return float(p), float(s)
    return _inequality_scan_numpy(float(a), float(c), float(S), int(n_max))
