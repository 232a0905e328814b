"""The two benchmark problems and the table-reproduction harness.

* ``golden``: ``f(x) = sqrt(x + 1)`` on ``[0, 5]``, ``c = 1/2``, fixed point
  the golden ratio; Mann run with ``x1 = 1.3``, ``a = 1/4``, ``phi = 0.8``.
* ``kepler``: Kepler's equation for Mercury, ``f(x) = M + e sin x`` with
  ``e = 0.20563069``, ``M = 3.05076572``, ``c = e``; ``x1 = 3``, ``a = 0.9``,
  ``phi = 0.7``.

Published single-run values ship in ``data/reference_tables.json``.  Their
seed is unknown, so comparisons are order-of-magnitude ratios over a seeded
ensemble median, never digit matches.
"""
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core import FixedPointProblem, MannConfig
from .errors import ConfigError
from .montecarlo import run_replications
from .noise import NoiseSpec

__all__ = [
    "BenchmarkCase",
    "TableRow",
    "golden_problem",
    "kepler_problem",
    "builtin_case",
    "reproduce_table",
    "reference_tables",
    "orbit_position",
    "GOLDEN_RATIO",
    "MERCURY_ECCENTRICITY",
    "MERCURY_MEAN_ANOMALY",
    "KEPLER_FIXED_POINT",
]

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0
MERCURY_ECCENTRICITY = 0.20563069
MERCURY_MEAN_ANOMALY = 3.05076572
# reference solution of M + e sin x = x
KEPLER_FIXED_POINT = 3.066244878640875


def reference_tables():
    with resources.files("mannmix").joinpath("data/reference_tables.json").open() as fh:
        return json.load(fh)


@dataclass(frozen=True)
class BenchmarkCase:
    name: str
    problem: FixedPointProblem
    config: MannConfig
    noise: NoiseSpec
    reference_rows: tuple
    reference_successive: tuple = None

    def __post_init__(self):
        ns = [n for n, _ in self.reference_rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("reference rows must be strictly increasing in n")

    @property
    def reference_ns(self):
        return tuple(n for n, _ in self.reference_rows)


def golden_map(x):
    return np.sqrt(x + 1.0)


def make_kepler_map(mean_anomaly=MERCURY_MEAN_ANOMALY, eccentricity=MERCURY_ECCENTRICITY):
    M, e = float(mean_anomaly), float(eccentricity)

    def kepler_map(x):
        return M + e * np.sin(x)

    return kepler_map


def golden_problem(seed=42):
    problem = FixedPointProblem(golden_map, 0.5, (0.0, 5.0), GOLDEN_RATIO, name="golden")
    x1 = 1.3
    config = MannConfig(a=0.25, x1=x1, N=abs(x1 - GOLDEN_RATIO), n_max=10**5)
    table = reference_tables()["golden"]["rows"]
    return BenchmarkCase(
        name="golden",
        problem=problem,
        config=config,
        noise=NoiseSpec(phi=0.8, innovation_scale=1.0, seed=seed),
        reference_rows=tuple((int(n), err) for n, _, err in table),
    )


def kepler_problem(seed=42):
    # sin is globally 1-Lipschitz, so c = e holds on all of R; [2, 4] is for diagnostics
    problem = FixedPointProblem(
        make_kepler_map(), MERCURY_ECCENTRICITY, (2.0, 4.0), KEPLER_FIXED_POINT, name="kepler")
    x1 = 3.0
    config = MannConfig(a=0.9, x1=x1, N=abs(x1 - KEPLER_FIXED_POINT), n_max=10**5)
    table = reference_tables()["kepler"]["rows"]
    return BenchmarkCase(
        name="kepler",
        problem=problem,
        config=config,
        noise=NoiseSpec(phi=0.7, innovation_scale=1.0, seed=seed),
        reference_rows=tuple((int(n), err) for n, _, _, err in table),
        reference_successive=tuple((int(n), d) for n, _, d, _ in table),
    )


BUILTINS = {"golden": golden_problem, "kepler": kepler_problem}


def builtin_case(name, seed=42):
    try:
        return BUILTINS[name](seed=seed)
    except KeyError:
        raise ConfigError(f"unknown builtin problem {name!r}; choose from {sorted(BUILTINS)}") from None


@dataclass(frozen=True)
class TableRow:
    n: int
    median_error: float
    published_error: float
    ratio: float
    median_successive: float = float("nan")
    published_successive: float = float("nan")


def reproduce_table(case, M, seed=None, threads=None, noise=None):
    """Median ``|x_n - x*|`` over ``M`` seeded replications at each reference ``n``.

    Returns ``(rows, ensemble)``.  ``noise`` overrides the case's noise spec
    (e.g. a zero-scale variant); ``seed`` overrides its seed.
    """
    M = int(M)
    if M < 30:
        raise ConfigError(f"table reproduction needs M >= 30 replications, got {M}")
    noise = case.noise if noise is None else noise
    if seed is not None:
        noise = NoiseSpec(noise.phi, noise.innovation_scale, int(seed))
    ns = case.reference_ns
    config = case.config
    if config.n_max < ns[-1]:
        config = MannConfig(config.a, config.x1, config.N, ns[-1], config.clamp_to_domain)
    ens = run_replications(case.problem, config, noise, M, checkpoints=ns, threads=threads)
    med = ens.median_errors()
    med_diff = ens.median_successive_differences()
    published_diff = dict(case.reference_successive or ())
    rows = []
    for j, (n, published) in enumerate(case.reference_rows):
        rows.append(TableRow(
            n=n,
            median_error=float(med[j]),
            published_error=published,
            ratio=float(med[j]) / published,
            median_successive=float(med_diff[j]),
            published_successive=published_diff.get(n, float("nan")),
        ))
    return rows, ens


def orbit_position(eccentric_anomaly, eccentricity=MERCURY_ECCENTRICITY, semi_major=1.0):
    """Planar position ``(a(cos E - e), a sqrt(1 - e^2) sin E)`` on the ellipse."""
    E = eccentric_anomaly
    x = semi_major * (math.cos(E) - eccentricity)
    y = semi_major * math.sqrt(1.0 - eccentricity ** 2) * math.sin(E)
    return x, y
