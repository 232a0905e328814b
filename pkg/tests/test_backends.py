"""The numba kernels and the numpy fallback must agree."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mannmix import _accel, _kernels
from mannmix.bounds import inequality_worst_gaps
from mannmix.core import MannConfig, picard_run, run_mann
from mannmix.montecarlo import run_replications
from mannmix.noise import NoiseSpec, generate_noise_sequence

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def both(fn):
    fast = fn()
    _accel.USE_NUMBA = False
    try:
        slow = fn()
    finally:
        _accel.USE_NUMBA = True
    return fast, slow


def test_noise_agrees():
    spec = NoiseSpec(phi=0.8, seed=9)
    fast, slow = both(lambda: generate_noise_sequence(spec, 200_000))
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-13)


def test_mann_path_agrees(golden):
    cfg = MannConfig(0.25, 1.3, golden.config.N, 50_000)
    fast, slow = both(lambda: run_mann(golden.problem, cfg, golden.noise))
    np.testing.assert_allclose(fast.x, slow.x, rtol=1e-13)
    np.testing.assert_allclose(fast.xi, slow.xi, rtol=1e-12, atol=1e-13)


def test_picard_agrees(kepler):
    fast, slow = both(lambda: picard_run(kepler.problem, 3.0, 60))
    np.testing.assert_allclose(fast.x, slow.x, rtol=1e-15)


def test_ensemble_agrees(kepler):
    cfg = MannConfig(0.9, 3.0, kepler.config.N, 20_000)
    fast, slow = both(lambda: run_replications(kepler.problem, cfg, kepler.noise, 50, checkpoints=(100, 20_000)))
    np.testing.assert_allclose(fast.x, slow.x, rtol=1e-13)
    np.testing.assert_allclose(fast.x_prev, slow.x_prev, rtol=1e-13)


def test_inequality_scan_agrees():
    fast, slow = both(lambda: inequality_worst_gaps(0.5, 0.2, 400))
    np.testing.assert_allclose(fast, slow, rtol=1e-9, atol=1e-15)


def test_clamp_agrees():
    from mannmix.core import FixedPointProblem
    problem = FixedPointProblem(lambda v: 0.5 * v + 0.25, 0.5, (0.0, 1.0), 0.5)
    cfg = MannConfig(0.9, 0.5, 1.0, 2000, clamp_to_domain=True)
    fast, slow = both(lambda: run_mann(problem, cfg, NoiseSpec(innovation_scale=50.0)))
    assert fast.clamp_events == slow.clamp_events > 0
    np.testing.assert_allclose(fast.x, slow.x, rtol=1e-12)


def test_environment_flag_selects_fallback():
    code = (
        "import json; from mannmix import _accel, generate_noise_sequence, NoiseSpec;"
        "print(json.dumps([_accel.backend_name(), generate_noise_sequence(NoiseSpec(seed=3), 5).tolist()]))"
    )
    env = dict(os.environ, MANNMIX_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, timeout=300)
    assert out.returncode == 0, out.stderr
    name, xi = json.loads(out.stdout)
    assert name == "numpy"
    np.testing.assert_allclose(xi, generate_noise_sequence(NoiseSpec(seed=3), 5), rtol=1e-14)
