"""Kernel backend selection and cross-backend agreement.

The compiled extension and the pure numpy fallback implement one
contract; ensembles produced by the two must agree to near machine
precision, and the import-time choice must respect the
CONSENSIM_BACKEND environment override.
"""

import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_array_equal

import consensim._kernels as kernels
from consensim import (
    BACKEND,
    UNDIRECTED_EXP,
    ProtocolSpec,
    SimConfig,
    SystemModel,
    WeightedDigraph,
    sample_uniform_x0,
    simulate_path,
    solve_sare,
)
from consensim._kernels import em_py
from conftest import A_BENCH, B_BENCH, C_BENCH, RING6_CHORD

try:
    from consensim._kernels import _em_cy
except ImportError:
    _em_cy = None

needs_compiled = pytest.mark.skipif(
    _em_cy is None, reason="compiled kernel not built"
)


def closed_loop_cfg(**kw):
    model = SystemModel(A=A_BENCH, B=B_BENCH, C=C_BENCH, N=6)
    sol = solve_sare(model)
    defaults = dict(
        h=1e-3,
        T=0.5,
        output_stride=10,
        master_seed=314,
        x0=sample_uniform_x0(314, 12, -2.0, 2.0),
    )
    defaults.update(kw)
    return SimConfig(
        model=model,
        graph=WeightedDigraph(6, RING6_CHORD.copy()),
        spec=ProtocolSpec(variant=UNDIRECTED_EXP, gamma=1.0),
        sol=sol,
        **defaults,
    )


def simulate_with(monkeypatch, kernel_module, cfg, path_index):
    with monkeypatch.context() as patch:
        patch.setattr(kernels, "integrate_path", kernel_module.integrate_path)
        return simulate_path(cfg, path_index)


def test_backend_name_is_reported():
    assert BACKEND in ("cython", "python")
    if _em_cy is not None and "CONSENSIM_BACKEND" not in os.environ:
        assert BACKEND == "cython"


@needs_compiled
def test_backends_agree_on_closed_loop_paths(monkeypatch):
    cfg = closed_loop_cfg()
    for path_index in range(3):
        fast = simulate_with(monkeypatch, _em_cy, cfg, path_index)
        slow = simulate_with(monkeypatch, em_py, cfg, path_index)
        assert_array_equal(fast.times, slow.times)
        for a, b in (
            (fast.states, slow.states),
            (fast.gains, slow.gains),
            (fast.inputs, slow.inputs),
        ):
            scale = max(1.0, np.max(np.abs(b)))
            assert np.max(np.abs(a - b)) <= 1e-10 * scale


@needs_compiled
def test_backends_agree_on_blowup_truncation(monkeypatch):
    model = SystemModel(A=[[1.0]], B=[[0.0]], C=[[0.0]], N=2)
    from conftest import passive_solution

    cfg = SimConfig(
        model=model,
        graph=WeightedDigraph(2, np.zeros((2, 2))),
        spec=ProtocolSpec(variant="UndirectedStatic"),
        sol=passive_solution(),
        h=1e-3,
        T=2.0,
        output_stride=1,
        blowup_threshold=2.0,
        x0=np.array([1.0, 1.0]),
    )
    fast = simulate_with(monkeypatch, _em_cy, cfg, 0)
    slow = simulate_with(monkeypatch, em_py, cfg, 0)
    assert fast.terminated_early and slow.terminated_early
    assert_array_equal(fast.times, slow.times)
    assert_array_equal(fast.states, slow.states)


def test_environment_override_forces_python_backend():
    env = dict(os.environ, CONSENSIM_BACKEND="python")
    out = subprocess.run(
        [sys.executable, "-c", "import consensim; print(consensim.BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
        check=True,
    )
    assert out.stdout.strip() == "python"


def test_python_backend_completes_a_full_path(monkeypatch):
    cfg = closed_loop_cfg(T=0.2)
    traj = simulate_with(monkeypatch, em_py, cfg, 0)
    assert not traj.terminated_early
    assert np.isfinite(traj.states).all()
    assert traj.times[-1] == pytest.approx(0.2)
