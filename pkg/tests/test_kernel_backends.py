"""The compiled and pure-Python kernels must be interchangeable bit for bit."""
import os
import subprocess
import sys

import numpy as np
import pytest

from qbranch import gnn_ops
from qbranch import _gnn_ops_py
from qbranch.cnf import generate_random_3sat
from qbranch.kernel import BACKEND, PythonKernel, get_kernel_class
from qbranch.solver import SolverConfig, SolverCore, run_to_completion

try:
    get_kernel_class("cython")
    HAVE_EXT = True
except ImportError:
    HAVE_EXT = False

needs_ext = pytest.mark.skipif(not HAVE_EXT, reason="compiled kernel not built")


def trace(formula, backend, restarts):
    core = SolverCore(formula, SolverConfig(backend=backend, restarts=restarts, restart_unit=3))
    verdict = run_to_completion(core)
    k = core.kernel
    return (verdict, core.stats, core.decision_log, core.learned_clauses(),
            k.activity, k.polarity, k.var_inc)


@needs_ext
@pytest.mark.parametrize("restarts", [False, True])
def test_backends_produce_identical_runs(restarts):
    for seed in range(25):
        f = generate_random_3sat(40, 172, seed=seed)
        assert trace(f, "python", restarts) == trace(f, "cython", restarts)


@needs_ext
def test_backends_agree_on_residual_graph():
    f = generate_random_3sat(30, 128, seed=1)
    cores = [SolverCore(f, SolverConfig(backend=b)) for b in ("python", "cython")]
    for lit in (3, -7, 12):
        for c in cores:
            if c.active and not c.is_assigned(abs(lit)):
                c.step_decision(lit)
        a, b = (c.kernel.residual() for c in cores)
        assert [list(x) for x in a] == [list(x) for x in b]


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        get_kernel_class("fortran")
    assert get_kernel_class("python") is PythonKernel


def test_pure_python_switch_selects_fallback():
    env = {**os.environ, "QBRANCH_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "import qbranch; print(qbranch.BACKEND, qbranch.GNN_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "python"]
    assert BACKEND in ("python", "cython")


@pytest.mark.skipif(gnn_ops.BACKEND != "cython", reason="compiled graph kernels not built")
def test_fused_graph_kernels_match_numpy():
    rng = np.random.default_rng(0)
    z = rng.normal(size=(37, 64))
    b, g, beta = rng.normal(size=64), rng.normal(size=64), rng.normal(size=64)
    for fast, ref in zip(gnn_ops.bias_relu(z, b), _gnn_ops_py.bias_relu(z, b)):
        np.testing.assert_array_equal(fast, ref)
    fast = gnn_ops.bias_relu_ln(z, b, g, beta, 1e-5)
    ref = _gnn_ops_py.bias_relu_ln(z, b, g, beta, 1e-5)
    for x, y in zip(fast, ref):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-13)
    dy = rng.normal(size=z.shape)
    grads = [np.zeros(64) for _ in range(4)]
    dz_fast = gnn_ops.ln_relu_bwd(dy, g, fast[1], fast[2], fast[3], grads[0], grads[1])
    dz_ref = _gnn_ops_py.ln_relu_bwd(dy, g, ref[1], ref[2], ref[3], grads[2], grads[3])
    np.testing.assert_allclose(dz_fast, dz_ref, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(grads[0], grads[2], rtol=1e-12)
    np.testing.assert_allclose(grads[1], grads[3], rtol=1e-12)
