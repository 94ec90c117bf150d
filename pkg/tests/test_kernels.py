"""Compiled vs pure-Python trajectory kernels: selection and bit-identity."""

import os
import subprocess
import sys

import numpy as np
import pytest

from adadfo import _kernels_py as pure
from adadfo import kernels
from adadfo.oracle import make_problem

compiled = pytest.importorskip("adadfo._kernels")


def _spsa_inputs(problem, iters, seed):
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((iters, 2))
    deltas = (2 * rng.integers(0, 2, (iters, problem.dim)) - 1).astype(float)
    return normals, deltas


def test_compiled_extension_selected_by_default():
    assert compiled.IS_COMPILED
    assert not pure.IS_COMPILED
    assert kernels.IS_COMPILED  # the extension built, so it wins


def test_force_pure_env_switch():
    code = "import adadfo.kernels as k; print(k.IS_COMPILED)"
    out = subprocess.run([sys.executable, "-c", code],
                         env={**os.environ, "ADADFO_FORCE_PURE": "1"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


@pytest.mark.parametrize("name", ["power4", "small_quad"])
def test_kwsa_bit_identity(name):
    p = make_problem(name, sigma=1.0)
    normals = np.random.default_rng(9).standard_normal((500, 2))
    args = (p.kernel_code, float(p.x0[0]), float(p.lower[0]), float(p.upper[0]),
            1.0, 1.0, 1.0, 500, normals)
    xs_c, com_c, att_c = compiled.kwsa_trajectory(*args)
    xs_p, com_p, att_p = pure.kwsa_trajectory(*args)
    assert xs_c.tobytes() == xs_p.tobytes()
    assert (com_c, att_c) == (com_p, att_p)


@pytest.mark.parametrize("name,dim", [("rosenbrock", None), ("valley64", None),
                                      ("sphere", 3)])
def test_spsa_bit_identity(name, dim):
    kwargs = {"dim": dim} if dim else {}
    p = make_problem(name, sigma=1.0, **kwargs)
    normals, deltas = _spsa_inputs(p, 300, seed=7)
    args = (p.kernel_code, np.array(p.x0, dtype=float), p.lower, p.upper,
            0.01, 0.1, 1.0, 300, normals, deltas, True)
    xs_c, com_c, att_c = compiled.spsa_trajectory(*args)
    xs_p, com_p, att_p = pure.spsa_trajectory(*args)
    assert xs_c.tobytes() == xs_p.tobytes()
    assert (com_c, att_c) == (com_p, att_p)


def test_spsa_divergence_truncates_identically():
    p = make_problem("sphere", sigma=0.0, dim=1, x0=(1.0,))
    iters = 100
    normals = np.zeros((iters, 2))
    deltas = np.ones((iters, 1))
    args = (p.kernel_code, np.array(p.x0, dtype=float), p.lower, p.upper,
            1e280, 1.0, 0.0, iters, normals, deltas, True)
    with np.errstate(over="ignore", invalid="ignore"):
        xs_c, com_c, att_c = compiled.spsa_trajectory(*args)
        xs_p, com_p, att_p = pure.spsa_trajectory(*args)
    assert att_c > com_c  # the run blew up before exhausting its iterations
    assert (com_c, att_c) == (com_p, att_p)
    assert xs_c.tobytes() == xs_p.tobytes()
    assert np.all(np.isfinite(xs_c))


def test_spsa_record_flag_returns_final_only():
    p = make_problem("rosenbrock", sigma=1.0)
    normals, deltas = _spsa_inputs(p, 50, seed=3)
    args = (p.kernel_code, np.array(p.x0, dtype=float), p.lower, p.upper,
            0.01, 0.1, 1.0, 50, normals, deltas)
    xs, com, att = compiled.spsa_trajectory(*args, True)
    final, com2, att2 = compiled.spsa_trajectory(*args, False)
    assert np.array_equal(final, xs[-1])
    assert (com, att) == (com2, att2)
