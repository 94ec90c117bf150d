"""Pure-Python trajectory kernels for the built-in analytic problems.

Fallback for the compiled extension in ``_kernels.pyx``; both implement the
same contracts and consume the same pregenerated noise arrays, so their
outputs are bit-identical.  Randomness never originates here: callers
pregenerate normal draws and perturbation signs from their streams.
Arithmetic sticks to Python floats with explicit multiplications so that
overflow produces infinities exactly like the C code does.
"""

from __future__ import annotations

import math

import numpy as np

IS_COMPILED = False


def _objective(code: int, x) -> float:
    if code == 0:  # power4
        sq = x[0] * x[0]
        return sq * sq
    if code == 1:  # small quadratic
        return 0.001 * (x[0] * x[0])
    if code == 2:  # rosenbrock
        t = x[1] - x[0] * x[0]
        u = x[0] - 1.0
        return 100.0 * (t * t) + u * u
    if code == 3:  # valley64
        total = 0.0
        for i in range(0, 64, 2):
            d = x[i + 1] - x[i]
            u = 1.0 - x[i]
            term = 10.0 * (d * d) + u * u
            sq = term * term
            total += sq * sq
        return total
    if code == 4:  # sphere
        total = 0.0
        for v in x:
            total += v * v
        return 0.5 * total
    raise ValueError(f"unknown kernel code {code}")


def kwsa_trajectory(code: int, x0: float, lo: float, hi: float,
                    theta_a: float, theta_c: float, sigma: float,
                    iters: int, normals: np.ndarray):
    """Run the one-dimensional KWSA recursion for ``iters`` iterations.

    ``normals[k]`` are the two noise draws of iteration ``k + 1``.  Returns
    ``(xs, committed, attempted)``: the iterate sequence including the start
    point, the number of committed updates, and the number of iterations
    whose evaluations were spent (attempted > committed only when the
    recursion produced a non-finite iterate).
    """
    xs = np.empty(iters + 1)
    xs[0] = x0
    x = float(x0)
    committed = 0
    attempted = 0
    for k in range(1, iters + 1):
        a_k = theta_a / k
        h_k = theta_c / k ** 0.25
        fp = _objective(code, (x + h_k,)) + sigma * float(normals[k - 1, 0])
        fm = _objective(code, (x - h_k,)) + sigma * float(normals[k - 1, 1])
        attempted = k
        x_new = x - a_k * (fp - fm) / (2.0 * h_k)
        if x_new < lo:
            x_new = lo
        elif x_new > hi:
            x_new = hi
        if not math.isfinite(x_new):
            break
        x = x_new
        xs[k] = x
        committed = k
    return xs[:committed + 1], committed, attempted


def spsa_trajectory(code: int, x0: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                    theta_a: float, theta_c: float, sigma: float,
                    iters: int, normals: np.ndarray, deltas: np.ndarray,
                    record: bool):
    """Run the SPSA recursion for ``iters`` iterations.

    ``deltas[k]`` is the +-1 perturbation vector and ``normals[k]`` the two
    noise draws of iteration ``k + 1``.  Returns ``(xs_or_final, committed,
    attempted)``; ``xs_or_final`` is the full iterate array when ``record``,
    else just the final iterate.
    """
    d = len(x0)
    x = [float(v) for v in x0]
    lo_l = [float(v) for v in lo]
    hi_l = [float(v) for v in hi]
    xs = np.empty((iters + 1, d)) if record else None
    if record:
        xs[0] = x
    committed = 0
    attempted = 0
    for k in range(1, iters + 1):
        a_k = theta_a / (k + 50.0) ** 0.602
        c_k = theta_c / k ** 0.101
        delta = [float(v) for v in deltas[k - 1]]
        y_plus = [x[i] + c_k * delta[i] for i in range(d)]
        y_minus = [x[i] - c_k * delta[i] for i in range(d)]
        fp = _objective(code, y_plus) + sigma * float(normals[k - 1, 0])
        fm = _objective(code, y_minus) + sigma * float(normals[k - 1, 1])
        attempted = k
        diff = (fp - fm) / (2.0 * c_k)
        candidate = []
        ok = True
        for i in range(d):
            x_new = x[i] - a_k * diff / delta[i]
            if x_new < lo_l[i]:
                x_new = lo_l[i]
            elif x_new > hi_l[i]:
                x_new = hi_l[i]
            if not math.isfinite(x_new):
                ok = False
                break
            candidate.append(x_new)
        if not ok:
            break
        x = candidate
        if record:
            xs[k] = x
        committed = k
    final = np.array(x)
    if record:
        return xs[:committed + 1], committed, attempted
    return final, committed, attempted
