"""Numba-compiled inner loops.

The two hot spots of a flow step live here: the fast-sweeping eikonal solve
used by reinitialization and the red-black relaxation of the Shortley-Weller
capacity system. Everything else is plain numpy.
"""

import numba as nb
import numpy as np

_numba_setting = {"nogil": True, "cache": True}


@nb.njit(**_numba_setting)
def _godunov_2d(a, b, h):
    if abs(a - b) >= h:
        return min(a, b) + h
    return 0.5 * (a + b + np.sqrt(2.0 * h * h - (a - b) * (a - b)))


@nb.njit(**_numba_setting)
def _godunov_3d(a, b, c, h):
    # sort ascending; infinite entries end up last and drop out below
    if a > b:
        a, b = b, a
    if b > c:
        b, c = c, b
    if a > b:
        a, b = b, a
    x = a + h
    if x <= b:
        return x
    x = 0.5 * (a + b + np.sqrt(2.0 * h * h - (a - b) * (a - b)))
    if x <= c:
        return x
    s = a + b + c
    disc = s * s - 3.0 * (a * a + b * b + c * c - h * h)
    if disc < 0.0:
        disc = 0.0
    return (s + np.sqrt(disc)) / 3.0


@nb.njit(**_numba_setting)
def fast_sweep_2d(d, fixed, h, max_passes, tol):
    """Solve |grad d| = 1 in place; nodes flagged ``fixed`` are boundary data.

    Returns the number of full passes (four orderings each) performed.
    """
    nx, ny = d.shape
    inf = np.inf
    passes = 0
    for _ in range(max_passes):
        passes += 1
        change = 0.0
        for order in range(4):
            si = 1 if order == 0 or order == 2 else -1
            sj = 1 if order == 0 or order == 1 else -1
            for ii in range(nx):
                i = ii if si > 0 else nx - 1 - ii
                for jj in range(ny):
                    j = jj if sj > 0 else ny - 1 - jj
                    if fixed[i, j]:
                        continue
                    a = inf
                    if i > 0:
                        a = d[i - 1, j]
                    if i < nx - 1 and d[i + 1, j] < a:
                        a = d[i + 1, j]
                    b = inf
                    if j > 0:
                        b = d[i, j - 1]
                    if j < ny - 1 and d[i, j + 1] < b:
                        b = d[i, j + 1]
                    if a == inf and b == inf:
                        continue
                    if a == inf or b == inf:
                        new = min(a, b) + h
                    else:
                        new = _godunov_2d(a, b, h)
                    old = d[i, j]
                    if new < old:
                        if old == inf:
                            change = inf
                        elif old - new > change:
                            change = old - new
                        d[i, j] = new
        if change <= tol:
            break
    return passes


@nb.njit(**_numba_setting)
def fast_sweep_3d(d, fixed, h, max_passes, tol):
    """Three-dimensional counterpart of :func:`fast_sweep_2d` (eight orderings)."""
    nx, ny, nz = d.shape
    inf = np.inf
    passes = 0
    for _ in range(max_passes):
        passes += 1
        change = 0.0
        for order in range(8):
            si = 1 if order & 1 == 0 else -1
            sj = 1 if order & 2 == 0 else -1
            sk = 1 if order & 4 == 0 else -1
            for ii in range(nx):
                i = ii if si > 0 else nx - 1 - ii
                for jj in range(ny):
                    j = jj if sj > 0 else ny - 1 - jj
                    for kk in range(nz):
                        k = kk if sk > 0 else nz - 1 - kk
                        if fixed[i, j, k]:
                            continue
                        a = inf
                        if i > 0:
                            a = d[i - 1, j, k]
                        if i < nx - 1 and d[i + 1, j, k] < a:
                            a = d[i + 1, j, k]
                        b = inf
                        if j > 0:
                            b = d[i, j - 1, k]
                        if j < ny - 1 and d[i, j + 1, k] < b:
                            b = d[i, j + 1, k]
                        c = inf
                        if k > 0:
                            c = d[i, j, k - 1]
                        if k < nz - 1 and d[i, j, k + 1] < c:
                            c = d[i, j, k + 1]
                        if a == inf and b == inf and c == inf:
                            continue
                        new = _godunov_3d(a, b, c, h)
                        old = d[i, j, k]
                        if new < old:
                            if old == inf:
                                change = inf
                            elif old - new > change:
                                change = old - new
                            d[i, j, k] = new
        if change <= tol:
            break
    return passes


@nb.njit(**_numba_setting)
def _relax_color(u, nodes, coef, offsets, rhs, diag, omega):
    nk = offsets.shape[0]
    for n in range(nodes.shape[0]):
        i = nodes[n]
        s = rhs[n]
        for k in range(nk):
            c = coef[k, n]
            if c != 0.0:
                s += c * u[i + offsets[k]]
        u[i] += omega * (s / diag[n] - u[i])


@nb.njit(**_numba_setting)
def redblack_sweeps(u, red, black, red_coef, black_coef, offsets,
                    red_rhs, black_rhs, red_diag, black_diag, omega, sweeps):
    """Run ``sweeps`` red-black SOR sweeps on the flat potential ``u`` in place.

    Coefficient rows are stored per colour, aligned with the node lists, so a
    red update only reads black values and vice versa.
    """
    for _ in range(sweeps):
        _relax_color(u, red, red_coef, offsets, red_rhs, red_diag, omega)
        _relax_color(u, black, black_coef, offsets, black_rhs, black_diag, omega)


@nb.njit(**_numba_setting)
def scaled_residual(u, nodes, coef, offsets, rhs, diag):
    """Max over ``nodes`` of |sum c_k u_k + b - diag u| / diag."""
    nk = offsets.shape[0]
    worst = 0.0
    for n in range(nodes.shape[0]):
        i = nodes[n]
        s = rhs[n]
        for k in range(nk):
            c = coef[k, n]
            if c != 0.0:
                s += c * u[i + offsets[k]]
        r = abs(s / diag[n] - u[i])
        if r > worst:
            worst = r
    return worst
