"""Independent reference solvers used only by the test suite."""

import numpy as np


def godunov_polyline(flux_values, ncells, x_lo, x_hi, S0_fn, T, cfl=0.45):
    """First-order Godunov scheme for S_t + F(S)_x = 0, polyline flux.

    The numerical flux at an interface is the exact Godunov flux of the
    piecewise-linear F: min of F over [a, b] when a <= b, max over [b, a]
    otherwise, evaluated from the node values plus the two endpoint
    interpolants. Ghost cells copy the boundary state, valid while waves
    stay inside the domain. Returns (cell_centers, cell_values).
    """
    F = np.asarray(flux_values, dtype=float)
    n = len(F) - 1
    nodes = np.arange(n + 1) / n
    rmin = np.full((n + 1, n + 1), np.inf)
    rmax = np.full((n + 1, n + 1), -np.inf)
    for i in range(n + 1):
        rmin[i, i:] = np.minimum.accumulate(F[i:])
        rmax[i, i:] = np.maximum.accumulate(F[i:])

    dx = (x_hi - x_lo) / ncells
    xc = x_lo + (np.arange(ncells) + 0.5) * dx
    S = np.asarray(S0_fn(xc), dtype=float)
    lip = np.max(np.abs(np.diff(F))) * n
    nsteps = int(np.ceil(T * lip / (cfl * dx)))
    dt = T / nsteps

    def interp(s):
        return np.interp(s, nodes, F)

    for _ in range(nsteps):
        a = S[:-1]
        b = S[1:]
        fa = interp(a)
        fb = interp(b)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        ia = np.ceil(lo * n - 1e-12).astype(int)
        ib = np.floor(hi * n + 1e-12).astype(int)
        has = ia <= ib
        fmin = np.minimum(fa, fb)
        fmax = np.maximum(fa, fb)
        fmin[has] = np.minimum(fmin[has], rmin[ia[has], ib[has]])
        fmax[has] = np.maximum(fmax[has], rmax[ia[has], ib[has]])
        flx = np.where(a <= b, fmin, fmax)
        full = np.concatenate(([interp(S[0])], flx, [interp(S[-1])]))
        S = S - (dt / dx) * (full[1:] - full[:-1])
    return xc, S
