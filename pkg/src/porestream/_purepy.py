"""Pure-Python reference kernels for the hot numerical loops.

Every function in this module has a compiled twin in the _core extension;
the selector in _kernels picks the compiled set when the extension imports
cleanly and falls back to this module otherwise (or when PORESTREAM_PURE is
set). Implementations are written so both backends execute the same
floating-point operations in the same order and therefore produce bitwise
identical results.
"""

from __future__ import annotations

import heapq

import numpy as np

BACKEND = "python"


def _cross(F, i, j, k):
    """Orientation of (i,F[i]) -> (j,F[j]) -> (k,F[k]); > 0 is a left turn."""
    return (j - i) * (F[k] - F[i]) - (F[j] - F[i]) * (k - i)


def riemann_fan(F, dS, a, b):
    """Entropy solution of the Riemann problem between flux-grid states.

    F holds node values of the piecewise-linear flux on the uniform grid
    S = j*dS; a and b are the left and right state indices. Returns
    (speeds, states) with len(states) == len(speeds) + 1, states[0] == a and
    states[-1] == b. For a < b the solution follows the lower convex
    envelope of the polyline on [a, b], for a > b the upper concave envelope
    on [b, a]; either way the emitted wave speeds increase strictly from
    left to right, which is exactly the entropy condition.
    """
    if a == b:
        return np.empty(0, dtype=np.float64), np.array([a], dtype=np.int64)
    lo, hi = (a, b) if a < b else (b, a)
    lower = a < b
    hull = [lo]
    for k in range(lo + 1, hi + 1):
        if lower:
            while len(hull) >= 2 and _cross(F, hull[-2], hull[-1], k) <= 0.0:
                hull.pop()
        else:
            while len(hull) >= 2 and _cross(F, hull[-2], hull[-1], k) >= 0.0:
                hull.pop()
        hull.append(k)
    if not lower:
        hull.reverse()
    states = np.array(hull, dtype=np.int64)
    nw = len(hull) - 1
    speeds = np.empty(nw, dtype=np.float64)
    for m in range(nw):
        i = hull[m]
        j = hull[m + 1]
        speeds[m] = (F[j] - F[i]) / ((j - i) * dS)
    return speeds, states


def ft_evolve(F, dS, xj, s, T, max_events):
    """Event-driven front tracking of piecewise-constant data for time T.

    xj are the positions of the initial jumps (nondecreasing) and s the
    state indices of the intervals around them (len(s) == len(xj) + 1).
    Each initial jump is resolved into its entropy fan; waves then move at
    constant speed until two adjacent waves meet, at which point both are
    replaced by the Riemann solution of their outer states. Waves are
    immutable once created, so a queued collision stays exact while both
    waves are alive and adjacent; stale queue entries are skipped lazily.

    Returns (x, states, events, status): final jump positions, the interval
    state indices (len = len(x) + 1), the number of collisions processed,
    and status 0 for success or 1 when max_events was exceeded (x and
    states are None in that case).
    """
    T = float(T)
    tol = 1e-12 * T
    # wave records: position/time of creation, speed, flanking states
    wx = []
    wt = []
    ww = []
    wl = []
    wr = []
    prv = []
    nxt = []
    alive = []
    heap = []
    seq = 0
    head = -1

    def new_wave(x, t, w, a, b):
        idx = len(wx)
        wx.append(x)
        wt.append(t)
        ww.append(w)
        wl.append(a)
        wr.append(b)
        prv.append(-1)
        nxt.append(-1)
        alive.append(True)
        return idx

    def push(i, j, tcur):
        nonlocal seq
        if i < 0 or j < 0:
            return
        wi = ww[i]
        wj = ww[j]
        if wi <= wj:
            return
        tau = (wx[j] - wx[i] + wi * wt[i] - wj * wt[j]) / (wi - wj)
        if tau > T:
            return
        if tau < tcur - tol:
            tau = tcur
        xc = wx[i] + wi * (tau - wt[i])
        heapq.heappush(heap, (tau, xc, seq, i, j))
        seq += 1

    order = []
    for i in range(len(xj)):
        a = int(s[i])
        b = int(s[i + 1])
        if a == b:
            continue
        sp, st = riemann_fan(F, dS, a, b)
        x = float(xj[i])
        for m in range(len(sp)):
            order.append(new_wave(x, 0.0, float(sp[m]), int(st[m]), int(st[m + 1])))
    for p, q in zip(order, order[1:]):
        nxt[p] = q
        prv[q] = p
    head = order[0] if order else -1
    for p, q in zip(order, order[1:]):
        push(p, q, 0.0)

    events = 0
    while heap:
        tau, xc, _, i, j = heapq.heappop(heap)
        if not alive[i] or not alive[j] or nxt[i] != j:
            continue
        events += 1
        if events > max_events:
            return None, None, events, 1
        a = wl[i]
        b = wr[j]
        p = prv[i]
        q = nxt[j]
        alive[i] = False
        alive[j] = False
        if a == b:
            if p >= 0:
                nxt[p] = q
            else:
                head = q
            if q >= 0:
                prv[q] = p
            push(p, q, tau)
            continue
        sp, st = riemann_fan(F, dS, a, b)
        first = -1
        last = p
        for m in range(len(sp)):
            idx = new_wave(xc, tau, float(sp[m]), int(st[m]), int(st[m + 1]))
            if first < 0:
                first = idx
            if last >= 0:
                nxt[last] = idx
            prv[idx] = last
            last = idx
        if p < 0:
            head = first
        nxt[last] = q
        if q >= 0:
            prv[q] = last
        push(p, first, tau)
        push(last, q, tau)

    xs = []
    ss = []
    i = head
    last = -1
    while i >= 0:
        xs.append(wx[i] + ww[i] * (T - wt[i]))
        ss.append(wl[i])
        last = i
        i = nxt[i]
    if last >= 0:
        ss.append(wr[last])
    else:
        ss.append(int(s[0]))
    return (
        np.asarray(xs, dtype=np.float64),
        np.asarray(ss, dtype=np.int64),
        events,
        0,
    )


# streamline tracing termination codes (shared with the compiled twin)
TRACE_BUDGET = 0
TRACE_BOUNDARY = 1
TRACE_STAGNATION = 2
TRACE_PROCESS = 3
TRACE_OVERFLOW = 4

_LINEAR_SWITCH = 1e-12
_STAGNATION_REL = 1e-14
_NUDGE = 1e-12


def trace_cells(
    vlo,
    vhi,
    phi,
    dims,
    spacing,
    origin,
    start_cell,
    start_point,
    direction,
    budget,
    vmax,
    inside=None,
    max_steps=10_000_000,
):
    """Trace one half-streamline through the per-cell linear velocity field.

    vlo/vhi are the +axis normal velocities at each cell's low and high
    faces, axis-major flattened (length dim*ncells). Within a cell each
    component varies linearly along its own axis, so the per-axis motion is
    exponential in time and face-exit times have the closed form
    t = ln(v_face/v_entry)/A, degrading to the uniform formula when |A| is
    negligible. direction -1 traces against the field. budget is in
    time-of-flight units (porosity-weighted travel time). inside, when
    given, marks cells the trace may enter; stepping into a cell with
    inside == 0 stops with the process code so a neighbouring partition can
    continue from the returned point.

    Returns (cells, tof, cause, end_point, end_cell, used): the cells
    crossed with their time-of-flight increments, a termination code, the
    final position, the final cell (-1 after leaving the domain; for the
    process code, the cell the trace was about to enter), and the consumed
    budget.
    """
    from math import expm1, inf, log

    d = len(dims)
    ndims = [int(dims[a]) for a in range(d)]
    hs = [float(spacing[a]) for a in range(d)]
    og = [float(origin[a]) for a in range(d)]
    strides = [1] * d
    for a in range(1, d):
        strides[a] = strides[a - 1] * ndims[a - 1]
    n = strides[d - 1] * ndims[d - 1]
    vl = [float(x) for x in vlo]
    vh = [float(x) for x in vhi]
    por = [float(x) for x in phi]
    ins = None if inside is None else inside

    coords = [0] * d
    idx = int(start_cell)
    for a in range(d):
        coords[a] = idx % ndims[a]
        idx //= ndims[a]
    p = [float(start_point[a]) for a in range(d)]
    dirn = float(direction)
    remaining = float(budget)
    thresh = _STAGNATION_REL * float(vmax)

    cells_out = []
    tof_out = []
    cur = int(start_cell)
    cause = TRACE_OVERFLOW
    end_cell = cur
    u = [0.0] * d
    A = [0.0] * d
    xlo = [0.0] * d
    steps = 0
    while steps < int(max_steps):
        steps += 1
        if remaining <= 0.0:
            cause = TRACE_BUDGET
            end_cell = cur
            break
        speed = 0.0
        for a in range(d):
            h = hs[a]
            xl = og[a] + coords[a] * h
            u_lo = dirn * vl[a * n + cur]
            u_hi = dirn * vh[a * n + cur]
            Aa = (u_hi - u_lo) / h
            up = u_lo + Aa * (p[a] - xl)
            xlo[a] = xl
            u[a] = up
            A[a] = Aa
            if up > speed:
                speed = up
            elif -up > speed:
                speed = -up
        if speed < thresh:
            cause = TRACE_STAGNATION
            end_cell = cur
            break

        t_min = inf
        exit_axis = -1
        exit_hi = 0
        for a in range(d):
            up = u[a]
            if up == 0.0:
                continue
            h = hs[a]
            Aa = A[a]
            t = inf
            if up > 0.0:
                uf = dirn * vh[a * n + cur]
                if uf > 0.0:
                    if abs(Aa) * h < _LINEAR_SWITCH * up:
                        t = (xlo[a] + h - p[a]) / up
                    else:
                        t = log(uf / up) / Aa
                hi = 1
            else:
                uf = dirn * vl[a * n + cur]
                if uf < 0.0:
                    if abs(Aa) * h < _LINEAR_SWITCH * (-up):
                        t = (xlo[a] - p[a]) / up
                    else:
                        t = log(uf / up) / Aa
                hi = 0
            if t < t_min:
                t_min = t
                exit_axis = a
                exit_hi = hi
        if exit_axis < 0:
            cause = TRACE_STAGNATION
            end_cell = cur
            break

        tof_inc = t_min * por[cur]
        if tof_inc > remaining:
            t_par = remaining / por[cur]
            for b in range(d):
                ub = u[b]
                Ab = A[b]
                if Ab == 0.0 or abs(Ab) * hs[b] < _LINEAR_SWITCH * abs(ub):
                    p[b] += ub * t_par
                else:
                    p[b] += (ub / Ab) * expm1(Ab * t_par)
            cells_out.append(cur)
            tof_out.append(remaining)
            remaining = 0.0
            cause = TRACE_BUDGET
            end_cell = cur
            break

        cells_out.append(cur)
        tof_out.append(tof_inc)
        remaining -= tof_inc
        for b in range(d):
            if b == exit_axis:
                p[b] = xlo[b] + hs[b] if exit_hi else xlo[b]
            else:
                ub = u[b]
                Ab = A[b]
                if Ab == 0.0 or abs(Ab) * hs[b] < _LINEAR_SWITCH * abs(ub):
                    p[b] += ub * t_min
                else:
                    p[b] += (ub / Ab) * expm1(Ab * t_min)
        if exit_hi:
            coords[exit_axis] += 1
            if coords[exit_axis] >= ndims[exit_axis]:
                cause = TRACE_BOUNDARY
                end_cell = -1
                break
            cur += strides[exit_axis]
        else:
            coords[exit_axis] -= 1
            if coords[exit_axis] < 0:
                cause = TRACE_BOUNDARY
                end_cell = -1
                break
            cur -= strides[exit_axis]
        for b in range(d):
            if b == exit_axis:
                continue
            eps = _NUDGE * hs[b]
            blo = xlo[b] + eps
            bhi = xlo[b] + hs[b] - eps
            if p[b] < blo:
                p[b] = blo
            elif p[b] > bhi:
                p[b] = bhi
        if ins is not None and ins[cur] == 0:
            cause = TRACE_PROCESS
            end_cell = cur
            break
    used = float(budget) - remaining
    return (
        np.asarray(cells_out, dtype=np.int64),
        np.asarray(tof_out, dtype=np.float64),
        cause,
        np.asarray(p, dtype=np.float64),
        end_cell,
        used,
    )
