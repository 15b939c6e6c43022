"""Hot numeric kernels: convex load equalization and the attack-value DP.

Two interchangeable backends provide each kernel:

* a loop implementation compiled with numba ``@njit`` (the default), and
* a vectorized pure-numpy fallback.

Selection happens at import time through the ``GRIDGAME_NUMBA`` environment
variable: ``0`` forces the numpy path, ``1`` requires numba (import error if
missing), anything else tries numba and silently falls back.  Both backends
stay importable so the benchmark in ``benchmarks/bench_kernels.py`` can
compare them.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "equalize",
    "attack_value_tables",
    "warmup",
]


# ---------------------------------------------------------------------------
# loop implementations (njit-compiled on the fast path)
# ---------------------------------------------------------------------------

def _job_step_impl(loads, alloc_row, lo, hi, work, cap, coeffs, b):
    # exact single-job minimizer of sum_t c_t (L_t + x_t)^b with
    # 0 <= x_t <= cap on [lo, hi] and sum x = work, via water level bisection
    for t in range(lo, hi + 1):
        loads[t] -= alloc_row[t]
        if loads[t] < 0.0:
            loads[t] = 0.0
        alloc_row[t] = 0.0
    if work <= 0.0:
        return
    if b == 1.0:
        # marginals c_t do not depend on load: fill cheapest slots first
        remaining = work
        width = hi - lo + 1
        used = np.zeros(width, dtype=np.bool_)
        while remaining > 1e-15:
            best_t = -1
            best_c = 1e300
            for t in range(lo, hi + 1):
                if not used[t - lo] and coeffs[t] < best_c:
                    best_c = coeffs[t]
                    best_t = t
            amt = remaining if remaining < cap else cap
            alloc_row[best_t] = amt
            loads[best_t] += amt
            used[best_t - lo] = True
            remaining -= amt
        return
    inv = 1.0 / (b - 1.0)
    l_max = 0.0
    c_max = 0.0
    for t in range(lo, hi + 1):
        if loads[t] > l_max:
            l_max = loads[t]
        if coeffs[t] > c_max:
            c_max = coeffs[t]
    level_hi = b * c_max * (l_max + work + 1.0) ** (b - 1.0)
    level_lo = 0.0
    for _ in range(100):
        mid = 0.5 * (level_lo + level_hi)
        total = 0.0
        for t in range(lo, hi + 1):
            x = (mid / (coeffs[t] * b)) ** inv - loads[t]
            if x < 0.0:
                x = 0.0
            elif x > cap:
                x = cap
            total += x
        if total >= work:
            level_hi = mid
        else:
            level_lo = mid
    total = 0.0
    for t in range(lo, hi + 1):
        x = (level_hi / (coeffs[t] * b)) ** inv - loads[t]
        if x < 0.0:
            x = 0.0
        elif x > cap:
            x = cap
        alloc_row[t] = x
        total += x
    resid = work - total
    t = lo
    while (resid > 1e-18 or resid < -1e-18) and t <= hi:
        x = alloc_row[t]
        nx = x + resid
        if nx < 0.0:
            nx = 0.0
        elif nx > cap:
            nx = cap
        resid -= nx - x
        alloc_row[t] = nx
        t += 1
    for t in range(lo, hi + 1):
        loads[t] += alloc_row[t]


def _kkt_impl(loads, alloc, lo, hi, work, cap, coeffs, b):
    # worst over jobs of (max marginal on slots that could give mass)
    # minus (min marginal on slots that could still receive mass)
    n = lo.shape[0]
    worst = 0.0
    for i in range(n):
        if work[i] <= 0.0:
            continue
        give = -1e300
        recv = 1e300
        for t in range(lo[i], hi[i] + 1):
            if b == 1.0:
                mar = coeffs[t]
            else:
                mar = coeffs[t] * b * loads[t] ** (b - 1.0)
            x = alloc[i, t]
            if x > 1e-12 and mar > give:
                give = mar
            if x < cap[i] - 1e-12 and mar < recv:
                recv = mar
        v = give - recv
        if v > worst:
            worst = v
    return worst


def _sweeps_impl(lo, hi, work, cap, coeffs, b, alloc, loads, tol, max_sweeps):
    n = lo.shape[0]
    sweeps = 0
    viol = 0.0
    for s in range(max_sweeps):
        for i in range(n):
            _job_step(loads, alloc[i], lo[i], hi[i], work[i], cap[i], coeffs, b)
        sweeps = s + 1
        viol = _kkt(loads, alloc, lo, hi, work, cap, coeffs, b)
        if viol <= tol:
            break
    return sweeps, viol


def _dp_fill_impl(a, d, e, events, coeffs, b, uniform, idx_le, idx_ge):
    # interval DP: value of the best clique partition of jobs contained in
    # [events[ki], events[li]], split around the locally maximal clique at z
    m = events.shape[0]
    n = a.shape[0]
    values = np.zeros((m, m))
    best_z = np.full((m, m), -1, dtype=np.int64)
    for width in range(m):
        for ki in range(m - width):
            li = ki + width
            k = events[ki]
            l = events[li]
            best = -1.0
            bz = -1
            for z in range(k, l + 1):
                s = 0.0
                cnt = 0
                ilo = -1
                ihi = 1 << 60
                for j in range(n):
                    if a[j] >= k and d[j] <= l and a[j] <= z and z <= d[j]:
                        s += e[j]
                        cnt += 1
                        if a[j] > ilo:
                            ilo = a[j]
                        if d[j] < ihi:
                            ihi = d[j]
                if cnt == 0:
                    continue
                if uniform:
                    cw = 1.0
                else:
                    cw = 0.0
                    for t in range(ilo, ihi + 1):
                        if coeffs[t] > cw:
                            cw = coeffs[t]
                val = cw * s**b
                if z - 1 >= k:
                    val += values[ki, idx_le[z - 1]]
                if z + 1 <= l:
                    val += values[idx_ge[z + 1], li]
                if val > best:
                    best = val
                    bz = z
            if bz >= 0:
                values[ki, li] = best
            best_z[ki, li] = bz
    return values, best_z


# ---------------------------------------------------------------------------
# pure-numpy fallback
# ---------------------------------------------------------------------------

def _job_step_numpy(loads, alloc_row, lo, hi, work, cap, coeffs, b):
    win = slice(lo, hi + 1)
    loads[win] = np.maximum(loads[win] - alloc_row[win], 0.0)
    alloc_row[win] = 0.0
    if work <= 0.0:
        return
    c = coeffs[win]
    base = loads[win]
    if b == 1.0:
        x = np.zeros_like(base)
        remaining = work
        for idx in np.argsort(c, kind="stable"):
            amt = min(cap, remaining)
            x[idx] = amt
            remaining -= amt
            if remaining <= 1e-15:
                break
    else:
        inv = 1.0 / (b - 1.0)
        level_hi = b * c.max() * (base.max() + work + 1.0) ** (b - 1.0)
        level_lo = 0.0
        for _ in range(100):
            mid = 0.5 * (level_lo + level_hi)
            x = np.clip((mid / (c * b)) ** inv - base, 0.0, cap)
            if x.sum() >= work:
                level_hi = mid
            else:
                level_lo = mid
        x = np.clip((level_hi / (c * b)) ** inv - base, 0.0, cap)
        resid = work - x.sum()
        i = 0
        while abs(resid) > 1e-18 and i < len(x):
            nx = min(max(x[i] + resid, 0.0), cap)
            resid -= nx - x[i]
            x[i] = nx
            i += 1
    alloc_row[win] = x
    loads[win] += x


def _kkt_numpy(loads, alloc, lo, hi, work, cap, coeffs, b):
    worst = 0.0
    for i in range(len(lo)):
        if work[i] <= 0.0:
            continue
        win = slice(lo[i], hi[i] + 1)
        mar = coeffs[win] if b == 1.0 else coeffs[win] * b * loads[win] ** (b - 1.0)
        x = alloc[i, win]
        can_give = x > 1e-12
        can_recv = x < cap[i] - 1e-12
        give = mar[can_give].max() if can_give.any() else -np.inf
        recv = mar[can_recv].min() if can_recv.any() else np.inf
        worst = max(worst, give - recv)
    return worst


def _sweeps_numpy(lo, hi, work, cap, coeffs, b, alloc, loads, tol, max_sweeps):
    sweeps = 0
    viol = 0.0
    for s in range(max_sweeps):
        for i in range(len(lo)):
            _job_step_numpy(loads, alloc[i], lo[i], hi[i], work[i], cap[i], coeffs, b)
        sweeps = s + 1
        viol = _kkt_numpy(loads, alloc, lo, hi, work, cap, coeffs, b)
        if viol <= tol:
            break
    return sweeps, viol


def _dp_fill_numpy(a, d, e, events, coeffs, b, uniform, idx_le, idx_ge):
    m = len(events)
    n = len(a)
    values = np.zeros((m, m))
    best_z = np.full((m, m), -1, dtype=np.int64)
    for width in range(m):
        for ki in range(m - width):
            li = ki + width
            k = int(events[ki])
            l = int(events[li])
            span = l - k + 1
            contained = (a >= k) & (d <= l)
            diff = np.zeros(span + 1)
            cdiff = np.zeros(span + 1)
            np.add.at(diff, a[contained] - k, e[contained])
            np.subtract.at(diff, d[contained] - k + 1, e[contained])
            np.add.at(cdiff, a[contained] - k, 1.0)
            np.subtract.at(cdiff, d[contained] - k + 1, 1.0)
            sums = np.cumsum(diff[:-1])
            counts = np.cumsum(cdiff[:-1])
            zs = np.arange(k, l + 1)
            if uniform:
                cw = 1.0
            else:
                cw = np.empty(span)
                ca = a[contained]
                cd = d[contained]
                ce = e[contained]
                for off, z in enumerate(zs):
                    mem = (ca <= z) & (z <= cd)
                    if mem.any():
                        cw[off] = coeffs[ca[mem].max() : cd[mem].min() + 1].max()
                    else:
                        cw[off] = 0.0
            # out-of-range gathers are masked off by the np.where conditions
            lidx = idx_le[np.maximum(zs - 1, 0)]
            ridx = np.minimum(idx_ge[np.minimum(zs + 1, len(idx_ge) - 1)], m - 1)
            left = np.where(zs - 1 >= k, values[ki, lidx], 0.0)
            right = np.where(zs + 1 <= l, values[ridx, li], 0.0)
            vals = np.where(counts > 0, cw * sums**b + left + right, -1.0)
            bz = int(np.argmax(vals))
            if vals[bz] >= 0.0:
                values[ki, li] = vals[bz]
                best_z[ki, li] = k + bz
    return values, best_z


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

_FLAG = os.environ.get("GRIDGAME_NUMBA", "auto").strip().lower()
NUMBA_ENABLED = False
_job_step = _job_step_numpy
_kkt = _kkt_numpy
_sweeps_numba = None
_dp_fill_numba = None

if _FLAG not in ("0", "off", "false", "no"):
    try:
        import numba

        _job_step = numba.njit(cache=True)(_job_step_impl)
        _kkt = numba.njit(cache=True)(_kkt_impl)
        _sweeps_numba = numba.njit(cache=True)(_sweeps_impl)
        _dp_fill_numba = numba.njit(cache=True)(_dp_fill_impl)
        NUMBA_ENABLED = True
    except ImportError:
        if _FLAG in ("1", "on", "true", "yes", "require"):
            raise


def _backend(use):
    if use is None:
        use = "numba" if NUMBA_ENABLED else "numpy"
    if use == "numba":
        if not NUMBA_ENABLED:
            raise RuntimeError("numba backend requested but unavailable")
        return _sweeps_numba, _dp_fill_numba
    if use == "numpy":
        return _sweeps_numpy, _dp_fill_numpy
    raise ValueError(f"unknown kernel backend {use!r}")


def equalize(
    lo,
    hi,
    work,
    cap,
    coeffs,
    b,
    alloc=None,
    loads=None,
    tol=1e-8,
    max_sweeps=10000,
    use=None,
):
    """Cyclic coordinate water filling over per-job allocations.

    Minimizes sum_t c_t * (sum_j x[j, t])**b subject to per-job windows
    [lo[j], hi[j]], per-slot caps ``cap[j]`` and totals ``work[j]``.  Stops
    once the worst KKT transfer violation drops below ``tol`` or after
    ``max_sweeps`` sweeps.  Returns (alloc, loads, sweeps, violation).
    """
    lo = np.ascontiguousarray(lo, dtype=np.int64)
    hi = np.ascontiguousarray(hi, dtype=np.int64)
    work = np.ascontiguousarray(work, dtype=np.float64)
    cap = np.ascontiguousarray(cap, dtype=np.float64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    n = len(lo)
    horizon = len(coeffs)
    if alloc is None:
        alloc = np.zeros((n, horizon))
    else:
        alloc = np.ascontiguousarray(alloc, dtype=np.float64)
    if loads is None:
        loads = alloc.sum(axis=0)
    else:
        loads = np.ascontiguousarray(loads, dtype=np.float64)
    sweeps_fn, _ = _backend(use)
    n_sweeps, viol = sweeps_fn(
        lo, hi, work, cap, coeffs, float(b), alloc, loads, float(tol), int(max_sweeps)
    )
    return alloc, loads, int(n_sweeps), float(viol)


def attack_value_tables(a, d, e, events, coeffs, b, uniform, use=None):
    """Fill the interval-DP tables for the clique-partition attack value.

    Returns (values, best_z, idx_le, idx_ge) where ``values[ki, li]`` is the
    best achievable cost for jobs contained in [events[ki], events[li]] and
    ``best_z`` records the argmax compression slot (smallest on ties).
    """
    a = np.ascontiguousarray(a, dtype=np.int64)
    d = np.ascontiguousarray(d, dtype=np.int64)
    e = np.ascontiguousarray(e, dtype=np.float64)
    events = np.ascontiguousarray(events, dtype=np.int64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    top = int(events[-1]) + 2
    idx_le = np.full(top, -1, dtype=np.int64)
    idx_ge = np.full(top, len(events), dtype=np.int64)
    pos = -1
    for t in range(top):
        while pos + 1 < len(events) and events[pos + 1] <= t:
            pos += 1
        idx_le[t] = pos
    pos = len(events)
    for t in range(top - 1, -1, -1):
        while pos - 1 >= 0 and events[pos - 1] >= t:
            pos -= 1
        idx_ge[t] = pos
    _, dp_fn = _backend(use)
    values, best_z = dp_fn(a, d, e, events, coeffs, float(b), uniform, idx_le, idx_ge)
    return values, best_z, idx_le, idx_ge


def warmup():
    """Trigger JIT compilation of the enabled backend on toy inputs."""
    lo = np.array([0], dtype=np.int64)
    hi = np.array([1], dtype=np.int64)
    equalize(lo, hi, [1.0], [np.inf], np.ones(2), 2.0, max_sweeps=3)
    attack_value_tables([0], [1], [1.0], [0, 1], np.ones(2), 2.0, True)
