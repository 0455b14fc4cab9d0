"""Compiled mirrors of the reference simulation and coupling loops.

These perform the same floating-point operations in the same order as
``simulator._run_reference`` and ``coupling._verify_reference``; the test
suite checks the two paths against each other.
"""
import numba
import numpy as np

from .policies import MAF, MCA, MINAGE, RANDOM, RR
from .stochastic import draw_jit


@numba.njit(cache=True)
def choose(rule, gw, means, rr, gen_pol):
    """Sensor index for ``rule``; ``rr`` is a 1-element cursor array."""
    n = gw.shape[0]
    if rule == MAF:
        arg = 0
        best = gw[0]
        for i in range(1, n):
            if gw[i] > best:
                best = gw[i]
                arg = i
        return arg
    if rule == MINAGE:
        arg = 0
        best = gw[0]
        for i in range(1, n):
            if gw[i] < best:
                best = gw[i]
                arg = i
        return arg
    if rule == MCA:
        arg = 0
        best = means[0] - gw[0] / n
        for i in range(1, n):
            v = means[i] - gw[i] / n
            if v < best:
                best = v
                arg = i
        return arg
    if rule == RR:
        i = rr[0]
        rr[0] = (i + 1) % n
        return i
    if rule == RANDOM:
        i = int(gen_pol.random() * n)
        return min(i, n - 1)
    return -1


@numba.njit(cache=True)
def simulate(s, rule, means, kinds, params, mkind, mparams, gen_tx, gen_pol,
             time_mode, t_max, k_max, warmup, rr0):
    n = kinds.shape[0]
    gw = np.zeros(n)
    mon = np.zeros(n)  # monitor ages right after the previous send
    pending = np.zeros(n, np.int64)
    rr = np.array([rr0], np.int64)

    area = np.zeros(n)
    polls_win = np.zeros(n, np.int64)
    resets = np.zeros(n, np.int64)
    cycles = np.zeros(n, np.int64)
    sum_y = np.zeros(n)
    sum_y2 = np.zeros(n)
    sum_yt = np.zeros(n)
    sum_t = np.zeros(n)
    last_reset = np.full(n, -1.0)
    last_t = np.zeros(n)

    t = 0.0
    t_prev = 0.0
    is_open = False
    t_open = 0.0
    sends = 0
    while True:
        for _ in range(s):
            i = choose(rule, gw, means, rr, gen_pol)
            x = draw_jit(kinds[i], params[i, 0], params[i, 1], params[i, 2], gen_tx)
            for k in range(n):
                gw[k] = gw[k] + x
            gw[i] = x
            t = t + x
            pending[i] += 1
        x0 = draw_jit(mkind, mparams[0], mparams[1], mparams[2], gen_tx)
        for k in range(n):
            gw[k] = gw[k] + x0
        t = t + x0
        if time_mode and t > t_max:
            break
        d = t - t_prev
        if is_open:
            for k in range(n):
                area[k] += mon[k] * d + d * d / 2.0
                polls_win[k] += pending[k]
            sends += 1
        elif t >= warmup:
            is_open = True
            t_open = t
        for k in range(n):
            mon[k] = gw[k]
            if pending[k] > 0 and is_open:
                if last_reset[k] >= 0.0:
                    y = t - last_reset[k]
                    sum_y[k] += y
                    sum_y2[k] += y * y
                    sum_yt[k] += y * last_t[k]
                    cycles[k] += 1
                last_t[k] = gw[k]
                sum_t[k] += gw[k]
                resets[k] += 1
                last_reset[k] = t
            pending[k] = 0
        t_prev = t
        if not time_mode and sends >= k_max:
            break
    return (area, polls_win, resets, cycles, sum_y, sum_y2, sum_yt, sum_t,
            sends, t_open, t_prev, gw, mon, t, rr[0])


@numba.njit(cache=True)
def coupled_dominance(s, base_rule, alt_rule, draws, means, gen_pol, n):
    """Run ``base_rule`` and ``alt_rule`` on shared draws; first sorted-age violation.

    Returns ``(decision, rank, maf_value, alt_value, monitor_flag, gw_maf,
    gw_alt)`` with ``decision == -1`` when dominance held throughout.
    """
    a = np.zeros(n)
    b = np.zeros(n)
    ma = np.zeros(n)
    mb = np.zeros(n)
    rr_a = np.zeros(1, np.int64)
    rr_b = np.zeros(1, np.int64)
    polls = 0
    for j in range(draws.shape[0]):
        z = draws[j]
        send = polls == s
        if send:
            for k in range(n):
                a[k] = a[k] + z
                b[k] = b[k] + z
                ma[k] = a[k]
                mb[k] = b[k]
            polls = 0
        else:
            i = choose(base_rule, a, means, rr_a, gen_pol)
            k2 = choose(alt_rule, b, means, rr_b, gen_pol)
            for k in range(n):
                a[k] = a[k] + z
                b[k] = b[k] + z
                ma[k] = ma[k] + z
                mb[k] = mb[k] + z
            a[i] = z
            b[k2] = z
            polls += 1
        sa = np.sort(a)[::-1]
        sb = np.sort(b)[::-1]
        for r in range(n):
            if sa[r] > sb[r]:
                return j, r, sa[r], sb[r], False, a, b
        if send:
            sa = np.sort(ma)[::-1]
            sb = np.sort(mb)[::-1]
            for r in range(n):
                if sa[r] > sb[r]:
                    return j, r, sa[r], sb[r], True, a, b
    return -1, -1, 0.0, 0.0, False, a, b
