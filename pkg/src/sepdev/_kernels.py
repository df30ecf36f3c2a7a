"""Compiled inner loops.

Engines work on mutable state arrays and a pre-drawn buffer of uniforms;
they return a status code so the Python driver can refill randoms or grow
event storage and resume exactly where the kernel stopped.
"""
import math

import numpy as np
from numba import njit

DONE = 0
NEED_RANDOMS = 1
NEED_STORAGE = 2
ENVELOPE_VIOLATED = 3


@njit(nogil=True, cache=True)
def build_active(occ, act, pos):
    n = occ.size
    n_act = 0
    for x in range(n):
        pos[x] = -1
    for x in range(n):
        y = x + 1 if x + 1 < n else 0
        if occ[x] != occ[y]:
            act[n_act] = x
            pos[x] = n_act
            n_act += 1
    return n_act


@njit(nogil=True, cache=True)
def symmetric_chunk(occ, act, pos, istate, fstate, horizon, rate, ubuf,
                    ev_t, ev_x, record, snap_t, snaps):
    """Advance the symmetric engine; two uniforms per event.

    ``istate = [n_active, n_events, next_snapshot]``, ``fstate = [t]``.
    Returns ``(status, uniforms_used)``.
    """
    n = occ.size
    n_act = istate[0]
    n_ev = istate[1]
    si = istate[2]
    t = fstate[0]
    nb = ubuf.size
    i = 0
    status = DONE
    while True:
        if n_act > 0:
            if i + 2 > nb:
                status = NEED_RANDOMS
                break
            t_next = t - math.log1p(-ubuf[i]) / (rate * n_act)
        else:
            t_next = math.inf
        while si < snap_t.size and snap_t[si] < t_next:
            snaps[si, :] = occ
            si += 1
        if t_next > horizon:
            t = horizon
            status = DONE
            break
        if record and n_ev >= ev_t.size:
            status = NEED_STORAGE
            break
        k = int(ubuf[i + 1] * n_act)
        if k >= n_act:
            k = n_act - 1
        i += 2
        x = act[k]
        # Inlined by hand: numba helpers taking arrays pay reference-count
        # traffic on every call, which dominated the event cost.
        y = x + 1 if x + 1 < n else 0
        tmp = occ[x]
        occ[x] = occ[y]
        occ[y] = tmp
        left = x - 1 if x > 0 else n - 1
        if y != left:
            # swapping across an active edge flips the activity of both
            # neighbouring edges; edge x itself stays active
            for e in (left, y):
                p = pos[e]
                if p >= 0:
                    n_act -= 1
                    last = act[n_act]
                    act[p] = last
                    pos[last] = p
                    pos[e] = -1
                else:
                    act[n_act] = e
                    pos[e] = n_act
                    n_act += 1
        t = t_next
        if record:
            ev_t[n_ev] = t
            ev_x[n_ev] = x
        n_ev += 1
    istate[0] = n_act
    istate[1] = n_ev
    istate[2] = si
    fstate[0] = t
    return status, i


@njit(nogil=True, cache=True)
def tilted_chunk(occ, act, pos, istate, fstate, horizon, rate, ubuf,
                 ev_t, ev_x, record, snap_t, snaps,
                 knots, amps, D, scale, kappa):
    """Advance the tilted engine by thinning; three uniforms per candidate.

    Candidate events arrive at rate ``rate * exp(kappa) * n_active``; a
    candidate on edge ``x`` at time ``t`` is accepted with probability
    ``exp(sigma * d_x(t) - kappa)`` where ``sigma = eta(x+1) - eta(x)`` and
    ``d_x(t) = scale * (F_t(x/N) - F_t((x+1)/N))``.

    ``istate = [n_active, n_events, next_snapshot, knot_pointer, rejections]``.
    """
    n = occ.size
    M = amps.shape[1]
    K = knots.size
    n_act = istate[0]
    n_ev = istate[1]
    si = istate[2]
    kp = istate[3]
    rej = istate[4]
    t = fstate[0]
    env = rate * math.exp(kappa)
    c = np.empty(M)
    nb = ubuf.size
    i = 0
    status = DONE
    while True:
        if n_act > 0:
            if i + 3 > nb:
                status = NEED_RANDOMS
                break
            t_next = t - math.log1p(-ubuf[i]) / (env * n_act)
        else:
            t_next = math.inf
        while si < snap_t.size and snap_t[si] < t_next:
            snaps[si, :] = occ
            si += 1
        if t_next > horizon:
            t = horizon
            status = DONE
            break
        if record and n_ev >= ev_t.size:
            status = NEED_STORAGE
            break
        k = int(ubuf[i + 1] * n_act)
        if k >= n_act:
            k = n_act - 1
        x = act[k]
        y = x + 1 if x + 1 < n else 0
        while kp + 1 < K and knots[kp + 1] <= t_next:
            kp += 1
        if kp + 1 < K:
            w = (t_next - knots[kp]) / (knots[kp + 1] - knots[kp])
            for m in range(M):
                c[m] = amps[kp, m] + w * (amps[kp + 1, m] - amps[kp, m])
        else:
            for m in range(M):
                c[m] = amps[K - 1, m]
        d = 0.0
        for m in range(M):
            d += c[m] * D[m, x]
        sigma = np.int64(occ[y]) - np.int64(occ[x])
        expo = sigma * scale * d - kappa
        if expo > 1e-9:
            status = ENVELOPE_VIOLATED
            break
        accept = ubuf[i + 2] < math.exp(expo)
        i += 3
        t = t_next
        if accept:
            tmp = occ[x]
            occ[x] = occ[y]
            occ[y] = tmp
            left = x - 1 if x > 0 else n - 1
            if y != left:
                for e in (left, y):
                    p = pos[e]
                    if p >= 0:
                        n_act -= 1
                        last = act[n_act]
                        act[p] = last
                        pos[last] = p
                        pos[e] = -1
                    else:
                        act[n_act] = e
                        pos[e] = n_act
                        n_act += 1
            if record:
                ev_t[n_ev] = t
                ev_x[n_ev] = x
            n_ev += 1
        else:
            rej += 1
    istate[0] = n_act
    istate[1] = n_ev
    istate[2] = si
    istate[3] = kp
    istate[4] = rej
    fstate[0] = t
    return status, i


@njit(nogil=True, cache=True)
def replay_snapshots(occ0, ev_t, ev_x, snap_t, snaps):
    """Configurations after all events with time <= each snapshot time."""
    n = occ0.size
    occ = occ0.copy()
    j = 0
    E = ev_t.size
    for s in range(snap_t.size):
        while j < E and ev_t[j] <= snap_t[s]:
            x = np.int64(ev_x[j])
            y = x + 1 if x + 1 < n else 0
            tmp = occ[x]
            occ[x] = occ[y]
            occ[y] = tmp
            j += 1
        snaps[s, :] = occ


@njit(nogil=True, cache=True)
def pair_integral(occ0, ev_t, ev_x, out_t, knots, amps, cum, E):
    """``int_0^t sum_x eta(x) eta(x+1) G_s(x/N) ds`` at each ``out_t``.

    ``G_s = sum_m c_m(s) e_m`` with piecewise-linear ``c_m``; between events
    the pair moments are constant, so the time integral is exact.
    """
    n = occ0.size
    M = amps.shape[1]
    K = knots.size
    occ = occ0.copy()
    R = np.zeros(M)
    for x in range(n):
        y = x + 1 if x + 1 < n else 0
        if occ[x] == 1 and occ[y] == 1:
            for m in range(M):
                R[m] += E[m, x]
    c = np.empty(M)
    cprev = np.zeros(M)
    cnow = np.empty(M)
    total = 0.0
    kp = 0
    j = 0
    nev = ev_t.size
    res = np.empty(out_t.size)
    edges = np.empty(3, dtype=np.int64)
    before = np.empty(3, dtype=np.int64)
    for s in range(out_t.size):
        target = out_t[s]
        while j < nev and ev_t[j] <= target:
            tau = ev_t[j]
            while kp + 1 < K and knots[kp + 1] <= tau:
                kp += 1
            if kp + 1 < K:
                w = (tau - knots[kp]) / (knots[kp + 1] - knots[kp])
                for m in range(M):
                    c[m] = amps[kp, m] + w * (amps[kp + 1, m] - amps[kp, m])
            else:
                for m in range(M):
                    c[m] = amps[K - 1, m]
            dt = tau - knots[kp]
            for m in range(M):
                cnow[m] = cum[kp, m] + 0.5 * (amps[kp, m] + c[m]) * dt
            for m in range(M):
                total += R[m] * (cnow[m] - cprev[m])
                cprev[m] = cnow[m]
            x = np.int64(ev_x[j])
            y = x + 1 if x + 1 < n else 0
            left = x - 1 if x > 0 else n - 1
            ne = 0
            for e in (left, x, y):
                dup = False
                for q in range(ne):
                    if edges[q] == e:
                        dup = True
                if not dup:
                    e2 = e + 1 if e + 1 < n else 0
                    edges[ne] = e
                    before[ne] = occ[e] * occ[e2]
                    ne += 1
            tmp = occ[x]
            occ[x] = occ[y]
            occ[y] = tmp
            for q in range(ne):
                e = edges[q]
                e2 = e + 1 if e + 1 < n else 0
                delta = np.float64(occ[e] * occ[e2]) - np.float64(before[q])
                if delta != 0.0:
                    for m in range(M):
                        R[m] += delta * E[m, e]
            j += 1
        while kp + 1 < K and knots[kp + 1] <= target:
            kp += 1
        if kp + 1 < K:
            w = (target - knots[kp]) / (knots[kp + 1] - knots[kp])
            for m in range(M):
                c[m] = amps[kp, m] + w * (amps[kp + 1, m] - amps[kp, m])
        else:
            for m in range(M):
                c[m] = amps[K - 1, m]
        dt = target - knots[kp]
        for m in range(M):
            cnow[m] = cum[kp, m] + 0.5 * (amps[kp, m] + c[m]) * dt
        for m in range(M):
            total += R[m] * (cnow[m] - cprev[m])
            cprev[m] = cnow[m]
        res[s] = total
    return res


@njit(nogil=True, cache=True)
def _phi1m1(z):
    """``expm1(z)/z - 1``, accurate near 0."""
    if abs(z) < 1e-4:
        return z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    return (math.expm1(z) - z) / z


@njit(nogil=True, cache=True)
def _w_from(sigma, r, b, xp, xm, wp, wm):
    """``int_0^tau (exp(sigma d_x(s)) - 1) ds`` from one row of knot tables.

    ``r = tau - knot``; ``xp``/``xm`` hold ``expm1(+-d_x)`` at the knot,
    ``b`` the slope of ``d_x`` on the interval and ``wp``/``wm`` the
    integral up to the knot. Scalars only, so the call stays cheap.
    """
    if sigma > 0:
        p = _phi1m1(b * r)
        return wp + r * (xp * (1.0 + p) + p)
    p = _phi1m1(-b * r)
    return wm + r * (xm * (1.0 + p) + p)


@njit(nogil=True, cache=True)
def martingale_pieces(occ0, ev_t, ev_x, out_t, knots, amps, D, E, beta, Xp, Xm, Wp, Wm, scale):
    """Exact path functionals entering the exponential martingale.

    For each output time ``t`` returns columns
      0: ``sum_x eta_t(x) F_t(x/N)``
      1: ``int_0^t sum_x eta_s(x) d/ds F_s(x/N) ds``
      2: ``int_0^t sum_x (exp(sigma_x d_x(s)) - 1) ds`` (without the N^2 rate)
      3: sum over jumps of ``scale * sigma_x * (F(x/N) - F((x+1)/N))``
    with ``sigma_x = eta(x+1) - eta(x)`` and ``d_x = scale * (F(x/N) - F((x+1)/N))``.
    """
    n = occ0.size
    M = amps.shape[1]
    K = knots.size
    occ = occ0.copy()
    Q = np.zeros(M)
    for x in range(n):
        if occ[x] == 1:
            for m in range(M):
                Q[m] += E[m, x]
    ws = np.zeros(n)
    closed = 0.0
    s_start = 0.0
    teta = 0.0
    jump = 0.0
    kp = 0
    c = np.empty(M)
    cprev = np.empty(M)
    for m in range(M):
        cprev[m] = amps[0, m]
    res = np.zeros((out_t.size, 4))
    edges = np.empty(3, dtype=np.int64)
    old = np.empty(3, dtype=np.int64)
    j = 0
    nev = ev_t.size
    for s in range(out_t.size):
        target = out_t[s]
        while j < nev and ev_t[j] <= target:
            tau = ev_t[j]
            while kp + 1 < K and knots[kp + 1] <= tau:
                kp += 1
            if kp + 1 < K:
                w = (tau - knots[kp]) / (knots[kp + 1] - knots[kp])
                for m in range(M):
                    c[m] = amps[kp, m] + w * (amps[kp + 1, m] - amps[kp, m])
            else:
                for m in range(M):
                    c[m] = amps[K - 1, m]
            for m in range(M):
                teta += (c[m] - cprev[m]) * Q[m]
                cprev[m] = c[m]
            x = np.int64(ev_x[j])
            y = x + 1 if x + 1 < n else 0
            left = x - 1 if x > 0 else n - 1
            sigma = np.int64(occ[y]) - np.int64(occ[x])
            dd = 0.0
            for m in range(M):
                dd += c[m] * D[m, x]
                Q[m] += sigma * D[m, x]
            jump += scale * sigma * dd
            ne = 0
            for e in (left, x, y):
                dup = False
                for q in range(ne):
                    if edges[q] == e:
                        dup = True
                if not dup:
                    e2 = e + 1 if e + 1 < n else 0
                    edges[ne] = e
                    old[ne] = np.int64(occ[e2]) - np.int64(occ[e])
                    ne += 1
            tmp = occ[x]
            occ[x] = occ[y]
            occ[y] = tmp
            for q in range(ne):
                e = edges[q]
                e2 = e + 1 if e + 1 < n else 0
                new = np.int64(occ[e2]) - np.int64(occ[e])
                if new != old[q]:
                    if old[q] != 0:
                        closed += _w_from(old[q], tau - knots[kp], beta[e, kp], Xp[e, kp], Xm[e, kp],
                                     Wp[e, kp], Wm[e, kp]) - ws[e]
                        s_start -= ws[e]
                        ws[e] = 0.0
                    if new != 0:
                        ws[e] = _w_from(new, tau - knots[kp], beta[e, kp], Xp[e, kp], Xm[e, kp],
                                     Wp[e, kp], Wm[e, kp])
                        s_start += ws[e]
            j += 1
        while kp + 1 < K and knots[kp + 1] <= target:
            kp += 1
        if kp + 1 < K:
            w = (target - knots[kp]) / (knots[kp + 1] - knots[kp])
            for m in range(M):
                c[m] = amps[kp, m] + w * (amps[kp + 1, m] - amps[kp, m])
        else:
            for m in range(M):
                c[m] = amps[K - 1, m]
        open_sum = 0.0
        for x in range(n):
            y = x + 1 if x + 1 < n else 0
            sg = np.int64(occ[y]) - np.int64(occ[x])
            if sg != 0:
                open_sum += _w_from(sg, target - knots[kp], beta[x, kp], Xp[x, kp], Xm[x, kp],
                                     Wp[x, kp], Wm[x, kp])
        sf = 0.0
        tpart = teta
        for m in range(M):
            sf += c[m] * Q[m]
            tpart += (c[m] - cprev[m]) * Q[m]
        res[s, 0] = sf
        res[s, 1] = tpart
        res[s, 2] = closed + open_sum - s_start
        res[s, 3] = jump
    return res
