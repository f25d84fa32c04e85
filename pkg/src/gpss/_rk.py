"""Compiled Dormand-Prince 5(4) kernel for second-order radial equations.

Everything in here is numba-jitted and works on plain arrays; the public
wrappers live in :mod:`gpss.integrator`.

The right-hand side is the family

    u'' = -(d-1)/r u' + (a2 r^2 - lam) u - c_inv2 u / r^2
          - np |u|^{p-1} u - nq |u|^{q-1} u
          - (kp P^{p-1} + kq P^{q-1}) u

where ``P`` is a tabulated background profile (quintic Hermite lookup).
The coefficient vector layout is given by the ``K_*`` indices below.
"""

import numpy as np
from numba import njit

K_D, K_LAM, K_A2, K_NP, K_P, K_NQ, K_Q, K_KP, K_KQ, K_CINV2 = range(10)
N_COEF = 10

E_ZERO, E_CAP, E_FLOOR, E_FLOOR_RMIN, E_ESCAPE, E_TURN, E_RESCALE = range(7)
N_EVENT = 7

ST_END, ST_ZERO, ST_CAP, ST_FLOOR, ST_ESCAPE, ST_NONFINITE, ST_UNDERFLOW, ST_MAXSTEPS = range(8)

_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

_RESCALE_AT = 1e100


@njit(cache=True)
def hermite5(x, x0, x1, y0, m0, a0, y1, m1, a1):
    """Quintic Hermite value and first derivative at ``x``."""
    h = x1 - x0
    t = (x - x0) / h
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5
    h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5
    h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5)
    h3 = 0.5 * (t3 - 2.0 * t4 + t5)
    h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5
    h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5
    g0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4
    g1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4
    g2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4)
    g3 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4)
    g4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4
    g5 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4
    hh = h * h
    val = h0 * y0 + h1 * m0 * h + h2 * a0 * hh + h3 * a1 * hh + h4 * m1 * h + h5 * y1
    der = (g0 * y0 + g1 * m0 * h + g2 * a0 * hh + g3 * a1 * hh + g4 * m1 * h + g5 * y1) / h
    return val, der


@njit(cache=True)
def table_lookup(x, tr, tu, tdu, tddu):
    n = tr.shape[0]
    if x <= tr[0]:
        i = 0
    elif x >= tr[n - 1]:
        i = n - 2
    else:
        i = np.searchsorted(tr, x) - 1
        if i < 0:
            i = 0
        if i > n - 2:
            i = n - 2
    return hermite5(x, tr[i], tr[i + 1], tu[i], tdu[i], tddu[i], tu[i + 1], tdu[i + 1], tddu[i + 1])


@njit(cache=True)
def spow(u, e):
    # |u|^{e-1} u
    if u == 0.0:
        return 0.0
    a = abs(u)
    v = a ** e
    return v if u > 0 else -v


@njit(cache=True)
def rhs2(r, u, du, c, tr, tu, tdu, tddu):
    acc = -(c[K_D] - 1.0) / r * du + (c[K_A2] * r * r - c[K_LAM]) * u
    if c[K_CINV2] != 0.0:
        acc -= c[K_CINV2] * u / (r * r)
    if c[K_NP] != 0.0:
        acc -= c[K_NP] * spow(u, c[K_P])
    if c[K_NQ] != 0.0:
        acc -= c[K_NQ] * spow(u, c[K_Q])
    if c[K_KP] != 0.0 or c[K_KQ] != 0.0:
        bg, _ = table_lookup(r, tr, tu, tdu, tddu)
        ab = abs(bg)
        pot = 0.0
        if c[K_KP] != 0.0:
            pot += c[K_KP] * ab ** (c[K_P] - 1.0)
        if c[K_KQ] != 0.0:
            pot += c[K_KQ] * ab ** (c[K_Q] - 1.0)
        acc -= pot * u
    return acc


@njit(cache=True)
def _locate_zero(x0, x1, y0, m0, a0, y1, m1, a1, xtol):
    # safeguarded Newton on the interpolant, bracket kept by bisection
    lo = x0
    hi = x1
    slo = y0 > 0.0
    x = 0.5 * (lo + hi)
    for _ in range(200):
        f, df = hermite5(x, x0, x1, y0, m0, a0, y1, m1, a1)
        if f == 0.0:
            return x
        if (f > 0.0) == slo:
            lo = x
        else:
            hi = x
        xn = 0.5 * (lo + hi)
        if df != 0.0:
            cand = x - f / df
            if lo < cand < hi:
                xn = cand
        if abs(xn - x) <= xtol or hi - lo <= xtol:
            return xn
        x = xn
    return x


@njit(cache=True)
def _grow(a, n):
    b = np.empty(2 * a.shape[0])
    b[:n] = a[:n]
    return b


@njit(cache=True)
def dopri5(r0, u0, du0, r_end, rtol, atol, h0, max_steps, c, ev, tr, tu, tdu, tddu):
    """Integrate from ``r0`` towards ``r_end`` (either direction).

    Returns ``(n, R, U, DU, DDU, status, n_rejected, n_rescale)`` where the
    first ``n`` entries of each array are the accepted nodes.
    """
    cap = 1024
    R = np.empty(cap)
    U = np.empty(cap)
    DU = np.empty(cap)
    DDU = np.empty(cap)

    direction = 1.0 if r_end > r0 else -1.0
    span = abs(r_end - r0)
    r = r0
    y0 = u0
    y1 = du0
    f0 = y1
    f1 = rhs2(r, y0, y1, c, tr, tu, tdu, tddu)
    R[0] = r
    U[0] = y0
    DU[0] = y1
    DDU[0] = f1
    n = 1
    sign0 = 0.0
    if y0 > 0.0:
        sign0 = 1.0
    elif y0 < 0.0:
        sign0 = -1.0

    if not (np.isfinite(y0) and np.isfinite(y1) and np.isfinite(f1)):
        return n, R, U, DU, DDU, ST_NONFINITE, 0, 0

    h = abs(h0)
    if h <= 0.0:
        h = 1e-3 * max(abs(r0), 1e-8)
    h = min(h, span)

    beta = 0.04
    expo1 = 0.2 - 0.75 * beta
    safe = 0.9
    facold = 1e-4
    n_rej = 0
    n_resc = 0
    status = ST_END
    steps = 0
    last_reject = False
    while True:
        if steps >= max_steps:
            status = ST_MAXSTEPS
            break
        steps += 1
        remaining = (r_end - r) * direction
        if remaining <= 0.0:
            status = ST_END
            break
        if h >= remaining:
            h = remaining
        if h < 1e-14 * max(abs(r), 1e-300) or h < 1e-300:
            status = ST_UNDERFLOW
            break
        hs = h * direction

        k1u = f0
        k1d = f1
        ru = y0 + hs * _A21 * k1u
        rd = y1 + hs * _A21 * k1d
        k2u = rd
        k2d = rhs2(r + _C2 * hs, ru, rd, c, tr, tu, tdu, tddu)
        ru = y0 + hs * (_A31 * k1u + _A32 * k2u)
        rd = y1 + hs * (_A31 * k1d + _A32 * k2d)
        k3u = rd
        k3d = rhs2(r + _C3 * hs, ru, rd, c, tr, tu, tdu, tddu)
        ru = y0 + hs * (_A41 * k1u + _A42 * k2u + _A43 * k3u)
        rd = y1 + hs * (_A41 * k1d + _A42 * k2d + _A43 * k3d)
        k4u = rd
        k4d = rhs2(r + _C4 * hs, ru, rd, c, tr, tu, tdu, tddu)
        ru = y0 + hs * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u)
        rd = y1 + hs * (_A51 * k1d + _A52 * k2d + _A53 * k3d + _A54 * k4d)
        k5u = rd
        k5d = rhs2(r + _C5 * hs, ru, rd, c, tr, tu, tdu, tddu)
        ru = y0 + hs * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u)
        rd = y1 + hs * (_A61 * k1d + _A62 * k2d + _A63 * k3d + _A64 * k4d + _A65 * k5d)
        k6u = rd
        k6d = rhs2(r + hs, ru, rd, c, tr, tu, tdu, tddu)
        nu = y0 + hs * (_A71 * k1u + _A73 * k3u + _A74 * k4u + _A75 * k5u + _A76 * k6u)
        nd = y1 + hs * (_A71 * k1d + _A73 * k3d + _A74 * k4d + _A75 * k5d + _A76 * k6d)
        k7u = nd
        k7d = rhs2(r + hs, nu, nd, c, tr, tu, tdu, tddu)

        eu = hs * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
        ed = hs * (_E1 * k1d + _E3 * k3d + _E4 * k4d + _E5 * k5d + _E6 * k6d + _E7 * k7d)
        sku = atol + rtol * max(abs(y0), abs(nu))
        skd = atol + rtol * max(abs(y1), abs(nd))
        err = np.sqrt(0.5 * ((eu / sku) ** 2 + (ed / skd) ** 2))

        if not np.isfinite(err):
            # overflow inside the stages: shrink hard, give up if hopeless
            if not (np.isfinite(nu) and np.isfinite(nd)) and h < 1e-10 * max(abs(r), 1.0):
                status = ST_NONFINITE
                break
            h *= 0.1
            n_rej += 1
            last_reject = True
            continue

        fac11 = err ** expo1
        fac = fac11 / facold ** beta
        fac = max(0.1, min(5.0, fac / safe))
        hnew = h / fac
        if err > 1.0:
            n_rej += 1
            hnew = h / min(5.0, fac11 / safe)
            h = hnew
            last_reject = True
            continue

        facold = max(err, 1e-4)
        rn = r + hs
        if direction > 0 and r_end - rn < 1e-15 * abs(r_end):
            rn = r_end
        if direction < 0 and rn - r_end < 1e-15 * abs(r_end):
            rn = r_end
        if last_reject:
            hnew = min(hnew, h)
        last_reject = False

        if n >= R.shape[0]:
            R = _grow(R, n)
            U = _grow(U, n)
            DU = _grow(DU, n)
            DDU = _grow(DDU, n)

        # zero crossing relative to the starting sign
        if ev[E_ZERO] != 0.0 and sign0 != 0.0 and nu * sign0 <= 0.0:
            if direction > 0:
                xz = _locate_zero(r, rn, y0, y1, k1d, nu, nd, k7d, 1e-13 * max(abs(rn), 1e-3))
            else:
                xz = _locate_zero(rn, r, nu, nd, k7d, y0, y1, k1d, 1e-13 * max(abs(rn), 1e-3))
            if direction > 0:
                _, dz = hermite5(xz, r, rn, y0, y1, k1d, nu, nd, k7d)
            else:
                _, dz = hermite5(xz, rn, r, nu, nd, k7d, y0, y1, k1d)
            if (xz - r) * direction > 0.0:
                R[n] = xz
                U[n] = 0.0
                DU[n] = dz
                DDU[n] = rhs2(xz, 0.0, dz, c, tr, tu, tdu, tddu)
                n += 1
            status = ST_ZERO
            break

        r = rn
        y0 = nu
        y1 = nd
        f0 = k7u
        f1 = k7d
        R[n] = r
        U[n] = y0
        DU[n] = y1
        DDU[n] = f1
        n += 1

        if not (np.isfinite(y0) and np.isfinite(y1) and np.isfinite(f1)):
            status = ST_NONFINITE
            break
        if ev[E_CAP] > 0.0 and abs(y0) > ev[E_CAP]:
            status = ST_CAP
            break
        if (
            ev[E_FLOOR] > 0.0
            and abs(y0) < ev[E_FLOOR]
            and r > ev[E_FLOOR_RMIN]
            and y0 > 0.0
        ):
            status = ST_FLOOR
            break
        if ev[E_ESCAPE] != 0.0 and r > ev[E_TURN] and y0 > 0.0 and y1 > 0.0:
            v = c[K_A2] * r * r - c[K_LAM]
            if c[K_NP] != 0.0:
                v -= c[K_NP] * y0 ** (c[K_P] - 1.0)
            if c[K_NQ] != 0.0:
                v -= c[K_NQ] * y0 ** (c[K_Q] - 1.0)
            if v > 0.0:
                status = ST_ESCAPE
                break
        if ev[E_RESCALE] != 0.0 and abs(y0) > _RESCALE_AT:
            s = 1.0 / _RESCALE_AT
            for j in range(n):
                U[j] *= s
                DU[j] *= s
                DDU[j] *= s
            y0 *= s
            y1 *= s
            f0 *= s
            f1 *= s
            n_resc += 1
        h = hnew

    return n, R, U, DU, DDU, status, n_rej, n_resc
