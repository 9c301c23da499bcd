"""Pure-Python closed-form kernel for the correction coefficients.

Reference implementation of the arithmetic in ``_eta_ext.pyx``. On a segment
of length ``L`` where ``psi`` starts at ``p`` with slope ``b = 2 v``::

    int e^{i psi}                 = e^{ip} L e^{ibL/2} sinc(bL/2)
    int (t - start) e^{i psi}     = e^{ip} L^2 g(bL),   g(x) = int_0^1 w e^{ixw} dw
    int int_{t1>t2} sin(psi1-psi2) = L^2 q(bL),          q(x) = (x - sin x) / x^2

Small arguments use Taylor series to avoid cancellation.
"""
from __future__ import annotations

import math

_SMALL = 0.5


def _sinc(y: float) -> float:
    if abs(y) < 1e-4:
        return 1.0 - y * y / 6.0
    return math.sin(y) / y


def _g(x: float) -> tuple[float, float]:
    """Real and imaginary part of ``int_0^1 w exp(i x w) dw``."""
    if abs(x) < _SMALL:
        x2 = x * x
        re = 0.0
        im = 0.0
        term = 1.0  # x^(2n) / (2n)!
        for n in range(8):
            re += term / (2 * n + 2)
            termi = term * x / (2 * n + 1)  # x^(2n+1) / (2n+1)!
            im += termi / (2 * n + 3)
            term = -termi * x / (2 * n + 2)
        return re, im
    c = math.cos(x)
    s = math.sin(x)
    x2 = x * x
    return (c + x * s - 1.0) / x2, (s - x * c) / x2


def _q(x: float) -> float:
    """``(x - sin x) / x^2``."""
    if abs(x) < _SMALL:
        x2 = x * x
        acc = 0.0
        term = x / 6.0  # x^(2n-1) / (2n+1)!, n = 1
        for n in range(1, 9):
            acc += term
            term = -term * x2 / ((2 * n + 2) * (2 * n + 3))
        return acc
    return (x - math.sin(x)) / (x * x)


def psi_edges(edges, amps, tau_s: float) -> list[float]:
    """``psi`` at every segment boundary, measured from ``tau_s``."""
    n = len(amps)
    ks = n - 1
    for k in range(n):
        if tau_s < edges[k + 1]:
            ks = k
            break
    out = [0.0] * (n + 1)
    out[ks] = -2.0 * amps[ks] * (tau_s - edges[ks])
    for k in range(ks - 1, -1, -1):
        out[k] = out[k + 1] - 2.0 * amps[k] * (edges[k + 1] - edges[k])
    out[ks + 1] = 2.0 * amps[ks] * (edges[ks + 1] - tau_s)
    for k in range(ks + 1, n):
        out[k + 1] = out[k] + 2.0 * amps[k] * (edges[k + 1] - edges[k])
    return out


def eta_coefficients(edges, amps, tau_s: float) -> tuple[float, float, float, float, float]:
    """All five coefficients ``(eta11, eta12, eta21, eta22, eta23)``."""
    n = len(amps)
    tau_p = edges[n]
    ps = psi_edges(edges, amps, tau_s)
    er = ei = 0.0  # sum_k E_k
    fr = fi = 0.0  # sum_k F_k
    cr = ci = 0.0  # running prefix of E_k
    cross = 0.0
    diag = 0.0
    for k in range(n):
        s = edges[k]
        L = edges[k + 1] - s
        b = 2.0 * amps[k]
        x = b * L
        p = ps[k]
        cp = math.cos(p)
        sp = math.sin(p)
        # E_k
        h = 0.5 * x
        m = L * _sinc(h)
        ch = math.cos(h)
        sh = math.sin(h)
        ekr = m * (cp * ch - sp * sh)
        eki = m * (cp * sh + sp * ch)
        # F_k = e^{ip} L^2 g(x) + (s - tau_s) E_k
        gr, gi = _g(x)
        L2 = L * L
        off = s - tau_s
        fr += L2 * (cp * gr - sp * gi) + off * ekr
        fi += L2 * (cp * gi + sp * gr) + off * eki
        # Im(E_k conj(C_{k-1}))
        cross += eki * cr - ekr * ci
        cr += ekr
        ci += eki
        diag += L2 * _q(x)
    er, ei = cr, ci
    p0 = ps[0]
    pT = ps[n]
    theta = pT - p0
    a = tau_p - tau_s
    s0, c0 = math.sin(p0), math.cos(p0)
    sT, cT = math.sin(pT), math.cos(pT)
    eta11 = a * sT + tau_s * s0 - ei
    eta12 = a * cT + tau_s * c0 - er
    eta21 = 0.5 * a * a * sT - 0.5 * tau_s * tau_s * s0 - fi
    eta22 = -0.5 * a * a * cT + 0.5 * tau_s * tau_s * c0 + fr
    # Im(e^{-i psi_0} E) and Im(e^{i psi_T} conj E)
    im_shift0 = c0 * ei - s0 * er
    im_shiftT = sT * er - cT * ei
    eta23 = a * tau_s * math.sin(theta) - tau_s * im_shift0 - a * im_shiftT + cross + diag
    return eta11, eta12, eta21, eta22, eta23
