# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled closed-form kernel for the correction coefficients.

Same arithmetic as ``shapedpulse._eta_py``; see that module for the formulas.
"""
from libc.math cimport sin, cos, fabs
from libc.stdlib cimport malloc, free

cdef double SMALL = 0.5


cdef inline double _sinc(double y) noexcept nogil:
    if fabs(y) < 1e-4:
        return 1.0 - y * y / 6.0
    return sin(y) / y


cdef inline void _g(double x, double* re, double* im) noexcept nogil:
    cdef double c, s, x2, term, termi
    cdef int n
    if fabs(x) < SMALL:
        re[0] = 0.0
        im[0] = 0.0
        term = 1.0
        for n in range(8):
            re[0] += term / (2 * n + 2)
            termi = term * x / (2 * n + 1)
            im[0] += termi / (2 * n + 3)
            term = -termi * x / (2 * n + 2)
        return
    c = cos(x)
    s = sin(x)
    x2 = x * x
    re[0] = (c + x * s - 1.0) / x2
    im[0] = (s - x * c) / x2


cdef inline double _q(double x) noexcept nogil:
    cdef double x2, acc, term
    cdef int n
    if fabs(x) < SMALL:
        x2 = x * x
        acc = 0.0
        term = x / 6.0
        for n in range(1, 9):
            acc += term
            term = -term * x2 / ((2 * n + 2) * (2 * n + 3))
        return acc
    return (x - sin(x)) / (x * x)


cdef void _eta(const double[::1] edges, const double[::1] amps, double tau_s,
               double* ps, double* out) noexcept nogil:
    cdef Py_ssize_t n = amps.shape[0]
    cdef Py_ssize_t k, ks = n - 1
    cdef double tau_p = edges[n]
    cdef double p, s, L, L2, b, x, h, m, ch, sh, cp, sp, ekr, eki, gr, gi, off
    cdef double fr = 0.0, fi = 0.0, cr = 0.0, ci = 0.0, cross = 0.0, diag = 0.0
    cdef double p0, pT, a, s0, c0, sT, cT

    for k in range(n):
        if tau_s < edges[k + 1]:
            ks = k
            break
    ps[ks] = -2.0 * amps[ks] * (tau_s - edges[ks])
    for k in range(ks - 1, -1, -1):
        ps[k] = ps[k + 1] - 2.0 * amps[k] * (edges[k + 1] - edges[k])
    ps[ks + 1] = 2.0 * amps[ks] * (edges[ks + 1] - tau_s)
    for k in range(ks + 1, n):
        ps[k + 1] = ps[k] + 2.0 * amps[k] * (edges[k + 1] - edges[k])

    for k in range(n):
        s = edges[k]
        L = edges[k + 1] - s
        b = 2.0 * amps[k]
        x = b * L
        p = ps[k]
        cp = cos(p)
        sp = sin(p)
        h = 0.5 * x
        m = L * _sinc(h)
        ch = cos(h)
        sh = sin(h)
        ekr = m * (cp * ch - sp * sh)
        eki = m * (cp * sh + sp * ch)
        _g(x, &gr, &gi)
        L2 = L * L
        off = s - tau_s
        fr += L2 * (cp * gr - sp * gi) + off * ekr
        fi += L2 * (cp * gi + sp * gr) + off * eki
        cross += eki * cr - ekr * ci
        cr += ekr
        ci += eki
        diag += L2 * _q(x)
    p0 = ps[0]
    pT = ps[n]

    a = tau_p - tau_s
    s0 = sin(p0)
    c0 = cos(p0)
    sT = sin(pT)
    cT = cos(pT)
    out[0] = a * sT + tau_s * s0 - ci
    out[1] = a * cT + tau_s * c0 - cr
    out[2] = 0.5 * a * a * sT - 0.5 * tau_s * tau_s * s0 - fi
    out[3] = -0.5 * a * a * cT + 0.5 * tau_s * tau_s * c0 + fr
    out[4] = (a * tau_s * sin(pT - p0) - tau_s * (c0 * ci - s0 * cr)
              - a * (sT * cr - cT * ci) + cross + diag)


def eta_coefficients(const double[::1] edges, const double[::1] amps, double tau_s):
    """All five coefficients ``(eta11, eta12, eta21, eta22, eta23)``."""
    cdef double out[5]
    cdef double* ps
    cdef Py_ssize_t n = amps.shape[0]
    if n < 1 or edges.shape[0] != n + 1:
        raise ValueError("edges must have one more entry than amps")
    ps = <double*> malloc((n + 1) * sizeof(double))
    if ps == NULL:
        raise MemoryError()
    with nogil:
        _eta(edges, amps, tau_s, ps, out)
    free(ps)
    return out[0], out[1], out[2], out[3], out[4]
