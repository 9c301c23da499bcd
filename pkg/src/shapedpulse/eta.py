"""First- and second-order correction coefficients of a finite pulse.

The coefficients multiply the operator structures of the correction unitary
``U_F = exp(-i(eta1 + eta2 + ...))`` for a qubit coupled to a bath through
``lambda A sigma_z``::

    eta1 = (eta11 sigma_x + eta12 sigma_z) lambda A
    eta2 = i (eta21 sigma_x + eta22 sigma_z) lambda [H_b, A] + eta23 sigma_y lambda^2 A^2

``eta1j`` carry one power of ``tau_p`` and ``eta2j`` two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ._kernels import eta_kernel
from .pulse import PulseShape, psi

__all__ = [
    "EtaFirst",
    "EtaSecond",
    "QuadratureError",
    "eta_all",
    "eta_first",
    "eta_second",
    "predicted_deviation",
    "eta_quadrature_oracle",
]


@dataclass(frozen=True)
class EtaFirst:
    eta11: float
    eta12: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.eta11, self.eta12)


@dataclass(frozen=True)
class EtaSecond:
    eta21: float
    eta22: float
    eta23: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.eta21, self.eta22, self.eta23)


class QuadratureError(RuntimeError):
    pass


def eta_all(pulse: PulseShape) -> tuple[float, float, float, float, float]:
    """``(eta11, eta12, eta21, eta22, eta23)`` from the closed-form kernel."""
    return eta_kernel(pulse.edges, np.asarray(pulse.amplitudes, dtype=float), pulse.tau_s)


def eta_first(pulse: PulseShape) -> EtaFirst:
    e = eta_all(pulse)
    return EtaFirst(e[0], e[1])


def eta_second(pulse: PulseShape) -> EtaSecond:
    e = eta_all(pulse)
    return EtaSecond(e[2], e[3], e[4])


def predicted_deviation(eta2: EtaSecond, J: float, alpha: float) -> float:
    """Leading-order deviation for the spin-chain bath.

    ``d = J^2 sqrt(16 alpha^2 (eta21^2 + eta22^2) + eta23^2)`` with ``J`` in
    units of ``1/tau_p``.
    """
    if J < 0 or alpha < 0:
        raise ValueError("J and alpha must be non-negative")
    return J * J * math.sqrt(
        16.0 * alpha * alpha * (eta2.eta21**2 + eta2.eta22**2) + eta2.eta23**2
    )


def _quad(f, a: float, b: float, breaks, tol: float) -> float:
    pts = [p for p in breaks if a < p < b]
    val, err, *info = integrate.quad(
        f, a, b, points=pts or None, epsabs=tol, epsrel=0.0, limit=500, full_output=1
    )
    if len(info) >= 2 and err > 10 * tol:
        raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {info[1]}")
    return val


def eta_quadrature_oracle(pulse: PulseShape, tol: float = 1e-11) -> tuple[EtaFirst, EtaSecond]:
    """Evaluate the defining integrals by adaptive quadrature.

    Independent of the closed-form kernel: ``psi`` is sampled pointwise and
    every integral is split at the switches and at ``tau_s`` so each piece
    has a smooth integrand. Meant for testing.
    """
    tp, ts = pulse.tau_p, pulse.tau_s
    breaks = sorted({*pulse.switches, ts})
    p0 = psi(pulse, 0.0)
    pT = psi(pulse, tp)
    theta = pT - p0
    a = tp - ts

    def qf(f):
        return _quad(f, 0.0, tp, breaks, tol)

    i_sin = qf(lambda t: math.sin(psi(pulse, t)))
    i_cos = qf(lambda t: math.cos(psi(pulse, t)))
    i_tsin = qf(lambda t: (t - ts) * math.sin(psi(pulse, t)))
    i_tcos = qf(lambda t: (t - ts) * math.cos(psi(pulse, t)))
    i_0 = qf(lambda t: math.sin(psi(pulse, t) - p0))
    i_T = qf(lambda t: math.sin(pT - psi(pulse, t)))

    # 1/2 iint sin(psi1 - psi2) sgn(t1 - t2) = int_{t2 < t1} sin(psi1 - psi2)
    edges = [0.0, *breaks, tp]
    inner_tol = tol / (4 * len(edges))

    def inner(t1: float) -> float:
        p1 = psi(pulse, t1)
        return _quad(lambda t2: math.sin(p1 - psi(pulse, t2)), 0.0, t1, breaks, inner_tol)

    i_ord = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        i_ord += _quad(inner, lo, hi, (), tol / len(edges))

    e11 = a * math.sin(pT) + ts * math.sin(p0) - i_sin
    e12 = a * math.cos(pT) + ts * math.cos(p0) - i_cos
    e21 = 0.5 * a * a * math.sin(pT) - 0.5 * ts * ts * math.sin(p0) - i_tsin
    e22 = -0.5 * a * a * math.cos(pT) + 0.5 * ts * ts * math.cos(p0) + i_tcos
    e23 = a * ts * math.sin(theta) - ts * i_0 - a * i_T + i_ord
    return EtaFirst(e11, e12), EtaSecond(e21, e22, e23)
