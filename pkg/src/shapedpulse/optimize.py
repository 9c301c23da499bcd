"""Find pulse parameters that cancel chosen correction coefficients.

A :class:`PulseTemplate` fixes the segment count, symmetry, sign pattern and
target rotation angle; its free parameters are mapped to a pulse and the
residual vector ``[area - theta, eta_selected...]`` is driven to zero by a
damped Newton iteration launched from a deterministic multistart grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ._kernels import eta_kernel
from .pulse import PulseShape, make_pulse, max_amplitude

__all__ = [
    "ETA_NAMES",
    "PulseTemplate",
    "SolveOptions",
    "SolveReport",
    "NoConvergence",
    "BoundsError",
    "residuals",
    "solve",
    "solve_all",
    "verify_no_pi_second_order",
]

log = logging.getLogger(__name__)

ETA_NAMES = ("eta11", "eta12", "eta21", "eta22", "eta23")
# vanish identically for mirror-symmetric pulses with tau_s = tau_p / 2
_SYMMETRIC_ZERO = frozenset({"eta11", "eta22"})


class BoundsError(ValueError):
    """Parameters do not describe a valid pulse for the template."""


class NoConvergence(RuntimeError):
    def __init__(self, msg: str, best: "SolveReport | None"):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class PulseTemplate:
    """Family of piecewise-constant pulses with a few free parameters.

    Parameter vector layout (``tau_p = 1``):

    * shared magnitude: ``[A, t_1..t_r, (tau_s)]`` with amplitudes ``signs * A``
    * ``free_amplitudes``: ``[a_0..a_q, t_1..t_r, (tau_s)]``

    For symmetric templates only the switches left of ``tau_p / 2`` (and the
    amplitudes up to the central segment) are free; the rest are mirrored and
    ``tau_s = tau_p / 2``.
    """

    n_segments: int
    theta: float
    targets: tuple[str, ...]
    symmetric: bool = True
    signs: tuple[int, ...] | None = None
    free_amplitudes: bool = False
    tau_p: float = 1.0

    def __post_init__(self):
        if self.n_segments < 1:
            raise ValueError("need at least one segment")
        if self.symmetric and self.n_segments % 2 == 0:
            raise ValueError("symmetric templates need an odd segment count")
        bad = set(self.targets) - set(ETA_NAMES)
        if bad:
            raise ValueError(f"unknown targets {sorted(bad)}")
        if self.signs is None:
            object.__setattr__(
                self, "signs", tuple(1 if k % 2 == 0 else -1 for k in range(self.n_segments))
            )
        if len(self.signs) != self.n_segments:
            raise ValueError("sign pattern length must equal the segment count")

    @property
    def active_targets(self) -> tuple[str, ...]:
        """Targets that are not zero automatically by symmetry."""
        if self.symmetric:
            return tuple(t for t in self.targets if t not in _SYMMETRIC_ZERO)
        return tuple(self.targets)

    @property
    def n_switch_params(self) -> int:
        m = self.n_segments - 1
        return m // 2 if self.symmetric else m

    @property
    def n_amp_params(self) -> int:
        if not self.free_amplitudes:
            return 1
        return (self.n_segments + 1) // 2 if self.symmetric else self.n_segments

    @property
    def n_params(self) -> int:
        return self.n_amp_params + self.n_switch_params + (0 if self.symmetric else 1)

    @property
    def n_constraints(self) -> int:
        return 1 + len(self.active_targets)

    @property
    def square(self) -> bool:
        return self.n_params == self.n_constraints

    def unpack(self, params: Sequence[float]) -> tuple[float, np.ndarray, np.ndarray]:
        """Return ``(tau_s, edges, amplitudes)``; raise :class:`BoundsError`."""
        x = np.asarray(params, dtype=float)
        if x.shape != (self.n_params,):
            raise BoundsError(f"expected {self.n_params} parameters, got {x.shape}")
        na, ns = self.n_amp_params, self.n_switch_params
        tp = self.tau_p
        if not np.all(np.isfinite(x)):
            raise BoundsError("non-finite parameter")
        sw = x[na : na + ns]
        if self.symmetric:
            tau_s = 0.5 * tp
            if ns and (sw[0] <= 0.0 or sw[-1] >= tau_s or np.any(np.diff(sw) <= 0.0)):
                raise BoundsError("switches must increase inside (0, tau_p/2)")
            switches = np.concatenate([sw, tp - sw[::-1]])
        else:
            tau_s = x[-1]
            if not 0.0 < tau_s < tp:
                raise BoundsError("tau_s outside (0, tau_p)")
            if ns and (sw[0] <= 0.0 or sw[-1] >= tp or np.any(np.diff(sw) <= 0.0)):
                raise BoundsError("switches must increase inside (0, tau_p)")
            switches = sw
        if self.free_amplitudes:
            a = x[:na]
            amps = np.concatenate([a, a[: self.n_segments - na][::-1]]) if self.symmetric else a
        else:
            if x[0] <= 0.0:
                raise BoundsError("magnitude must be positive")
            amps = x[0] * np.asarray(self.signs, dtype=float)
        edges = np.concatenate([[0.0], switches, [tp]])
        return float(tau_s), edges, amps

    def pulse(self, params: Sequence[float], name: str | None = None) -> PulseShape:
        tau_s, edges, amps = self.unpack(params)
        return make_pulse(self.tau_p, tau_s, edges[1:-1], amps, name)


@dataclass(frozen=True)
class SolveOptions:
    n_magnitudes: int = 8
    starts_per_magnitude: int = 8
    seed: int = 0x5EED
    tol: float = 1e-12
    max_iter: int = 100
    step: float = 1e-7
    max_halvings: int = 40
    distinct: float = 1e-4

    @property
    def n_starts(self) -> int:
        return self.n_magnitudes * self.starts_per_magnitude


@dataclass(frozen=True)
class SolveReport:
    pulse: PulseShape | None
    params: np.ndarray
    residual: np.ndarray
    iterations: int
    start_index: int
    success: bool
    message: str = ""
    template: PulseTemplate | None = field(default=None, repr=False)

    @property
    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    def describe(self) -> str:
        lines = [
            f"status      {'success' if self.success else 'failed'}",
            f"start       {self.start_index}",
            f"iterations  {self.iterations}",
            f"residual    {self.residual_norm:.3e}",
            "params      " + " ".join(repr(float(v)) for v in self.params),
        ]
        if self.message:
            lines.append(f"message     {self.message}")
        return "\n".join(lines)


def residuals(template: PulseTemplate, params: Sequence[float]) -> np.ndarray:
    """``[area - theta, selected eta...]`` for the pulse built from ``params``."""
    tau_s, edges, amps = template.unpack(params)
    eta = eta_kernel(edges, amps, tau_s)
    area = 2.0 * float(np.dot(amps, np.diff(edges)))
    out = [area - template.theta]
    out.extend(eta[ETA_NAMES.index(t)] for t in template.active_targets)
    return np.array(out)


def _safe_res(template, x):
    try:
        return residuals(template, x)
    except BoundsError:
        return None


def _jacobian(template, x, r0, h):
    n = len(x)
    jac = np.empty((len(r0), n))
    for i in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        rp = _safe_res(template, xp)
        rm = _safe_res(template, xm)
        if rp is not None and rm is not None:
            jac[:, i] = (rp - rm) / (2 * h)
        elif rp is not None:
            jac[:, i] = (rp - r0) / h
        elif rm is not None:
            jac[:, i] = (r0 - rm) / h
        else:
            raise BoundsError("cannot difference parameter %d" % i)
    return jac


def _newton(template, x0, opts: SolveOptions, rng: np.random.Generator, index: int) -> SolveReport:
    x = np.array(x0, dtype=float)
    r = _safe_res(template, x)
    if r is None:
        return SolveReport(None, x, np.array([np.inf]), 0, index, False, "start out of bounds", template)
    norm = float(np.linalg.norm(r))
    retried = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        if np.max(np.abs(r)) <= opts.tol:
            it -= 1
            break
        try:
            jac = _jacobian(template, x, r, opts.step)
            if template.square:
                if not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > 1e14:
                    raise np.linalg.LinAlgError("singular Jacobian")
                dx = np.linalg.solve(jac, -r)
            else:
                dx = np.linalg.lstsq(jac, -r, rcond=None)[0]
        except (np.linalg.LinAlgError, BoundsError) as exc:
            if retried:
                return SolveReport(None, x, r, it, index, False, str(exc), template)
            retried = True
            xp = x + 1e-6 * rng.standard_normal(len(x))
            rp = _safe_res(template, xp)
            if rp is not None:
                x, r, norm = xp, rp, float(np.linalg.norm(rp))
            continue
        lam = 1.0
        for _ in range(opts.max_halvings + 1):
            xn = x + lam * dx
            rn = _safe_res(template, xn)
            if rn is not None and np.linalg.norm(rn) < norm:
                break
            lam *= 0.5
        else:
            ok = np.max(np.abs(r)) <= opts.tol
            return SolveReport(None, x, r, it, index, bool(ok), "line search stalled", template)
        x, r, norm = xn, rn, float(np.linalg.norm(rn))
    ok = bool(np.max(np.abs(r)) <= opts.tol)
    pulse = template.pulse(x) if ok else None
    return SolveReport(pulse, x, r, it, index, ok, "" if ok else "iteration cap", template)


def starts(template: PulseTemplate, opts: SolveOptions) -> np.ndarray:
    """Deterministic multistart grid, one row per start."""
    rng = np.random.default_rng(opts.seed)
    scale = abs(template.theta) if template.theta != 0 else math.pi / 2
    mags = np.geomspace(scale / 2, 4 * scale, opts.n_magnitudes)
    half = 0.5 * template.tau_p if template.symmetric else template.tau_p
    rows = []
    for mag in mags:
        for _ in range(opts.starts_per_magnitude):
            if template.free_amplitudes:
                signs = np.asarray(template.signs[: template.n_amp_params], dtype=float)
                amp = mag * signs * rng.uniform(0.5, 1.5, template.n_amp_params)
            else:
                amp = np.array([mag])
            sw = np.sort(rng.uniform(0.0, half, template.n_switch_params))
            row = [amp, sw]
            if not template.symmetric:
                row.append([rng.uniform(0.05, 0.95) * template.tau_p])
            rows.append(np.concatenate(row))
    return np.array(rows).reshape(len(rows), template.n_params)


def solve_all(
    template: PulseTemplate, options: SolveOptions | None = None, require_square: bool = True
) -> tuple[list[SolveReport], SolveReport]:
    """Run every multistart; return distinct solutions and the best attempt.

    Solutions are de-duplicated (parameter distance above ``options.distinct``)
    and ordered by maximum amplitude, smallest first.
    """
    opts = options or SolveOptions()
    if require_square and not template.square:
        raise ValueError(
            f"template has {template.n_params} parameters but {template.n_constraints} constraints"
        )
    rng = np.random.default_rng(opts.seed + 1)
    found: list[SolveReport] = []
    best: SolveReport | None = None
    for i, x0 in enumerate(starts(template, opts)):
        rep = _newton(template, x0, opts, rng, i)
        if best is None or rep.residual_norm < best.residual_norm:
            best = rep
        if rep.success and all(np.linalg.norm(rep.params - s.params) > opts.distinct for s in found):
            found.append(rep)
    found.sort(key=lambda s: (max_amplitude(s.pulse), s.start_index))
    return found, best


def solve(template: PulseTemplate, options: SolveOptions | None = None) -> SolveReport:
    """Smallest-amplitude solution of a square template.

    Raises
    ------
    NoConvergence
        If no start reaches the tolerance; ``exc.best`` holds the attempt
        with the smallest residual.
    """
    found, best = solve_all(template, options)
    if not found:
        raise NoConvergence(
            f"no start converged; best residual {best.residual_norm:.3e}", best
        )
    return found[0]


@dataclass(frozen=True)
class SearchReport:
    theta: float
    targets: tuple[str, ...]
    n_starts: int
    min_residual: float
    best: SolveReport | None
    per_template: tuple[tuple[str, int, float], ...]

    def describe(self) -> str:
        lines = [
            f"theta        {self.theta!r}",
            f"targets      {','.join(self.targets)}",
            f"starts       {self.n_starts}",
            f"min residual {self.min_residual:.3e}",
        ]
        for label, n, res in self.per_template:
            lines.append(f"  {label:<24s} starts={n:<5d} min residual={res:.3e}")
        return "\n".join(lines)


def verify_no_pi_second_order(
    theta: float = math.pi,
    targets: Sequence[str] = ETA_NAMES,
    segments: Sequence[int] = (2, 3, 4, 5, 6),
    n_starts: int = 1000,
    options: SolveOptions | None = None,
) -> SearchReport:
    """Search for pulses of angle ``theta`` that cancel all ``targets``.

    Every segment count is tried with alternating signs of a common
    magnitude, starting with either sign, asymmetric and (odd counts)
    symmetric. Non-square systems are minimized by Gauss-Newton. The zero
    pulse is always evaluated as well. The smallest residual max-norm found
    is reported as is.

    Per-segment magnitudes are not freed: a vanishing segment shortens the
    pulse, and every coefficient shrinks with the effective duration.
    """
    base = options or SolveOptions()
    templates = []
    for n in segments:
        for first in (1, -1):
            signs = tuple(first if k % 2 == 0 else -first for k in range(n))
            tag = "+" if first > 0 else "-"
            templates.append(
                (f"asym n={n} {tag}", PulseTemplate(n, theta, tuple(targets), symmetric=False, signs=signs))
            )
            if n % 2 == 1:
                templates.append(
                    (f"sym n={n} {tag}", PulseTemplate(n, theta, tuple(targets), symmetric=True, signs=signs))
                )
    per = max(1, math.ceil(n_starts / max(1, len(templates))))
    opts = replace(base, starts_per_magnitude=max(1, math.ceil(per / base.n_magnitudes)))

    zero = PulseTemplate(1, theta, tuple(targets), symmetric=True, free_amplitudes=True)
    r0 = residuals(zero, [0.0])
    best = SolveReport(
        zero.pulse([0.0]), np.array([0.0]), r0, 0, -1, bool(np.max(np.abs(r0)) <= base.tol),
        "zero pulse", zero,
    )
    total = 1
    rows = [("zero pulse", 1, best.residual_norm)]
    for label, tpl in templates:
        _, b = solve_all(tpl, opts, require_square=False)
        total += opts.n_starts
        rows.append((label, opts.n_starts, b.residual_norm))
        log.info("%s: min residual %.3e", label, b.residual_norm)
        if b.residual_norm < best.residual_norm:
            best = b
    return SearchReport(theta, tuple(targets), total, best.residual_norm, best, tuple(rows))
