"""Deviation sweeps over the coupling and power-law analysis of the curves."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .eta import eta_second, predicted_deviation
from .pulse import PulseShape, max_amplitude
from .spinsim import (
    SimulationError,
    SpinChainModel,
    _check_unitary,
    bath_sectors,
    build_hamiltonian,
    deviation,
    expm_hermitian,
    qubit_y,
)

__all__ = [
    "CSV_HEADER",
    "DeviationCurve",
    "FitError",
    "FitResult",
    "log_grid",
    "sweep",
    "local_slope",
    "slope_windows",
    "fit_prefactor",
    "prefactor_vs_alpha",
    "crossover",
    "write_csv",
    "read_csv",
]

CSV_HEADER = ("pulse", "N", "alpha", "J", "J_over_Bm", "d")


class FitError(ValueError):
    pass


@dataclass
class DeviationCurve:
    pulse: str
    N: int
    alpha: float
    B_m: float
    J: np.ndarray
    d: np.ndarray
    failed: list[tuple[float, str]] = field(default_factory=list)

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        if self.J.shape != self.d.shape:
            raise ValueError("J and d must have the same length")
        if np.any(self.J <= 0) or np.any(np.diff(self.J) <= 0):
            raise ValueError("J must be positive and strictly increasing")
        if np.any(self.d < 0):
            raise ValueError("deviations must be non-negative")

    @property
    def x(self) -> np.ndarray:
        """``J / B_m``."""
        return self.J / self.B_m

    def __len__(self) -> int:
        return len(self.J)

    def window(self, lo: int, hi: int) -> "DeviationCurve":
        return DeviationCurve(self.pulse, self.N, self.alpha, self.B_m, self.J[lo:hi], self.d[lo:hi])


@dataclass(frozen=True)
class FitResult:
    exponent: float
    prefactor: float
    window: tuple[float, float]
    indices: tuple[int, int]
    residual: float
    error: float
    alternatives: dict[str, float] = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return self.indices[1] - self.indices[0]


def log_grid(lo: float, hi: float, points: int | None = None, per_decade: int = 20) -> np.ndarray:
    """Logarithmically spaced grid including both ends."""
    if not 0 < lo < hi:
        raise ValueError("grid needs 0 < lo < hi")
    if points is None:
        points = int(round(per_decade * math.log10(hi / lo))) + 1
    if points < 2:
        raise ValueError("grid needs at least two points")
    return np.geomspace(lo, hi, points)


class _Chain:
    """Coupling-independent pieces of the propagators for one (N, alpha).

    Propagation runs block by block over the bath-magnetization sectors;
    the deviation of a block-diagonal difference is the largest block value.
    """

    def __init__(self, N: int, alpha: float):
        H1 = build_hamiltonian(SpinChainModel(N, 1.0, alpha))
        Y = qubit_y(N)
        self.blocks = []
        for idx in bath_sectors(N):
            h = H1[np.ix_(idx, idx)]
            y = Y[np.ix_(idx, idx)]
            w, V = np.linalg.eigh(h)
            self.blocks.append((h, y, w, V))

    def deviation(self, J: float, pulse: PulseShape, expm: str, svd: str) -> float:
        theta = 2.0 * float(np.dot(pulse.amplitudes, pulse.durations))
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        worst = 0.0
        for h, y, w, V in self.blocks:
            n = h.shape[0]
            if expm == "eigh":
                Vh = V.conj().T
                after = (V * np.exp(-1j * J * w * (pulse.tau_p - pulse.tau_s))) @ Vh
                before = (V * np.exp(-1j * J * w * pulse.tau_s)) @ Vh
            else:
                after = expm_hermitian(J * h, pulse.tau_p - pulse.tau_s, expm)
                before = expm_hermitian(J * h, pulse.tau_s, expm)
            Ui = _check_unitary(after @ (c * np.eye(n) - 1j * s * y) @ before, "ideal propagator")
            Ur = np.eye(n, dtype=complex)
            cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
            for a, dt in zip(pulse.amplitudes, pulse.durations):
                if expm == "eigh":
                    if a not in cache:
                        cache[a] = np.linalg.eigh(J * h + a * y)
                    wa, Va = cache[a]
                    step = (Va * np.exp(-1j * wa * dt)) @ Va.conj().T
                else:
                    step = expm_hermitian(J * h + a * y, dt, expm)
                Ur = step @ Ur
            Ur = _check_unitary(Ur, "real propagator")
            worst = max(worst, deviation((Ui, Ur), svd))
        return worst


def sweep(
    pulse: PulseShape,
    N: int,
    alpha: float,
    J: Sequence[float],
    expm: str = "eigh",
    svd: str = "power",
    threads: int | None = None,
) -> DeviationCurve:
    """Deviation ``d`` at every coupling in ``J`` (units of ``1/tau_p``).

    Points where the simulation fails are recorded in ``curve.failed`` and
    left out of the samples.
    """
    Js = np.asarray(J, dtype=float)
    if Js.size == 0 or np.any(Js <= 0) or np.any(np.diff(Js) <= 0):
        raise ValueError("J grid must be positive and strictly increasing")
    if expm not in ("eigh", "pade"):
        raise ValueError(f"unknown expm method {expm!r}")
    if svd not in ("power", "eigh"):
        raise ValueError(f"unknown deviation method {svd!r}")
    SpinChainModel(N, float(Js[-1]), alpha)  # validates N and alpha
    chain = _Chain(N, alpha)

    def one(j: float):
        try:
            return chain.deviation(j, pulse, expm, svd), None
        except (SimulationError, np.linalg.LinAlgError) as exc:
            return None, str(exc)

    workers = threads or os.cpu_count() or 1
    if workers > 1 and len(Js) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, Js))
    else:
        results = [one(j) for j in Js]
    keep = [i for i, (d, _) in enumerate(results) if d is not None]
    failed = [(float(Js[i]), msg) for i, (d, msg) in enumerate(results) if d is None]
    return DeviationCurve(
        pulse.name or "custom",
        N,
        float(alpha),
        max_amplitude(pulse),
        Js[keep],
        np.array([results[i][0] for i in keep]),
        failed,
    )


def local_slope(curve: DeviationCurve) -> tuple[np.ndarray, np.ndarray]:
    """``d log d / d log J`` by centered differences (one-sided at the ends)."""
    if len(curve) < 3:
        raise ValueError("need at least three samples")
    if np.any(curve.d <= 0):
        raise ValueError("local slope needs strictly positive deviations")
    return curve.J.copy(), np.gradient(np.log(curve.d), np.log(curve.J))


def slope_windows(
    curve: DeviationCurve, exponent: float, tol: float = 0.15, min_points: int = 4
) -> list[tuple[int, int]]:
    """Maximal index runs ``[lo, hi)`` where ``|slope - exponent| <= tol``."""
    _, s = local_slope(curve)
    ok = np.abs(s - exponent) <= tol
    runs = []
    i = 0
    while i < len(ok):
        if ok[i]:
            j = i
            while j < len(ok) and ok[j]:
                j += 1
            if j - i >= min_points:
                runs.append((i, j))
            i = j
        else:
            i += 1
    return runs


def _fit_one(J, d, p):
    u = J**p / d
    a = float(np.sum(u) / np.sum(u * u))
    return a, float(np.sqrt(np.mean((1.0 - a * u) ** 2)))


def _fit_two(J, d, p_main, p_other):
    A = np.column_stack([J**p_main / d, J**p_other / d])
    coef, *_ = np.linalg.lstsq(A, np.ones_like(J), rcond=None)
    return float(coef[0])


def fit_prefactor(
    curve: DeviationCurve,
    exponent: float = 2.0,
    tol: float = 0.15,
    min_points: int = 4,
) -> FitResult:
    """Fit ``d = a J**exponent`` inside the longest power-law window.

    The window is the longest run of points whose local slope is within
    ``tol`` of ``exponent`` (the lowest-J run wins ties). The fit minimizes
    relative residuals. ``error`` is half the spread of ``a`` across the
    models ``b J^(p-1) + a J^p`` and ``a J^p + b J^(p+1)`` and the main
    model refitted without the first or last window point.
    """
    runs = slope_windows(curve, exponent, tol, min_points)
    if not runs:
        raise FitError(
            f"no window of {min_points}+ points with slope {exponent} +- {tol} "
            f"for {curve.pulse} at alpha={curve.alpha}"
        )
    lo, hi = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
    J = curve.J[lo:hi]
    d = curve.d[lo:hi]
    a, res = _fit_one(J, d, exponent)
    alts = {
        "lower": _fit_two(J, d, exponent, exponent - 1.0),
        "upper": _fit_two(J, d, exponent, exponent + 1.0),
        "drop_first": _fit_one(J[1:], d[1:], exponent)[0],
        "drop_last": _fit_one(J[:-1], d[:-1], exponent)[0],
    }
    vals = [a, *alts.values()]
    err = 0.5 * (max(vals) - min(vals))
    return FitResult(exponent, a, (float(J[0]), float(J[-1])), (lo, hi), res, err, alts)


@dataclass(frozen=True)
class PrefactorRow:
    alpha: float
    fitted: float | None
    error: float | None
    predicted: float
    message: str = ""

    @property
    def relative_deviation(self) -> float | None:
        if self.fitted is None or self.predicted == 0:
            return None
        return abs(self.fitted - self.predicted) / self.predicted


def prefactor_vs_alpha(
    pulse: PulseShape,
    N: int,
    alphas: Iterable[float],
    x_grid: Sequence[float] | None = None,
    **sweep_kw,
) -> list[PrefactorRow]:
    """Fitted and predicted quadratic prefactor for each ``alpha``.

    ``x_grid`` is on the ``J / B_m`` axis; it defaults to 20 points per
    decade over ``[1e-4, 1e-1]``.
    """
    x = np.asarray(x_grid if x_grid is not None else log_grid(1e-4, 1e-1), dtype=float)
    eta2 = eta_second(pulse)
    rows = []
    for al in alphas:
        pred = predicted_deviation(eta2, 1.0, al)
        curve = sweep(pulse, N, al, x * max_amplitude(pulse), **sweep_kw)
        try:
            fit = fit_prefactor(curve, 2.0)
        except (FitError, ValueError) as exc:
            rows.append(PrefactorRow(float(al), None, None, pred, str(exc)))
            continue
        rows.append(PrefactorRow(float(al), fit.prefactor, fit.error, pred))
    return rows


def crossover(a: DeviationCurve, b: DeviationCurve, axis: str = "J_over_Bm") -> float | None:
    """Smallest coupling where ``d_a - d_b`` changes sign, or None.

    Both curves must share the grid on ``axis`` (``"J"`` or ``"J_over_Bm"``).
    The zero of ``log d_a - log d_b`` is interpolated linearly in ``log x``.
    """
    xa = a.x if axis == "J_over_Bm" else a.J
    xb = b.x if axis == "J_over_Bm" else b.J
    if axis not in ("J", "J_over_Bm"):
        raise ValueError(f"unknown axis {axis!r}")
    if xa.shape != xb.shape or not np.allclose(xa, xb, rtol=1e-12, atol=0):
        raise ValueError("curves do not share a common grid")
    if np.any(a.d <= 0) or np.any(b.d <= 0):
        raise ValueError("crossover needs strictly positive deviations")
    f = np.log(a.d) - np.log(b.d)
    lx = np.log(xa)
    sgn = np.sign(f)
    last = None  # index of the last nonzero sign
    for i in range(len(f)):
        if sgn[i] == 0:
            continue
        if last is not None and sgn[i] != sgn[last]:
            if i - last > 1:
                return float(xa[last + 1])
            t = f[last] / (f[last] - f[i])
            return float(math.exp(lx[last] + t * (lx[i] - lx[last])))
        last = i
    return None


def write_csv(curves: Iterable[DeviationCurve], fh=None) -> str:
    """Write curves as CSV; returns the text when ``fh`` is None."""
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in curves:
        for J, x, d in zip(c.J, c.x, c.d):
            w.writerow([c.pulse, c.N, repr(float(c.alpha)), repr(float(J)), repr(float(x)), repr(float(d))])
    return buf.getvalue() if fh is None else ""


def read_csv(fh) -> list[DeviationCurve]:
    """Inverse of :func:`write_csv`; rows are grouped by (pulse, N, alpha)."""
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"expected header {','.join(CSV_HEADER)}")
    groups: dict[tuple, list] = {}
    for row in reader:
        key = (row["pulse"], int(row["N"]), float(row["alpha"]))
        groups.setdefault(key, []).append(
            (float(row["J"]), float(row["J_over_Bm"]), float(row["d"]))
        )
    out = []
    for (name, N, al), rows in groups.items():
        J, x, d = map(np.array, zip(*rows))
        out.append(DeviationCurve(name, N, al, float(J[0] / x[0]), J, d))
    return out
