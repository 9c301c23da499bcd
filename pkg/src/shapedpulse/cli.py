"""Command-line front end: presets, coefficients, solving, sweeps and fits.

Exit status is 0 on success, 2 for invalid arguments and 1 for numerical
failures (no convergence, no fit window, non-unitary propagators).
"""
from __future__ import annotations

import argparse
import logging
import math
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__  # noqa: F401
from .analysis import (
    FitError,
    crossover,
    fit_prefactor,
    log_grid,
    prefactor_vs_alpha,
    read_csv,
    sweep,
    write_csv,
)
from .eta import QuadratureError, eta_all, eta_quadrature_oracle, eta_second, predicted_deviation
from .optimize import (
    ETA_NAMES,
    NoConvergence,
    PulseTemplate,
    SolveOptions,
    solve_all,
    verify_no_pi_second_order,
)
from .pulse import (
    PRESET_NAMES,
    RECONSTRUCTED,
    PulseError,
    PulseShape,
    from_record,
    max_amplitude,
    preset,
    pulse_area,
    to_record,
)
from .spinsim import MAX_SITES, SimulationError, build_hamiltonian, SpinChainModel

log = logging.getLogger("shapedpulse")


class UsageError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


_ANGLE = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_angle(text: str) -> float:
    """Parse ``pi``, ``pi/2``, ``7pi/6``, ``-2*pi/3`` or a plain number."""
    m = _ANGLE.match(text.lower())
    if m:
        num = m.group(1)
        coef = float(num) if num not in ("", "+", "-") else (-1.0 if num == "-" else 1.0)
        den = float(m.group(2)) if m.group(2) else 1.0
        if den == 0:
            raise argparse.ArgumentTypeError(f"zero denominator in {text!r}")
        return coef * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an angle: {text!r}") from None


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _nonneg(text: str) -> float:
    v = float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text!r}")
    return v


def _sites(text: str) -> int:
    n = int(text)
    if not 2 <= n <= MAX_SITES:
        raise argparse.ArgumentTypeError(f"N must be in [2, {MAX_SITES}], got {n}")
    return n


def resolve_pulse(selector: str, tabulated: bool = False) -> PulseShape:
    """Preset name, or a file holding one serialized pulse record."""
    if selector in PRESET_NAMES:
        return preset(selector, tabulated=tabulated)
    path = Path(selector)
    if path.is_file():
        lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        if len(lines) != 1:
            raise UsageError(f"{path} must contain exactly one pulse record")
        return from_record(lines[0], name=path.stem)
    raise UsageError(f"unknown pulse {selector!r}: not a preset ({', '.join(PRESET_NAMES)}) or a file")


# ---------------------------------------------------------------------------
# regimes


@dataclass(frozen=True)
class Regime:
    name: str
    x_range: tuple[float, float]
    alpha_range: tuple[float, float] | None
    note: str


def regime_presets() -> dict[str, Regime]:
    """Typical ``J / B_m`` and ``alpha`` for some qubit platforms (no computation)."""
    return {
        "liquid-NMR": Regime("liquid-NMR", (1e-4, 1e-2), (1.0, 1.0), "alpha of order one"),
        "solid-NMR": Regime("solid-NMR", (0.04, 0.12), (0.3, 3.0), ""),
        "superconducting": Regime("superconducting", (0.3, 0.3), (0.04, 0.04), "charge qubit"),
        "trapped-ions": Regime("trapped-ions", (0.02, 0.2), None, "alpha unclear; near 1e6 if the optical modes set the bath scale"),
        "quantum-dot": Regime("quantum-dot", (0.004, 0.004), (20.0, 20.0), "electron spin; phonon-dephasing estimate"),
    }


# ---------------------------------------------------------------------------
# output helpers


def _open_out(path: str | None):
    if path in (None, "-"):
        return _Stdout()
    p = Path(path)
    if p.parent and not p.parent.exists():
        raise UsageError(f"output directory {p.parent} does not exist")
    return open(p, "w", newline="")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def _grid(args, pulse: PulseShape) -> np.ndarray:
    if not args.jmin < args.jmax:
        raise UsageError("--jmin must be below --jmax")
    if args.points is not None and args.points < 2:
        raise UsageError("--points must be at least 2")
    g = log_grid(args.jmin, args.jmax, args.points)
    return g * max_amplitude(pulse) if args.axis == "J_over_Bm" else g


def _report_failures(curve) -> None:
    for J, msg in curve.failed:
        print(f"warning: {curve.pulse} N={curve.N} alpha={curve.alpha} J={J!r} failed: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands


def cmd_presets(args) -> int:
    print(f"{'pulse':<9s} {'area/pi':>8s} {'B_m':>9s} {'tau_s':>9s}  switches")
    for name in PRESET_NAMES:
        p = preset(name, tabulated=args.tabulated)
        sw = " ".join(f"{t:.5f}" for t in p.switches) or "-"
        flag = "  (re-derived)" if name in RECONSTRUCTED and not args.tabulated else ""
        print(f"{name:<9s} {pulse_area(p) / math.pi:8.4f} {max_amplitude(p):9.5f} {p.tau_s:9.5f}  {sw}{flag}")
    if args.records:
        print()
        for name in PRESET_NAMES:
            print(f"{name}: {to_record(preset(name, tabulated=args.tabulated))}")
    return 0


def cmd_eta(args) -> int:
    p = resolve_pulse(args.pulse, args.tabulated)
    vals = eta_all(p)
    print("(" + ", ".join(f"{v:.5f}" if abs(v) >= 5e-6 else "0" for v in vals) + ")")
    if args.verbose:
        for k, v in zip(ETA_NAMES, vals):
            print(f"{k} = {v!r}")
    if args.oracle:
        e1, e2 = eta_quadrature_oracle(p)
        diff = np.max(np.abs(np.array(vals) - np.array(e1.as_tuple() + e2.as_tuple())))
        print(f"quadrature oracle max difference {diff:.2e}")
    if args.alpha is not None:
        for al in args.alpha:
            print(f"alpha={al:g}: predicted prefactor a = {predicted_deviation(eta_second(p), 1.0, al):.6g}")
    return 0


def _targets(text: str) -> tuple[str, ...]:
    names = tuple(t.strip() for t in text.split(",") if t.strip())
    bad = [t for t in names if t not in ETA_NAMES]
    if bad:
        raise UsageError(f"unknown targets {bad}; choose from {', '.join(ETA_NAMES)}")
    return names


def _signs(text: str | None, n: int) -> tuple[int, ...] | None:
    if text is None:
        return None
    if len(text) != n or set(text) - set("+-"):
        raise UsageError(f"--signs must be {n} characters of + and -")
    return tuple(1 if c == "+" else -1 for c in text)


def cmd_optimize(args) -> int:
    tpl = PulseTemplate(
        args.segments,
        args.theta,
        _targets(args.targets),
        symmetric=not args.asymmetric,
        signs=_signs(args.signs, args.segments),
        free_amplitudes=args.free_amplitudes,
    )
    if not tpl.square:
        raise UsageError(
            f"template has {tpl.n_params} free parameters for {tpl.n_constraints} equations; "
            "adjust --segments, --targets or --asymmetric"
        )
    opts = SolveOptions(n_magnitudes=args.magnitudes, starts_per_magnitude=args.starts, seed=args.seed)
    found, best = solve_all(tpl, opts)
    if not found:
        raise NumericalFailure(f"no start converged; best residual {best.residual_norm:.3e}")
    shown = found if args.all else found[:1]
    for i, rep in enumerate(shown):
        p = rep.pulse
        print(f"# solution {i}: B_m = {max_amplitude(p):.10g}, residual {rep.residual_norm:.2e}, "
              f"start {rep.start_index}, iterations {rep.iterations}")
        print("eta " + " ".join(f"{v:.6g}" for v in eta_all(p)))
        print(to_record(p))
    if args.out:
        with _open_out(args.out) as fh:
            fh.write(to_record(found[0].pulse) + "\n")
    return 0


def cmd_search(args) -> int:
    rep = verify_no_pi_second_order(
        theta=args.theta,
        targets=_targets(args.targets),
        segments=tuple(args.segment_counts),
        n_starts=args.starts,
    )
    print(rep.describe())
    return 0


def cmd_sweep(args) -> int:
    p = resolve_pulse(args.pulse)
    J = _grid(args, p)
    curves = []
    for al in args.alpha:
        c = sweep(p, args.N, al, J, expm=args.expm, svd=args.svd, threads=args.threads)
        _report_failures(c)
        if len(c) == 0:
            raise NumericalFailure(f"every point failed at alpha={al}")
        curves.append(c)
    with _open_out(args.out) as fh:
        write_csv(curves, fh)
    return 0


def _read_curves(path: str):
    if path == "-":
        return read_csv(sys.stdin)
    if not Path(path).is_file():
        raise UsageError(f"no such file {path}")
    with open(path, newline="") as fh:
        return read_csv(fh)


def cmd_fit(args) -> int:
    curves = _read_curves(args.input)
    if not curves:
        raise UsageError("no curves in input")
    print("pulse,N,alpha,exponent,prefactor,error,J_lo,J_hi,points,predicted")
    failed = 0
    for c in curves:
        try:
            f = fit_prefactor(c, args.exponent, args.tol, args.min_points)
        except FitError as exc:
            print(f"error: {exc}", file=sys.stderr)
            failed += 1
            continue
        pred = ""
        if c.pulse in PRESET_NAMES and args.exponent == 2:
            pred = repr(predicted_deviation(eta_second(preset(c.pulse)), 1.0, c.alpha))
        print(f"{c.pulse},{c.N},{c.alpha!r},{f.exponent!r},{f.prefactor!r},{f.error!r},"
              f"{f.window[0]!r},{f.window[1]!r},{f.n_points},{pred}")
    if failed:
        raise NumericalFailure(f"{failed} of {len(curves)} curves had no fit window")
    return 0


def cmd_crossover(args) -> int:
    curves = _read_curves(args.input)
    by = {}
    for c in curves:
        by[(c.pulse, c.N, c.alpha)] = c
    pairs = sorted({(N, al) for (name, N, al) in by if name == args.a} & {(N, al) for (name, N, al) in by if name == args.b})
    if not pairs:
        raise UsageError(f"no (N, alpha) carries both {args.a} and {args.b}")
    print("N,alpha,cross")
    for N, al in pairs:
        x = crossover(by[(args.a, N, al)], by[(args.b, N, al)], axis=args.axis)
        print(f"{N},{al!r},{'' if x is None else repr(x)}")
    return 0


def cmd_regimes(args) -> int:
    for r in regime_presets().values():
        xr = f"{r.x_range[0]:g}" if r.x_range[0] == r.x_range[1] else f"{r.x_range[0]:g}..{r.x_range[1]:g}"
        if r.alpha_range is None:
            ar = "-"
        else:
            ar = f"{r.alpha_range[0]:g}" if r.alpha_range[0] == r.alpha_range[1] else f"{r.alpha_range[0]:g}..{r.alpha_range[1]:g}"
        print(f"{r.name:<16s} J/B_m {xr:<12s} alpha {ar:<9s} {r.note}")
    return 0


# ---------------------------------------------------------------------------
# figure data


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    print(f"wrote {path}")


def _shapes(names: Sequence[str]) -> str:
    rows = ["pulse,t,v"]
    for n in names:
        p = preset(n)
        e = p.edges
        for k, a in enumerate(p.amplitudes):
            rows.append(f"{n},{e[k]!r},{a!r}")
            rows.append(f"{n},{e[k + 1]!r},{a!r}")
    return "\n".join(rows) + "\n"


def _chain(N: int, alpha: float) -> str:
    rows = ["site_i,site_j,coupling,strength_over_J"]
    rows.append("1,2,ZZ,1.0")
    for i in range(2, N):
        rows.append(f"{i},{i + 1},XX+YY+ZZ,{alpha!r}")
    H = build_hamiltonian(SpinChainModel(N, 1.0, alpha))
    log.info("chain N=%d: dim %d, |H| = %.4g", N, H.shape[0], np.linalg.norm(H, 2))
    return "\n".join(rows) + "\n"


def _curves(pulses, alphas, N, args) -> str:
    out = []
    x = log_grid(1e-3, 1.0, per_decade=args.per_decade)
    for al in alphas:
        for n in pulses:
            p = preset(n)
            c = sweep(p, N, al, x * max_amplitude(p), threads=args.threads)
            _report_failures(c)
            out.append(c)
    return write_csv(out)


def _prefactors(pulses, N, args) -> str:
    alphas = (0.03, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 28.0)
    x = log_grid(1e-5, 1e-1, per_decade=args.per_decade)
    rows = ["pulse,alpha,fitted,error,predicted"]
    for n in pulses:
        for r in prefactor_vs_alpha(preset(n), N, alphas, x, threads=args.threads):
            fit = "" if r.fitted is None else repr(r.fitted)
            err = "" if r.error is None else repr(r.error)
            if r.message:
                print(f"warning: {n} alpha={r.alpha}: {r.message}", file=sys.stderr)
            rows.append(f"{n},{r.alpha!r},{fit},{err},{r.predicted!r}")
    return "\n".join(rows) + "\n"


def _finite_size(args) -> str:
    p = preset("ASYPi")
    x = log_grid(1e-3, 1.0, per_decade=args.per_decade)
    sizes = (4, 6, 8, 10) if args.N is None else (args.N,)
    out = [sweep(p, n, 5.0, x * max_amplitude(p), threads=args.threads) for n in sizes]
    print("note: uses the re-derived ASYPi shape", file=sys.stderr)
    return write_csv(out)


FIGURES: dict[str, tuple[str, Callable]] = {
    "fig1": ("pi pulse shapes", lambda a: _shapes(("SGLPi", "UPi", "ASYPi"))),
    "fig2": ("pi/2 pulse shapes", lambda a: _shapes(("SGLPi2", "UPi2", "ASYPi2"))),
    "fig3": ("pi/2 pulses with eta21 = eta22 = 0", lambda a: _shapes(("S2NDPi2", "A2NDPi2"))),
    "fig4": ("chain couplings", lambda a: _chain(a.N or 10, 5.0)),
    "fig5": ("finite-size check, ASYPi, alpha = 5", _finite_size),
    "fig6": ("pi pulses: d vs J/B_m", lambda a: _curves(("SGLPi", "UPi", "ASYPi"), (0.25, 5.0, 28.0), a.N or 10, a)),
    "fig7": ("pi pulses: prefactors vs alpha", lambda a: _prefactors(("UPi", "ASYPi"), a.N or 7, a)),
    "fig8": ("pi/2 pulses: d vs J/B_m", lambda a: _curves(("SGLPi2", "UPi2", "ASYPi2"), (0.25, 5.0, 28.0), a.N or 10, a)),
    "fig9": ("pi/2 pulses: prefactors vs alpha", lambda a: _prefactors(("UPi2", "ASYPi2"), a.N or 7, a)),
    "fig10": ("pi/2 pulses, partly vanishing second order", lambda a: _curves(("S2NDPi2", "A2NDPi2", "UPi2", "ASYPi2"), (1.0, 5.0, 28.0), a.N or 10, a)),
}


def cmd_reproduce(args) -> int:
    out = Path(args.out)
    if not out.is_dir():
        raise UsageError(f"output directory {out} does not exist")
    for fig in args.figures:
        label, fn = FIGURES[fig]
        print(f"{fig}: {label}", file=sys.stderr)
        _write(out / f"{fig}.csv", fn(args))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="shapedpulse", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("presets", help="list the named pulses")
    p.add_argument("--tabulated", action="store_true", help="table values instead of refined roots")
    p.add_argument("--records", action="store_true", help="also print serialized records")
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("eta", help="correction coefficients of a pulse")
    p.add_argument("--pulse", required=True, help="preset name or pulse record file")
    p.add_argument("--tabulated", action="store_true")
    p.add_argument("--oracle", action="store_true", help="cross-check against quadrature")
    p.add_argument("--alpha", type=_nonneg, nargs="+", help="also print predicted prefactors")
    p.set_defaults(func=cmd_eta)

    p = sub.add_parser("optimize", help="solve for a pulse shape")
    p.add_argument("--theta", type=parse_angle, default=math.pi, help="rotation angle, e.g. pi/2")
    p.add_argument("--segments", type=int, required=True)
    p.add_argument("--targets", default="eta11,eta12", help="comma-separated coefficients to cancel")
    p.add_argument("--asymmetric", action="store_true", help="free tau_s instead of tau_p/2")
    p.add_argument("--signs", help="sign pattern, given as --signs=-+-")
    p.add_argument("--free-amplitudes", action="store_true")
    p.add_argument("--magnitudes", type=int, default=8)
    p.add_argument("--starts", type=int, default=8, help="starts per magnitude")
    p.add_argument("--seed", type=int, default=0x5EED)
    p.add_argument("--all", action="store_true", help="print every distinct solution")
    p.add_argument("--out", help="write the best pulse record here")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("search", help="multistart search for pulses cancelling all coefficients")
    p.add_argument("--theta", type=parse_angle, default=math.pi)
    p.add_argument("--targets", default=",".join(ETA_NAMES))
    p.add_argument("--segment-counts", type=int, nargs="+", default=[2, 3, 4, 5, 6])
    p.add_argument("--starts", type=int, default=1000)
    p.set_defaults(func=cmd_search)

    def grid_flags(q):
        q.add_argument("--N", type=_sites, default=7, help="chain length including the qubit")
        q.add_argument("--alpha", type=_nonneg, nargs="+", default=[1.0])
        q.add_argument("--jmin", type=_positive, default=1e-3)
        q.add_argument("--jmax", type=_positive, default=1.0)
        q.add_argument("--points", type=int, help="grid points (default 20 per decade)")
        q.add_argument("--axis", choices=("J", "J_over_Bm"), default="J_over_Bm",
                       help="axis on which --jmin/--jmax are given")

    def method_flags(q):
        q.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        q.add_argument("--expm", choices=("eigh", "pade"), default="eigh")
        q.add_argument("--svd", choices=("power", "eigh"), default="power")

    p = sub.add_parser("sweep", help="deviation d over a coupling grid")
    p.add_argument("--pulse", required=True)
    grid_flags(p)
    method_flags(p)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="power-law prefactors of swept curves")
    p.add_argument("input", help="CSV from sweep, or - for stdin")
    p.add_argument("--exponent", type=float, default=2.0)
    p.add_argument("--tol", type=_positive, default=0.15)
    p.add_argument("--min-points", type=int, default=4)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("crossover", help="coupling where two pulses trade places")
    p.add_argument("input", help="CSV holding curves for both pulses")
    p.add_argument("--a", required=True, help="first pulse name")
    p.add_argument("--b", required=True, help="second pulse name")
    p.add_argument("--axis", choices=("J", "J_over_Bm"), default="J_over_Bm")
    p.set_defaults(func=cmd_crossover)

    p = sub.add_parser("regimes", help="typical parameters of qubit platforms")
    p.set_defaults(func=cmd_regimes)

    p = sub.add_parser("reproduce", help="write figure data as CSV")
    p.add_argument("figures", nargs="+", choices=sorted(FIGURES, key=lambda f: int(f[3:])))
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--N", type=_sites, default=None, help="override the chain length")
    p.add_argument("--per-decade", type=int, default=20)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    # FitError derives from ValueError, so it must be caught first
    except (NumericalFailure, NoConvergence, FitError, SimulationError, QuadratureError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (UsageError, PulseError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
