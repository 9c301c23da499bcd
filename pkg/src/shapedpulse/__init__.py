"""Shaped control pulses for a qubit coupled to a spin bath.

Correction coefficients of piecewise-constant pulses, a solver for pulse
shapes that cancel them, and an exact spin-chain simulator that measures
how far a finite pulse is from its instantaneous ideal.
"""
from ._kernels import BACKEND
from .analysis import (
    DeviationCurve,
    FitError,
    FitResult,
    crossover,
    fit_prefactor,
    local_slope,
    log_grid,
    prefactor_vs_alpha,
    read_csv,
    sweep,
    write_csv,
)
from .eta import (
    EtaFirst,
    EtaSecond,
    eta_all,
    eta_first,
    eta_quadrature_oracle,
    eta_second,
    predicted_deviation,
)
from .optimize import (
    NoConvergence,
    PulseTemplate,
    SolveOptions,
    solve,
    solve_all,
    verify_no_pi_second_order,
)
from .pulse import (
    PRESET_NAMES,
    PulseError,
    PulseShape,
    from_record,
    make_pulse,
    max_amplitude,
    preset,
    psi,
    pulse_area,
    to_record,
)
from .spinsim import SimulationError, SpinChainModel, deviation, propagators

__version__ = "0.1.0"
