"""Exact propagation of a qubit coupled to a Heisenberg spin chain.

Site 1 is the qubit; it couples to site 2 through ``J sigma_z sigma_z`` and
the bath sites ``2..N`` form an open Heisenberg chain with exchange
``alpha * J``. Site 1 is the most significant factor of the tensor product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

from .pulse import PulseShape, pulse_area

__all__ = [
    "MAX_SITES",
    "SimulationError",
    "SpinChainModel",
    "PropagatorPair",
    "pauli_string",
    "build_hamiltonian",
    "expm_hermitian",
    "real_propagator",
    "ideal_propagator",
    "propagators",
    "deviation",
    "unitarity_error",
    "bath_sectors",
]

MAX_SITES = 12
UNITARITY_TOL = 1e-10

_I = np.eye(2, dtype=complex)
PAULI = {
    "I": _I,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpinChainModel:
    N: int
    J: float
    alpha: float
    max_sites: int = MAX_SITES

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("the chain needs the qubit and at least one bath spin")
        if self.N > self.max_sites:
            raise ValueError(
                f"N={self.N} exceeds the dense-storage cap of {self.max_sites} sites"
            )
        if not (self.J >= 0 and math.isfinite(self.J)):
            raise ValueError("J must be finite and non-negative")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be finite and non-negative")

    @property
    def dim(self) -> int:
        return 2**self.N


@dataclass(frozen=True)
class PropagatorPair:
    ideal: np.ndarray
    real: np.ndarray
    model: SpinChainModel
    pulse: PulseShape


def pauli_string(N: int, ops: dict[int, str]) -> np.ndarray:
    """Tensor product with ``ops[i]`` on site ``i`` (1-based) and identity elsewhere."""
    return reduce(np.kron, [PAULI[ops.get(i, "I")] for i in range(1, N + 1)])


def build_hamiltonian(model: SpinChainModel) -> np.ndarray:
    """Dense ``H = J Z1 Z2 + alpha J sum_{i=2}^{N-1} sigma_i . sigma_{i+1}``."""
    N, J, a = model.N, model.J, model.alpha
    H = J * pauli_string(N, {1: "Z", 2: "Z"})
    for i in range(2, N):
        for p in "XYZ":
            H = H + a * J * pauli_string(N, {i: p, i + 1: p})
    return H


def qubit_y(N: int) -> np.ndarray:
    return pauli_string(N, {1: "Y"})


def bath_sectors(N: int) -> list[np.ndarray]:
    """Basis indices grouped by the number of up spins on the bath sites.

    ``H`` and ``Y_1`` both conserve the bath magnetization, so every
    propagator is block diagonal over these index sets.
    """
    idx = np.arange(2**N)
    ups = np.array([bin(i & (2 ** (N - 1) - 1)).count("1") for i in idx])
    return [idx[ups == k] for k in range(N)]


def unitarity_error(U: np.ndarray) -> float:
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def _check_unitary(U: np.ndarray, what: str) -> np.ndarray:
    err = unitarity_error(U)
    if not err <= UNITARITY_TOL:
        raise SimulationError(f"{what} is not unitary: |U^dag U - 1|_max = {err:.2e}")
    return U


def expm_hermitian(H: np.ndarray, t: float, method: str = "eigh") -> np.ndarray:
    """``exp(-i H t)`` for Hermitian ``H``.

    ``"eigh"`` diagonalizes ``H`` (unitary to rounding); ``"pade"`` uses
    scaling and squaring with a Pade approximant.
    """
    if method == "eigh":
        w, V = np.linalg.eigh(H)
        return (V * np.exp(-1j * w * t)) @ V.conj().T
    if method == "pade":
        return scipy.linalg.expm(-1j * t * H)
    raise ValueError(f"unknown expm method {method!r}")


def real_propagator(H: np.ndarray, pulse: PulseShape, method: str = "eigh") -> np.ndarray:
    """Time-ordered product of ``exp(-i (H + v_k Y_1) dt_k)``, earliest rightmost."""
    N = int(round(math.log2(H.shape[0])))
    Y = qubit_y(N)
    U = np.eye(H.shape[0], dtype=complex)
    for a, dt in zip(pulse.amplitudes, pulse.durations):
        U = expm_hermitian(H + a * Y, dt, method) @ U
    return _check_unitary(U, "real propagator")


def _rotation(N: int, theta: float) -> np.ndarray:
    return math.cos(theta / 2) * np.eye(2**N) - 1j * math.sin(theta / 2) * qubit_y(N)


def ideal_propagator(H: np.ndarray, pulse: PulseShape, method: str = "eigh") -> np.ndarray:
    """``exp(-i (tau_p - tau_s) H) exp(-i theta/2 Y_1) exp(-i tau_s H)``."""
    N = int(round(math.log2(H.shape[0])))
    theta = pulse_area(pulse)
    if method == "eigh":
        w, V = np.linalg.eigh(H)
        Vh = V.conj().T
        after = (V * np.exp(-1j * w * (pulse.tau_p - pulse.tau_s))) @ Vh
        before = (V * np.exp(-1j * w * pulse.tau_s)) @ Vh
    else:
        after = expm_hermitian(H, pulse.tau_p - pulse.tau_s, method)
        before = expm_hermitian(H, pulse.tau_s, method)
    U = after @ _rotation(N, theta) @ before
    return _check_unitary(U, "ideal propagator")


def propagators(model: SpinChainModel, pulse: PulseShape, method: str = "eigh") -> PropagatorPair:
    H = build_hamiltonian(model)
    return PropagatorPair(
        ideal_propagator(H, pulse, method), real_propagator(H, pulse, method), model, pulse
    )


def _top_eigenvalue_power(M: np.ndarray, tol: float, max_iter: int, window: int = 10) -> float | None:
    """Largest eigenvalue of a PSD matrix by power iteration.

    Returns None on stagnation: when the contraction rate of successive
    Rayleigh-quotient changes, measured over ``window`` steps, projects past
    ``max_iter`` iterations.
    """
    rng = np.random.default_rng(12345)
    v = rng.standard_normal(M.shape[0]) + 1j * rng.standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    changes: list[float] = []
    for k in range(max_iter):
        w = M @ v
        new = float(np.real(np.vdot(v, w)))
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        change = abs(new - lam)
        lam = new
        changes.append(change)
        if change == 0.0:
            return max(new, nw)
        if k < 2 * window:
            continue
        old = changes[-1 - window]
        rate = (change / old) ** (1.0 / window) if old > 0.0 else 0.0
        if rate >= 1.0:
            return None
        # geometric tail of the remaining Rayleigh-quotient changes
        if change * rate / (1.0 - rate) <= tol * abs(new):
            return max(new, nw)
        if rate > 0.0 and k + math.log(tol * abs(new) / change) / math.log(rate) > max_iter:
            return None
    return None


def deviation(pair: PropagatorPair | tuple[np.ndarray, np.ndarray], method: str = "power",
              tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest singular value of ``U_ideal - U_real``.

    ``method="power"`` runs power iteration on ``D^dag D`` and falls back to a
    full Hermitian eigensolve if it stagnates; ``"eigh"`` always does the
    full solve.
    """
    if isinstance(pair, PropagatorPair):
        Ui, Ur = pair.ideal, pair.real
    else:
        Ui, Ur = pair
    if Ui.shape != Ur.shape:
        raise ValueError("propagators have different dimensions")
    D = Ui - Ur
    M = D.conj().T @ D
    M = 0.5 * (M + M.conj().T)
    lam = None
    if method == "power":
        lam = _top_eigenvalue_power(M, tol, max_iter)
    elif method != "eigh":
        raise ValueError(f"unknown deviation method {method!r}")
    if lam is None:
        try:
            lam = float(np.linalg.eigvalsh(M)[-1])
        except np.linalg.LinAlgError as exc:
            raise SimulationError(f"eigensolver failed: {exc}") from None
    return math.sqrt(max(lam, 0.0))
