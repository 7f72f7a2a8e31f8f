"""Periodic split-step spectral solver for du/dt = alpha D_p u + V u.

Plane-wave data with frequencies commensurate with the period are exactly
periodic, so the torus [0, L) stands in for the real line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyson import PlaneWaveState
from .kernel import EvolutionParams

__all__ = [
    "GridState",
    "dft",
    "idft",
    "wavenumbers",
    "free_step",
    "strang_solve",
    "strang_refined",
    "sample_state",
    "sample_potential",
    "IncommensurateError",
    "AliasingError",
]

COMMENSURATE_TOL = 1e-9


class IncommensurateError(ValueError):
    pass


class AliasingError(ValueError):
    pass


def _check_length(n: int):
    if n < 1 or n & (n - 1):
        raise ValueError(f"bad length: {n} is not a power of two")


@dataclass(frozen=True, eq=False)
class GridState:
    """Samples of u at x_j = j L / N, j = 0..N-1."""

    N: int
    L: float
    values: np.ndarray

    def __post_init__(self):
        _check_length(self.N)
        if self.N < 8:
            raise ValueError("N must be >= 8")
        if not self.L > 0:
            raise ValueError("L must be positive")
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (self.N,):
            raise ValueError(f"values must have shape ({self.N},)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.L * np.arange(self.N) / self.N

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


def dft(v: np.ndarray) -> np.ndarray:
    """Unitary discrete Fourier transform of a power-of-two length vector."""
    v = np.asarray(v, dtype=complex)
    _check_length(v.shape[-1])
    return np.fft.fft(v, norm="ortho")


def idft(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    _check_length(v.shape[-1])
    return np.fft.ifft(v, norm="ortho")


def wavenumbers(N: int, L: float) -> np.ndarray:
    """Signed wavenumbers 2 pi m / L in FFT order; the Nyquist mode is -pi N / L."""
    return 2.0 * math.pi * np.fft.fftfreq(N, d=L / N)


def free_step(g: GridState, dt: float, params: EvolutionParams) -> GridState:
    if dt < 0:
        raise ValueError("dt must be >= 0")
    mult = params.symbol(wavenumbers(g.N, g.L), dt)
    return GridState(g.N, g.L, idft(mult * dft(g.values)))


def strang_solve(u0: GridState, Vgrid: np.ndarray, t: float, steps: int,
                 params: EvolutionParams) -> GridState:
    """``steps`` Strang steps exp(V dt/2) exp(dt A) exp(V dt/2), dt = t/steps."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if t < 0:
        raise ValueError("t must be >= 0")
    Vgrid = np.asarray(Vgrid, dtype=complex)
    if Vgrid.shape != (u0.N,):
        raise ValueError("potential grid does not match the state grid")
    dt = t / steps
    half = np.exp(0.5 * dt * Vgrid)
    mult = params.symbol(wavenumbers(u0.N, u0.L), dt)
    u = u0.values
    for _ in range(steps):
        u = half * idft(mult * dft(half * u))
    return GridState(u0.N, u0.L, u)


def strang_refined(u0: GridState, Vgrid: np.ndarray, t: float, params: EvolutionParams,
                   tol: float, start: int = 32, max_steps: int = 2**16) -> tuple[GridState, int]:
    """Strang solution with the step count doubled until it self-converges.

    Stops once a third of the last change (the remaining error of a
    second-order method) is below ``tol / 4``, or at ``max_steps``.
    Returns the finest solution and its step count.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    steps = max(1, int(start))
    cur = strang_solve(u0, Vgrid, t, steps, params)
    while steps < max_steps:
        steps *= 2
        nxt = strang_solve(u0, Vgrid, t, steps, params)
        delta = float(np.abs(nxt.values - cur.values).max())
        cur = nxt
        if delta / 3.0 <= 0.25 * tol:
            break
    return cur, steps


def _check_frequencies(freqs: np.ndarray, N: int, L: float):
    modes = freqs * L / (2.0 * math.pi)
    off = np.abs(modes - np.round(modes))
    if np.any(off > COMMENSURATE_TOL):
        bad = freqs[np.argmax(off)]
        raise IncommensurateError(f"incommensurate frequency {bad:g} for period {L:g}")
    nyquist = math.pi * N / L
    if np.any(np.abs(freqs) >= nyquist):
        bad = freqs[np.argmax(np.abs(freqs))]
        raise AliasingError(f"aliasing: frequency {bad:g} is not below the Nyquist bound {nyquist:g}")


def _sample(s: PlaneWaveState, N: int, L: float) -> np.ndarray:
    _check_length(N)
    _check_frequencies(s.freqs, N, L)
    x = L * np.arange(N) / N
    return np.exp(1j * np.outer(x, s.freqs)) @ s.amps


def sample_state(s: PlaneWaveState, N: int, L: float) -> GridState:
    return GridState(N, L, _sample(s, N, L))


def sample_potential(V: PlaneWaveState, N: int, L: float) -> np.ndarray:
    return _sample(V, N, L)
