"""Finite cyclic clocks.

A clock of dimension ``d`` has sharp time states ``|t_k>`` (the standard
basis) with ``t_k = t0 + k*dt`` and a Hamiltonian that is the discrete
Fourier conjugate of the time operator. Translating by one grid step,
``exp(-i H_C dt) |t_k> = |t_{k+1 mod d}>``, is then exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import expm_hermitian


@dataclass(frozen=True)
class ClockSpec:
    d: int
    t0: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"clock dimension must be an integer >= 2, got {self.d!r}")
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError(f"clock spacing dt must be positive, got {self.dt!r}")
        if not np.isfinite(self.t0):
            raise ValueError(f"clock origin t0 must be finite, got {self.t0!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def period(self) -> float:
        return self.d * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.d)


def clock_frequencies(d: int, dt: float) -> np.ndarray:
    """Clock energies ``2*pi*m/(d*dt)`` for ``m = -floor(d/2) ... ceil(d/2)-1``."""
    m = np.arange(-(d // 2), d - d // 2)
    return 2.0 * np.pi * m / (d * dt)


@dataclass(frozen=True, eq=False)
class Clock:
    spec: ClockSpec
    times: np.ndarray
    frequencies: np.ndarray
    T: np.ndarray
    H_C: np.ndarray
    fourier: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def dt(self) -> float:
        return self.spec.dt

    @property
    def basis(self) -> np.ndarray:
        """Clock states as columns (the computational basis)."""
        return np.eye(self.d, dtype=complex)


def build_clock(spec: ClockSpec) -> Clock:
    """Build the conjugate Fourier clock for ``spec``.

    The energy eigenstates have amplitudes ``<t_k|E_m> = exp(+i w_m t_k)/sqrt(d)``;
    with this sign ``H_C`` translates clock states forward under
    ``exp(-i H_C s)``, as the continuum relation ``[T, H_C] = i`` requires.
    """
    t = spec.times
    w = clock_frequencies(spec.d, spec.dt)
    F = np.exp(1j * np.outer(t, w)) / np.sqrt(spec.d)
    H_C = (F * w) @ F.conj().T
    H_C = 0.5 * (H_C + H_C.conj().T)
    T = np.diag(t).astype(complex)
    return Clock(spec=spec, times=t, frequencies=w, T=T, H_C=H_C, fourier=F)


def clock_state(clock: Clock, k: int) -> np.ndarray:
    if not 0 <= k < clock.d:
        raise IndexError(f"clock index {k} out of range for d={clock.d}")
    e = np.zeros(clock.d, dtype=complex)
    e[k] = 1.0
    return e


def commutator(clock: Clock) -> np.ndarray:
    """The matrix ``[T, H_C]``."""
    return clock.T @ clock.H_C - clock.H_C @ clock.T


def translation_defect(clock: Clock, steps: int = 1) -> float:
    """``max_k ||exp(-i H_C steps*dt)|t_k> - |t_{k+steps mod d}>||``."""
    U = expm_hermitian(clock.H_C, steps * clock.dt)
    shifted = np.roll(np.eye(clock.d), steps, axis=0)
    return float(np.max(np.linalg.norm(U - shifted, axis=0)))


def periodicity_defect(clock: Clock) -> float:
    U = expm_hermitian(clock.H_C, clock.spec.period)
    return float(np.max(np.abs(U - np.eye(clock.d))))


def commutator_defect(clock: Clock, width: float = 1.0 / 16.0) -> float:
    """How far ``[T, H_C]`` is from ``i`` on a smooth probe state.

    The probe is a Gaussian centred in the clock window with standard
    deviation ``width * period``. The result is the relative norm of
    ``([T, H_C] - i) g`` over rows ``k < d-1`` (the wrap-around row is
    excluded). Entrywise comparison is meaningless here: the diagonal of a
    commutator vanishes identically, so only the action on states resolved
    by the grid can approach ``i g``.
    """
    spec = clock.spec
    centre = spec.t0 + 0.5 * (spec.period - spec.dt)
    sigma = width * spec.period
    g = np.exp(-0.5 * ((clock.times - centre) / sigma) ** 2).astype(complex)
    r = commutator(clock) @ g - 1j * g
    return float(np.linalg.norm(r[:-1]) / np.linalg.norm(g[:-1]))
