"""Constraint Hamiltonian, physical states and conditioning on the clock.

Kinematical vectors use the clock as the slow index: entry ``k*n + a`` is
clock slot ``k``, system component ``a``. Conditioning on ``|t_k>`` is then
the ``k``-th length-``n`` block.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .clock import Clock, ClockSpec
from .linalg import (
    DimensionError,
    as_operator,
    hermitian_eig,
    identity,
    require_hermitian,
    tensor_product,
)

INTERACTION_KINDS = ("none", "separable", "generic")


class NoPhysicalStateError(RuntimeError):
    """No eigenvalue of the constraint lies within tolerance of zero."""

    def __init__(self, tol, nearest):
        self.tol = float(tol)
        self.nearest = float(nearest)
        super().__init__(
            f"no physical state within tol={self.tol:.3e} "
            f"(nearest constraint eigenvalue {self.nearest:.3e}); enable auto_shift"
        )


@dataclass(frozen=True, eq=False)
class SeparableTerm:
    """One product term ``f(T) (x) S`` with ``f`` sampled on the clock grid."""

    f: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.ndim != 1:
            raise DimensionError("separable f must be sampled as a 1-d array")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "S", require_hermitian(self.S, what="separable S"))


@dataclass(frozen=True, eq=False)
class InteractionSpec:
    """Clock-system coupling ``lam * Hbar_int``.

    ``kind='separable'`` carries ``terms``; ``kind='generic'`` carries the
    full ``matrix`` on the kinematical space. ``lam`` is never folded into
    the stored operators.
    """

    kind: str = "none"
    terms: tuple = ()
    matrix: np.ndarray | None = None
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in INTERACTION_KINDS:
            raise ValueError(f"interaction kind must be one of {INTERACTION_KINDS}, got {self.kind!r}")
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "lam", float(self.lam))
        if self.kind == "separable" and not self.terms:
            raise ValueError("separable interaction needs at least one term")
        if self.kind == "generic":
            if self.matrix is None:
                raise ValueError("generic interaction needs a matrix")
            object.__setattr__(self, "matrix", require_hermitian(self.matrix, what="interaction matrix"))

    def scaled(self, lam: float) -> "InteractionSpec":
        return replace(self, lam=lam)

    def materialize(self, clock: Clock, n: int) -> np.ndarray:
        """The lambda-free interaction operator on the ``d*n`` space."""
        d = clock.d
        if self.kind == "none":
            return np.zeros((d * n, d * n), dtype=complex)
        if self.kind == "generic":
            if self.matrix.shape != (d * n, d * n):
                raise DimensionError(
                    f"interaction matrix is {self.matrix.shape}, expected {(d * n, d * n)}"
                )
            return self.matrix
        out = np.zeros((d * n, d * n), dtype=complex)
        for term in self.terms:
            if term.f.shape != (d,):
                raise DimensionError(f"separable f has {term.f.shape[0]} samples, clock has d={d}")
            if term.S.shape != (n, n):
                raise DimensionError(f"separable S is {term.S.shape}, system dimension is {n}")
            out += tensor_product(np.diag(term.f), term.S)
        return out


def smooth_random_interaction(clock: Clock, n: int, seed: int = 0, modes: int = 2, scale: float = 1.0):
    """Random nonlocal Hermitian coupling with a smooth, periodic kernel.

    The kernel is ``K(t, t') = dt * sum_{p,q} e^{i a_p t} C_pq e^{-i a_q t'}``
    with ``a_p = 2 pi p / period`` for ``|p| <= modes`` and ``C`` a random
    Hermitian matrix. The ``dt`` prefactor gives the memory sum a continuum
    limit, so refining the grid at fixed period converges. ``C`` is scaled so
    the operator norm of the result is ``scale`` independent of ``d``.
    """
    rng = np.random.default_rng(seed)
    P = 2 * modes + 1
    A = rng.standard_normal((P * n, P * n)) + 1j * rng.standard_normal((P * n, P * n))
    C = 0.5 * (A + A.conj().T)
    C *= scale / (np.linalg.norm(C, 2) * clock.spec.period)
    p = np.arange(-modes, modes + 1)
    phases = np.exp(2j * np.pi * np.outer(clock.times - clock.spec.t0, p) / clock.spec.period)
    G = np.kron(phases, np.eye(n))
    H = clock.dt * (G @ C @ G.conj().T)
    return 0.5 * (H + H.conj().T)


@dataclass(eq=False)
class TotalHamiltonian:
    """``H = H_C (x) I + I (x) (H_S + shift) + lam * Hbar_int``."""

    clock: Clock
    H_S: np.ndarray
    interaction: InteractionSpec
    H_bar: np.ndarray
    shift: float = 0.0

    @property
    def n(self) -> int:
        return self.H_S.shape[0]

    @property
    def lam(self) -> float:
        return self.interaction.lam

    @property
    def H_S_eff(self) -> np.ndarray:
        """System Hamiltonian including the gauge shift."""
        return self.H_S + self.shift * identity(self.n)

    @cached_property
    def H(self) -> np.ndarray:
        d, n = self.clock.d, self.n
        return (
            tensor_product(self.clock.H_C, identity(n))
            + tensor_product(identity(d), self.H_S_eff)
            + self.lam * self.H_bar
        )

    @cached_property
    def spectrum(self):
        return hermitian_eig(self.H)

    def with_shift(self, shift: float) -> "TotalHamiltonian":
        out = TotalHamiltonian(self.clock, self.H_S, self.interaction, self.H_bar, float(shift))
        if "spectrum" in self.__dict__:
            w, v = self.spectrum
            out.__dict__["spectrum"] = (w + (shift - self.shift), v)
        return out


def assemble_total(clock: Clock, H_S, interaction: InteractionSpec | None = None) -> TotalHamiltonian:
    H_S = require_hermitian(H_S, what="system Hamiltonian")
    if H_S.shape[0] != H_S.shape[1]:
        raise DimensionError(f"system Hamiltonian is {H_S.shape}")
    interaction = interaction or InteractionSpec()
    H_bar = interaction.materialize(clock, H_S.shape[0])
    return TotalHamiltonian(clock=clock, H_S=H_S, interaction=interaction, H_bar=H_bar)


def _blocks(psi, d: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.shape[0] % d:
        raise DimensionError(f"kinematical vector of length {psi.shape} does not split into {d} slots")
    return psi.reshape(d, -1)


def conditional_norm_drift(psi, d: int) -> float:
    sq = np.sum(np.abs(_blocks(psi, d)) ** 2, axis=1)
    return float(np.max(np.abs(sq - sq[0])))


@dataclass(frozen=True, eq=False)
class PhysicalState:
    psi: np.ndarray
    residual: float
    conditional_norm_drift: float
    total: TotalHamiltonian = field(repr=False)
    eigenvalue: float = 0.0


def physical_state_from_vector(total: TotalHamiltonian, psi, eigenvalue: float = 0.0) -> PhysicalState:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (total.H.shape[0],):
        raise DimensionError(f"state of length {psi.shape} does not match constraint of size {total.H.shape[0]}")
    return PhysicalState(
        psi=psi,
        residual=float(np.linalg.norm(total.H @ psi)),
        conditional_norm_drift=conditional_norm_drift(psi, total.clock.d),
        total=total,
        eigenvalue=float(eigenvalue),
    )


def default_tol(total: TotalHamiltonian) -> float:
    return 1e-10 * float(np.linalg.norm(total.H, "fro"))


def physical_states(total: TotalHamiltonian, tol: float | None = None, auto_shift: bool = False) -> list:
    """Null vectors of the constraint.

    With ``auto_shift`` and an empty null space, the eigenvalue ``E*`` of
    smallest magnitude is removed by the constant shift ``-E*`` on ``H_S``;
    the returned states then refer to the shifted Hamiltonian (``state.total``).
    States come back ordered by descending conditional norm at the first slot.
    """
    if tol is None:
        tol = default_tol(total)
    w, v = total.spectrum
    sel = np.flatnonzero(np.abs(w) <= tol)
    if sel.size == 0:
        nearest = w[np.argmin(np.abs(w))]
        if not auto_shift:
            raise NoPhysicalStateError(tol, nearest)
        total = total.with_shift(total.shift - nearest)
        w, v = total.spectrum
        sel = np.flatnonzero(np.abs(w) <= tol)
    d = total.clock.d
    states = [physical_state_from_vector(total, v[:, i], w[i]) for i in sel]
    states.sort(key=lambda s: -float(np.linalg.norm(_blocks(s.psi, d)[0])))
    return states


def _psi_of(phys) -> np.ndarray:
    return phys.psi if isinstance(phys, PhysicalState) else np.asarray(phys, dtype=complex)


def condition(phys, clock: Clock, k: int) -> np.ndarray:
    """System state ``(<t_k| (x) I) |psi>>``."""
    if not 0 <= k < clock.d:
        raise IndexError(f"clock index {k} out of range for d={clock.d}")
    return _blocks(_psi_of(phys), clock.d)[k].copy()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """System states ``psi_S(t_k)`` for every clock slot, stacked as ``(d, n)``."""

    clock: ClockSpec
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=complex)
        if states.ndim != 2 or states.shape[0] != self.clock.d:
            raise DimensionError(f"trajectory needs {self.clock.d} states, got array of shape {states.shape}")
        object.__setattr__(self, "states", states)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def times(self) -> np.ndarray:
        return self.clock.times


def full_trajectory(phys, clock: Clock) -> Trajectory:
    return Trajectory(clock.spec, _blocks(_psi_of(phys), clock.d).copy())


def reconstruct(traj: Trajectory, clock: Clock) -> np.ndarray:
    """``sum_k |t_k> (x) states[k]``; the inverse of :func:`full_trajectory`."""
    if traj.states.shape[0] != clock.d:
        raise DimensionError("trajectory length does not match the clock")
    return traj.states.reshape(-1).copy()


def physical_inner_product(a, b, clock: Clock, k: int) -> complex:
    return complex(np.vdot(condition(a, clock, k), condition(b, clock, k)))


def inner_product_drift(a, b, clock: Clock) -> float:
    """Spread of the slot-``k`` inner product over all clock slots."""
    va, vb = _blocks(_psi_of(a), clock.d), _blocks(_psi_of(b), clock.d)
    vals = np.einsum("ka,ka->k", va.conj(), vb)
    return float(np.max(np.abs(vals[:, None] - vals[None, :])))


def normalize_physical(phys: PhysicalState, clock: Clock, k0: int = 0) -> PhysicalState:
    """Rescale so the conditional state at slot ``k0`` has unit norm."""
    norm = np.linalg.norm(condition(phys, clock, k0))
    if norm == 0.0:
        raise ValueError(f"conditional state at slot {k0} vanishes; cannot normalize")
    psi = phys.psi / norm
    return replace(
        phys,
        psi=psi,
        residual=phys.residual / norm,
        conditional_norm_drift=conditional_norm_drift(psi, clock.d),
    )
