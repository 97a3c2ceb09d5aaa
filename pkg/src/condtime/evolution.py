"""The time-nonlocal Schrodinger equation on the clock grid.

Conventions (the discrete dictionary): the memory term at slot ``k`` is the
plain sum ``sum_j K[k, j] @ psi_j`` with ``K[k, j] = <t_k| lam*Hbar_int |t_j>``;
every time integral ``int ds`` is the composite trapezoidal rule on the
grid. Three engines solve the equation independently of the constraint:
the order-``N`` series propagator, Picard iteration of the integral form and,
for separable couplings, the midpoint time-ordered product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import affine_sweep, product_sweep
from .clock import Clock
from .constraint import InteractionSpec, Trajectory
from .linalg import DimensionError, expm_hermitian, hermitian_eig, require_hermitian


class PicardConvergenceError(RuntimeError):
    """Picard iteration did not reach tolerance.

    ``ratio`` is the last observed contraction ratio between successive
    update sizes; values near or above one mean the coupling or the clock
    period is too large for the fixed-point map to contract.
    """

    def __init__(self, iterations, last_update, ratio):
        self.iterations = int(iterations)
        self.last_update = float(last_update)
        self.ratio = float(ratio)
        super().__init__(
            f"Picard iteration did not converge after {self.iterations} iterations "
            f"(last update {self.last_update:.3e}, contraction ratio {self.ratio:.3f}); "
            "reduce lambda or the clock period"
        )


@dataclass(frozen=True, eq=False)
class KernelOperator:
    """Blocks ``K[k, j]`` of the coupling between clock slots, shape ``(d, d, n, n)``.

    ``lam`` is already folded into ``blocks``. ``local`` marks kernels that
    are diagonal in time (separable couplings), which lets ``apply`` skip the
    off-diagonal blocks.
    """

    blocks: np.ndarray
    lam: float = 0.0
    local: bool = False

    @property
    def d(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[2]

    def diagonal(self) -> np.ndarray:
        idx = np.arange(self.d)
        return self.blocks[idx, idx]

    def apply(self, states) -> np.ndarray:
        """``sum_j K[k, j] @ states[j]`` for every ``k``; ``states`` is ``(d, n)`` or ``(d, n, r)``."""
        states = np.asarray(states, dtype=complex)
        if states.shape[:2] != (self.d, self.n):
            raise DimensionError(f"states of shape {states.shape} do not match kernel ({self.d}, {self.n})")
        if self.local:
            return np.einsum("kab,kb...->ka...", self.diagonal(), states)
        return np.einsum("kjab,jb...->ka...", self.blocks, states)

    def hermiticity_defect(self) -> float:
        """``max |K[k, j]^dagger - K[j, k]|`` over all block pairs."""
        return float(np.max(np.abs(self.blocks.conj().transpose(1, 0, 3, 2) - self.blocks)))

    def offdiagonal_max(self) -> float:
        mask = ~np.eye(self.d, dtype=bool)
        return float(np.max(np.abs(self.blocks[mask]), initial=0.0))


def build_kernel(interaction: InteractionSpec, clock: Clock, n: int) -> KernelOperator:
    d = clock.d
    lam = interaction.lam
    if interaction.kind == "separable":
        blocks = np.zeros((d, d, n, n), dtype=complex)
        diag = np.zeros((d, n, n), dtype=complex)
        for term in interaction.terms:
            if term.f.shape != (d,) or term.S.shape != (n, n):
                raise DimensionError("separable term does not match clock/system dimensions")
            diag += term.f[:, None, None] * term.S
        idx = np.arange(d)
        blocks[idx, idx] = lam * diag
        return KernelOperator(blocks, lam, local=True)
    H_bar = interaction.materialize(clock, n)
    blocks = lam * H_bar.reshape(d, n, d, n).transpose(0, 2, 1, 3)
    return KernelOperator(np.ascontiguousarray(blocks), lam, local=interaction.kind == "none")


def memory_term(K: KernelOperator, traj: Trajectory, k: int) -> np.ndarray:
    if not 0 <= k < K.d:
        raise IndexError(f"slot {k} out of range for d={K.d}")
    return np.einsum("jab,jb->a", K.blocks[k], traj.states)


def centered_derivative(values, dt: float, cyclic: bool = True) -> np.ndarray:
    """``(x[k+1] - x[k-1]) / (2 dt)``; interior slots only unless ``cyclic``."""
    values = np.asarray(values)
    if cyclic:
        return (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0)) / (2.0 * dt)
    return (values[2:] - values[:-2]) / (2.0 * dt)


def modified_se_residuals(K: KernelOperator, H_S, traj: Trajectory, cyclic: bool = True) -> np.ndarray:
    """Per-slot norm of ``i dpsi/dt - H_S psi - [H_K psi]`` with a centred difference.

    With ``cyclic=False`` only the interior slots ``1 .. d-2`` are returned,
    which is what non-periodic (initial-value) trajectories need.
    """
    psi = traj.states
    dt = traj.clock.dt
    rhs = psi @ np.asarray(H_S).T + K.apply(psi)
    lhs = 1j * centered_derivative(psi, dt, cyclic)
    if not cyclic:
        rhs = rhs[1:-1]
    return np.linalg.norm(lhs - rhs, axis=1)


def residual_modified_se(K: KernelOperator, H_S, traj: Trajectory, cyclic: bool = True) -> float:
    return float(np.max(modified_se_residuals(K, H_S, traj, cyclic)))


@dataclass(frozen=True, eq=False)
class Propagator:
    V: np.ndarray
    k_from: int
    k_to: int
    order: int | str

    @property
    def isometry_defect(self) -> float:
        return isometry_defect(self.V)


def isometry_defect(V) -> float:
    """``||V^dagger V - I||_F``."""
    V = V.V if isinstance(V, Propagator) else np.asarray(V)
    return float(np.linalg.norm(V.conj().T @ V - np.eye(V.shape[1]), "fro"))


def free_propagators(H_S, clock: Clock, k0: int) -> np.ndarray:
    """Stack of ``U(t_k, t_k0) = exp(-i H_S (t_k - t_k0))`` for every slot ``k``."""
    w, v = hermitian_eig(H_S)
    tau = clock.times - clock.times[k0]
    phases = np.exp(-1j * np.outer(tau, w))
    return np.einsum("ab,kb,cb->kac", v, phases, v.conj())


def schrodinger_propagator(H_S, k: int, k0: int, clock: Clock) -> Propagator:
    _check_slot(k, clock), _check_slot(k0, clock)
    U = expm_hermitian(H_S, clock.times[k] - clock.times[k0])
    return Propagator(U, k0, k, 0)


def _check_slot(k, clock):
    if not 0 <= k < clock.d:
        raise IndexError(f"slot {k} out of range for d={clock.d}")


def trapezoid_volterra(H_S, clock: Clock, G, k0: int) -> np.ndarray:
    """``Y_k = -i int_{t_k0}^{t_k} ds U(t_k, s) G(s)`` by the composite trapezoidal rule.

    ``G`` holds samples on every slot, shape ``(d, n, r)``. The sum is
    evaluated through the exact two-step recurrence
    ``Y_{k+1} = A Y_k - (i dt/2)(A G_k + G_{k+1})`` with ``A = U(dt)``;
    slots before ``k0`` use the mirrored recurrence (signed integral).
    """
    G = np.asarray(G, dtype=complex)
    d, n, r = G.shape
    dt = clock.dt
    A = expm_hermitian(H_S, dt)
    Y = np.empty_like(G)
    Y[k0] = 0.0
    if k0 < d - 1:
        AG = np.einsum("ab,kbr->kar", A, G[k0:-1])
        c = -0.5j * dt * (AG + G[k0 + 1:])
        Y[k0:] = affine_sweep(A, c, np.zeros((n, r), dtype=complex))
    if k0 > 0:
        Ah = A.conj().T
        Gb = G[k0::-1]
        AG = np.einsum("ab,kbr->kar", Ah, Gb[:-1])
        c = 0.5j * dt * (AG + Gb[1:])
        Y[k0::-1] = affine_sweep(Ah, c, np.zeros((n, r), dtype=complex))
    return Y


def series_terms(H_S, K: KernelOperator, N: int, k0: int, clock: Clock) -> np.ndarray:
    """Terms ``V_m(t_j, t_k0)`` for ``m = 0..N`` and every slot ``j``, shape ``(N+1, d, n, n)``.

    ``V_0`` is the free propagator and
    ``V_m(t_k) = -i U(t_k) int ds U(s)^dagger sum_j K[s, j] V_{m-1}(t_j)``.
    Slots ``j < k0`` are needed by the memory sum and are filled by the
    signed integral.
    """
    if N < 0:
        raise ValueError("series order must be non-negative")
    _check_slot(k0, clock)
    terms = [free_propagators(H_S, clock, k0)]
    for _ in range(N):
        terms.append(trapezoid_volterra(H_S, clock, K.apply(terms[-1]), k0))
    return np.stack(terms)


def series_propagator(H_S, K: KernelOperator, N: int, k: int, k0: int, clock: Clock) -> Propagator:
    _check_slot(k, clock)
    if k < k0:
        raise ValueError(f"series propagator is forward only (k={k} < k0={k0})")
    terms = series_terms(H_S, K, N, k0, clock)
    return Propagator(terms[:, k].sum(axis=0), k0, k, N)


def composition_residual(H_S, K: KernelOperator, N: int, k1: int, k2: int, k3: int, clock: Clock) -> float:
    """``||V(t3,t2) V(t2,t1) - V(t3,t1)||_F`` with order-``N`` series propagators."""
    if not k1 < k2 < k3:
        raise ValueError(f"composition needs k1 < k2 < k3, got {k1}, {k2}, {k3}")
    _check_slot(k3, clock)
    from1 = series_terms(H_S, K, N, k1, clock).sum(axis=0)
    from2 = series_terms(H_S, K, N, k2, clock).sum(axis=0)
    return float(np.linalg.norm(from2[k3] @ from1[k2] - from1[k3], "fro"))


def picard_iterate(H_S, K: KernelOperator, psi0, k0: int, clock: Clock, max_iter: int = 200, tol: float = 1e-12):
    """Fixed point of ``psi = U psi0 - i int ds U(t, s) [H_K psi](s)``.

    ``psi0`` is ``(n, r)``: every column is propagated at once. Returns the
    ``(d, n, r)`` solution and a dict with the iteration count and the
    history of update sizes.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    _check_slot(k0, clock)
    free = np.einsum("kab,br->kar", free_propagators(H_S, clock, k0), psi0)
    psi = free
    updates = []
    ratio = 0.0
    for it in range(1, max_iter + 1):
        new = free + trapezoid_volterra(H_S, clock, K.apply(psi), k0)
        upd = float(np.max(np.linalg.norm(new - psi, axis=1)))
        psi = new
        if updates and updates[-1] > 0:
            ratio = upd / updates[-1]
        updates.append(upd)
        if upd <= tol:
            return psi, {"iterations": it, "updates": updates, "ratio": ratio}
        if not np.isfinite(upd) or upd > 1e12:
            break
    raise PicardConvergenceError(len(updates), updates[-1], ratio)


def picard_solve(H_S, K: KernelOperator, psi0, k0: int, clock: Clock, max_iter: int = 200, tol: float = 1e-12) -> Trajectory:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim != 1:
        raise DimensionError("psi0 must be a state vector")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError(f"psi0 must be normalized (norm {np.linalg.norm(psi0):.12f})")
    psi, info = picard_iterate(H_S, K, psi0[:, None], k0, clock, max_iter, tol)
    return Trajectory(clock.spec, psi[:, :, 0], meta={"engine": "picard", **info})


def picard_propagators(H_S, K: KernelOperator, k0: int, clock: Clock, max_iter: int = 200, tol: float = 1e-12):
    """Converged ``V(t_k, t_k0)`` for every slot, shape ``(d, n, n)``."""
    n = K.n
    V, info = picard_iterate(H_S, K, np.eye(n, dtype=complex), k0, clock, max_iter, tol)
    return V, info


def _separable_midpoints(H_S, interaction: InteractionSpec, clock: Clock) -> np.ndarray:
    """``H_S + lam sum_i f_i(t_m + dt/2) S_i`` for ``m = 0..d-2``, linear interpolation of ``f``."""
    if interaction.kind == "generic":
        raise ValueError("time-ordered propagator needs a separable (or vanishing) interaction")
    H_S = require_hermitian(H_S)
    h = np.broadcast_to(H_S, (clock.d - 1,) + H_S.shape).copy()
    if interaction.kind == "separable":
        for term in interaction.terms:
            fmid = 0.5 * (term.f[:-1] + term.f[1:])
            h += interaction.lam * fmid[:, None, None] * term.S
    return h


def _step_unitaries(h, dt) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return np.einsum("mab,mb,mcb->mac", v, np.exp(-1j * dt * w), v.conj())


def time_ordered_stack(H_S, interaction: InteractionSpec, k0: int, clock: Clock) -> np.ndarray:
    """``V(t_k, t_k0)`` from the midpoint product, for every slot ``k``.

    Slots before ``k0`` are filled with the exact inverse of the forward
    product (adjoint steps in reverse order).
    """
    _check_slot(k0, clock)
    steps = _step_unitaries(_separable_midpoints(H_S, interaction, clock), clock.dt)
    n = steps.shape[1]
    out = np.empty((clock.d, n, n), dtype=complex)
    I = np.eye(n, dtype=complex)
    out[k0:] = product_sweep(steps[k0:], I)
    if k0 > 0:
        back = steps[:k0][::-1].conj().transpose(0, 2, 1)
        out[k0::-1] = product_sweep(back, I)
    return out


def time_ordered_propagator(H_S, interaction: InteractionSpec, k: int, k0: int, clock: Clock) -> Propagator:
    _check_slot(k, clock)
    if k < k0:
        raise ValueError(f"time-ordered propagator is forward only (k={k} < k0={k0})")
    steps = _step_unitaries(_separable_midpoints(H_S, interaction, clock)[k0:k], clock.dt)
    n = np.asarray(H_S).shape[0]
    V = product_sweep(steps, np.eye(n, dtype=complex))[-1] if k > k0 else np.eye(n, dtype=complex)
    return Propagator(V, k0, k, "converged")


def trajectory_from_propagators(V, psi0, clock: Clock, engine: str) -> Trajectory:
    states = np.einsum("kab,b->ka", V, np.asarray(psi0, dtype=complex))
    return Trajectory(clock.spec, states, meta={"engine": engine})


def norm_preservation_functional(K: KernelOperator, traj: Trajectory, k: int) -> float:
    """``sum_j Im <psi_k| K[k, j] |psi_j>``."""
    return float(np.imag(np.vdot(traj.states[k], memory_term(K, traj, k))))


def norm_rate_mismatch(K: KernelOperator, traj: Trajectory) -> np.ndarray:
    """Per interior slot: functional minus half the centred rate of ``||psi_k||^2``.

    On a solution of the modified equation ``d/dt ||psi||^2 = 2 Im <psi|H_K psi>``,
    so the mismatch is pure discretisation error.
    """
    psi = traj.states
    functional = np.imag(np.einsum("ka,ka->k", psi.conj(), K.apply(psi)))
    rate = centered_derivative(np.sum(np.abs(psi) ** 2, axis=1), traj.clock.dt, cyclic=False)
    return functional[1:-1] - 0.5 * rate


def first_order_isometry_violation(H_S, K: KernelOperator, k: int, k0: int, clock: Clock) -> float:
    """``||V_0^dagger V_1 + V_1^dagger V_0||_F``: the O(lam) part of ``V^dagger V - I``.

    Zero exactly when the kernel preserves norm at first order (e.g. any
    separable coupling); otherwise the isometry defect of a truncated series
    is linear, not quadratic, in the coupling.
    """
    terms = series_terms(H_S, K, 1, k0, clock)
    V0, V1 = terms[0, k], terms[1, k]
    return float(np.linalg.norm(V0.conj().T @ V1 + V1.conj().T @ V0, "fro"))
