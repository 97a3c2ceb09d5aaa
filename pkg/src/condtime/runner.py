"""Scenario execution: build the model from a config, run engines, export results."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import evolution as ev
from ._kernels import BACKEND
from .clock import build_clock, commutator_defect
from .config import ConfigError, ScenarioConfig
from .constraint import (
    NoPhysicalStateError,
    assemble_total,
    full_trajectory,
    inner_product_drift,
    normalize_physical,
    physical_states,
)


class EngineError(RuntimeError):
    """An engine failed; ``engine`` names it and ``__cause__`` holds the original error."""

    def __init__(self, engine, exc):
        self.engine = engine
        super().__init__(f"engine '{engine}' failed: {exc}")


@dataclass(eq=False)
class Scenario:
    config: ScenarioConfig
    seed: int | None = None

    @cached_property
    def clock(self):
        return build_clock(self.config.clock)

    @cached_property
    def H_S(self):
        return self.config.system.build(self.config.clock)

    @property
    def n(self) -> int:
        return self.H_S.shape[0]

    @cached_property
    def interaction(self):
        seed = self.seed if self.seed is not None else self.config.seed
        return self.config.interaction.build(self.clock, self.n, seed)

    @cached_property
    def total(self):
        return assemble_total(self.clock, self.H_S, self.interaction)

    @cached_property
    def kernel(self):
        return ev.build_kernel(self.interaction, self.clock, self.n)


def build_scenario(cfg: ScenarioConfig, seed: int | None = None) -> Scenario:
    return Scenario(cfg, seed)


@dataclass(eq=False)
class ExactResult:
    state: object  # normalized PhysicalState
    trajectory: ev.Trajectory
    n_states: int
    shift: float


def solve_exact(sc: Scenario, tol: float | None = None, auto_shift: bool | None = None) -> ExactResult:
    """Constraint solution selected by ``run.state_index``, normalized at ``run.k0``."""
    run = sc.config.run
    tol = run.tol if tol is None else tol
    auto_shift = run.auto_shift if auto_shift is None else auto_shift
    states = physical_states(sc.total, tol, auto_shift)
    if not 0 <= run.state_index < len(states):
        raise ConfigError("run.state_index", f"only {len(states)} physical state(s) found")
    state = normalize_physical(states[run.state_index], sc.clock, run.k0)
    traj = full_trajectory(state, sc.clock)
    traj.meta["engine"] = "exact"
    return ExactResult(state, traj, len(states), state.total.shift)


def uniform_state(n: int) -> np.ndarray:
    return np.full(n, 1.0 / math.sqrt(n), dtype=complex)


def engine_trajectory(sc: Scenario, engine: str, psi0, H_S=None) -> ev.Trajectory:
    """Trajectory from ``psi0`` at slot ``run.k0`` by one of the propagating engines."""
    run = sc.config.run
    H_S = sc.H_S if H_S is None else H_S
    k0 = run.k0
    if engine == "series":
        V = ev.series_terms(H_S, sc.kernel, run.series_order, k0, sc.clock).sum(axis=0)
        traj = ev.trajectory_from_propagators(V, psi0, sc.clock, "series")
        traj.meta["order"] = run.series_order
        traj.meta["propagators"] = V
        return traj
    if engine == "picard":
        return ev.picard_solve(H_S, sc.kernel, psi0, k0, sc.clock, run.picard_max_iter, run.picard_tol)
    if engine == "timedep":
        V = ev.time_ordered_stack(H_S, sc.interaction, k0, sc.clock)
        traj = ev.trajectory_from_propagators(V, psi0, sc.clock, "timedep")
        traj.meta["propagators"] = V
        return traj
    raise ValueError(f"unknown engine {engine!r}")


@dataclass(eq=False)
class EngineRun:
    """Everything ``run_engines`` computed, before serialization."""

    trajectories: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    psi0: np.ndarray | None = None
    H_S_eff: np.ndarray | None = None
    exact: ExactResult | None = None

    def cross_differences(self) -> dict:
        names = list(self.trajectories)
        out = {}
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                diff = self.trajectories[a].states - self.trajectories[b].states
                out[f"{a}-{b}"] = float(np.max(np.linalg.norm(diff, axis=1)))
        return out


def run_engines(sc: Scenario, engines=None, tol: float | None = None) -> EngineRun:
    """Run the requested engines on one scenario.

    The exact engine runs first; if it applied a gauge shift, the shifted
    system Hamiltonian is used by every other engine so trajectories are
    directly comparable. Without an explicit ``run.psi0`` the propagating
    engines start from the exact conditional state (or a uniform
    superposition when the exact engine is not requested).
    """
    run = sc.config.run
    engines = tuple(engines or run.engines)
    out = EngineRun()
    H_S = sc.H_S
    if "exact" in engines:
        t = time.perf_counter()
        try:
            ex = solve_exact(sc, tol)
        except (NoPhysicalStateError, ConfigError) as exc:
            raise EngineError("exact", exc) from exc
        out.timing["exact"] = time.perf_counter() - t
        out.exact = ex
        H_S = ex.state.total.H_S_eff
        traj = ex.trajectory
        out.trajectories["exact"] = traj
        out.metrics["exact"] = {
            "constraint_residual": ex.state.residual,
            "eigenvalue": ex.state.eigenvalue,
            "shift": ex.shift,
            "n_physical_states": ex.n_states,
            "conditional_norm_drift": ex.state.conditional_norm_drift,
            "inner_product_drift": inner_product_drift(ex.state, ex.state, sc.clock),
            "residual_modified_se": ev.residual_modified_se(sc.kernel, H_S, traj, cyclic=True),
        }
    out.H_S_eff = H_S
    if run.psi0 is not None:
        psi0 = run.psi0 / np.linalg.norm(run.psi0)
    elif out.exact is not None:
        psi0 = out.exact.trajectory.states[run.k0].copy()
    else:
        psi0 = uniform_state(sc.n)
    out.psi0 = psi0
    for engine in engines:
        if engine == "exact":
            continue
        t = time.perf_counter()
        try:
            traj = engine_trajectory(sc, engine, psi0, H_S)
        except (ev.PicardConvergenceError, ValueError) as exc:
            raise EngineError(engine, exc) from exc
        out.timing[engine] = time.perf_counter() - t
        out.trajectories[engine] = traj
        m = {"residual_modified_se": ev.residual_modified_se(sc.kernel, H_S, traj, cyclic=False)}
        if "propagators" in traj.meta:
            V = traj.meta["propagators"]
            m["isometry_defects"] = [ev.isometry_defect(V[k]) for k in range(run.k0, sc.clock.d)]
        if engine == "series":
            m["order"] = run.series_order
        if engine == "picard":
            m["iterations"] = traj.meta["iterations"]
            m["contraction_ratio"] = traj.meta["ratio"]
        m["norm_rate_mismatch_max"] = float(np.max(np.abs(ev.norm_rate_mismatch(sc.kernel, traj))))
        out.metrics[engine] = m
    for name, traj in out.trajectories.items():
        out.metrics[name]["norms"] = [float(x) for x in traj.norms]
        out.metrics[name]["max_norm_deviation"] = float(np.max(np.abs(traj.norms - traj.norms[run.k0])))
    return out


def trajectory_csv(traj: ev.Trajectory) -> str:
    """CSV text: ``t``, then ``re_a, im_a`` per component, then ``norm``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = traj.states.shape[1]
    w.writerow(["t"] + [f"{p}_{a}" for a in range(n) for p in ("re", "im")] + ["norm"])
    for t, psi, norm in zip(traj.times, traj.states, traj.norms):
        row = [repr(float(t))]
        for z in psi:
            row += [repr(float(z.real)), repr(float(z.imag))]
        row.append(repr(float(norm)))
        w.writerow(row)
    return buf.getvalue()


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def cmd_run(cfg: ScenarioConfig, out_dir=None, tol: float | None = None, seed: int | None = None) -> dict:
    """Run the configured engines, write ``trajectory_<engine>.csv`` and ``report.json``."""
    sc = build_scenario(cfg, seed)
    res = run_engines(sc, tol=tol)
    out_dir = Path(out_dir if out_dir is not None else cfg.output.path)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, traj in res.trajectories.items():
        fname = f"trajectory_{name}.csv"
        (out_dir / fname).write_text(trajectory_csv(traj), encoding="utf-8")
        files[name] = fname
    cross = res.cross_differences()
    report = {
        "scenario": cfg.name,
        "backend": BACKEND,
        "config": cfg.to_dict(),
        "psi0": [[float(z.real), float(z.imag)] for z in res.psi0],
        "engines": res.metrics,
        "trajectory_files": files,
        "cross_differences": cross,
        "max_cross_difference": max(cross.values()) if cross else None,
        "clock": {"commutator_defect": commutator_defect(sc.clock)},
        "timing": res.timing,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return report


# --- sweeps ------------------------------------------------------------------

SWEEP_PARAMETERS = ("lambda", "dt", "d")
SWEEP_METRICS = (
    "composition_residual",
    "isometry_defect",
    "residual_exact",
    "residual_picard",
    "cross_engine_diff",
    "commutator_defect",
)


def composition_triple(d: int) -> tuple:
    """Default ordered slots ``k1 < k2 < k3`` spanning the grid (needs ``d >= 3``)."""
    return (d // 8 if d >= 16 else 0, d // 2, d - 1)


def sweep_variant(cfg: ScenarioConfig, parameter: str, value: float) -> ScenarioConfig:
    if parameter == "lambda":
        return cfg.with_lambda(value)
    period = cfg.clock.period
    if parameter == "dt":
        d = period / value
        if abs(d - round(d)) > 1e-9 * d:
            raise ConfigError("sweep", f"dt={value} does not divide the clock period {period}")
        d = int(round(d))
    elif parameter == "d":
        if value != int(value):
            raise ConfigError("sweep", f"d must be an integer, got {value}")
        d = int(value)
    else:
        raise ConfigError("sweep", f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
    if d != cfg.clock.d and not cfg.interaction.refinable:
        raise ConfigError("interaction", "explicitly sampled couplings cannot be resampled for a dt/d sweep")
    return cfg.with_clock(d, period / d)


def sweep_row(cfg: ScenarioConfig, seed: int | None = None, tol: float | None = None, order: int = 1) -> dict:
    """Metrics at one sweep point; composition and isometry use the order-``order`` series."""
    sc = build_scenario(cfg, seed)
    d = sc.clock.d
    N = order
    row = {"d": d, "dt": sc.clock.dt, "lambda": cfg.interaction.lam}
    row["composition_residual"] = (
        ev.composition_residual(sc.H_S, sc.kernel, N, *composition_triple(d), sc.clock) if d >= 3 else float("nan")
    )
    k0 = cfg.run.k0
    row["isometry_defect"] = ev.series_propagator(sc.H_S, sc.kernel, N, d - 1, k0, sc.clock).isometry_defect
    engines = tuple(dict.fromkeys(("picard",) + cfg.run.engines))
    row["residual_exact"] = row["residual_picard"] = row["cross_engine_diff"] = float("nan")
    notes = []
    try:
        res = run_engines(sc, engines, tol)
    except EngineError as exc:
        notes.append(str(exc))
        if exc.engine == "exact":
            try:
                res = run_engines(sc, tuple(e for e in engines if e != "exact"), tol)
            except EngineError as exc2:
                notes.append(str(exc2))
                res = None
        else:
            res = None
    if res is not None:
        if "exact" in res.metrics:
            row["residual_exact"] = res.metrics["exact"]["residual_modified_se"]
        if "picard" in res.metrics:
            row["residual_picard"] = res.metrics["picard"]["residual_modified_se"]
        cross = res.cross_differences()
        if cross:
            row["cross_engine_diff"] = max(cross.values())
    row["commutator_defect"] = commutator_defect(sc.clock)
    row["notes"] = "; ".join(notes)
    return row


def _slope(a, b, va, vb):
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        return float("nan")
    return math.log(b / a) / math.log(vb / va)


def cmd_sweep(cfg: ScenarioConfig, parameter: str, values, seed=None, tol=None, order: int = 1) -> list:
    """One row per value with residual metrics and log-log slopes to the previous row.

    With ``order = N`` the composition residual and isometry defect scale as
    ``lambda**(N+1)`` for norm-preserving kernels, so a lambda sweep at the
    default ``N = 1`` should show slope 2 for the composition residual.
    """
    if order < 0:
        raise ConfigError("sweep", f"series order must be >= 0, got {order}")
    values = [float(v) for v in values]
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError("sweep", f"unknown sweep parameter {parameter!r}; choose from {SWEEP_PARAMETERS}")
    if not values or any(v <= 0 for v in values):
        raise ConfigError("sweep", "sweep values must be positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep", "sweep values must be strictly increasing")
    rows = []
    for v in values:
        row = {"value": v}
        row.update(sweep_row(sweep_variant(cfg, parameter, v), seed, tol, order))
        rows.append(row)
    for prev, row in zip(rows, rows[1:]):
        for m in SWEEP_METRICS:
            row[f"slope_{m}"] = _slope(prev[m], row[m], prev["value"], row["value"])
    for m in SWEEP_METRICS:
        rows[0][f"slope_{m}"] = float("nan")
    return rows


def sweep_csv(rows) -> str:
    cols = ["value", "d", "dt", "lambda", *SWEEP_METRICS, *[f"slope_{m}" for m in SWEEP_METRICS], "notes"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else ("" if isinstance(r[c], float) and math.isnan(r[c]) else repr(r[c])) for c in cols])
    return buf.getvalue()
