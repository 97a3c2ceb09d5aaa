"""Exit criteria, one test per criterion, each at its pinned tolerance.

Every test records a ``[PASS]``/``[FAIL]`` line; the lines are printed as
they are produced (visible with ``-s``) and again in the terminal summary.
Run this file directly (``python tests/test_acceptance.py``) for the lines
alone.
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from condtime import evolution as ev
from condtime.clock import ClockSpec, build_clock, periodicity_defect, translation_defect
from condtime.constraint import InteractionSpec
from condtime.presets import load_preset
from condtime.runner import build_scenario, composition_triple, solve_exact, uniform_state

RESULTS = {}

DT_RATIO = (3.2, 4.8)
LAM_RATIO = (3.4, 4.7)


def record(key, ok, text, seconds=None):
    t = "" if seconds is None else f" [{seconds:.2f} s]"
    line = f"[{'PASS' if ok else 'FAIL'}] {key}: {text}{t}"
    RESULTS[key] = line
    print(line)
    return ok


def ratios(errs):
    return [a / b for a, b in zip(errs, errs[1:])]


def in_range(rs, lo, hi):
    return all(lo <= r <= hi for r in rs)


def fmt(xs):
    return "[" + ", ".join(f"{x:.4g}" for x in xs) + "]"


def scenarios(name, factors=(1, 2, 4), lam=None):
    cfg = load_preset(name)
    if lam is not None:
        cfg = cfg.with_lambda(lam)
    return [build_scenario(cfg if f == 1 else cfg.refined(f)) for f in factors]


def picard_V(sc):
    return ev.picard_propagators(sc.H_S, sc.kernel, 0, sc.clock, max_iter=500, tol=1e-13)[0]


def test_1_schrodinger_reduction():
    t = time.perf_counter()
    sc = build_scenario(load_preset("P1"))
    assert (sc.clock.d, sc.n, sc.config.interaction.lam) == (64, 2, 0.0)
    ex = solve_exact(sc)
    states = ex.trajectory.states
    U = ev.free_propagators(ex.state.total.H_S_eff, sc.clock, 0)
    fid = np.abs(np.einsum("ka,kab,b->k", states.conj(), U, states[0]))
    fid /= np.linalg.norm(states, axis=1) * np.linalg.norm(states[0])
    dt = time.perf_counter() - t
    ok = record("criterion 1 (Schrodinger reduction, P1)", fid.min() >= 1 - 1e-9 and dt < 5,
                f"min_k fidelity = {fid.min():.15f} (>= 1 - 1e-9), runtime < 5 s", dt)
    assert ok


def test_2_separable_reduction():
    t = time.perf_counter()
    off, errs = [], []
    for sc in scenarios("P2"):
        off.append(sc.kernel.offdiagonal_max())
        psi0 = uniform_state(sc.n)
        tr = ev.picard_solve(sc.H_S, sc.kernel, psi0, 0, sc.clock, 200, 1e-12)
        V = ev.time_ordered_stack(sc.H_S, sc.interaction, 0, sc.clock)
        errs.append(float(np.max(np.linalg.norm(tr.states - V @ psi0, axis=1))))
    dt = time.perf_counter() - t
    rs = ratios(errs)
    ok = all(o == 0.0 for o in off) and in_range(rs, *DT_RATIO) and dt < 10
    ok = record("criterion 2 (separable reduction, P2)", ok,
                f"off-diagonal max = {max(off)}; Picard vs time-ordered {fmt(errs)}, dt-halving ratios {fmt(rs)} in {DT_RATIO}", dt)
    assert ok


def test_3_series_order():
    t = time.perf_counter()
    cfg = load_preset("P3")
    lam = cfg.interaction.lam
    pair = [build_scenario(cfg.with_lambda(x)) for x in (lam, lam / 2)]
    Vp = [picard_V(sc) for sc in pair]
    lines, ok = [], True
    for N in (1, 2):
        errs = []
        for sc, V in zip(pair, Vp):
            S = ev.series_terms(sc.H_S, sc.kernel, N, 0, sc.clock).sum(axis=0)
            errs.append(float(np.max(np.linalg.norm(S - V, axis=(1, 2)))))
        r = errs[0] / errs[1]
        target = 2 ** (N + 1)
        ok &= 0.75 * target <= r <= 1.25 * target
        lines.append(f"N={N} ratio {r:.3f} (target {target} +- 25%)")
    dt = time.perf_counter() - t
    ok = record("criterion 3 (series order, P3)", ok and dt < 30, "; ".join(lines), dt)
    assert ok


def test_4_composition_law():
    t = time.perf_counter()
    cfg = load_preset("P3")
    lam = cfg.interaction.lam
    trip = composition_triple(cfg.clock.d)
    vals = []
    for x in (lam, lam / 2):
        sc = build_scenario(cfg.with_lambda(x))
        vals.append(ev.composition_residual(sc.H_S, sc.kernel, 1, *trip, sc.clock))
    dt = time.perf_counter() - t
    r = vals[0] / vals[1]
    ok = record("criterion 4 (composition law, P3, N=1)", LAM_RATIO[0] <= r <= LAM_RATIO[1] and dt < 10,
                f"slots {trip}, residuals {fmt(vals)}, lambda-halving ratio {r:.4f} in {LAM_RATIO}", dt)
    assert ok


def test_5_isometry():
    t = time.perf_counter()
    cfg = load_preset("P2")
    lam, k = cfg.interaction.lam, cfg.clock.d - 1
    iso = []
    for x in (lam, lam / 2):
        sc = build_scenario(cfg.with_lambda(x))
        iso.append(ev.series_propagator(sc.H_S, sc.kernel, 1, k, 0, sc.clock).isometry_defect)
    r_iso = iso[0] / iso[1]
    drifts, bounds = [], []
    for sc in scenarios("P2"):
        tr = ev.picard_solve(sc.H_S, sc.kernel, uniform_state(sc.n), 0, sc.clock, 200, 1e-12)
        drifts.append(float(np.max(np.abs(tr.norms - 1.0))))
        # scale: period * Lambda^3, Lambda the largest instantaneous generator norm
        gen = np.linalg.norm(sc.H_S, 2) + np.max(np.linalg.norm(sc.kernel.diagonal(), ord=2, axis=(1, 2)))
        bounds.append(5 * sc.clock.dt ** 2 * sc.clock.spec.period * gen ** 3)
    rs = ratios(drifts)
    ok = (LAM_RATIO[0] <= r_iso <= LAM_RATIO[1] and in_range(rs, *DT_RATIO)
          and all(d <= b for d, b in zip(drifts, bounds)))
    dt = time.perf_counter() - t
    ok = record("criterion 5 (isometry, P2)", ok,
                f"N=1 isometry defect lambda-halving ratio {r_iso:.4f} in {LAM_RATIO}; Picard norm drift {fmt(drifts)} "
                f"<= 5 dt^2 scale {fmt(bounds)}, dt-halving ratios {fmt(rs)} in {DT_RATIO}", dt)
    assert ok


def _norm_rate_terms(sc):
    tr = ev.picard_solve(sc.H_S, sc.kernel, uniform_state(sc.n), 0, sc.clock, 200, 1e-12)
    functional = np.array([ev.norm_preservation_functional(sc.kernel, tr, k) for k in range(sc.clock.d)])[1:-1]
    rate = ev.centered_derivative(tr.norms ** 2, sc.clock.dt, cyclic=False)
    return functional, rate


def test_6_norm_preservation_equivalence():
    t = time.perf_counter()
    literal, corrected, fnorm = [], [], []
    for sc in scenarios("P3"):
        functional, rate = _norm_rate_terms(sc)
        literal.append(float(np.max(np.abs(functional + 0.5 * rate))))
        corrected.append(float(np.max(np.abs(functional - 0.5 * rate))))
        fnorm.append(float(np.max(np.abs(functional))))
    dt = time.perf_counter() - t
    rs, rc = ratios(literal), ratios(corrected)
    # Companion line, not a criterion: the same comparison with the sign that follows from the
    # modified equation (d/dt ||psi||^2 = 2 Im <psi|H_K psi>).
    record("criterion 6 companion (functional - 1/2 d/dt||psi||^2, P3)", in_range(rc, *DT_RATIO),
           f"max mismatch {fmt(corrected)}, dt-halving ratios {fmt(rc)} in {DT_RATIO}")
    ok = record("criterion 6 (norm-preservation equivalence, P3)", in_range(rs, *DT_RATIO),
                f"max_k |functional + 1/2 d/dt||psi||^2| = {fmt(literal)} (max |functional| {fmt(fnorm)}), "
                f"dt-halving ratios {fmt(rs)} in {DT_RATIO}", dt)
    assert ok


def test_7_kernel_self_adjointness():
    rng = np.random.default_rng(7)
    worst, shapes = 0.0, []
    for _ in range(20):
        d, n = int(rng.integers(2, 17)), int(rng.integers(1, 5))
        A = rng.standard_normal((d * n, d * n)) + 1j * rng.standard_normal((d * n, d * n))
        clock = build_clock(ClockSpec(d, 0.0, 0.1))
        K = ev.build_kernel(InteractionSpec("generic", matrix=0.5 * (A + A.conj().T), lam=float(rng.uniform(0.01, 2))), clock, n)
        worst = max(worst, K.hermiticity_defect())
        shapes.append((d, n))
    ok = record("criterion 7 (kernel self-adjointness)", worst <= 1e-12,
                f"max block-Hermiticity defect over 20 instances (d <= 16, n <= 4) = {worst:.3e} (<= 1e-12)")
    assert ok


def test_8_modified_equation_on_conditioned_states():
    t = time.perf_counter()
    errs = []
    cfg = load_preset("P3")
    assert cfg.run.auto_shift
    for sc in scenarios("P3"):
        ex = solve_exact(sc, auto_shift=True)
        errs.append(ev.residual_modified_se(sc.kernel, ex.state.total.H_S_eff, ex.trajectory, cyclic=True))
    dt = time.perf_counter() - t
    rs = ratios(errs)
    ok = record("criterion 8 (modified equation on conditioned states, P3, d = 32/64/128)", in_range(rs, *DT_RATIO),
                f"residuals {fmt(errs)}, dt-halving ratios {fmt(rs)} in {DT_RATIO}", dt)
    assert ok


def test_9_clock_algebra():
    trans, per = [], []
    for dt in (0.1, 0.05, 1.0):
        clock = build_clock(ClockSpec(64, 0.0, dt))
        trans.append(translation_defect(clock))
        per.append(periodicity_defect(clock))
    ok = record("criterion 9 (clock algebra, d=64)", max(trans) <= 1e-12 and max(per) <= 1e-10,
                f"translation defect {max(trans):.3e} (<= 1e-12), periodicity defect {max(per):.3e} (<= 1e-10)")
    assert ok


def test_10_verify_all_presets(tmp_path):
    t = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "condtime", "verify", "--all-presets", "--out", str(tmp_path)],
        capture_output=True, text=True, timeout=600,
    )
    dt = time.perf_counter() - t
    ok = record("criterion 10 (verify on P1, P2, P3)", proc.returncode == 0 and dt < 120,
                f"exit code {proc.returncode}, {dt:.1f} s (< 120 s)", dt)
    assert ok, proc.stdout + proc.stderr


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
