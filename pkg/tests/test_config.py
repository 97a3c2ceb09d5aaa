import json

import numpy as np
import pytest

from condtime import evolution as ev
from condtime.config import ConfigError, ScenarioConfig, loads
from condtime.presets import PRESET_NAMES, load_preset, preset_text
from condtime.runner import build_scenario, cmd_run, cmd_sweep, run_engines, sweep_csv, trajectory_csv


def minimal(**over):
    data = {
        "name": "t",
        "clock": {"d": 16, "dt": 0.4},
        "system": {"preset": "qubit_z", "harmonic": 1},
        "interaction": {"kind": "none"},
        "run": {"engines": ["exact", "series", "picard", "timedep"]},
    }
    data.update(over)
    return data


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_roundtrip_presets(name):
    cfg = load_preset(name)
    text = cfg.dumps()
    assert loads(text).dumps() == text
    assert json.loads(text) == cfg.to_dict()


def test_roundtrip_explicit_matrices(rng):
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    A = A + A.conj().T
    data = minimal(
        clock={"d": 2, "dt": 0.5},
        system={"preset": "matrix", "matrix": [[[1.0, 0.0], [0.0, 0.5]], [[0.0, -0.5], [2.0, 0.0]]]},
        interaction={"kind": "generic", "lambda": 0.2, "matrix": [[[z.real, z.imag] for z in row] for row in A]},
        run={"engines": "exact", "psi0": [[1, 0], [0, 1]]},
    )
    cfg = ScenarioConfig.from_dict(data)
    assert loads(cfg.dumps()).dumps() == cfg.dumps()
    assert np.allclose(cfg.interaction.matrix, A)


def test_non_hermitian_interaction_rejected_at_parse():
    bad = [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]
    data = minimal(clock={"d": 1 + 1, "dt": 1.0}, interaction={"kind": "separable", "lambda": 0.1,
                   "terms": [{"f": {"preset": "constant", "value": 1.0}, "S": bad}]})
    with pytest.raises(ConfigError, match="Hermitian"):
        ScenarioConfig.from_dict(data)


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"clock": {"d": 1, "dt": 0.1}}, "clock"),
        ({"clock": {"d": 8, "dt": -0.1}}, "clock"),
        ({"system": {"preset": "qubit_z"}}, "system"),
        ({"system": {"preset": "qubit_z", "omega": 1, "harmonic": 1}}, "system"),
        ({"run": {"engines": ["warp"]}}, "run.engines"),
        ({"run": {"engines": ["series"], "k0": 3}}, "run.k0"),
        ({"run": {"engines": ["exact"], "k0": 99}}, "run.k0"),
        ({"run": {"engines": ["exact"], "psi0": [[1, 0]]}}, "run.psi0"),
        ({"output": {"format": "hdf5"}}, "output.format"),
        ({"interaction": {"kind": "generic", "smooth_random": {"seed": 1}}, "run": {"engines": ["timedep"]}}, "run.engines"),
        ({"interaction": {"kind": "separable", "terms": [{"f": [1.0, 2.0], "S": "x"}]}}, "interaction.terms[0].f"),
        ({"interaction": {"kind": "separable", "terms": [{"f": {"preset": "constant", "value": 1}, "S": "q"}]}},
         "interaction.terms[0].S"),
        ({"interaction": {"kind": "tensor"}}, "interaction.kind"),
    ],
)
def test_validation_errors(patch, field):
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_dict(minimal(**patch))
    assert info.value.field.startswith(field)


def test_json_error_has_line_number():
    with pytest.raises(ConfigError) as info:
        loads('{\n  "name": "x",\n  "clock": {"d": 4,, "dt": 1}\n}')
    assert info.value.line == 3


def test_function_presets_sample():
    cfg = ScenarioConfig.from_dict(minimal(interaction={
        "kind": "separable", "lambda": 1.0,
        "terms": [
            {"f": {"preset": "linear", "slope": 2.0, "intercept": 1.0}, "S": "z"},
            {"f": {"preset": "sinusoid", "amplitude": 0.5, "frequency": 3.0}, "S": "x"},
        ],
    }))
    inter = build_scenario(cfg).interaction
    t = cfg.clock.times
    assert np.allclose(inter.terms[0].f, 2 * t + 1)
    assert np.allclose(inter.terms[1].f, 0.5 * np.sin(3 * t))


def test_engine_alias_and_dedup():
    cfg = ScenarioConfig.from_dict(minimal(run={"engine": "picard"}))
    assert cfg.run.engines == ("picard",)
    cfg = ScenarioConfig.from_dict(minimal(run={"engines": ["exact", "exact"]}))
    assert cfg.run.engines == ("exact",)


def test_uncoupled_run_matches_schrodinger(tmp_path):
    cfg = ScenarioConfig.from_dict(minimal())
    report = cmd_run(cfg, tmp_path)
    sc = build_scenario(cfg)
    H = sc.H_S + report["engines"]["exact"]["shift"] * np.eye(2)
    psi0 = np.array([complex(*z) for z in report["psi0"]])
    ref = ev.free_propagators(H, sc.clock, 0) @ psi0
    for engine in ("series", "picard", "timedep"):
        rows = np.loadtxt(tmp_path / f"trajectory_{engine}.csv", delimiter=",", skiprows=1)
        states = rows[:, 1:-1:2] + 1j * rows[:, 2:-1:2]
        assert np.allclose(states, ref, atol=1e-12)
    assert report["max_cross_difference"] < 1e-10


def test_report_residuals_recomputable(tmp_path):
    cfg = load_preset("P3")
    report = cmd_run(cfg, tmp_path)
    sc = build_scenario(cfg)
    res = run_engines(sc)
    for name, traj in res.trajectories.items():
        cyclic = name == "exact"
        direct = ev.residual_modified_se(sc.kernel, res.H_S_eff, traj, cyclic=cyclic)
        assert report["engines"][name]["residual_modified_se"] == direct


def test_runs_are_deterministic(tmp_path):
    cfg = load_preset("P2")
    cmd_run(cfg, tmp_path / "a", seed=3)
    cmd_run(cfg, tmp_path / "b", seed=3)
    for engine in cfg.run.engines:
        name = f"trajectory_{engine}.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_seed_changes_generic_coupling(tmp_path):
    cfg = load_preset("P3")
    a = trajectory_csv(run_engines(build_scenario(cfg, 1), ("picard",)).trajectories["picard"])
    b = trajectory_csv(run_engines(build_scenario(cfg, 2), ("picard",)).trajectories["picard"])
    again = trajectory_csv(run_engines(build_scenario(cfg, 1), ("picard",)).trajectories["picard"])
    assert a != b and a == again


def test_csv_layout():
    cfg = ScenarioConfig.from_dict(minimal(run={"engines": ["exact"]}))
    text = trajectory_csv(run_engines(build_scenario(cfg)).trajectories["exact"])
    lines = text.splitlines()
    assert lines[0] == "t,re_0,im_0,re_1,im_1,norm"
    assert len(lines) == 17


def test_series_and_picard_report_cross_difference(tmp_path):
    cfg = ScenarioConfig.from_dict(minimal(
        interaction={"kind": "generic", "lambda": 0.1, "smooth_random": {"seed": 5}},
        run={"engines": ["series", "picard"], "series_order": 3},
    ))
    report = cmd_run(cfg, tmp_path)
    assert set(report["cross_differences"]) == {"series-picard"}
    assert 0 < report["max_cross_difference"] < 1e-3


def test_sweep_d_commutator_defect_decreases():
    rows = cmd_sweep(load_preset("P2"), "d", [8, 16, 32, 64])
    vals = [r["commutator_defect"] for r in rows]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_sweep_dt_residual_slope():
    cfg = load_preset("P3")
    period = cfg.clock.period
    rows = cmd_sweep(cfg, "dt", [period / 128, period / 64, period / 32])
    slopes = [r["slope_residual_exact"] for r in rows[1:]]
    assert all(1.8 < s < 2.2 for s in slopes)


def test_sweep_lambda_composition_slope():
    rows = cmd_sweep(load_preset("P3"), "lambda", [0.025, 0.05, 0.1])
    assert all(abs(r["slope_composition_residual"] - 2.0) < 0.1 for r in rows[1:])
    assert sweep_csv(rows).splitlines()[0].startswith("value,d,dt,lambda,")


@pytest.mark.parametrize("values", [[0.1, 0.05], [-1.0, 1.0], []])
def test_sweep_rejects_bad_values(values):
    with pytest.raises(ConfigError):
        cmd_sweep(load_preset("P3"), "lambda", values)


def test_sweep_rejects_non_dividing_dt():
    with pytest.raises(ConfigError):
        cmd_sweep(load_preset("P3"), "dt", [0.3])


def test_preset_text_is_valid_json():
    for name in PRESET_NAMES:
        assert json.loads(preset_text(name))["name"] == name
    with pytest.raises(KeyError):
        preset_text("P9")
