"""Shipped scenarios.

P1: uncoupled qubit whose energies lie on the clock spectrum (ordinary
Schrodinger evolution). P2: separable sinusoidal drive (time-dependent
Hamiltonian). P3: generic nonlocal coupling at small lambda (time-nonlocal
equation).
"""
from importlib import resources

from .config import ScenarioConfig, loads

PRESET_NAMES = ("P1", "P2", "P3")


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    return resources.files("condtime").joinpath("presets", f"{name}.json").read_text(encoding="utf-8")


def load_preset(name: str) -> ScenarioConfig:
    return loads(preset_text(name))
