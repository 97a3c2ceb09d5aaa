"""Scenario configuration: JSON parsing, validation and canonical serialization.

Complex numbers are ``[re, im]`` pairs throughout; a matrix is a list of rows
of such pairs. See ``docs/CONFIG.md`` for the annotated schema.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .clock import Clock, ClockSpec
from .constraint import InteractionSpec, SeparableTerm, smooth_random_interaction
from .linalg import hermiticity_defect

ENGINES = ("exact", "series", "picard", "timedep")
PARSE_HERMITIAN_TOL = 1e-10

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "i": np.eye(2, dtype=complex),
}


class ConfigError(ValueError):
    """Invalid scenario configuration; ``field`` names the offending entry."""

    def __init__(self, field_path, message, line=None):
        self.field = field_path
        self.line = line
        where = f"line {line}" if line is not None else f"field '{field_path}'"
        super().__init__(f"{where}: {message}")


# --- low-level readers -------------------------------------------------------

def _get(d, key, path, default=..., kind=None):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
        return default
    val = d[key]
    p = f"{path}.{key}" if path else key
    if kind is not None and val is not None:
        try:
            if kind is int and (isinstance(val, bool) or int(val) != val):
                raise TypeError
            val = kind(val)
        except (TypeError, ValueError):
            raise ConfigError(p, f"expected {kind.__name__}, got {val!r}") from None
    return val


def _complex(x, path) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        return complex(float(x[0]), float(x[1]))
    raise ConfigError(path, f"expected a complex [re, im] pair, got {x!r}")


def parse_vector(data, path) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ConfigError(path, "expected a non-empty list of [re, im] pairs")
    return np.array([_complex(x, f"{path}[{i}]") for i, x in enumerate(data)], dtype=complex)


def parse_matrix(data, path, hermitian=True) -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ConfigError(path, "expected a matrix as a list of rows")
    n = len(data)
    if any(len(r) != n for r in data):
        raise ConfigError(path, f"matrix must be square ({n} rows)")
    m = np.array(
        [[_complex(x, f"{path}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(data)],
        dtype=complex,
    )
    if hermitian:
        defect = hermiticity_defect(m)
        if defect > PARSE_HERMITIAN_TOL:
            raise ConfigError(path, f"matrix is not Hermitian (defect {defect:.3e})")
        m = 0.5 * (m + m.conj().T)
    return m


def dump_vector(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def dump_matrix(m):
    return [dump_vector(row) for row in np.asarray(m, dtype=complex)]


# --- sections ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SystemConfig:
    """``qubit_z`` (``omega * sigma_z``), ``free_level`` (diagonal) or ``matrix``.

    For ``qubit_z`` either ``omega`` or ``harmonic`` is given; ``harmonic=m``
    means ``omega = 2 pi m / period``, which keeps the energies on the clock
    spectrum when the grid is refined at fixed period.
    """

    preset: str
    omega: float | None = None
    harmonic: int | None = None
    energies: tuple = ()
    matrix: np.ndarray | None = None

    @classmethod
    def parse(cls, data, path="system"):
        if "matrix" in data and "preset" not in data:
            return cls("matrix", matrix=parse_matrix(data["matrix"], f"{path}.matrix"))
        preset = _get(data, "preset", path, kind=str)
        if preset == "qubit_z":
            omega = _get(data, "omega", path, None, float)
            harmonic = _get(data, "harmonic", path, None, int)
            if (omega is None) == (harmonic is None):
                raise ConfigError(path, "qubit_z needs exactly one of 'omega' or 'harmonic'")
            return cls(preset, omega=omega, harmonic=harmonic)
        if preset == "free_level":
            energies = _get(data, "energies", path)
            if not isinstance(energies, list) or not energies:
                raise ConfigError(f"{path}.energies", "expected a non-empty list of reals")
            try:
                energies = tuple(float(e) for e in energies)
            except (TypeError, ValueError):
                raise ConfigError(f"{path}.energies", "energies must be real numbers") from None
            return cls(preset, energies=energies)
        if preset == "matrix":
            return cls(preset, matrix=parse_matrix(_get(data, "matrix", path), f"{path}.matrix"))
        raise ConfigError(f"{path}.preset", f"unknown system preset {preset!r}")

    def to_dict(self):
        if self.preset == "qubit_z":
            out = {"preset": "qubit_z"}
            if self.harmonic is not None:
                out["harmonic"] = self.harmonic
            else:
                out["omega"] = self.omega
            return out
        if self.preset == "free_level":
            return {"preset": "free_level", "energies": list(self.energies)}
        return {"preset": "matrix", "matrix": dump_matrix(self.matrix)}

    @property
    def dim(self) -> int:
        if self.preset == "qubit_z":
            return 2
        if self.preset == "free_level":
            return len(self.energies)
        return self.matrix.shape[0]

    def build(self, spec: ClockSpec) -> np.ndarray:
        if self.preset == "qubit_z":
            omega = self.omega if self.harmonic is None else 2 * np.pi * self.harmonic / spec.period
            return omega * PAULI["z"]
        if self.preset == "free_level":
            return np.diag(self.energies).astype(complex)
        return self.matrix.copy()


F_PRESETS = {
    "constant": ("value",),
    "linear": ("slope", "intercept"),
    "sinusoid": ("amplitude", "frequency", "phase"),
}


@dataclass(frozen=True, eq=False)
class FunctionConfig:
    """A real function of clock time, by preset or as explicit samples.

    ``sinusoid`` is ``amplitude * sin(frequency * (t - t0) + phase)``; it
    accepts ``harmonic`` in place of ``frequency`` (``2 pi m / period``).
    """

    preset: str
    params: dict = field(default_factory=dict)
    samples: np.ndarray | None = None

    @classmethod
    def parse(cls, data, path):
        if isinstance(data, list):
            try:
                return cls("samples", samples=np.array([float(x) for x in data]))
            except (TypeError, ValueError):
                raise ConfigError(path, "sampled f must be a list of reals") from None
        preset = _get(data, "preset", path, kind=str)
        if preset == "samples":
            return cls.parse(_get(data, "values", path), f"{path}.values")
        if preset not in F_PRESETS:
            raise ConfigError(f"{path}.preset", f"unknown function preset {preset!r}")
        params = {}
        allowed = set(F_PRESETS[preset]) | ({"harmonic"} if preset == "sinusoid" else set())
        for key in data:
            if key != "preset" and key not in allowed:
                raise ConfigError(f"{path}.{key}", f"unknown parameter for {preset}")
        for key in F_PRESETS[preset]:
            if key == "frequency" and "harmonic" in data:
                if "frequency" in data:
                    raise ConfigError(path, "give either 'frequency' or 'harmonic', not both")
                params["harmonic"] = _get(data, "harmonic", path, kind=int)
                continue
            default = 0.0 if key in ("phase", "intercept") else ...
            params[key] = _get(data, key, path, default, float)
        return cls(preset, params)

    def to_dict(self):
        if self.preset == "samples":
            return {"preset": "samples", "values": [float(x) for x in self.samples]}
        return {"preset": self.preset, **self.params}

    def sample(self, spec: ClockSpec, path="f") -> np.ndarray:
        t = spec.times - spec.t0
        p = self.params
        if self.preset == "samples":
            if self.samples.shape != (spec.d,):
                raise ConfigError(path, f"{self.samples.shape[0]} samples given but clock has d={spec.d}")
            return self.samples.copy()
        if self.preset == "constant":
            return np.full(spec.d, p["value"])
        if self.preset == "linear":
            return p["slope"] * t + p["intercept"]
        freq = p["frequency"] if "frequency" in p else 2 * np.pi * p["harmonic"] / spec.period
        return p["amplitude"] * np.sin(freq * t + p["phase"])


def _parse_operator(data, path):
    if isinstance(data, str):
        if data.lower() not in PAULI:
            raise ConfigError(path, f"unknown named operator {data!r} (use x, y, z, i or a matrix)")
        return data.lower()
    return parse_matrix(data, path)


@dataclass(frozen=True, eq=False)
class InteractionConfig:
    kind: str = "none"
    lam: float = 0.0
    terms: tuple = ()  # of (FunctionConfig, operator name or matrix)
    matrix: np.ndarray | None = None
    smooth_random: dict | None = None

    @classmethod
    def parse(cls, data, path="interaction"):
        kind = _get(data, "kind", path, kind=str)
        lam = _get(data, "lambda", path, 0.0, float)
        if kind == "none":
            return cls("none", lam)
        if kind == "separable":
            raw = _get(data, "terms", path)
            if not isinstance(raw, list) or not raw:
                raise ConfigError(f"{path}.terms", "expected a non-empty list of terms")
            terms = []
            for i, t in enumerate(raw):
                tp = f"{path}.terms[{i}]"
                terms.append(
                    (FunctionConfig.parse(_get(t, "f", tp), f"{tp}.f"), _parse_operator(_get(t, "S", tp), f"{tp}.S"))
                )
            return cls("separable", lam, tuple(terms))
        if kind == "generic":
            if "matrix" in data:
                return cls("generic", lam, matrix=parse_matrix(data["matrix"], f"{path}.matrix"))
            sr = _get(data, "smooth_random", path)
            sp = f"{path}.smooth_random"
            params = {
                "seed": _get(sr, "seed", sp, 0, int),
                "modes": _get(sr, "modes", sp, 2, int),
                "scale": _get(sr, "scale", sp, 1.0, float),
            }
            if params["modes"] < 0:
                raise ConfigError(f"{sp}.modes", "must be non-negative")
            return cls("generic", lam, smooth_random=params)
        raise ConfigError(f"{path}.kind", f"unknown interaction kind {kind!r}")

    def to_dict(self):
        out = {"kind": self.kind, "lambda": self.lam}
        if self.kind == "separable":
            out["terms"] = [
                {"f": f.to_dict(), "S": S if isinstance(S, str) else dump_matrix(S)} for f, S in self.terms
            ]
        elif self.kind == "generic":
            if self.matrix is not None:
                out["matrix"] = dump_matrix(self.matrix)
            else:
                out["smooth_random"] = dict(self.smooth_random)
        return out

    @property
    def refinable(self) -> bool:
        """Whether the coupling is defined independently of the grid size."""
        if self.kind == "generic":
            return self.matrix is None
        return all(f.preset != "samples" for f, _ in self.terms)

    def build(self, clock: Clock, n: int, seed: int | None = None) -> InteractionSpec:
        if self.kind == "none":
            return InteractionSpec("none", lam=self.lam)
        if self.kind == "separable":
            terms = []
            for i, (f, S) in enumerate(self.terms):
                op = PAULI[S] if isinstance(S, str) else S
                if op.shape != (n, n):
                    raise ConfigError(f"interaction.terms[{i}].S", f"operator is {op.shape}, system dimension is {n}")
                terms.append(SeparableTerm(f.sample(clock.spec, f"interaction.terms[{i}].f"), op))
            return InteractionSpec("separable", tuple(terms), lam=self.lam)
        if self.matrix is not None:
            if self.matrix.shape != (clock.d * n,) * 2:
                raise ConfigError("interaction.matrix", f"matrix is {self.matrix.shape}, expected {(clock.d * n,) * 2}")
            return InteractionSpec("generic", matrix=self.matrix, lam=self.lam)
        params = dict(self.smooth_random)
        if seed is not None:
            params["seed"] = seed
        return InteractionSpec("generic", matrix=smooth_random_interaction(clock, n, **params), lam=self.lam)


@dataclass(frozen=True, eq=False)
class RunConfig:
    engines: tuple = ("exact",)
    series_order: int = 2
    picard_tol: float = 1e-12
    picard_max_iter: int = 200
    k0: int = 0
    psi0: np.ndarray | None = None
    auto_shift: bool = True
    tol: float | None = None
    state_index: int = 0

    @classmethod
    def parse(cls, data, path="run"):
        raw = data.get("engines", data.get("engine", "exact")) if isinstance(data, dict) else None
        if raw is None:
            raise ConfigError(path, "expected an object")
        engines = (raw,) if isinstance(raw, str) else raw
        if not isinstance(engines, (list, tuple)) or not engines:
            raise ConfigError(f"{path}.engines", "expected an engine name or a list of them")
        for e in engines:
            if e not in ENGINES:
                raise ConfigError(f"{path}.engines", f"unknown engine {e!r}; choose from {ENGINES}")
        picard = _get(data, "picard", path, {})
        psi0 = _get(data, "psi0", path, None)
        out = cls(
            engines=tuple(dict.fromkeys(engines)),
            series_order=_get(data, "series_order", path, 2, int),
            picard_tol=_get(picard, "tol", f"{path}.picard", 1e-12, float),
            picard_max_iter=_get(picard, "max_iter", f"{path}.picard", 200, int),
            k0=_get(data, "k0", path, 0, int),
            psi0=None if psi0 is None else parse_vector(psi0, f"{path}.psi0"),
            auto_shift=bool(_get(data, "auto_shift", path, True)),
            tol=_get(data, "tol", path, None, float),
            state_index=_get(data, "state_index", path, 0, int),
        )
        if out.series_order < 0:
            raise ConfigError(f"{path}.series_order", "must be non-negative")
        if out.picard_max_iter < 1 or out.picard_tol <= 0:
            raise ConfigError(f"{path}.picard", "max_iter must be >= 1 and tol > 0")
        if out.psi0 is not None and not np.linalg.norm(out.psi0) > 0:
            raise ConfigError(f"{path}.psi0", "initial state must be nonzero")
        return out

    def to_dict(self):
        out = {
            "engines": list(self.engines),
            "series_order": self.series_order,
            "picard": {"tol": self.picard_tol, "max_iter": self.picard_max_iter},
            "k0": self.k0,
            "auto_shift": self.auto_shift,
            "state_index": self.state_index,
        }
        if self.psi0 is not None:
            out["psi0"] = dump_vector(self.psi0)
        if self.tol is not None:
            out["tol"] = self.tol
        return out


@dataclass(frozen=True)
class OutputConfig:
    path: str = "out"
    format: str = "csv"

    @classmethod
    def parse(cls, data, path="output"):
        fmt = _get(data, "format", path, "csv", str)
        if fmt != "csv":
            raise ConfigError(f"{path}.format", f"unsupported output format {fmt!r} (only csv)")
        return cls(_get(data, "path", path, "out", str), fmt)

    def to_dict(self):
        return {"path": self.path, "format": self.format}


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    clock: ClockSpec
    system: SystemConfig
    interaction: InteractionConfig
    run: RunConfig
    output: OutputConfig = OutputConfig()
    description: str = ""
    seed: int | None = None

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("", "top level must be a JSON object")
        c = _get(data, "clock", "")
        try:
            spec = ClockSpec(
                _get(c, "d", "clock", kind=int), _get(c, "t0", "clock", 0.0, float), _get(c, "dt", "clock", kind=float)
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError("clock", str(exc)) from None
        system = SystemConfig.parse(_get(data, "system", ""), "system")
        interaction = InteractionConfig.parse(_get(data, "interaction", "", {"kind": "none"}), "interaction")
        run = RunConfig.parse(_get(data, "run", "", {}), "run")
        cfg = cls(
            name=_get(data, "name", "", "scenario", str),
            clock=spec,
            system=system,
            interaction=interaction,
            run=run,
            output=OutputConfig.parse(_get(data, "output", "", {}), "output"),
            description=_get(data, "description", "", "", str),
            seed=_get(data, "seed", "", None, int),
        )
        cfg.validate()
        return cfg

    def validate(self):
        n = self.system.dim
        if self.run.psi0 is not None and self.run.psi0.shape != (n,):
            raise ConfigError("run.psi0", f"initial state has {self.run.psi0.shape[0]} amplitudes, system dimension is {n}")
        if not 0 <= self.run.k0 < self.clock.d:
            raise ConfigError("run.k0", f"k0={self.run.k0} outside the clock grid (d={self.clock.d})")
        if self.run.k0 != 0 and {"series", "timedep"} & set(self.run.engines):
            raise ConfigError("run.k0", "series and timedep engines propagate forward only; use k0 = 0")
        if "timedep" in self.run.engines and self.interaction.kind == "generic":
            raise ConfigError("run.engines", "engine 'timedep' needs a separable or vanishing interaction")
        for i, (f, S) in enumerate(self.interaction.terms):
            if f.preset == "samples" and f.samples.shape != (self.clock.d,):
                raise ConfigError(
                    f"interaction.terms[{i}].f", f"{f.samples.shape[0]} samples given but clock has d={self.clock.d}"
                )
            dim = 2 if isinstance(S, str) else S.shape[0]
            if dim != n:
                raise ConfigError(f"interaction.terms[{i}].S", f"operator dimension {dim} != system dimension {n}")
        if self.interaction.matrix is not None and self.interaction.matrix.shape[0] != self.clock.d * n:
            raise ConfigError("interaction.matrix", f"matrix must be {self.clock.d * n} x {self.clock.d * n}")

    def to_dict(self):
        out = {"name": self.name}
        if self.description:
            out["description"] = self.description
        out["clock"] = {"d": self.clock.d, "t0": self.clock.t0, "dt": self.clock.dt}
        out["system"] = self.system.to_dict()
        out["interaction"] = self.interaction.to_dict()
        out["run"] = self.run.to_dict()
        out["output"] = self.output.to_dict()
        if self.seed is not None:
            out["seed"] = self.seed
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    # --- derived scenarios used by sweeps and convergence checks ---

    def with_clock(self, d: int, dt: float) -> "ScenarioConfig":
        return replace(self, clock=ClockSpec(d, self.clock.t0, dt))

    def refined(self, factor: int) -> "ScenarioConfig":
        """Same period, ``factor`` times more clock states."""
        if not self.interaction.refinable:
            raise ConfigError("interaction", "explicitly sampled couplings cannot be refined")
        return self.with_clock(self.clock.d * factor, self.clock.dt / factor)

    def with_lambda(self, lam: float) -> "ScenarioConfig":
        return replace(self, interaction=replace(self.interaction, lam=float(lam)))


def loads(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    return ScenarioConfig.from_dict(data)


def load(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
