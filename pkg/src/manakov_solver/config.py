"""Configuration system: scheme registry, per-run scheme settings and experiment files."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

from .analytic import SolitonParams
from .errors import ConfigError
from .field import Field, Grid1D, discrete_h1_norm

OUTPUT_DIR_ENV = "MANAKOV_OUTPUT_DIR"

# Multiplies the initial H1 norm when the guard is on without an explicit radius.
DEFAULT_GUARD_FACTOR = 10.0


class Scheme(Enum):
    """Registered time-stepping schemes."""

    CRANK_NICOLSON = ("crank_nicolson", "Crank-Nicolson midpoint, implicit cubic term")
    RELAXATION = ("relaxation", "Linearly implicit relaxation of the cubic term")
    SPLIT_STEP = ("split_step", "Fourier split-step, Lie splitting")
    EULER_ITO = ("euler_ito", "Explicit Euler on the Ito form (non-conservative baseline)")

    def __init__(self, scheme_name: str, description: str) -> None:
        self.scheme_name = scheme_name
        self.description = description

    @classmethod
    def from_name(cls, name: str) -> Scheme:
        """Get scheme by name."""
        name_lower = name.lower().replace(" ", "_").replace("-", "_")
        for scheme in cls:
            if scheme.scheme_name == name_lower:
                return scheme
        raise ValueError(f"Unknown scheme: {name}")

    @classmethod
    def list_schemes(cls) -> list[str]:
        """List all available scheme names."""
        return [scheme.scheme_name for scheme in cls]


def _hash(payload: dict[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SchemeConfig:
    """Numerical settings of a single run."""

    scheme: Scheme
    dt: float
    gamma: float
    grid: Grid1D
    nl_tol: float = 1e-12
    nl_max_iter: int = 50
    guard_radius: float | None = None  # None disables the blow-up guard
    guard_constant: float = 1.0
    overflow_cap: float = 1e6
    snapshot_every: int = 0  # 0 disables snapshots
    nonlinear: bool = True  # test hook: False drops the cubic term

    def __post_init__(self) -> None:
        errors = []
        if not self.dt > 0:
            errors.append(f"dt: must be positive, got {self.dt}")
        if self.gamma < 0:
            errors.append(f"gamma: must be nonnegative, got {self.gamma}")
        if not self.nl_tol > 0:
            errors.append(f"nl_tol: must be positive, got {self.nl_tol}")
        if self.nl_max_iter < 1:
            errors.append(f"nl_max_iter: must be >= 1, got {self.nl_max_iter}")
        if not self.overflow_cap > 0:
            errors.append(f"overflow_cap: must be positive, got {self.overflow_cap}")
        if self.snapshot_every < 0:
            errors.append(f"snapshot_every: must be >= 0, got {self.snapshot_every}")
        if self.guard_radius is not None:
            if not self.guard_radius > 0:
                errors.append(f"guard_radius: must be positive, got {self.guard_radius}")
            elif self.dt > self.guard_constant / self.guard_radius**2:
                errors.append(
                    f"dt: {self.dt} violates dt <= C2 / R0^2 = "
                    f"{self.guard_constant / self.guard_radius**2:.6g}"
                )
        if errors:
            raise ConfigError(errors)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["scheme"] = self.scheme.scheme_name
        return data

    def config_hash(self) -> str:
        return _hash(self.to_dict())


@dataclass
class GridConfig:
    """Spatial discretisation."""

    half_width: float = 30.0
    interior_points: int = 512

    def grid(self) -> Grid1D:
        return Grid1D(self.half_width, self.interior_points)


@dataclass
class LadderConfig:
    """Time horizon and the dyadic ladder N_fine = N_coarse * 2**levels."""

    horizon: float = 1.0
    n_coarse: int = 32
    levels: int = 4

    @property
    def n_fine(self) -> int:
        return self.n_coarse * 2**self.levels

    def steps(self) -> list[int]:
        """Step counts from coarsest to finest."""
        return [self.n_coarse * 2**level for level in range(self.levels + 1)]


@dataclass
class SolverConfig:
    """Schemes and their shared numerical controls."""

    schemes: list[str] = field(default_factory=lambda: ["crank_nicolson"])
    gamma: float = 0.1
    nl_tol: float = 1e-12
    nl_max_iter: int = 50
    guard: bool = False
    guard_radius: float | None = None  # defaults to 10x initial H1 norm
    guard_constant: float = 1.0
    overflow_cap: float = 1e6
    reference_scheme: str = "crank_nicolson"


@dataclass
class RunConfig:
    """Seeds, outputs and execution."""

    seeds: list[int] = field(default_factory=lambda: list(range(1, 9)))
    norm_kinds: list[str] = field(default_factory=lambda: ["L2rel", "LInfRel", "H1"])
    output_directory: str = "./output"
    snapshot_every: int = 0
    workers: int = 1
    comparison_steps: int | None = None  # defaults to n_coarse * 2**(levels - 1)


_SECTIONS: dict[str, type] = {
    "grid": GridConfig,
    "soliton": SolitonParams,
    "ladder": LadderConfig,
    "solver": SolverConfig,
    "run": RunConfig,
}

_REQUIRED: dict[str, tuple[str, ...]] = {
    "grid": ("half_width", "interior_points"),
    "soliton": ("eta",),
    "ladder": ("horizon", "n_coarse", "levels"),
    "solver": ("schemes", "gamma"),
    "run": ("seeds",),
}

_NORM_KINDS = ("L2rel", "LInfRel", "H1")


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return (isinstance(value, (int, float)) and not isinstance(value, bool)) and math.isfinite(
        value
    )


@dataclass
class ExperimentConfig:
    """Complete configuration of a convergence study or scheme comparison."""

    name: str = "stochastic_manakov"
    grid: GridConfig = field(default_factory=GridConfig)
    soliton: SolitonParams = field(default_factory=SolitonParams.reference)
    ladder: LadderConfig = field(default_factory=LadderConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @classmethod
    def desk(cls) -> ExperimentConfig:
        """Small almost-sure-order study that runs in minutes on one core."""
        return cls(
            name="desk",
            solver=SolverConfig(
                schemes=["crank_nicolson", "relaxation", "split_step", "euler_ito"]
            ),
        )

    @classmethod
    def full_scale(cls) -> ExperimentConfig:
        """Large almost-sure-order study: M = 20000 on [-30, 30], T = 4, N_fine = 2560."""
        return cls(
            name="full_scale",
            grid=GridConfig(half_width=30.0, interior_points=20000),
            ladder=LadderConfig(horizon=4.0, n_coarse=40, levels=6),
            solver=SolverConfig(
                schemes=["crank_nicolson", "relaxation", "split_step", "euler_ito"]
            ),
            run=RunConfig(seeds=[1], comparison_steps=640),
        )

    @property
    def schemes(self) -> list[Scheme]:
        return [Scheme.from_name(name) for name in self.solver.schemes]

    @property
    def reference_scheme(self) -> Scheme:
        return Scheme.from_name(self.solver.reference_scheme)

    @property
    def comparison_steps(self) -> int:
        if self.run.comparison_steps is not None:
            return self.run.comparison_steps
        return self.ladder.n_coarse * 2 ** max(self.ladder.levels - 1, 0)

    @property
    def comparison_level(self) -> int:
        return self.ladder.steps().index(self.comparison_steps)

    def deviations(self) -> list[str]:
        """Notes recorded with every report on how the ladder, grid and H1 error were built."""
        notes = [
            f"dyadic ladder: N_fine = {self.ladder.n_coarse} * 2^{self.ladder.levels} "
            f"= {self.ladder.n_fine}",
            "split-step wavenumbers h_k = 2*pi*fftfreq(M, dx) on the interior nodes",
            f"err_H1max: max over the {self.ladder.n_coarse} times t_k = k * T / "
            f"{self.ladder.n_coarse} shared by every ladder level",
        ]
        return notes

    def scheme_config(
        self, scheme: Scheme, n_steps: int, x0: Field | None = None
    ) -> SchemeConfig:
        """Per-run settings for ``scheme`` with dt = horizon / n_steps.

        ``x0`` is needed to size the guard radius when the guard is on
        without an explicit radius.
        """
        guard_radius = None
        if self.solver.guard:
            guard_radius = self.solver.guard_radius
            if guard_radius is None:
                if x0 is None:
                    raise ConfigError("solver.guard_radius: initial data needed for default")
                guard_radius = DEFAULT_GUARD_FACTOR * discrete_h1_norm(x0)
        return SchemeConfig(
            scheme=scheme,
            dt=self.ladder.horizon / n_steps,
            gamma=self.solver.gamma,
            grid=self.grid.grid(),
            nl_tol=self.solver.nl_tol,
            nl_max_iter=self.solver.nl_max_iter,
            guard_radius=guard_radius,
            guard_constant=self.solver.guard_constant,
            overflow_cap=self.solver.overflow_cap,
            snapshot_every=self.run.snapshot_every,
        )

    def validate(self) -> None:
        """Raise ConfigError naming every invalid field."""
        errors: list[str] = []

        def check(ok: bool, key: str, message: str) -> None:
            if not ok:
                errors.append(f"{key}: {message}")

        g = self.grid
        check(_is_number(g.half_width) and g.half_width > 0, "grid.half_width", "must be > 0")
        check(
            _is_int(g.interior_points) and g.interior_points >= 2,
            "grid.interior_points",
            "must be an integer >= 2",
        )

        s = self.soliton
        for name in ("theta", "phi1", "phi2", "eta", "k", "tau0", "alpha0"):
            check(_is_number(getattr(s, name)), f"soliton.{name}", "must be a finite number")
        check(_is_number(s.eta) and s.eta > 0, "soliton.eta", "must be > 0")

        lad = self.ladder
        check(_is_number(lad.horizon) and lad.horizon > 0, "ladder.horizon", "must be > 0")
        check(_is_int(lad.n_coarse) and lad.n_coarse >= 1, "ladder.n_coarse", "must be >= 1")
        check(_is_int(lad.levels) and lad.levels >= 0, "ladder.levels", "must be >= 0")

        sol = self.solver
        if not isinstance(sol.schemes, list) or not sol.schemes:
            errors.append("solver.schemes: must be a non-empty list")
        else:
            for name in sol.schemes:
                check(
                    isinstance(name, str) and name in Scheme.list_schemes(),
                    "solver.schemes",
                    f"unknown scheme {name!r}",
                )
        check(
            sol.reference_scheme in Scheme.list_schemes(),
            "solver.reference_scheme",
            f"unknown scheme {sol.reference_scheme!r}",
        )
        check(_is_number(sol.gamma) and sol.gamma >= 0, "solver.gamma", "must be >= 0")
        check(_is_number(sol.nl_tol) and sol.nl_tol > 0, "solver.nl_tol", "must be > 0")
        check(_is_int(sol.nl_max_iter) and sol.nl_max_iter >= 1, "solver.nl_max_iter", ">= 1")
        check(isinstance(sol.guard, bool), "solver.guard", "must be true or false")
        check(
            sol.guard_radius is None or (_is_number(sol.guard_radius) and sol.guard_radius > 0),
            "solver.guard_radius",
            "must be null or > 0",
        )
        check(
            _is_number(sol.guard_constant) and sol.guard_constant > 0,
            "solver.guard_constant",
            "must be > 0",
        )
        check(
            _is_number(sol.overflow_cap) and sol.overflow_cap > 0,
            "solver.overflow_cap",
            "must be > 0",
        )

        run = self.run
        if not isinstance(run.seeds, list) or not run.seeds:
            errors.append("run.seeds: must be a non-empty list")
        else:
            check(
                all(_is_int(seed) and 0 <= seed < 2**64 for seed in run.seeds),
                "run.seeds",
                "must be unsigned 64-bit integers",
            )
        check(
            isinstance(run.norm_kinds, list)
            and all(kind in _NORM_KINDS for kind in run.norm_kinds),
            "run.norm_kinds",
            f"must be a list drawn from {list(_NORM_KINDS)}",
        )
        check(isinstance(run.output_directory, str), "run.output_directory", "must be a string")
        check(_is_int(run.snapshot_every) and run.snapshot_every >= 0, "run.snapshot_every", ">= 0")
        check(_is_int(run.workers) and run.workers >= 1, "run.workers", "must be >= 1")
        check(
            run.comparison_steps is None
            or (_is_int(run.comparison_steps) and run.comparison_steps >= 1),
            "run.comparison_steps",
            "must be null or >= 1",
        )
        if (
            not errors
            and run.comparison_steps is not None
            and run.comparison_steps not in lad.steps()
        ):
            errors.append(f"run.comparison_steps: must be one of the ladder steps {lad.steps()}")

        if errors:
            raise ConfigError(errors)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "grid": asdict(self.grid),
            "soliton": asdict(self.soliton),
            "ladder": asdict(self.ladder),
            "solver": asdict(self.solver),
            "run": asdict(self.run),
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def config_hash(self) -> str:
        return _hash(self.to_dict())

    def save(self, filepath: str | Path) -> None:
        """Save configuration to JSON file."""
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w") as f:
            f.write(self.canonical_json())

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ExperimentConfig:
        """Build and validate from parsed JSON, rejecting unknown or missing fields."""
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be a JSON object")
        errors = [f"{key}: unknown section" for key in data if key not in (*_SECTIONS, "name")]
        sections: dict[str, Any] = {}
        for section, section_cls in _SECTIONS.items():
            raw = data.get(section)
            if raw is None:
                errors.append(f"{section}: required section missing")
                continue
            if not isinstance(raw, dict):
                errors.append(f"{section}: must be a JSON object")
                continue
            known = {f.name for f in fields(section_cls)}
            errors.extend(f"{section}.{key}: unknown field" for key in raw if key not in known)
            errors.extend(
                f"{section}.{key}: required field missing"
                for key in _REQUIRED[section]
                if key not in raw
            )
            sections[section] = {key: value for key, value in raw.items() if key in known}
        if errors:
            raise ConfigError(errors)

        config = cls(
            name=str(data.get("name", "stochastic_manakov")),
            **{name: _SECTIONS[name](**values) for name, values in sections.items()},
        )
        config.validate()
        return config

    @classmethod
    def load(cls, filepath: str | Path) -> ExperimentConfig:
        """Load configuration from JSON file."""
        try:
            with open(filepath) as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: malformed JSON ({exc})") from exc
        return cls.from_dict(data)


def load_config(filepath: str | Path) -> ExperimentConfig:
    """Parse and validate an experiment file."""
    return ExperimentConfig.load(filepath)


def apply_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Return a copy with ``section.field=value`` overrides applied and validated."""
    data = config.to_dict()
    errors = []
    for item in overrides:
        key, sep, raw = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            if key.strip() == "name" and sep:
                data["name"] = raw
                continue
            errors.append(f"{item}: expected section.field=value")
            continue
        if section not in data or not isinstance(data[section], dict):
            errors.append(f"{key}: unknown section")
            continue
        if name not in data[section]:
            errors.append(f"{key}: unknown field")
            continue
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
            if isinstance(data[section][name], list):
                value = [part.strip() for part in raw.split(",") if part.strip()]
        data[section][name] = value
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig.from_dict(data)


def resolve_output_directory(config: ExperimentConfig, out: str | None = None) -> Path:
    """--out beats the MANAKOV_OUTPUT_DIR environment variable, which beats the config."""
    if out:
        return Path(out)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(config.run.output_directory)


def with_schemes(config: ExperimentConfig, schemes: list[str]) -> ExperimentConfig:
    """Copy of ``config`` restricted to ``schemes``."""
    return replace(config, solver=replace(config.solver, schemes=list(schemes)))
