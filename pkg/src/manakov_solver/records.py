"""Run records and per-step observer events."""

from __future__ import annotations

import csv
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from .field import Field


class RunStatus(Enum):
    """How a run ended."""

    COMPLETED = "completed"
    GUARD = "guard"
    NONCONVERGENCE = "nonconvergence"
    OVERFLOW = "overflow"

    @classmethod
    def from_failure(cls, status: str) -> RunStatus:
        for member in cls:
            if member.value == status:
                return member
        raise ValueError(f"Unknown run status: {status}")


@dataclass(frozen=True)
class StepEvent:
    """What observers see after each accepted step."""

    step: int
    time: float
    mass: float
    h1_norm: float
    snapshot: Field | None = None


Observer = Callable[[StepEvent], None]


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Diagnostics and provenance of one ``evolve`` call.

    ``times``, ``masses`` and ``h1_norms`` start with the initial data and hold
    one entry per accepted step. ``failed_step`` is the 1-based index of the
    step that stopped a non-completed run.
    """

    scheme: str
    config_hash: str
    seed: int
    generator: str
    times: np.ndarray
    masses: np.ndarray
    h1_norms: np.ndarray
    final_field: Field
    status: RunStatus = RunStatus.COMPLETED
    failed_step: int | None = None
    wall_seconds: float = 0.0
    final_errors: dict[str, float] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status is RunStatus.COMPLETED

    @property
    def n_accepted(self) -> int:
        return len(self.times) - 1

    def payload(self) -> dict[str, Any]:
        """Everything reproducible from (config, seed): the record minus wall time."""
        return {
            "scheme": self.scheme,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "generator": self.generator,
            "times": self.times.tobytes(),
            "masses": self.masses.tobytes(),
            "h1_norms": self.h1_norms.tobytes(),
            "final_field": self.final_field.values.tobytes(),
            "status": self.status.value,
            "failed_step": self.failed_step,
            "final_errors": dict(sorted(self.final_errors.items())),
        }

    def save_timeseries_csv(self, filepath: str | Path) -> Path:
        """Write n, t, mass, h1 for every accepted step."""
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["n", "t", "mass", "h1"])
            for n, (t, mass, h1) in enumerate(zip(self.times, self.masses, self.h1_norms)):
                writer.writerow([n, f"{t:.17g}", f"{mass:.17g}", f"{h1:.17g}"])
        return filepath
