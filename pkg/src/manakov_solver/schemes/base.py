"""Base class for time steppers."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..errors import GuardTriggeredError
from ..field import Field, discrete_h1_norm

if TYPE_CHECKING:
    from ..config import Scheme, SchemeConfig


@dataclass
class TimeStepper(ABC):
    """Abstract base class for advancing a field one step along a Brownian path."""

    config: SchemeConfig

    @property
    @abstractmethod
    def scheme(self) -> Scheme:
        """Return the registry entry this stepper implements."""
        ...

    def reset(self, x0: Field) -> None:
        """Prepare per-run state from the initial data.

        Stateless schemes need nothing here; override when a scheme carries
        auxiliary variables between steps.
        """

    @abstractmethod
    def step(self, x: Field, chi: np.ndarray, step: int) -> Field:
        """Return X^{n+1} from X^n and the draws chi of step ``step`` (1-based)."""
        ...

    def describe(self) -> str:
        cfg = self.config
        return (
            f"{self.scheme.scheme_name} (dt={cfg.dt:.6g}, gamma={cfg.gamma:g}, "
            f"M={cfg.grid.interior_points})"
        )


def check_guard(x: Field, cfg: SchemeConfig, step: int | None = None) -> None:
    """Raise GuardTriggeredError when the guard is on and ||x||_H1 > R0."""
    if cfg.guard_radius is None:
        return
    h1 = discrete_h1_norm(x)
    if h1 > cfg.guard_radius:
        raise GuardTriggeredError(h1, cfg.guard_radius, step)
