"""Linearly implicit relaxation scheme.

The cubic term is frozen on an auxiliary density Phi living at half steps,

    Phi^{n+1/2} = 2 |X^n|^2 - Phi^{n-1/2},   Phi^{-1/2} = |X^0|^2,

so each step is one linear solve with the real potential Phi^{n+1/2} added
to the midpoint operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from ..field import Field
from ..propagator import assemble_step_operator, one_step_linear
from .base import TimeStepper, check_guard

if TYPE_CHECKING:
    from ..config import Scheme, SchemeConfig


@dataclass(frozen=True, eq=False)
class RelaxState:
    """Auxiliary nodewise density Phi^{n-1/2}, shape (M+2,)."""

    phi: np.ndarray

    def __post_init__(self) -> None:
        phi = np.array(self.phi, dtype=np.float64, copy=True)
        if phi.ndim != 1:
            raise ValueError(f"phi must be one-dimensional, got shape {phi.shape}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def initial(cls, x0: Field) -> RelaxState:
        return cls(x0.density)


def relaxation_step(
    x: Field,
    relax: RelaxState,
    chi: np.ndarray,
    cfg: SchemeConfig,
    step: int | None = None,
) -> tuple[Field, RelaxState]:
    """Update Phi, then solve the linear midpoint system for X^{n+1}."""
    if x.grid != cfg.grid:
        raise ValueError("field lives on a different grid than the scheme")
    if relax.phi.shape != (cfg.grid.n_nodes,):
        raise ValueError(
            f"relaxation state has shape {relax.phi.shape}, expected ({cfg.grid.n_nodes},)"
        )
    phi_half = 2.0 * x.density - relax.phi
    potential = phi_half if cfg.nonlinear else None
    op = assemble_step_operator(cfg.dt, cfg.gamma, chi, cfg.grid, potential)
    out = one_step_linear(op, x)
    check_guard(out, cfg, step)
    return out, RelaxState(phi_half)


@dataclass
class RelaxationStepper(TimeStepper):
    """Stepper for the relaxation scheme; carries Phi between steps."""

    state: RelaxState | None = field(default=None, repr=False)

    @property
    def scheme(self) -> Scheme:
        from ..config import Scheme

        return Scheme.RELAXATION

    def reset(self, x0: Field) -> None:
        self.state = RelaxState.initial(x0)

    def step(self, x: Field, chi: np.ndarray, step: int) -> Field:
        if self.state is None:
            self.reset(x)
        assert self.state is not None
        out, self.state = relaxation_step(x, self.state, chi, self.config, step)
        return out
