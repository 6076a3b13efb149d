"""Crank-Nicolson midpoint scheme with implicit cubic term.

    (Id + H/2) X^{n+1} = (Id - H/2) X^n + i dt F,
    F = 1/2 (|X^n|^2 + |X^{n+1}|^2) (X^n + X^{n+1}) / 2,

solved by fixed-point iteration on X^{n+1}. The step operator is factored
once and reused by every iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from ..errors import NonConvergenceError
from ..field import DTYPE, Field
from ..propagator import assemble_step_operator, one_step_linear
from .base import TimeStepper, check_guard

if TYPE_CHECKING:
    from ..config import Scheme, SchemeConfig

logger = logging.getLogger(__name__)


def cn_step(x: Field, chi: np.ndarray, cfg: SchemeConfig, step: int | None = None) -> Field:
    """One Crank-Nicolson step.

    Iterates X^{(m+1)} = (Id + H/2)^{-1} [(Id - H/2) X^n + i dt F(X^n, X^{(m)})]
    from X^{(0)} = X^n until the relative L2 update is at most ``cfg.nl_tol``.
    """
    if x.grid != cfg.grid:
        raise ValueError("field lives on a different grid than the scheme")
    op = assemble_step_operator(cfg.dt, cfg.gamma, chi, cfg.grid)
    if not cfg.nonlinear:
        out = one_step_linear(op, x)
        check_guard(out, cfg, step)
        return out

    old = x.interior
    old_density = np.sum(np.abs(old) ** 2, axis=1)
    explicit = op.explicit_interior(x.values)

    current = old
    update = np.inf
    for iteration in range(1, cfg.nl_max_iter + 1):
        density = 0.5 * (old_density + np.sum(np.abs(current) ** 2, axis=1))
        midpoint = 0.5 * (old + current)
        rhs = explicit + 1j * cfg.dt * density[:, None] * midpoint
        new = op.solve_interior(rhs)

        norm_new = np.linalg.norm(new)
        diff = np.linalg.norm(new - current)
        update = float(diff / norm_new) if norm_new > 0 else float(diff)
        current = new
        if update <= cfg.nl_tol:
            logger.debug("step %s: fixed point after %d iterations", step, iteration)
            out = Field.from_interior(cfg.grid, np.asarray(current, dtype=DTYPE))
            check_guard(out, cfg, step)
            return out

    raise NonConvergenceError(cfg.nl_max_iter, update, step)


@dataclass
class CrankNicolsonStepper(TimeStepper):
    """Stepper for the Crank-Nicolson scheme."""

    @property
    def scheme(self) -> Scheme:
        from ..config import Scheme

        return Scheme.CRANK_NICOLSON

    def step(self, x: Field, chi: np.ndarray, step: int) -> Field:
        return cn_step(x, chi, self.config, step)
