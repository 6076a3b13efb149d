"""Closed-form Manakov solitons for initial data and deterministic validation."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

import numpy as np

from .field import DTYPE, Field, Grid1D
from .metrics import ErrorSeries, NormKind, OrderFit, fit_order, relative_error

if TYPE_CHECKING:
    from .config import SchemeConfig

logger = logging.getLogger(__name__)


@dataclass
class SolitonParams:
    """Polarisation, amplitude, velocity, position and phase of a Manakov soliton.

    Defaults are the parameters used by the almost-sure-order studies.
    """

    theta: float = -math.pi / 2
    phi1: float = 0.0
    phi2: float = 0.0
    eta: float = 0.5
    k: float = 0.0
    tau0: float = 0.0
    alpha0: float = math.pi

    @classmethod
    def reference(cls) -> SolitonParams:
        return cls()

    def validate(self) -> None:
        values = (self.theta, self.phi1, self.phi2, self.eta, self.k, self.tau0, self.alpha0)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("soliton parameters must be finite")
        if not self.eta > 0:
            raise ValueError(f"soliton amplitude eta must be positive, got {self.eta}")

    def position(self, t: float) -> float:
        return self.tau0 - self.k * t

    def phase(self, t: float) -> float:
        return self.alpha0 + 0.5 * (self.eta**2 + self.k**2) * t


def _sech(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return 2.0 * e / (1.0 + e * e)


def soliton_field(t: float, grid: Grid1D, p: SolitonParams) -> Field:
    """Sample the soliton of i u_t + u_xx / 2 + |u|^2 u = 0 at time t; boundary nodes zeroed."""
    p.validate()
    shifted = grid.interior_nodes - p.position(t)
    envelope = p.eta * _sech(p.eta * shifted) * np.exp(-1j * p.k * shifted + 1j * p.phase(t))
    polarisation = np.array(
        [
            math.cos(p.theta / 2) * np.exp(1j * p.phi1),
            math.sin(p.theta / 2) * np.exp(1j * p.phi2),
        ],
        dtype=DTYPE,
    )
    return Field.from_interior(grid, envelope[:, None] * polarisation[None, :])


def unit_dispersion_soliton(t: float, grid: Grid1D, p: SolitonParams) -> Field:
    """sqrt(2) u(2t, x): exact solution of i X_t + X_xx + |X|^2 X = 0."""
    return math.sqrt(2.0) * soliton_field(2.0 * t, grid, p)


def peak_position(f: Field) -> float:
    """Node where |X| is largest."""
    return float(f.grid.nodes[int(np.argmax(f.density))])


@dataclass
class DeterministicReport:
    """Errors of one scheme against the exact soliton over a ladder of time steps."""

    scheme: str
    horizon: float
    dts: list[float] = field(default_factory=list)
    l2_errors: list[float] = field(default_factory=list)
    linf_errors: list[float] = field(default_factory=list)
    peak_drifts: list[float] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)
    fit: OrderFit | None = None

    @property
    def completed(self) -> bool:
        return all(status == "completed" for status in self.statuses)

    @property
    def strictly_decreasing(self) -> bool:
        errs = self.l2_errors
        return self.completed and all(b < a for a, b in zip(errs, errs[1:]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "scheme": self.scheme,
            "horizon": self.horizon,
            "dts": self.dts,
            "l2_errors": self.l2_errors,
            "linf_errors": self.linf_errors,
            "peak_drifts": self.peak_drifts,
            "statuses": self.statuses,
            "fit": None if self.fit is None else vars(self.fit),
        }


def validate_deterministic(
    cfg: SchemeConfig,
    p: SolitonParams,
    horizon: float,
    resolutions: Sequence[int],
) -> DeterministicReport:
    """Run ``cfg.scheme`` at gamma = 0 for each step count in ``resolutions``.

    Errors are measured at ``horizon`` against the unit-dispersion soliton.
    The L2 order is fitted when every run completed and every error is positive.
    """
    from .noise import BrownianPath
    from .schemes import evolve

    if cfg.gamma != 0:
        logger.info("deterministic validation forces gamma=0 (configured %g)", cfg.gamma)
    resolutions = sorted(set(resolutions))
    if not resolutions or resolutions[0] < 1:
        raise ValueError(f"resolutions must be positive step counts, got {resolutions}")

    grid = cfg.grid
    x0 = unit_dispersion_soliton(0.0, grid, p)
    exact = unit_dispersion_soliton(horizon, grid, p)
    exact_peak = 2.0 * horizon  # time argument of the underlying soliton
    report = DeterministicReport(scheme=cfg.scheme.scheme_name, horizon=horizon)

    for n_steps in resolutions:
        dt = horizon / n_steps
        run_cfg = replace(cfg, dt=dt, gamma=0.0)
        record = evolve(x0, BrownianPath.zeros(n_steps, dt), run_cfg)
        report.dts.append(dt)
        report.statuses.append(record.status.value)
        if record.completed:
            final = record.final_field
            report.l2_errors.append(relative_error(final, exact, 2, x0))
            report.linf_errors.append(relative_error(final, exact, "inf", x0))
            report.peak_drifts.append(abs(peak_position(final) - p.position(exact_peak)))
        else:
            report.l2_errors.append(math.nan)
            report.linf_errors.append(math.nan)
            report.peak_drifts.append(math.nan)
        logger.info(
            "%s soliton check N=%d: L2 error %.3e (%s)",
            report.scheme,
            n_steps,
            report.l2_errors[-1],
            record.status.value,
        )

    if len(report.dts) >= 2 and report.completed and min(report.l2_errors) > 0:
        series = ErrorSeries(tuple(report.dts), tuple(report.l2_errors), NormKind.L2REL)
        report.fit = fit_order(series)
    return report
