"""Error norms, mass drift and convergence-order estimation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .field import Field, discrete_h1_norm, discrete_l2_mass
from .records import RunRecord


class NormKind(Enum):
    """Error norms reported by the harness."""

    L2REL = "L2rel"
    LINFREL = "LInfRel"
    H1 = "H1"

    @classmethod
    def from_name(cls, name: str) -> NormKind:
        for kind in cls:
            if kind.value.lower() == name.lower():
                return kind
        raise ValueError(f"Unknown norm kind: {name}")


def _order(p: float | str) -> float:
    if p in ("inf", "Inf", "infinity"):
        return math.inf
    p = float(p)
    if p not in (2.0, math.inf):
        raise ValueError(f"only the L2 and L-infinity norms are supported, got p={p}")
    return p


def lp_norm(f: Field, p: float | str = 2) -> float:
    """Discrete L2 norm, or the max over nodes of the C^2 modulus for p = inf."""
    if _order(p) == 2.0:
        return math.sqrt(discrete_l2_mass(f))
    return float(np.sqrt(np.max(f.density)))


def relative_error(
    approx: Field, reference: Field, p: float | str, initial: Field | float
) -> float:
    """||approx - reference||_p / ||X0||_p.

    ``initial`` is either the initial data X0 or its already computed norm.
    """
    if approx.grid != reference.grid:
        raise ValueError("fields live on different grids")
    denominator = initial if isinstance(initial, (int, float)) else lp_norm(initial, p)
    if not denominator > 0:
        raise ValueError("relative error needs a nonzero initial-data norm")
    return lp_norm(approx - reference, p) / float(denominator)


def h1_error(approx: Field, reference: Field) -> float:
    """Absolute discrete H1 distance."""
    return discrete_h1_norm(approx - reference)


def mass_drift(record: RunRecord | np.ndarray) -> float:
    """max_n |mass_n - mass_0| / mass_0 over the accepted steps."""
    masses = np.asarray(record.masses if isinstance(record, RunRecord) else record, dtype=float)
    if masses.size == 0:
        return 0.0
    deviation = float(np.max(np.abs(masses - masses[0])))
    if masses[0] == 0:
        return deviation
    return deviation / float(masses[0])


def discrete_hamiltonian(f: Field) -> float:
    """1/2 dx sum_j |D+ X_j|^2 - 1/4 dx sum_j |X_j|^4; conserved by Crank-Nicolson at gamma = 0."""
    dx = f.grid.dx
    grad = np.diff(f.values, axis=0) / dx
    kinetic = 0.5 * dx * float(np.sum(np.abs(grad) ** 2))
    quartic = 0.25 * dx * float(np.sum(f.density**2))
    return kinetic - quartic


@dataclass(frozen=True)
class OrderFit:
    """Least-squares line log(err) = slope * log(dt) + intercept."""

    slope: float
    intercept: float
    residual: float  # max absolute log deviation


@dataclass(frozen=True)
class ErrorSeries:
    """Errors of one norm over a ladder of decreasing time steps."""

    dts: tuple[float, ...]
    errors: tuple[float, ...]
    norm_kind: NormKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "dts", tuple(float(dt) for dt in self.dts))
        object.__setattr__(self, "errors", tuple(float(err) for err in self.errors))
        if len(self.dts) != len(self.errors):
            raise ValueError(f"{len(self.dts)} time steps but {len(self.errors)} errors")
        if len(self.dts) < 2:
            raise ValueError("an error series needs at least two time steps")
        if any(b >= a for a, b in zip(self.dts, self.dts[1:])):
            raise ValueError("time steps must be strictly decreasing")

    def save_csv(self, filepath: str | Path, fit: OrderFit | None = None) -> Path:
        """Write dt, err, norm_kind rows followed by the order report as comment rows."""
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["dt", "err", "norm_kind"])
            for dt, err in zip(self.dts, self.errors):
                writer.writerow([f"{dt:.17g}", f"{err:.17g}", self.norm_kind.value])
            if fit is not None:
                f.write(f"# slope={fit.slope:.17g}\n")
                f.write(f"# intercept={fit.intercept:.17g}\n")
                f.write(f"# residual={fit.residual:.17g}\n")
        return filepath


def fit_order(series: ErrorSeries) -> OrderFit:
    errors = np.asarray(series.errors)
    if not np.all(np.isfinite(errors)) or np.any(errors <= 0):
        raise ValueError("order fit needs strictly positive, finite errors")
    log_dt = np.log(np.asarray(series.dts))
    log_err = np.log(errors)
    slope, intercept = np.polyfit(log_dt, log_err, 1)
    residual = float(np.max(np.abs(log_err - (slope * log_dt + intercept))))
    return OrderFit(float(slope), float(intercept), residual)
