"""Random one-step linear operator of the midpoint schemes.

For one time step with draws chi = (chi_1, chi_2, chi_3) the discrete operator

    H v_j = -i r (v_{j-1} - 2 v_j + v_{j+1}) + c S (v_{j+1} - v_{j-1}),
    r = dt / dx^2,  c = sqrt(gamma r) / 2,  S = sum_k sigma_k chi_k,

is skew-adjoint for the discrete L2 product, so the Cayley map
U = (Id + H/2)^{-1} (Id - H/2) is an isometry. An optional real nodewise
potential V adds -i dt V to H (the relaxation scheme's frozen nonlinearity).

The 2M x 2M system on the interior nodes is block tridiagonal with 2x2 blocks;
interleaving the two components makes it banded and it is factored once per
step with SuperLU in natural ordering.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import SingularOperatorError
from .field import DTYPE, Field, Grid1D, noise_matrix

_I2 = np.eye(2, dtype=DTYPE)
_PIVOT_FLOOR = np.finfo(np.float64).tiny


@dataclass(frozen=True, eq=False)
class StepOperator:
    """Assembled Id + H/2 (optionally with potential) for one time step."""

    dt: float
    gamma: float
    chi: tuple[float, float, float]
    grid: Grid1D
    potential: np.ndarray | None = None

    @property
    def r(self) -> float:
        return self.dt / self.grid.dx**2

    @cached_property
    def coupling(self) -> np.ndarray:
        return noise_matrix(self.chi)

    @cached_property
    def _h_blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(lower, diagonal, upper) 2x2 blocks of H, without the potential."""
        r = self.r
        c = 0.5 * math.sqrt(self.gamma * r)
        diag = 2j * r * _I2
        upper = -1j * r * _I2 + c * self.coupling
        lower = -1j * r * _I2 - c * self.coupling
        return lower, diag, upper

    @property
    def assembled_blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(lower, diagonal, upper) blocks of Id + H/2 on potential-free rows."""
        lower, diag, upper = self._h_blocks
        return 0.5 * lower, _I2 + 0.5 * diag, 0.5 * upper

    @cached_property
    def _interior_potential(self) -> np.ndarray | None:
        if self.potential is None:
            return None
        potential = np.asarray(self.potential, dtype=np.float64)
        if potential.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"potential must have one value per node ({self.grid.n_nodes}), "
                f"got shape {potential.shape}"
            )
        return potential[1:-1]

    @cached_property
    def matrix(self) -> sparse.csc_matrix:
        """Interleaved interior matrix of Id + H/2 (- i dt V / 2)."""
        m = self.grid.interior_points
        lower, diag, upper = self.assembled_blocks
        ones = np.ones(m - 1)
        mat = (
            sparse.kron(sparse.identity(m, format="csr"), diag)
            + sparse.kron(sparse.diags(ones, 1), upper)
            + sparse.kron(sparse.diags(ones, -1), lower)
        )
        if self._interior_potential is not None:
            mat = mat + sparse.kron(sparse.diags(-0.5j * self.dt * self._interior_potential), _I2)
        return sparse.csc_matrix(mat, dtype=DTYPE)

    @cached_property
    def _lu(self):  # type: ignore[no-untyped-def]
        try:
            lu = splu(self.matrix, permc_spec="NATURAL")
        except RuntimeError as e:
            # SuperLU reports an exactly zero pivot this way
            raise SingularOperatorError(0.0) from e
        pivots = np.abs(lu.U.diagonal())
        min_pivot = float(pivots.min()) if pivots.size else 0.0
        if not np.isfinite(min_pivot) or min_pivot <= _PIVOT_FLOOR:
            raise SingularOperatorError(min_pivot)
        return lu

    def apply_h_interior(self, values: np.ndarray) -> np.ndarray:
        """H applied to a full (M+2, 2) array, returning the (M, 2) interior rows."""
        r = self.r
        c = 0.5 * math.sqrt(self.gamma * r)
        lap = values[:-2] - 2.0 * values[1:-1] + values[2:]
        grad = values[2:] - values[:-2]
        out = -1j * r * lap + c * (grad @ self.coupling.T)
        if self._interior_potential is not None:
            out = out - 1j * self.dt * self._interior_potential[:, None] * values[1:-1]
        return out

    def explicit_interior(self, values: np.ndarray) -> np.ndarray:
        """(Id - H/2) applied to a full (M+2, 2) array, interior rows."""
        return values[1:-1] - 0.5 * self.apply_h_interior(values)

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (Id + H/2) v = rhs for an (M, 2) interior right-hand side."""
        flat = np.ascontiguousarray(rhs, dtype=DTYPE).reshape(-1)
        return self._lu.solve(flat).reshape(-1, 2)

    def apply_H(self, x: Field) -> Field:
        return Field.from_interior(self.grid, self.apply_h_interior(x.values))

    def apply_T(self, x: Field) -> Field:
        return Field.from_interior(
            self.grid, x.interior + 0.5 * self.apply_h_interior(x.values)
        )

    def apply_explicit(self, x: Field) -> Field:
        return Field.from_interior(self.grid, self.explicit_interior(x.values))


def assemble_step_operator(
    dt: float,
    gamma: float,
    chi: Sequence[float],
    grid: Grid1D,
    potential: np.ndarray | None = None,
) -> StepOperator:
    """Build the step operator; the LU factorisation is computed on first solve."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    chi_t = tuple(float(c) for c in chi)
    if len(chi_t) != 3:
        raise ValueError(f"expected three noise components, got {len(chi_t)}")
    return StepOperator(dt, gamma, chi_t, grid, potential)  # type: ignore[arg-type]


def solve_T(op: StepOperator, rhs: Field) -> Field:
    """Return v with (Id + H/2) v = rhs and Dirichlet boundaries."""
    if rhs.grid != op.grid:
        raise ValueError("right-hand side lives on a different grid")
    return Field.from_interior(op.grid, op.solve_interior(rhs.interior))


def one_step_linear(op: StepOperator, x: Field) -> Field:
    """U x = (Id + H/2)^{-1} (Id - H/2) x."""
    if x.grid != op.grid:
        raise ValueError("field lives on a different grid")
    return Field.from_interior(op.grid, op.solve_interior(op.explicit_interior(x.values)))


@dataclass(frozen=True, eq=False)
class SymbolMatrix:
    """Fourier multiplier of H at wavenumber xi."""

    xi: float
    entries: np.ndarray


def symbol_matrix(xi: float, dt: float, gamma: float, chi: Sequence[float]) -> SymbolMatrix:
    """i dt |xi|^2 Id + i sqrt(gamma dt) xi sum_k sigma_k chi_k."""
    entries = 1j * dt * xi**2 * _I2 + 1j * math.sqrt(gamma * dt) * xi * noise_matrix(chi)
    return SymbolMatrix(xi, entries)


def symbol_determinant(xi: float, dt: float, gamma: float, chi: Sequence[float]) -> complex:
    """det(xi) = 1 + (gamma dt/4) sum chi_k^2 |xi|^2 - (dt^2/4)|xi|^4 - i dt |xi|^2.

    Its modulus equals |det(Id + symbol/2)|.
    """
    y = float(sum(c * c for c in chi))
    xi2 = xi * xi
    return complex(1.0 + 0.25 * gamma * dt * y * xi2 - 0.25 * dt**2 * xi2**2, -dt * xi2)


def determinant_lower_bound(xi: float, dt: float, gamma: float, chi: Sequence[float]) -> float:
    """Piecewise lower bound of f(x, y) = |det|^2 with x = sqrt(dt)|xi|, y = sum chi_k^2."""
    y = float(sum(c * c for c in chi))
    x2 = dt * xi * xi
    x4 = x2 * x2
    m = max(0.25 * gamma * y, 1.0)
    if x2 <= 4.0 * m:
        return 0.25 * (1.0 + x4)
    if x2 <= 16.0 * m:
        return x4
    return x4 * x4 / 32.0 + x4


def save_spectrum_csv(
    filepath: str | Path,
    xis: Sequence[float],
    dt: float,
    gamma: float,
    chi: Sequence[float],
) -> Path:
    """Dump (xi, |det|) rows for plotting the invertibility margin."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["xi", "abs_det"])
        for xi in xis:
            det = abs(symbol_determinant(xi, dt, gamma, chi))
            writer.writerow([f"{xi:.17g}", f"{det:.17g}"])
    return filepath
