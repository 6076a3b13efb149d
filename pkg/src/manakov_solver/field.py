"""Uniform grid, two-component complex fields, Pauli algebra and discrete norms."""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DTYPE = np.complex128


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [-a, a] with M interior nodes and two Dirichlet nodes.

    Nodes are x_j = -a + j*dx for j = 0..M+1, dx = 2a/(M+1).
    """

    half_width: float
    interior_points: int

    def __post_init__(self) -> None:
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if self.interior_points < 2:
            raise ValueError(f"interior_points must be >= 2, got {self.interior_points}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.interior_points + 1)

    @property
    def n_nodes(self) -> int:
        return self.interior_points + 2

    @property
    def nodes(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n_nodes)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]


@dataclass(frozen=True, eq=False)
class Field:
    """Read-only samples (X1_j, X2_j) of a C^2-valued function on every grid node.

    ``values`` has shape (M+2, 2); rows 0 and M+1 are the homogeneous
    Dirichlet nodes and must be exactly zero.
    """

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=DTYPE, copy=True)
        if values.shape != (self.grid.n_nodes, 2):
            raise ValueError(
                f"field values must have shape {(self.grid.n_nodes, 2)}, got {values.shape}"
            )
        if np.any(values[0] != 0) or np.any(values[-1] != 0):
            raise ValueError("boundary nodes of a Field must be exactly zero")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid1D) -> Field:
        return cls(grid, np.zeros((grid.n_nodes, 2), dtype=DTYPE))

    @classmethod
    def from_interior(cls, grid: Grid1D, interior: np.ndarray) -> Field:
        """Wrap an (M, 2) array of interior values, padding the Dirichlet zeros."""
        values = np.zeros((grid.n_nodes, 2), dtype=DTYPE)
        values[1:-1] = interior
        return cls(grid, values)

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1]

    @property
    def density(self) -> np.ndarray:
        """Nodewise |X1|^2 + |X2|^2."""
        return np.sum(np.abs(self.values) ** 2, axis=1)

    def _check_grid(self, other: Field) -> None:
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: Field) -> Field:
        self._check_grid(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        self._check_grid(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> Field:
        return Field(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def save_csv(self, filepath: str | Path) -> Path:
        """Write x, Re(X1), Im(X1), Re(X2), Im(X2), one row per grid node."""
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        with open(filepath, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["x", "re_x1", "im_x1", "re_x2", "im_x2"])
            for x, (x1, x2) in zip(self.grid.nodes, self.values):
                writer.writerow(
                    [f"{v:.17g}" for v in (x, x1.real, x1.imag, x2.real, x2.imag)]
                )
        return filepath


@dataclass(frozen=True, eq=False)
class PauliMatrix:
    """One of the three Pauli matrices; ``entries`` is the 2x2 complex array."""

    index: int
    entries: np.ndarray

    def __matmul__(self, other: PauliMatrix) -> np.ndarray:
        return self.entries @ other.entries


_PAULI_ENTRIES = {
    1: ((0, 1), (1, 0)),
    2: ((0, -1j), (1j, 0)),
    3: ((1, 0), (0, -1)),
}


def pauli(k: int) -> PauliMatrix:
    """Return sigma_k for k in {1, 2, 3}."""
    if k not in _PAULI_ENTRIES:
        raise ValueError(f"Pauli index must be 1, 2 or 3, got {k}")
    entries = np.array(_PAULI_ENTRIES[k], dtype=DTYPE)
    entries.setflags(write=False)
    return PauliMatrix(k, entries)


def noise_matrix(chi: Sequence[float]) -> np.ndarray:
    """Hermitian coupling sum_k sigma_k chi_k."""
    if len(chi) != 3:
        raise ValueError(f"expected three noise components, got {len(chi)}")
    return sum((c * pauli(k).entries for k, c in zip((1, 2, 3), chi)), np.zeros((2, 2), DTYPE))


def discrete_l2_mass(f: Field) -> float:
    """dx * sum_j (|X1_j|^2 + |X2_j|^2) over all nodes j = 0..M+1."""
    return float(f.grid.dx * np.sum(f.density))


def inner_product(u: Field, v: Field) -> complex:
    """Discrete L2 product dx * sum_j <u_j, v_j>, antilinear in ``u``."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return complex(u.grid.dx * np.vdot(u.values, v.values))


def discrete_h1_norm(f: Field) -> float:
    """sqrt(mass + dx * sum_j |(X_{j+1} - X_j)/dx|^2), j = 0..M.

    The forward differences reaching the Dirichlet nodes are included.
    """
    dx = f.grid.dx
    diff = np.diff(f.values, axis=0) / dx
    return float(np.sqrt(discrete_l2_mass(f) + dx * np.sum(np.abs(diff) ** 2)))
