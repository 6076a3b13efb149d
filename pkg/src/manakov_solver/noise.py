"""Seedable three-dimensional Brownian increments and dyadic path coarsening.

A convergence ladder samples one path at the finest step and derives every
coarser level by summing consecutive increments, so all levels see the same
Brownian trajectory.

Increments are rounded to the lattice 2**-32. Sums of lattice values stay on
the lattice and are exact in float64 as long as partial sums stay below 2**21,
so a coarse increment is bit-identical whatever order its children are added
in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

GENERATOR_NAME = "numpy.random.PCG64"
LATTICE = 2.0**-32

_HEADER = np.dtype([("seed", "<u8"), ("n_steps", "<i8"), ("dt", "<f8")])


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.round(values / LATTICE) * LATTICE


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """N increments (dW1, dW2, dW3) of a Brownian motion over steps of size dt.

    ``coarsening`` is the product of all factors applied since sampling. Ladder
    levels count up from the coarsest path; a path does not know its ladder
    depth, so it carries only the factor.
    """

    increments: np.ndarray
    dt: float
    seed: int
    coarsening: int = 1

    def __post_init__(self) -> None:
        increments = np.array(self.increments, dtype=np.float64, copy=True)
        if increments.ndim != 2 or increments.shape[1] != 3:
            raise ValueError(f"increments must have shape (N, 3), got {increments.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        increments.setflags(write=False)
        object.__setattr__(self, "increments", increments)

    @property
    def n_steps(self) -> int:
        return int(self.increments.shape[0])

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def chi(self) -> np.ndarray:
        """Standard-Gaussian draws chi_k^n = dW_k^n / sqrt(dt), shape (N, 3)."""
        return self.increments / math.sqrt(self.dt)

    @property
    def total(self) -> np.ndarray:
        """W(T) - W(0), summed in index order."""
        acc = np.zeros(3)
        for row in self.increments:
            acc = acc + row
        return acc

    @classmethod
    def zeros(cls, n_steps: int, dt: float) -> BrownianPath:
        """Path with vanishing increments, for deterministic (gamma = 0) runs."""
        return cls(np.zeros((n_steps, 3)), dt, seed=0)

    def save(self, filepath: str | Path) -> Path:
        """Binary dump: little-endian header (seed u64, N i64, dt f64) then N*3 f64."""
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        header = np.array([(self.seed, self.n_steps, self.dt)], dtype=_HEADER)
        with open(filepath, "wb") as f:
            f.write(header.tobytes())
            f.write(self.increments.astype("<f8").tobytes())
        return filepath

    @classmethod
    def load(cls, filepath: str | Path, coarsening: int = 1) -> BrownianPath:
        """Read a dump. The header has no coarsening field; pass it when known."""
        raw = Path(filepath).read_bytes()
        header = np.frombuffer(raw[: _HEADER.itemsize], dtype=_HEADER)[0]
        n_steps = int(header["n_steps"])
        body = np.frombuffer(raw[_HEADER.itemsize :], dtype="<f8")
        if body.size != 3 * n_steps:
            raise ValueError(f"path dump holds {body.size} values, expected {3 * n_steps}")
        return cls(
            body.reshape(n_steps, 3),
            float(header["dt"]),
            seed=int(header["seed"]),
            coarsening=coarsening,
        )


def sample_path(seed: int, n_steps: int, dt: float) -> BrownianPath:
    """Draw N i.i.d. standard-Gaussian triples scaled by sqrt(dt)."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rng = np.random.default_rng(seed)
    draws = rng.standard_normal((n_steps, 3))
    return BrownianPath(_quantize(math.sqrt(dt) * draws), dt, seed=seed)


def coarsen(path: BrownianPath, factor: int) -> BrownianPath:
    """Sum each block of ``factor`` consecutive increments into one coarse increment."""
    if factor < 1 or path.n_steps % factor != 0:
        raise ValueError(f"coarsening factor {factor} does not divide {path.n_steps} steps")
    if factor == 1:
        return path
    acc = path.increments[0::factor].copy()
    for offset in range(1, factor):
        acc += path.increments[offset::factor]
    logger.debug("coarsened seed %d path by %d to %d steps", path.seed, factor, acc.shape[0])
    return BrownianPath(
        acc, path.dt * factor, seed=path.seed, coarsening=path.coarsening * factor
    )
