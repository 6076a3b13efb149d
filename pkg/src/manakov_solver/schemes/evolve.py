"""Scheme registry and the run loop that steps a field along a Brownian path."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterable

import numpy as np

from ..config import Scheme, SchemeConfig
from ..errors import NumericalFailure, SingularOperatorError
from ..field import Field, discrete_h1_norm, discrete_l2_mass
from ..noise import GENERATOR_NAME, BrownianPath
from ..records import Observer, RunRecord, RunStatus, StepEvent
from .base import TimeStepper
from .crank_nicolson import CrankNicolsonStepper
from .euler_ito import EulerItoStepper
from .relaxation import RelaxationStepper
from .split_step import SplitStepStepper

logger = logging.getLogger(__name__)

STEPPERS: dict[Scheme, type[TimeStepper]] = {
    Scheme.CRANK_NICOLSON: CrankNicolsonStepper,
    Scheme.RELAXATION: RelaxationStepper,
    Scheme.SPLIT_STEP: SplitStepStepper,
    Scheme.EULER_ITO: EulerItoStepper,
}


def make_stepper(cfg: SchemeConfig) -> TimeStepper:
    """Instantiate the stepper registered for ``cfg.scheme``."""
    stepper_class = STEPPERS.get(cfg.scheme)
    if stepper_class is None:
        raise ValueError(f"No stepper registered for scheme: {cfg.scheme}")
    return stepper_class(config=cfg)


def evolve(
    x0: Field,
    path: BrownianPath,
    cfg: SchemeConfig,
    observers: Iterable[Observer] = (),
    *,
    config_hash: str | None = None,
) -> RunRecord:
    """Step ``x0`` over every increment of ``path`` with the configured scheme.

    Guard, non-convergence and overflow stop the run and are recorded as its
    status together with the failing step. A singular step operator is
    re-raised.
    """
    if x0.grid != cfg.grid:
        raise ValueError("initial data lives on a different grid than the scheme")
    if path.n_steps and not math.isclose(path.dt, cfg.dt, rel_tol=1e-12):
        raise ValueError(f"path dt {path.dt:.17g} does not match scheme dt {cfg.dt:.17g}")

    observers = list(observers)
    stepper = make_stepper(cfg)
    stepper.reset(x0)
    logger.info("evolving %s over %d steps (seed %d)", stepper.describe(), path.n_steps, path.seed)

    times = [0.0]
    masses = [discrete_l2_mass(x0)]
    h1_norms = [discrete_h1_norm(x0)]
    status = RunStatus.COMPLETED
    failed_step: int | None = None
    chi = path.chi

    start = time.perf_counter()
    x = x0
    for n in range(1, path.n_steps + 1):
        try:
            x = stepper.step(x, chi[n - 1], n)
        except SingularOperatorError as exc:
            if exc.step is None:
                exc.step = n
            raise
        except NumericalFailure as exc:
            status = RunStatus.from_failure(exc.status)
            failed_step = n
            logger.warning(
                "%s run (seed %d) stopped at step %d/%d: %s",
                cfg.scheme.scheme_name,
                path.seed,
                n,
                path.n_steps,
                exc,
            )
            break

        t = n * cfg.dt
        mass = discrete_l2_mass(x)
        h1 = discrete_h1_norm(x)
        times.append(t)
        masses.append(mass)
        h1_norms.append(h1)
        if observers:
            snapshot = x if cfg.snapshot_every and n % cfg.snapshot_every == 0 else None
            event = StepEvent(step=n, time=t, mass=mass, h1_norm=h1, snapshot=snapshot)
            for observer in observers:
                observer(event)
    wall_seconds = time.perf_counter() - start

    return RunRecord(
        scheme=cfg.scheme.scheme_name,
        config_hash=config_hash or cfg.config_hash(),
        seed=path.seed,
        generator=GENERATOR_NAME,
        times=np.array(times),
        masses=np.array(masses),
        h1_norms=np.array(h1_norms),
        final_field=x,
        status=status,
        failed_step=failed_step,
        wall_seconds=wall_seconds,
    )
