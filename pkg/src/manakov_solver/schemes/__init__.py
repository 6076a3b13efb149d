"""Time-stepping schemes for the stochastic Manakov equation."""

from .base import TimeStepper, check_guard
from .crank_nicolson import CrankNicolsonStepper, cn_step
from .euler_ito import EulerItoStepper, euler_ito_step
from .evolve import STEPPERS, evolve, make_stepper
from .relaxation import RelaxationStepper, RelaxState, relaxation_step
from .split_step import SplitStepStepper, splitstep_step

__all__ = [
    "TimeStepper",
    "check_guard",
    "CrankNicolsonStepper",
    "cn_step",
    "EulerItoStepper",
    "euler_ito_step",
    "RelaxationStepper",
    "RelaxState",
    "relaxation_step",
    "SplitStepStepper",
    "splitstep_step",
    "STEPPERS",
    "evolve",
    "make_stepper",
]
