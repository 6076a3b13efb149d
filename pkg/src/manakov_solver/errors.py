"""Exception hierarchy for the Manakov solvers."""

from __future__ import annotations


class ManakovError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ManakovError, ValueError):
    """Invalid configuration, with one message per offending field."""

    def __init__(self, messages: str | list[str]) -> None:
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class NumericalFailure(ManakovError):
    """A run stopped early. ``status`` is the RunRecord status it maps to."""

    status = "failed"

    def __init__(self, message: str, step: int | None = None) -> None:
        self.step = step
        super().__init__(message)


class NonConvergenceError(NumericalFailure):
    """Fixed-point iteration of an implicit step hit its iteration cap."""

    status = "nonconvergence"

    def __init__(self, iterations: int, update: float, step: int | None = None) -> None:
        self.iterations = iterations
        self.update = update
        super().__init__(
            f"fixed point not reached after {iterations} iterations "
            f"(last relative update {update:.3e})",
            step,
        )


class GuardTriggeredError(NumericalFailure):
    """Discrete H1 norm crossed the blow-up guard radius."""

    status = "guard"

    def __init__(self, h1_norm: float, radius: float, step: int | None = None) -> None:
        self.h1_norm = h1_norm
        self.radius = radius
        super().__init__(f"H1 norm {h1_norm:.6g} exceeds guard radius {radius:.6g}", step)


class OverflowDetectedError(NumericalFailure):
    """Explicit scheme produced a mass above the configured cap (or a non-finite one)."""

    status = "overflow"

    def __init__(self, mass: float, cap: float, step: int | None = None) -> None:
        self.mass = mass
        self.cap = cap
        super().__init__(f"mass {mass:.6g} exceeds overflow cap {cap:.6g}", step)


class SingularOperatorError(NumericalFailure):
    """LU factorisation of the step operator produced a vanishing pivot. Always fatal."""

    status = "singular"

    def __init__(self, min_pivot: float, step: int | None = None) -> None:
        self.min_pivot = min_pivot
        super().__init__(f"step operator pivot underflow (min |pivot| = {min_pivot:.3e})", step)
