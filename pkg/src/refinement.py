"""Step-refinement policy for numeric integration that fails to stay finite."""

import logging
from collections.abc import Callable
from typing import TypeVar

from src.errors import IntegrationError, ModelError

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Refinement configuration
MIN_STEP = 1e-5  # seconds
MAX_REFINEMENTS = 3  # before the failure is surfaced


class RefinementPolicy:
    """Halve the integration step on each failed attempt while keeping the horizon."""

    def __init__(self, min_step: float = MIN_STEP, max_refinements: int = MAX_REFINEMENTS):
        self.min_step = min_step
        self.max_refinements = max_refinements

    def get_step(self, base_step: float, attempt: int) -> float:
        """Step for a given attempt number.

        Args:
            base_step: Step of the first attempt in seconds
            attempt: Refinement attempt number (0-indexed)

        Returns:
            ``base_step / 2**attempt``, floored at ``min_step``
        """
        return max(base_step / (2**attempt), self.min_step)

    def integrate(
        self,
        func: Callable[[float, int], T],
        base_step: float,
        n_steps: int,
        label: str = "integration",
    ) -> T:
        """Call ``func(h, n)`` with successively finer steps covering ``base_step * n_steps``.

        Raises:
            IntegrationError: The last failure once refinements are exhausted
        """
        horizon = base_step * n_steps
        for attempt in range(self.max_refinements + 1):
            h = self.get_step(base_step, attempt)
            steps = max(round(horizon / h), 1)
            try:
                return func(h, steps)
            except Exception as e:
                if not is_recoverable_error(e) or attempt >= self.max_refinements:
                    if is_recoverable_error(e):
                        logger.error(
                            f"{label} failed after {self.max_refinements} refinements: {e}"
                        )
                    raise
                logger.warning(
                    f"Refinement {attempt + 1}/{self.max_refinements} for {label} "
                    f"after error: {e}. Retrying with h={self.get_step(base_step, attempt + 1)}s"
                )


def is_recoverable_error(exception: Exception) -> bool:
    """Whether a smaller step could plausibly fix the failure.

    Model guard violations (``ModelError``) describe the state itself and are
    never retried.
    """
    if isinstance(exception, ModelError):
        return False
    if isinstance(exception, (IntegrationError, OverflowError, FloatingPointError)):
        return True
    message = str(exception).lower()
    return any(indicator in message for indicator in ("non-finite", "overflow", "nan"))
