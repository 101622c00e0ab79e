"""Radius schedules shared by the diagnostic curves."""

from __future__ import annotations

from typing import Sequence

from .errors import DomainError


def check_decreasing(deltas: Sequence[float]) -> None:
    """Reject schedules that are empty, non-positive, or not strictly
    decreasing."""
    if len(deltas) == 0:
        raise DomainError("empty radius schedule")
    for d in deltas:
        if not d > 0:
            raise DomainError(f"radii must be positive, got {d!r}")
    seq = list(deltas)
    for a, b in zip(seq, seq[1:]):
        if not b < a:
            raise DomainError("radius schedule must be strictly decreasing")


def geometric(start: float, factor: float, steps: int) -> list[float]:
    """start, start*factor, start*factor**2, ... (``steps`` entries)."""
    if not start > 0:
        raise DomainError(f"delta-start must be positive, got {start!r}")
    if not 0.0 < factor < 1.0:
        raise DomainError(f"delta-factor must lie in (0, 1), got {factor!r}")
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    return [start * factor**i for i in range(steps)]
