"""Closed-form reference signals.

Discrete free responses are the cosine signals that solve SFA on an
unconstrained function space of T time points; 2-D standing waves are the
slow features of free motion in a rectangle.  Both serve as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .sfa import correlation_value, delta_value


@dataclass(frozen=True)
class FreeResponse:
    j: int
    T: int
    values: np.ndarray
    scale: float


def free_response(j: int, T: int) -> FreeResponse:
    """``y_j(t) = c_j cos(j pi (t-1) / (T-1))`` for t = 1..T."""
    if T < 2:
        raise DomainError("T must be at least 2")
    if not 0 <= j <= T - 1:
        raise DomainError(f"j must lie in [0, {T - 1}], got {j}")
    scale = 1.0 if j in (0, T - 1) else math.sqrt(2.0)
    t = np.arange(1, T + 1)
    return FreeResponse(j, T, scale * np.cos(j * np.pi * (t - 1) / (T - 1)), scale)


def free_response_stats(j: int, T: int) -> tuple[float, float]:
    """``(Delta, C_1)`` of the j-th free response."""
    y = free_response(j, T).values
    return delta_value(y), correlation_value(y, 1)


@dataclass(frozen=True)
class SpatialReference:
    """Standing wave with indices ``(j, l)`` in an ``lx`` by ``ly`` rectangle."""

    j: int
    l: int
    lx: float = 1.0
    ly: float = 1.0
    mean_sq_velocity: float = 1.0

    def __post_init__(self):
        if self.j < 0 or self.l < 0:
            raise DomainError("indices must be non-negative")
        if self.lx <= 0 or self.ly <= 0 or self.mean_sq_velocity <= 0:
            raise DomainError("lengths and mean squared velocity must be positive")


def _factor(k: int, u, length: float):
    scale = 1.0 if k == 0 else math.sqrt(2.0)
    return scale * np.cos(k * np.pi * np.asarray(u, dtype=float) / length)


def spatial_reference_value(ref: SpatialReference, x, y):
    return _factor(ref.j, x, ref.lx) * _factor(ref.l, y, ref.ly)


def spatial_reference_delta(ref: SpatialReference) -> float:
    return math.pi**2 * ref.mean_sq_velocity * (ref.j**2 / ref.lx**2 + ref.l**2 / ref.ly**2)


def sampled_reference(j: int, l: int, nx: int, ny: int) -> np.ndarray:
    """ny x nx grid of the standing wave sampled at cell centers ``(i + 1/2) / n``."""
    ref = SpatialReference(j, l)
    xs = (np.arange(nx) + 0.5) / nx
    ys = (np.arange(ny) + 0.5) / ny
    return spatial_reference_value(ref, xs[None, :], ys[:, None])


class ReferenceMatch(NamedTuple):
    j: int
    l: int
    sign: int
    score: float


def match_to_reference(field, max_index: int = 6) -> ReferenceMatch:
    """Best standing wave for a field, by absolute cosine similarity.

    ``field`` is indexed ``[row, col]`` with row 0 at the bottom.  Ties go to
    the smaller ``j + l`` and then the smaller ``j``.
    """
    f = np.asarray(field, dtype=float)
    ny, nx = f.shape
    norm_f = np.linalg.norm(f)
    best = ReferenceMatch(0, 0, 1, 0.0)
    if norm_f == 0:
        return best
    pairs = sorted(
        ((j, l) for j in range(min(max_index, nx - 1) + 1) for l in range(min(max_index, ny - 1) + 1)),
        key=lambda p: (p[0] + p[1], p[0]),
    )
    for j, l in pairs:
        g = sampled_reference(j, l, nx, ny)
        corr = float(np.sum(f * g) / (norm_f * np.linalg.norm(g)))
        if abs(corr) > best.score + 1e-12:
            best = ReferenceMatch(j, l, 1 if corr >= 0 else -1, abs(corr))
    return best


def rank_by_delta(lx: float, ly: float, max_index: int = 6) -> list[tuple[int, int]]:
    """Index pairs ``(j, l)`` sorted by analytic Delta (constant wave first)."""
    pairs = [(j, l) for j in range(max_index + 1) for l in range(max_index + 1)]
    return sorted(pairs, key=lambda p: (spatial_reference_delta(SpatialReference(p[0], p[1], lx, ly)), p))
