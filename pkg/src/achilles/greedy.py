"""Greedy pre-search for counter-examples.

Before handing a query to the verifier, walk from the seed toward the
decision boundary: perturb one coordinate at a time by +/-step, move to
the neighbor with the smallest margin, and halve the step once no
neighbor improves.  Any neighbor that changes the label is an immediate
counter-example; running out of step width means the search gives up
(it never certifies anything).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nn import Network, classify, forward_batch, perturbation_region

__all__ = ["GreedyConfig", "SearchOutcome", "gen_neighbors", "greedy_search"]


@dataclass(frozen=True)
class GreedyConfig:
    """Step-width schedule of the greedy search."""

    l_max: float
    l_min: float
    max_iterations: int = 10_000
    record_trace: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.l_max) and self.l_max > 0):
            raise ValueError("l_max must be positive and finite")
        if not (math.isfinite(self.l_min) and self.l_min > 0):
            raise ValueError("l_min must be positive and finite")
        if self.l_min >= self.l_max:
            raise ValueError("l_min must be smaller than l_max")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")

    @classmethod
    def for_radius(cls, radius: float, **kwargs) -> "GreedyConfig":
        """Defaults for a query ball: start at the radius, stop at radius/1024."""
        return cls(l_max=radius, l_min=radius / 1024.0, **kwargs)


@dataclass(frozen=True, eq=False)
class SearchOutcome:
    """Result of one greedy search.

    ``counter_example`` is None when the search gave up.  ``trace`` (when
    recorded) holds one ``(step, margin)`` row per completed round that
    did not return a counter-example.
    """

    counter_example: np.ndarray | None
    iterations: int
    final_margin: float
    trace: tuple[tuple[float, float], ...] | None = None

    @property
    def found(self) -> bool:
        return self.counter_example is not None


def gen_neighbors(x, step: float, x0, delta: float, lower, upper) -> list[np.ndarray]:
    """Single-coordinate +/-step moves, clipped to ball and box.

    Emits up to 2n candidates in dimension order (+step before -step),
    each clipped to the input box and the L-inf ball of radius ``delta``
    around ``x0``; candidates that collapse onto ``x`` are dropped.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    lo, hi = _combined_region(np.asarray(x0, dtype=np.float64), delta, lower, upper)
    return _axis_moves(x, step, lo, hi)


def _combined_region(x0, delta, lower, upper):
    from .nn import _ball_lower, _ball_upper

    lo = np.maximum(_ball_lower(x0, delta), np.asarray(lower, dtype=np.float64))
    hi = np.minimum(_ball_upper(x0, delta), np.asarray(upper, dtype=np.float64))
    return lo, hi


def greedy_search(net: Network, x0, delta: float, config: GreedyConfig | None = None) -> SearchOutcome:
    """Descend the margin around ``x0`` looking for a label flip.

    The flip test is always against the seed's original label, and every
    candidate stays within ``delta`` of ``x0``, so a returned point is a
    genuine counter-example for the query.  Fully deterministic.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    cfg = config or GreedyConfig.for_radius(delta)
    x0 = np.asarray(x0, dtype=np.float64)
    label0 = classify(net, x0)
    lo, hi = perturbation_region(net, x0, delta)

    x = x0.copy()
    values = forward_batch(net, x[np.newaxis, :])[0]
    current = _margin_of(values)
    step = cfg.l_max / 2.0
    iterations = 0
    trace: list[tuple[float, float]] | None = [] if cfg.record_trace else None

    while step >= cfg.l_min and iterations < cfg.max_iterations:
        iterations += 1
        candidates = _axis_moves(x, step, lo, hi)
        best = None
        best_margin = current
        if candidates:
            batch = forward_batch(net, np.stack(candidates))
            labels = np.argmax(batch, axis=1)
            for i, cand in enumerate(candidates):
                if labels[i] != label0:
                    return SearchOutcome(
                        counter_example=cand,
                        iterations=iterations,
                        final_margin=_margin_of(batch[i]),
                        trace=tuple(trace) if trace is not None else None,
                    )
                m = _margin_of(batch[i])
                if m < best_margin:
                    best, best_margin = i, m
        if best is not None:
            x = candidates[best]
            current = best_margin
            moved = True
        else:
            moved = False
        if trace is not None:
            trace.append((step, current))
        if not moved:
            step /= 2.0
    return SearchOutcome(
        counter_example=None,
        iterations=iterations,
        final_margin=current,
        trace=tuple(trace) if trace is not None else None,
    )


def _axis_moves(x, step, lo, hi):
    out = []
    for i in range(x.shape[0]):
        for sign in (1.0, -1.0):
            cand = x.copy()
            cand[i] = min(max(cand[i] + sign * step, lo[i]), hi[i])
            if cand[i] != x[i]:
                out.append(cand)
    return out


def _margin_of(values: np.ndarray) -> float:
    if values.size == 1:
        return math.inf
    part = np.partition(values, -2)
    return float(part[-1] - part[-2])
