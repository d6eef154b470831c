"""Complete desk-scale local-robustness verifier.

Decides whether every point within an L-inf ball around a seed keeps the
seed's label.  Sound interval bounds are pushed through the layers; a
branch-and-bound loop splits the input region until each piece is either
certified robust or yields a concrete misclassified point.  A brute-force
grid oracle (for tiny nets) and a text interchange format for driving
external verifiers round out the module.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .nn import (
    Network,
    classify,
    classify_batch,
    forward_batch,
    lipschitz_bound,
    perturbation_region,
)

__all__ = [
    "BUDGET",
    "Box",
    "ExternalQuery",
    "GridOutcome",
    "GridResult",
    "PRECISION",
    "QueryFormatError",
    "VerdictKind",
    "Verdict",
    "VerificationQuery",
    "WitnessValidationError",
    "check_witness",
    "export_query",
    "export_witness",
    "grid_oracle",
    "import_query",
    "import_witness",
    "interval_bounds",
    "validate_witness",
    "verify_local_robustness",
]

# Reasons carried by UNKNOWN verdicts.
BUDGET = "budget"
PRECISION = "precision"

# Boxes with more dimensions get a random subset of corners probed.
_EXHAUSTIVE_CORNER_DIMS = 8
_SAMPLED_CORNERS = 2**_EXHAUSTIVE_CORNER_DIMS


class VerdictKind(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


class GridOutcome(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    INCONCLUSIVE = "inconclusive"


class QueryFormatError(ValueError):
    """Raised when interchange text cannot be parsed."""


class WitnessValidationError(ValueError):
    """Raised when an imported witness fails re-validation."""


@dataclass(frozen=True, eq=False)
class VerificationQuery:
    """One local-robustness question: does any point within ``delta`` of
    ``x0`` (inside the input box) classify differently from ``label0``?"""

    x0: np.ndarray
    delta: float
    label0: int
    time_budget: float = 60.0
    min_box_width: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=np.float64))
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError("delta must be positive and finite")
        if self.time_budget <= 0:
            raise ValueError("time_budget must be positive")
        if self.min_box_width is not None and self.min_box_width <= 0:
            raise ValueError("min_box_width must be positive")

    @classmethod
    def for_point(cls, net: Network, x0, delta: float, **kwargs) -> "VerificationQuery":
        """Build a query with the label taken from the network itself."""
        return cls(x0=np.asarray(x0, dtype=np.float64), delta=delta,
                   label0=classify(net, x0), **kwargs)

    @property
    def resolved_min_box_width(self) -> float:
        # Completeness is traded away below this width, by design.
        return self.min_box_width if self.min_box_width is not None else self.delta * 1e-4


@dataclass(frozen=True, eq=False)
class Verdict:
    """SAT with a validated witness, UNSAT from a certified cover, or
    UNKNOWN with the reason the search stopped."""

    kind: VerdictKind
    witness: np.ndarray | None = None
    reason: str | None = None
    boxes_explored: int = 0
    max_depth: int = 0
    wall_time: float = 0.0

    @property
    def is_sat(self) -> bool:
        return self.kind is VerdictKind.SAT

    @property
    def is_unsat(self) -> bool:
        return self.kind is VerdictKind.UNSAT


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned subregion of a query."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=np.float64))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=np.float64))
        if self.lower.shape != self.upper.shape:
            raise ValueError("box bounds must have matching shapes")
        if (self.lower > self.upper).any():
            raise ValueError("box lower bound exceeds upper bound")

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def _split_layers(net: Network):
    layers = []
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        layers.append((np.maximum(w, 0.0), np.minimum(w, 0.0), b, k != last))
    return layers


def _propagate(layers, lo, hi):
    for w_pos, w_neg, b, hidden in layers:
        new_lo = w_pos @ lo + w_neg @ hi + b
        new_hi = w_pos @ hi + w_neg @ lo + b
        if hidden:
            lo = np.maximum(new_lo, 0.0)
            hi = np.maximum(new_hi, 0.0)
        else:
            lo, hi = new_lo, new_hi
    return lo, hi


def interval_bounds(net: Network, box: Box) -> tuple[np.ndarray, np.ndarray]:
    """Sound per-output enclosure over a box.

    Affine layers split weights by sign; hidden intervals clamp at zero.
    For every x in the box and every output j, lo[j] <= out_j(x) <= hi[j].
    """
    if box.lower.shape != (net.input_size,):
        raise ValueError(
            f"box has {box.lower.shape[0]} dimensions, network expects {net.input_size}"
        )
    return _propagate(_split_layers(net), box.lower, box.upper)


def _certification_gap(lo, hi, label0) -> float:
    """Lower bound on min over j != label0 of out[label0] - out[j].

    Positive means every point in the box keeps label0.
    """
    others_hi = np.delete(hi, label0)
    if others_hi.size == 0:
        return math.inf
    return float(lo[label0] - others_hi.max())


def check_witness(net: Network, query: VerificationQuery, point) -> bool:
    """True when ``point`` is a genuine counter-example for the query."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape != query.x0.shape:
        return False
    if np.abs(point - query.x0).max() > query.delta:
        return False
    if not net.contains(point):
        return False
    return classify(net, point) != query.label0


def _corners(lo, hi, rng):
    d = lo.shape[0]
    if d <= _EXHAUSTIVE_CORNER_DIMS:
        bits = ((np.arange(2**d)[:, None] >> np.arange(d)) & 1).astype(bool)
    else:
        bits = rng.integers(0, 2, size=(_SAMPLED_CORNERS, d)).astype(bool)
    return np.where(bits, hi, lo)


def _probe(net, lo, hi, label0, rng):
    points = np.vstack([0.5 * (lo + hi), _corners(lo, hi, rng)])
    labels = classify_batch(net, points)
    hits = np.nonzero(labels != label0)[0]
    if hits.size:
        return points[hits[0]]
    return None


def verify_local_robustness(net: Network, query: VerificationQuery, *, corner_seed: int = 0) -> Verdict:
    """Decide a local-robustness query by input-domain branch and bound.

    Boxes whose interval bounds prove the label fixed are certified and
    dropped; otherwise the box center and corners are probed for concrete
    counter-examples before the box splits along its widest dimension.
    The queue serves the least-certified box first, so misclassified
    regions surface early.  Returns:

    * SAT with a re-validated witness,
    * UNSAT once the whole region is covered by certified boxes,
    * UNKNOWN(``precision``) when uncertified boxes shrank below
      ``min_box_width`` in every dimension without yielding a witness,
    * UNKNOWN(``budget``) when the time budget ran out.
    """
    start = time.perf_counter()
    deadline = start + query.time_budget
    if classify(net, query.x0) != query.label0:
        raise ValueError(
            f"query label {query.label0} is not the network's label for x0"
        )
    lo, hi = perturbation_region(net, query.x0, query.delta)
    min_width = query.resolved_min_box_width
    layers = _split_layers(net)
    rng = np.random.default_rng(corner_seed)

    def finish(kind, witness=None, reason=None):
        return Verdict(
            kind=kind,
            witness=witness,
            reason=reason,
            boxes_explored=explored,
            max_depth=max_depth,
            wall_time=time.perf_counter() - start,
        )

    explored = 1
    max_depth = 0
    tie = itertools.count()
    heap: list = []
    root_lo, root_hi = _propagate(layers, lo, hi)
    gap = _certification_gap(root_lo, root_hi, query.label0)
    precision_exhausted = False
    if gap <= 0:
        heapq.heappush(heap, (gap, next(tie), 0, lo, hi))

    while heap:
        if time.perf_counter() > deadline:
            return finish(VerdictKind.UNKNOWN, reason=BUDGET)
        _, _, depth, box_lo, box_hi = heapq.heappop(heap)
        max_depth = max(max_depth, depth)

        candidate = _probe(net, box_lo, box_hi, query.label0, rng)
        if candidate is not None and check_witness(net, query, candidate):
            return finish(VerdictKind.SAT, witness=candidate)

        widths = box_hi - box_lo
        if (widths < min_width).all():
            precision_exhausted = True
            continue

        dim = int(np.argmax(widths))
        mid = 0.5 * (box_lo[dim] + box_hi[dim])
        for child_lo, child_hi in _split_box(box_lo, box_hi, dim, mid):
            child_blo, child_bhi = _propagate(layers, child_lo, child_hi)
            explored += 1
            child_gap = _certification_gap(child_blo, child_bhi, query.label0)
            if child_gap > 0:
                continue
            heapq.heappush(heap, (child_gap, next(tie), depth + 1, child_lo, child_hi))

    if precision_exhausted:
        return finish(VerdictKind.UNKNOWN, reason=PRECISION)
    return finish(VerdictKind.UNSAT)


def _split_box(lo, hi, dim, mid):
    left_hi = hi.copy()
    left_hi[dim] = mid
    right_lo = lo.copy()
    right_lo[dim] = mid
    return (lo, left_hi), (right_lo, hi)


# ---------------------------------------------------------------------------
# Grid oracle: exhaustive evaluation for tiny input dimensions, used to
# cross-check the branch-and-bound verdicts in tests.
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridResult:
    outcome: GridOutcome
    witness: np.ndarray | None = None


_MAX_ORACLE_DIMS = 3
_GRID_CHUNK = 1 << 16


def grid_oracle(net: Network, query: VerificationQuery, spacing: float) -> GridResult:
    """Evaluate every grid point of the query region.

    Any misclassified grid point is a SAT witness.  If instead every grid
    point's margin toward the query label exceeds
    ``2 * L * (s / 2) * input_size`` -- with ``s`` the realized grid
    spacing (at most ``spacing``) and ``L`` the certified Lipschitz
    bound -- the entire region is provably robust and the result is
    UNSAT.  Otherwise INCONCLUSIVE.  Guarded to at most 3 input
    dimensions.
    """
    if spacing <= 0:
        raise ValueError("grid spacing must be positive")
    if net.input_size > _MAX_ORACLE_DIMS:
        raise ValueError(
            f"grid oracle supports at most {_MAX_ORACLE_DIMS} input dimensions"
        )
    if classify(net, query.x0) != query.label0:
        raise ValueError(
            f"query label {query.label0} is not the network's label for x0"
        )
    lo, hi = perturbation_region(net, query.x0, query.delta)
    axes = []
    realized = 0.0
    for low, high in zip(lo, hi):
        width = high - low
        if width == 0.0:
            axes.append(np.array([low]))
        else:
            n = int(math.ceil(width / spacing)) + 1
            axes.append(np.linspace(low, high, n))
            realized = max(realized, width / (n - 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)

    certificate = lipschitz_bound(net) * realized * net.input_size
    robust_everywhere = True
    for chunk_start in range(0, points.shape[0], _GRID_CHUNK):
        chunk = points[chunk_start : chunk_start + _GRID_CHUNK]
        values = forward_batch(net, chunk)
        labels = np.argmax(values, axis=1)
        hits = np.nonzero(labels != query.label0)[0]
        if hits.size:
            return GridResult(GridOutcome.SAT, witness=chunk[hits[0]])
        if net.output_size == 1:
            continue
        others = np.delete(values, query.label0, axis=1)
        toward_label = values[:, query.label0] - others.max(axis=1)
        if not (toward_label > certificate).all():
            robust_everywhere = False
    if robust_everywhere:
        return GridResult(GridOutcome.UNSAT)
    return GridResult(GridOutcome.INCONCLUSIVE)


# ---------------------------------------------------------------------------
# External verifier boundary: queries out, witnesses in.
# ---------------------------------------------------------------------------

QUERY_HEADER = "query v1"
WITNESS_HEADER = "witness v1"


@dataclass(frozen=True)
class ExternalQuery:
    """The on-the-wire fields of a query handed to an external tool."""

    net_path: str
    x0: tuple[float, ...]
    delta: float
    label0: int

    @classmethod
    def from_query(cls, query: VerificationQuery, net_path: str) -> "ExternalQuery":
        return cls(
            net_path=str(net_path),
            x0=tuple(float(v) for v in query.x0),
            delta=float(query.delta),
            label0=int(query.label0),
        )

    def to_query(self, **kwargs) -> VerificationQuery:
        return VerificationQuery(
            x0=np.array(self.x0), delta=self.delta, label0=self.label0, **kwargs
        )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export_query(query: VerificationQuery, net_path: str) -> str:
    """Serialize a query for an external complete verifier."""
    lines = [
        QUERY_HEADER,
        f"net {net_path}",
        "x0 " + " ".join(_fmt(v) for v in query.x0),
        f"delta {_fmt(query.delta)}",
        f"label {int(query.label0)}",
    ]
    return "\n".join(lines) + "\n"


def _fields(text: str, header: str) -> list[str]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != header:
        raise QueryFormatError(f"expected {header!r} header")
    return lines[1:]


def import_query(text: str) -> ExternalQuery:
    """Parse the query interchange format back into its fields."""
    fields: dict[str, str] = {}
    for line in _fields(text, QUERY_HEADER):
        key, _, rest = line.partition(" ")
        fields[key] = rest.strip()
    try:
        return ExternalQuery(
            net_path=fields["net"],
            x0=tuple(float(v) for v in fields["x0"].split()),
            delta=float(fields["delta"]),
            label0=int(fields["label"]),
        )
    except (KeyError, ValueError) as exc:
        raise QueryFormatError(f"malformed query: {exc}") from None


def export_witness(point) -> str:
    point = np.asarray(point, dtype=np.float64)
    return WITNESS_HEADER + "\nx " + " ".join(_fmt(v) for v in point) + "\n"


def import_witness(text: str) -> np.ndarray:
    lines = _fields(text, WITNESS_HEADER)
    if not lines or not lines[0].startswith("x "):
        raise QueryFormatError("witness file must carry an 'x' line")
    try:
        return np.array([float(v) for v in lines[0][2:].split()])
    except ValueError as exc:
        raise QueryFormatError(f"malformed witness: {exc}") from None


def validate_witness(net: Network, query: VerificationQuery, point) -> Verdict:
    """Accept an externally produced witness only after re-validation."""
    point = np.asarray(point, dtype=np.float64)
    if not check_witness(net, query, point):
        raise WitnessValidationError(
            "witness rejected: not a counter-example for this query"
        )
    return Verdict(kind=VerdictKind.SAT, witness=point)
