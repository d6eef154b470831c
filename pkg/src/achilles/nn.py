"""Feed-forward ReLU classification networks.

A network is a stack of affine layers: every hidden layer applies an
affine map followed by ReLU, the output layer is affine only.  Inputs
live in an axis-aligned box.  Classification is the argmax over output
values (lowest index wins ties) and the *margin* -- top output minus
runner-up -- measures how close a point sits to a decision boundary.

Networks are immutable after construction and safe to share between any
number of concurrent readers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Network",
    "NetworkFormatError",
    "OutputProfile",
    "classify",
    "classify_batch",
    "format_network",
    "forward",
    "forward_batch",
    "gradient",
    "lipschitz_bound",
    "load_network",
    "margin",
    "margin_batch",
    "parse_network",
    "perturbation_region",
    "random_network",
    "save_network",
]

# 17 significant digits round-trip any float64 exactly.
_FLOAT_FMT = ".17g"

FILE_HEADER = "relunet v1"


class NetworkFormatError(ValueError):
    """Raised when a network file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Network:
    """A feed-forward ReLU classifier.

    ``weights[k]`` has shape ``(layer_sizes[k+1], layer_sizes[k])`` and
    ``biases[k]`` has length ``layer_sizes[k+1]``.  ``input_lower`` and
    ``input_upper`` bound the valid input box per dimension.  ``labels``
    optionally names the output categories.
    """

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    input_lower: np.ndarray
    input_upper: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        weights = tuple(_frozen_array(w) for w in self.weights)
        biases = tuple(_frozen_array(b) for b in self.biases)
        lower = _frozen_array(self.input_lower)
        upper = _frozen_array(self.input_upper)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "input_lower", lower)
        object.__setattr__(self, "input_upper", upper)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        self._validate()

    def _validate(self) -> None:
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must pair up layer by layer")
        if len(self.weights) < 2:
            raise ValueError("network needs at least one hidden layer")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2:
                raise ValueError(f"layer {k}: weight matrix must be 2-D")
            if b.ndim != 1 or b.shape[0] != w.shape[0]:
                raise ValueError(
                    f"layer {k}: bias length {b.shape[0] if b.ndim == 1 else '?'} "
                    f"does not match {w.shape[0]} outputs"
                )
            if min(w.shape) < 1:
                raise ValueError(f"layer {k}: all layer sizes must be >= 1")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(
                    f"layer {k}: expects {w.shape[1]} inputs but layer {k - 1} "
                    f"produces {self.weights[k - 1].shape[0]}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {k}: weights and biases must be finite")
        d = self.input_size
        if self.input_lower.shape != (d,) or self.input_upper.shape != (d,):
            raise ValueError(f"input bounds must each have {d} entries")
        if not (np.isfinite(self.input_lower).all() and np.isfinite(self.input_upper).all()):
            raise ValueError("input bounds must be finite")
        if (self.input_lower > self.input_upper).any():
            bad = int(np.argmax(self.input_lower > self.input_upper))
            raise ValueError(f"input bound {bad}: lower exceeds upper")
        if self.labels is not None and len(self.labels) != self.output_size:
            raise ValueError(
                f"{len(self.labels)} labels given for {self.output_size} outputs"
            )

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_size(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_size(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def hidden_layer_count(self) -> int:
        return len(self.weights) - 1

    def contains(self, x) -> bool:
        """True when ``x`` lies inside the input box."""
        x = np.asarray(x, dtype=np.float64)
        return bool((x >= self.input_lower).all() and (x <= self.input_upper).all())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return (
            len(self.weights) == len(other.weights)
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
            and np.array_equal(self.input_lower, other.input_lower)
            and np.array_equal(self.input_upper, other.input_upper)
            and self.labels == other.labels
        )

    def __repr__(self) -> str:
        shape = "-".join(str(s) for s in self.layer_sizes)
        return f"Network({shape})"


@dataclass(frozen=True, eq=False)
class OutputProfile:
    """Output values of one evaluation plus the derived label and margin."""

    values: np.ndarray
    top_label: int
    margin: float


def _as_input(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_size,):
        raise ValueError(
            f"input has shape {x.shape}, network expects ({net.input_size},)"
        )
    return x


def forward_batch(net: Network, xs) -> np.ndarray:
    """Evaluate many points at once; rows of ``xs`` are inputs.

    Returns an ``(n, output_size)`` array of output values.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.input_size:
        raise ValueError(
            f"batch has shape {xs.shape}, expected (n, {net.input_size})"
        )
    a = xs
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ w.T + b
        if k != last:
            a = np.maximum(a, 0.0)
    return a


def _profile(values: np.ndarray) -> OutputProfile:
    top = int(np.argmax(values))
    if values.size == 1:
        # A single-category classifier can never change label.
        gap = math.inf
    else:
        part = np.partition(values, -2)
        gap = float(part[-1] - part[-2])
    return OutputProfile(values=values, top_label=top, margin=gap)


def forward(net: Network, x) -> OutputProfile:
    """Evaluate the network at one point."""
    values = forward_batch(net, _as_input(net, x)[np.newaxis, :])[0]
    values.setflags(write=False)
    return _profile(values)


def margin(net: Network, x) -> float:
    """Top output minus runner-up at ``x``.  Zero exactly on a tie."""
    return forward(net, x).margin


def classify(net: Network, x) -> int:
    """Index of the winning output at ``x`` (lowest index on ties)."""
    return forward(net, x).top_label


def margin_batch(net: Network, xs) -> np.ndarray:
    values = forward_batch(net, xs)
    if net.output_size == 1:
        return np.full(values.shape[0], math.inf)
    part = np.partition(values, -2, axis=1)
    return part[:, -1] - part[:, -2]


def classify_batch(net: Network, xs) -> np.ndarray:
    return np.argmax(forward_batch(net, xs), axis=1)


def gradient(net: Network, x, target_label: int) -> np.ndarray:
    """Gradient of ``output[target_label]`` with respect to the input.

    Uses the one-sided convention that ReLU has derivative 0 at 0.
    """
    x = _as_input(net, x)
    if not 0 <= target_label < net.output_size:
        raise IndexError(
            f"label {target_label} out of range for {net.output_size} outputs"
        )
    pre = []
    a = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = w @ a + b
        if k != last:
            pre.append(z)
            a = np.maximum(z, 0.0)
    v = np.zeros(net.output_size)
    v[target_label] = 1.0
    v = net.weights[last].T @ v
    for k in range(last - 1, -1, -1):
        v = v * (pre[k] > 0.0)
        v = net.weights[k].T @ v
    return v


def lipschitz_bound(net: Network) -> float:
    """Certified constant L with ``|out(x) - out(y)|_inf <= L * |x - y|_inf``.

    Product over layers of the max-absolute-row-sum norm; sound because
    ReLU is 1-Lipschitz coordinatewise.
    """
    bound = 1.0
    for w in net.weights:
        bound *= float(np.abs(w).sum(axis=1).max())
    return bound


def _ball_lower(center: np.ndarray, radius: float) -> np.ndarray:
    lo = center - radius
    # Rounding may push the bound further than radius from the center;
    # pull it back so distance checks on points at the bound never fail.
    over = (center - lo) > radius
    while over.any():
        lo = np.where(over, np.nextafter(lo, np.inf), lo)
        over = (center - lo) > radius
    return lo


def _ball_upper(center: np.ndarray, radius: float) -> np.ndarray:
    hi = center + radius
    over = (hi - center) > radius
    while over.any():
        hi = np.where(over, np.nextafter(hi, -np.inf), hi)
        over = (hi - center) > radius
    return hi


def perturbation_region(net: Network, center, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Bounds of the L-inf ball around ``center`` clipped to the input box.

    Every point inside the returned bounds is within ``radius`` of the
    center in floating-point arithmetic.  Raises ``ValueError`` when the
    ball lies entirely outside the input box.
    """
    center = _as_input(net, center)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    lo = np.maximum(_ball_lower(center, radius), net.input_lower)
    hi = np.minimum(_ball_upper(center, radius), net.input_upper)
    if (lo > hi).any():
        raise ValueError("perturbation ball does not intersect the input box")
    return lo, hi


def random_network(
    layer_sizes,
    rng,
    *,
    weight_scale: float = 1.0,
    bias_scale: float = 0.05,
    input_bounds: tuple[float, float] = (0.0, 1.0),
    labels=None,
) -> Network:
    """Generate a network with Gaussian weights for synthetic test suites.

    Weights are drawn N(0, weight_scale^2 / fan_in) so depth does not
    blow activations up; biases are N(0, bias_scale^2).
    """
    rng = np.random.default_rng(rng)
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 3:
        raise ValueError("need at least input, one hidden and output sizes")
    weights = []
    biases = []
    for n_in, n_out in zip(sizes, sizes[1:]):
        weights.append(rng.standard_normal((n_out, n_in)) * (weight_scale / math.sqrt(n_in)))
        biases.append(rng.standard_normal(n_out) * bias_scale)
    low, high = input_bounds
    return Network(
        weights=tuple(weights),
        biases=tuple(biases),
        input_lower=np.full(sizes[0], float(low)),
        input_upper=np.full(sizes[0], float(high)),
        labels=labels,
    )


# ---------------------------------------------------------------------------
# File format: text, line oriented, '#' starts a comment.
#
#   relunet v1
#   <layer sizes>
#   <input lower bounds>
#   <input upper bounds>
#   then per layer, one line per output neuron: weight row followed by bias.
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), _FLOAT_FMT)


def format_network(net: Network) -> str:
    lines = [FILE_HEADER]
    lines.append(" ".join(str(s) for s in net.layer_sizes))
    lines.append(" ".join(_fmt(v) for v in net.input_lower))
    lines.append(" ".join(_fmt(v) for v in net.input_upper))
    for w, b in zip(net.weights, net.biases):
        for row, bias in zip(w, b):
            lines.append(" ".join(_fmt(v) for v in row) + " " + _fmt(bias))
    return "\n".join(lines) + "\n"


def _parse_floats(text: str, line: int, expected: int, what: str) -> np.ndarray:
    parts = text.split()
    if len(parts) != expected:
        raise NetworkFormatError(
            f"{what}: expected {expected} values, found {len(parts)}", line
        )
    try:
        values = np.array([float(p) for p in parts])
    except ValueError as exc:
        raise NetworkFormatError(f"{what}: {exc}", line) from None
    if not np.isfinite(values).all():
        raise NetworkFormatError(f"{what}: non-finite value", line)
    return values


def parse_network(text: str) -> Network:
    """Parse the text network format, reporting errors with line numbers."""
    rows: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body))
    if not rows:
        raise NetworkFormatError("empty network file")
    pos = 0

    def take(what: str) -> tuple[int, str]:
        nonlocal pos
        if pos >= len(rows):
            last = rows[-1][0] if rows else 0
            raise NetworkFormatError(f"unexpected end of file, expected {what}", last + 1)
        row = rows[pos]
        pos += 1
        return row

    line, header = take("header")
    if header != FILE_HEADER:
        raise NetworkFormatError(f"bad header {header!r}, expected {FILE_HEADER!r}", line)

    line, sizes_text = take("layer sizes")
    try:
        sizes = [int(p) for p in sizes_text.split()]
    except ValueError:
        raise NetworkFormatError("layer sizes must be integers", line) from None
    if len(sizes) < 3:
        raise NetworkFormatError(
            "need at least three layer sizes (input, hidden..., output)", line
        )
    if min(sizes) < 1:
        raise NetworkFormatError("all layer sizes must be >= 1", line)

    line, text_lo = take("input lower bounds")
    lower = _parse_floats(text_lo, line, sizes[0], "input lower bounds")
    line, text_hi = take("input upper bounds")
    upper = _parse_floats(text_hi, line, sizes[0], "input upper bounds")
    if (lower > upper).any():
        raise NetworkFormatError("input lower bound exceeds upper bound", line)

    weights = []
    biases = []
    for k, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
        w = np.empty((n_out, n_in))
        b = np.empty(n_out)
        for i in range(n_out):
            line, row = take(f"layer {k} neuron {i}")
            values = _parse_floats(row, line, n_in + 1, f"layer {k} neuron {i}")
            w[i] = values[:-1]
            b[i] = values[-1]
        weights.append(w)
        biases.append(b)

    if pos != len(rows):
        raise NetworkFormatError("trailing content after last layer", rows[pos][0])
    return Network(
        weights=tuple(weights),
        biases=tuple(biases),
        input_lower=lower,
        input_upper=upper,
    )


def load_network(source) -> Network:
    """Load a network from a path, file object, text or bytes."""
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (str, Path)) and "\n" not in str(source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return parse_network(text)


def save_network(net: Network, target) -> None:
    """Write a network to a path or file object in canonical form."""
    text = format_network(net)
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")
