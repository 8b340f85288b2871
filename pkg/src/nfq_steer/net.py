"""Sigmoid multilayer perceptron Q-function trained by full-batch iRprop-.

All parameters of a network live in one flat float64 vector; per-layer
weight matrices (``(n_out, n_in)``, row-major) and bias vectors are views
into it.  That keeps the Rprop update a handful of vectorised operations.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError, InputError, ParseError

CHECKPOINT_FORMAT = "nfq-steer-checkpoint/1"
INIT_RANGE = 0.5


@dataclass(frozen=True)
class LayerSpec:
    sizes: tuple = (4, 5, 5, 1)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if len(sizes) < 2:
            raise ConfigurationError("a network needs at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ConfigurationError(f"layer widths must be >= 1, got {list(sizes)}")

    @property
    def n_params(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]))

    def layer_slices(self):
        """Yield ``(weight_slice, weight_shape, bias_slice)`` per layer."""
        offset = 0
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = slice(offset, offset + n_in * n_out)
            offset += n_in * n_out
            b = slice(offset, offset + n_out)
            offset += n_out
            yield w, (n_out, n_in), b


Q_SPEC = LayerSpec((4, 5, 5, 1))


class NetworkParams:
    """Weights and biases of an MLP, backed by a single flat vector."""

    def __init__(self, spec: LayerSpec, flat: np.ndarray, seed: int | None = None):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (spec.n_params,):
            raise ConfigurationError(
                f"expected {spec.n_params} parameters for {list(spec.sizes)}, got {flat.shape}")
        self.spec = spec
        self.flat = flat
        self.seed = seed

    @property
    def weights(self) -> list[np.ndarray]:
        return [self.flat[w].reshape(shape) for w, shape, _ in self.spec.layer_slices()]

    @property
    def biases(self) -> list[np.ndarray]:
        return [self.flat[b] for _, _, b in self.spec.layer_slices()]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.spec, self.flat.copy(), self.seed)

    @classmethod
    def from_layers(cls, weights: Sequence, biases: Sequence, seed=None) -> "NetworkParams":
        weights = [np.atleast_2d(np.asarray(w, dtype=float)) for w in weights]
        sizes = [weights[0].shape[1]] + [w.shape[0] for w in weights]
        spec = LayerSpec(tuple(sizes))
        parts = []
        for w, b in zip(weights, biases):
            parts.append(w.ravel())
            parts.append(np.asarray(b, dtype=float).ravel())
        return cls(spec, np.concatenate(parts), seed)

    def __repr__(self):
        return f"NetworkParams(sizes={list(self.spec.sizes)}, seed={self.seed})"


@dataclass(frozen=True)
class RpropParams:
    eta_plus: float = 1.2
    eta_minus: float = 0.5
    delta0: float = 0.1
    delta_min: float = 1e-6
    delta_max: float = 50.0

    def __post_init__(self):
        if not self.eta_plus > 1.0:
            raise ConfigurationError("eta_plus must exceed 1")
        if not 0.0 < self.eta_minus < 1.0:
            raise ConfigurationError("eta_minus must lie in (0, 1)")
        if not 0.0 < self.delta_min <= self.delta0 <= self.delta_max:
            raise ConfigurationError("need 0 < delta_min <= delta0 <= delta_max")


@dataclass
class RpropState:
    delta: np.ndarray
    prev_grad: np.ndarray
    params: RpropParams = field(default_factory=RpropParams)

    @classmethod
    def fresh(cls, n_params: int, params: RpropParams = RpropParams()) -> "RpropState":
        return cls(np.full(n_params, params.delta0), np.zeros(n_params), params)

    def copy(self) -> "RpropState":
        return RpropState(self.delta.copy(), self.prev_grad.copy(), self.params)


class Pattern(NamedTuple):
    input: np.ndarray
    target: float


class PatternSet:
    """Supervised pairs ``inputs[l] -> targets[l]`` stored as arrays."""

    def __init__(self, inputs, targets):
        inputs = np.asarray(inputs, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64).reshape(-1)
        if inputs.ndim != 2 or inputs.shape[0] != targets.shape[0]:
            raise InputError(f"inputs {inputs.shape} and targets {targets.shape} do not align")
        self.inputs = inputs
        self.targets = targets

    @classmethod
    def from_patterns(cls, patterns: Iterable[Pattern]) -> "PatternSet":
        patterns = list(patterns)
        if not patterns:
            return cls(np.empty((0, 4)), np.empty(0))
        return cls(np.stack([np.asarray(p.input, dtype=float) for p in patterns]),
                   [p.target for p in patterns])

    def __len__(self):
        return self.targets.shape[0]

    @property
    def feature_major(self) -> np.ndarray:
        """Contiguous ``(n_in, D)`` copy of the inputs, built once."""
        if getattr(self, "_xt", None) is None:
            self._xt = np.ascontiguousarray(self.inputs.T)
        return self._xt

    def __iter__(self):
        for x, t in zip(self.inputs, self.targets):
            yield Pattern(x, float(t))

    def concat(self, other: "PatternSet") -> "PatternSet":
        return PatternSet(np.concatenate([self.inputs, other.inputs]),
                          np.concatenate([self.targets, other.targets]))


def as_pattern_set(patterns) -> PatternSet:
    if isinstance(patterns, PatternSet):
        return patterns
    return PatternSet.from_patterns(patterns)


def init_network(spec: LayerSpec = Q_SPEC, seed: int = 0) -> NetworkParams:
    """Draw every weight and bias i.i.d. from U[-0.5, 0.5]."""
    if not isinstance(spec, LayerSpec):
        spec = LayerSpec(tuple(spec))
    rng = np.random.default_rng(seed)
    return NetworkParams(spec, rng.uniform(-INIT_RANGE, INIT_RANGE, spec.n_params), seed)


def reset(spec: LayerSpec = Q_SPEC, seed: int = 0,
          rprop: RpropParams = RpropParams()) -> tuple[NetworkParams, RpropState]:
    net = init_network(spec, seed)
    return net, RpropState.fresh(spec.n_params, rprop)


# |z| <= 36 keeps sigmoid(z) strictly inside (0, 1) in float64
SATURATION = 36.0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    """In-place logistic function (overwrites ``z``)."""
    np.clip(z, -SATURATION, SATURATION, out=z)
    np.negative(z, out=z)
    np.exp(z, out=z)
    z += 1.0
    return np.reciprocal(z, out=z)


def forward_batch(net: NetworkParams, inputs: np.ndarray) -> np.ndarray:
    """Q estimates for a ``(D, n_in)`` input matrix; returns shape ``(D,)``."""
    h = np.asarray(inputs, dtype=np.float64)
    flat = net.flat
    for w, shape, b in net.spec.layer_slices():
        h = _sigmoid(h @ flat[w].reshape(shape).T + flat[b])
    return h[:, 0]


def forward(net: NetworkParams, x) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != net.spec.sizes[0]:
        raise InputError(f"expected {net.spec.sizes[0]} inputs, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise InputError("non-finite network input")
    return float(forward_batch(net, x)[0])


CHUNK = 4096


def _chunk_loss_and_grad(flat, layers, xt, targets, grad):
    """Accumulate the summed squared error and its gradient for one chunk.

    ``xt`` is feature-major ``(n_in, d)``; ``grad`` is updated in place and
    the returned loss is the plain sum of squared residuals.
    """
    acts = [xt]
    h = xt
    for w, shape, b in layers:
        z = flat[w].reshape(shape) @ h
        z += flat[b][:, None]
        h = _sigmoid(z)
        acts.append(h)
    y = acts[-1][0]
    resid = y - targets
    loss = float(resid @ resid)
    delta = (2.0 * resid * y * (1.0 - y))[None, :]
    for i in range(len(layers) - 1, -1, -1):
        w, shape, b = layers[i]
        grad[w] += (delta @ acts[i].T).ravel()
        grad[b] += delta.sum(axis=1)
        if i:
            a = acts[i]
            delta = flat[w].reshape(shape).T @ delta
            delta *= a
            delta *= 1.0 - a
    return loss


def _loss_and_grad(flat, spec, xt, targets):
    """Mean squared error and gradient; ``xt`` is feature-major ``(n_in, D)``.

    Patterns are processed in fixed-size chunks (cache friendly), so the
    summation order and therefore the result depend only on the pattern order.
    """
    layers = list(spec.layer_slices())
    n = targets.shape[0]
    grad = np.zeros_like(flat)
    loss = 0.0
    for start in range(0, n, CHUNK):
        stop = start + CHUNK
        loss += _chunk_loss_and_grad(flat, layers, xt[:, start:stop], targets[start:stop], grad)
    grad /= n
    return loss / n, grad


def batch_loss(net: NetworkParams, patterns) -> float:
    ps = as_pattern_set(patterns)
    if len(ps) == 0:
        raise InputError("empty pattern set")
    r = forward_batch(net, ps.inputs) - ps.targets
    return float(r @ r) / len(ps)


def batch_gradient(net: NetworkParams, patterns) -> NetworkParams:
    """Gradient of the mean squared error over ``patterns``.

    Returned as a :class:`NetworkParams` so ``.weights``/``.biases`` line up
    with the network's own layers.
    """
    ps = as_pattern_set(patterns)
    if len(ps) == 0:
        raise InputError("empty pattern set")
    _, g = _loss_and_grad(net.flat, net.spec, ps.feature_major, ps.targets)
    return NetworkParams(net.spec, g)


def _rprop_update(flat, opt: RpropState, grad):
    """In-place iRprop- step on ``flat`` and ``opt``."""
    p = opt.params
    prod = grad * opt.prev_grad
    up = prod > 0
    down = prod < 0
    opt.delta[up] = np.minimum(opt.delta[up] * p.eta_plus, p.delta_max)
    opt.delta[down] = np.maximum(opt.delta[down] * p.eta_minus, p.delta_min)
    grad = np.where(down, 0.0, grad)
    flat -= np.sign(grad) * opt.delta
    opt.prev_grad = grad


def rprop_epoch(net: NetworkParams, opt: RpropState, patterns) -> tuple[NetworkParams, RpropState]:
    """One full-batch iRprop- step; the inputs are left untouched."""
    ps = as_pattern_set(patterns)
    if len(ps) == 0:
        raise InputError("empty pattern set")
    if opt.delta.shape != net.flat.shape:
        raise ConfigurationError("optimizer state does not match the network shape")
    net, opt = net.copy(), opt.copy()
    _, g = _loss_and_grad(net.flat, net.spec, ps.feature_major, ps.targets)
    _rprop_update(net.flat, opt, g)
    return net, opt


class TrainReport(NamedTuple):
    epochs: int
    initial_loss: float
    final_loss: float


def train(net: NetworkParams, opt: RpropState, patterns, epochs: int):
    """Run ``epochs`` Rprop epochs; returns ``(net, opt, TrainReport)``."""
    if int(epochs) < 1:
        raise ConfigurationError(f"epochs must be >= 1, got {epochs}")
    ps = as_pattern_set(patterns)
    if len(ps) == 0:
        raise InputError("empty pattern set")
    if opt.delta.shape != net.flat.shape:
        raise ConfigurationError("optimizer state does not match the network shape")
    net, opt = net.copy(), opt.copy()
    initial = None
    for _ in range(int(epochs)):
        loss, g = _loss_and_grad(net.flat, net.spec, ps.feature_major, ps.targets)
        if initial is None:
            initial = loss
        _rprop_update(net.flat, opt, g)
    return net, opt, TrainReport(int(epochs), initial, batch_loss(net, ps))


def is_finite(net: NetworkParams) -> bool:
    return bool(np.all(np.isfinite(net.flat)))


# -- checkpoints -------------------------------------------------------------

def checkpoint_dict(net: NetworkParams, opt: RpropState | None = None, **extra) -> dict:
    def per_layer(flat):
        return [{"weights": flat[w].reshape(shape).tolist(), "bias": flat[b].tolist()}
                for w, shape, b in net.spec.layer_slices()]

    doc = {"format": CHECKPOINT_FORMAT, "sizes": list(net.spec.sizes), "seed": net.seed,
           "layers": per_layer(net.flat)}
    if opt is not None:
        doc["rprop"] = {
            "params": {k: getattr(opt.params, k) for k in RpropParams.__dataclass_fields__},
            "delta": per_layer(opt.delta),
            "prev_grad": per_layer(opt.prev_grad),
        }
    if extra:
        doc["meta"] = extra
    return doc


def _flatten_layers(spec, layers, path):
    if len(layers) != len(spec.sizes) - 1:
        raise ParseError("layer count does not match sizes", path)
    parts = []
    for layer, (_, shape, _) in zip(layers, spec.layer_slices()):
        w = np.asarray(layer["weights"], dtype=np.float64)
        b = np.asarray(layer["bias"], dtype=np.float64)
        if w.shape != shape or b.shape != (shape[0],):
            raise ParseError(f"layer shape {w.shape}/{b.shape} does not match {shape}", path)
        parts += [w.ravel(), b]
    return np.concatenate(parts)


def checkpoint_from_dict(doc: dict, path=None) -> tuple[NetworkParams, RpropState | None, dict]:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"unsupported checkpoint format {doc.get('format')!r}", path)
    try:
        spec = LayerSpec(tuple(doc["sizes"]))
        net = NetworkParams(spec, _flatten_layers(spec, doc["layers"], path), doc.get("seed"))
        opt = None
        if "rprop" in doc:
            r = doc["rprop"]
            opt = RpropState(_flatten_layers(spec, r["delta"], path),
                             _flatten_layers(spec, r["prev_grad"], path),
                             RpropParams(**r["params"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"malformed checkpoint: {exc}", path) from exc
    if not is_finite(net):
        raise ParseError("checkpoint contains non-finite weights", path)
    return net, opt, doc.get("meta", {})


def save_checkpoint(path, net: NetworkParams, opt: RpropState | None = None, **extra) -> Path:
    path = Path(path)
    path.write_text(json.dumps(checkpoint_dict(net, opt, **extra), indent=1) + "\n")
    return path


def load_checkpoint(path) -> tuple[NetworkParams, RpropState | None, dict]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc
    return checkpoint_from_dict(doc, path)
