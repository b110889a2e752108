"""Dense policy/value networks with hand-written gradients.

Architecture: sigmoid-activated hidden layers (default 512-512), a linear
output layer, and for the policy head a tanh squash scaled per component to
the action bounds plus a learned state-independent log standard deviation.
Two forward paths exist on purpose:

* the row-wise inference path (``forward_policy`` / ``forward_value``)
  evaluates each sample independently, so batched and single-sample calls
  agree bitwise;
* the cached gemm path (``forward_policy_training`` et al.) is what the
  trainer differentiates; its gradients are exact for its own forward.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import ControlCommand
from .errors import InvalidInputError, WeightFormatError

WEIGHT_FORMAT_VERSION = 1
LOG_2PI = math.log(2.0 * math.pi)
# final-layer weights start small so a fresh policy's mean stays near zero
OUTPUT_LAYER_SCALE = 0.01


@dataclass(slots=True)
class DenseLayer:
    w: np.ndarray  # (in_dim, out_dim)
    b: np.ndarray  # (out_dim,)

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.w.copy(), self.b.copy())


@dataclass(slots=True)
class PolicyParameters:
    layers: list[DenseLayer]
    log_std: np.ndarray            # (act_dim,)
    obs_dim: int
    act_dim: int
    bounds: np.ndarray             # (act_dim,) per-component action bound
    activation: str = "sigmoid"

    def copy(self) -> "PolicyParameters":
        return PolicyParameters([l.copy() for l in self.layers], self.log_std.copy(),
                                self.obs_dim, self.act_dim, self.bounds.copy(),
                                self.activation)


@dataclass(slots=True)
class ValueParameters:
    layers: list[DenseLayer]
    obs_dim: int
    activation: str = "sigmoid"

    def copy(self) -> "ValueParameters":
        return ValueParameters([l.copy() for l in self.layers], self.obs_dim, self.activation)


@dataclass(frozen=True, slots=True)
class ActionDistribution:
    mean: np.ndarray
    std: np.ndarray
    bounds: np.ndarray


@dataclass(frozen=True, slots=True)
class ActionSample:
    command: ControlCommand
    raw: np.ndarray      # pre-clamp Gaussian draw; the density is evaluated here
    log_prob: float
    mean: np.ndarray
    std: np.ndarray


def default_bounds(v_max: float, w_max: float) -> np.ndarray:
    return np.array([v_max, v_max, v_max, w_max])


def _init_layers(dims: list[int], rng: np.random.Generator) -> list[DenseLayer]:
    layers = []
    for k in range(len(dims) - 1):
        fan_in = dims[k]
        limit = 1.0 / math.sqrt(fan_in)
        w = rng.uniform(-limit, limit, size=(dims[k], dims[k + 1]))
        layers.append(DenseLayer(w, np.zeros(dims[k + 1])))
    return layers


def init_params(obs_dim: int, act_dim: int, rng: np.random.Generator,
                bounds: np.ndarray | None = None,
                hidden: tuple[int, ...] = (512, 512)) -> PolicyParameters:
    """Fan-in scaled uniform weights, zero biases, log_std = ln(0.5 * v_max)."""
    if obs_dim <= 0 or act_dim <= 0:
        raise InvalidInputError("dimensions must be positive")
    if bounds is None:
        bounds = default_bounds(1.0, 20.0)[:act_dim]
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (act_dim,) or np.any(bounds <= 0.0):
        raise InvalidInputError("bounds must be positive with one entry per action")
    layers = _init_layers([obs_dim, *hidden, act_dim], rng)
    layers[-1].w *= OUTPUT_LAYER_SCALE
    log_std = np.full(act_dim, math.log(0.5 * float(bounds[0])))
    return PolicyParameters(layers, log_std, obs_dim, act_dim, bounds)


def init_value_params(obs_dim: int, rng: np.random.Generator,
                      hidden: tuple[int, ...] = (512, 512)) -> ValueParameters:
    if obs_dim <= 0:
        raise InvalidInputError("dimensions must be positive")
    return ValueParameters(_init_layers([obs_dim, *hidden, 1], rng), obs_dim)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _forward_row(layers: list[DenseLayer], x: np.ndarray) -> np.ndarray:
    h = x
    for layer in layers[:-1]:
        h = _sigmoid(h @ layer.w + layer.b)
    return h @ layers[-1].w + layers[-1].b


def _check_obs(obs: np.ndarray, obs_dim: int) -> np.ndarray:
    obs = np.asarray(obs, dtype=float)
    if obs.shape[-1] != obs_dim:
        raise InvalidInputError(f"observation length {obs.shape[-1]} != {obs_dim}")
    return obs


def forward_policy(p: PolicyParameters, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Squashed action mean and std for one observation or a batch of rows.

    Batched evaluation loops the single-sample path, so results match a
    per-row call bit for bit.
    """
    obs = _check_obs(obs, p.obs_dim)
    if obs.ndim == 1:
        mean = np.tanh(_forward_row(p.layers, obs)) * p.bounds
        return mean, np.exp(p.log_std)
    means = np.stack([np.tanh(_forward_row(p.layers, row)) * p.bounds for row in obs])
    stds = np.broadcast_to(np.exp(p.log_std), means.shape).copy()
    return means, stds


def forward_value(v: ValueParameters, obs: np.ndarray) -> float | np.ndarray:
    """State value for one observation (float) or a batch (1-D array)."""
    obs = _check_obs(obs, v.obs_dim)
    if obs.ndim == 1:
        return float(_forward_row(v.layers, obs)[0])
    return np.array([float(_forward_row(v.layers, row)[0]) for row in obs])


def action_distribution(p: PolicyParameters, obs: np.ndarray) -> ActionDistribution:
    mean, std = forward_policy(p, obs)
    return ActionDistribution(mean, std, p.bounds)


def log_prob(dist: ActionDistribution, raw_action: np.ndarray) -> float:
    """Diagonal-Gaussian log density at the unclamped action, in nats."""
    z = (np.asarray(raw_action) - dist.mean) / dist.std
    return float(np.sum(-0.5 * z * z - np.log(dist.std) - 0.5 * LOG_2PI))


def sample_action(dist: ActionDistribution, rng: np.random.Generator | None,
                  deterministic: bool = False) -> ActionSample:
    """Draw from the Gaussian (or take its mean) and clamp into the bounds."""
    if deterministic:
        raw = dist.mean.copy()
    else:
        if rng is None:
            raise InvalidInputError("stochastic sampling needs an rng")
        raw = dist.mean + dist.std * rng.standard_normal(dist.mean.shape[0])
    clamped = np.clip(raw, -dist.bounds, dist.bounds)
    cmd = ControlCommand(float(clamped[0]), float(clamped[1]), float(clamped[2]),
                         float(clamped[3]) if clamped.shape[0] > 3 else 0.0)
    return ActionSample(cmd, raw, log_prob(dist, raw), dist.mean, dist.std)


def entropy(p: PolicyParameters) -> float:
    """Entropy of the diagonal Gaussian head (state independent)."""
    return float(np.sum(p.log_std + 0.5 * (LOG_2PI + 1.0)))


# --- training path: cached batched forward + exact backward -----------------

@dataclass(slots=True)
class ForwardCache:
    x: np.ndarray
    hidden: list[np.ndarray]   # post-sigmoid activations per hidden layer
    out: np.ndarray            # raw linear output (pre-tanh for policies)


def _forward_cached(layers: list[DenseLayer], x: np.ndarray) -> ForwardCache:
    hidden = []
    h = x
    for layer in layers[:-1]:
        h = _sigmoid(h @ layer.w + layer.b)
        hidden.append(h)
    out = h @ layers[-1].w + layers[-1].b
    return ForwardCache(x, hidden, out)


def _backward_cached(layers: list[DenseLayer], cache: ForwardCache,
                     d_out: np.ndarray) -> list[DenseLayer]:
    """Gradients of sum(loss) given d(loss)/d(raw output); mirrors _forward_cached."""
    grads = [None] * len(layers)
    delta = d_out
    for k in range(len(layers) - 1, -1, -1):
        inp = cache.hidden[k - 1] if k > 0 else cache.x
        grads[k] = DenseLayer(inp.T @ delta, delta.sum(axis=0))
        if k > 0:
            h = cache.hidden[k - 1]
            delta = (delta @ layers[k].w.T) * h * (1.0 - h)
    return grads


def forward_policy_training(p: PolicyParameters, obs: np.ndarray
                            ) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    """Batched (gemm) forward returning (mean, std, cache) for backprop."""
    obs = _check_obs(obs, p.obs_dim)
    cache = _forward_cached(p.layers, obs)
    mean = np.tanh(cache.out) * p.bounds
    return mean, np.exp(p.log_std), cache


def forward_value_training(v: ValueParameters, obs: np.ndarray
                           ) -> tuple[np.ndarray, ForwardCache]:
    obs = _check_obs(obs, v.obs_dim)
    cache = _forward_cached(v.layers, obs)
    return cache.out[:, 0], cache


@dataclass(slots=True)
class PolicyGradients:
    layers: list[DenseLayer]
    log_std: np.ndarray


@dataclass(slots=True)
class ValueGradients:
    layers: list[DenseLayer]


def policy_backward(p: PolicyParameters, cache: ForwardCache, d_mean: np.ndarray,
                    d_log_std: np.ndarray) -> PolicyGradients:
    """Exact gradients given per-sample seeds d(loss)/d(mean) and d(loss)/d(log_std)."""
    if d_mean.shape != cache.out.shape:
        raise InvalidInputError("d_mean shape must match the forward batch")
    t = np.tanh(cache.out)
    d_out = d_mean * p.bounds * (1.0 - t * t)
    return PolicyGradients(_backward_cached(p.layers, cache, d_out), np.asarray(d_log_std))


def value_backward(v: ValueParameters, cache: ForwardCache,
                   d_value: np.ndarray) -> ValueGradients:
    """Exact gradients given per-sample seeds d(loss)/d(value)."""
    if d_value.shape != (cache.out.shape[0],):
        raise InvalidInputError("d_value must hold one seed per sample")
    return ValueGradients(_backward_cached(v.layers, cache, d_value[:, None]))


# --- flat vector views (optimizer and finite-difference checks) -------------

def policy_arrays(p: PolicyParameters) -> list[np.ndarray]:
    out = []
    for layer in p.layers:
        out.extend((layer.w, layer.b))
    out.append(p.log_std)
    return out


def value_arrays(v: ValueParameters) -> list[np.ndarray]:
    out = []
    for layer in v.layers:
        out.extend((layer.w, layer.b))
    return out


def policy_grad_arrays(g: PolicyGradients) -> list[np.ndarray]:
    out = []
    for layer in g.layers:
        out.extend((layer.w, layer.b))
    out.append(g.log_std)
    return out


def value_grad_arrays(g: ValueGradients) -> list[np.ndarray]:
    out = []
    for layer in g.layers:
        out.extend((layer.w, layer.b))
    return out


def arrays_to_vector(arrays: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([a.ravel() for a in arrays])


def vector_to_arrays(vec: np.ndarray, arrays: list[np.ndarray]) -> None:
    """Scatter a flat vector back into the given arrays (in place)."""
    at = 0
    for a in arrays:
        a.flat[:] = vec[at:at + a.size]
        at += a.size


def parameter_count(p: PolicyParameters | ValueParameters) -> int:
    arrays = policy_arrays(p) if isinstance(p, PolicyParameters) else value_arrays(p)
    return sum(a.size for a in arrays)


# --- serialization -----------------------------------------------------------

def _layer_doc(layer: DenseLayer) -> dict:
    return {
        "rows": int(layer.w.shape[0]),
        "cols": int(layer.w.shape[1]),
        "w": [float(x) for x in layer.w.ravel()],
        "b": [float(x) for x in layer.b],
    }


def _weights_doc(params: PolicyParameters | ValueParameters) -> dict:
    if isinstance(params, PolicyParameters):
        return {
            "format_version": WEIGHT_FORMAT_VERSION,
            "kind": "policy",
            "obs_dim": params.obs_dim,
            "act_dim": params.act_dim,
            "activation": params.activation,
            "bounds": [float(b) for b in params.bounds],
            "log_std": [float(x) for x in params.log_std],
            "layers": [_layer_doc(l) for l in params.layers],
        }
    return {
        "format_version": WEIGHT_FORMAT_VERSION,
        "kind": "value",
        "obs_dim": params.obs_dim,
        "act_dim": 1,
        "activation": params.activation,
        "layers": [_layer_doc(l) for l in params.layers],
    }


def save_weights(params: PolicyParameters | ValueParameters, path: str | Path) -> None:
    """Write the canonical JSON weight document (sorted keys, compact separators)."""
    doc = json.dumps(_weights_doc(params), sort_keys=True, separators=(",", ":"))
    Path(path).write_text(doc + "\n")


def _parse_layer(doc: dict, index: int) -> DenseLayer:
    try:
        rows, cols = int(doc["rows"]), int(doc["cols"])
        w = np.array(doc["w"], dtype=float)
        b = np.array(doc["b"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise WeightFormatError(f"layer {index}: malformed entry ({e})") from e
    if w.size != rows * cols:
        raise WeightFormatError(f"layer {index}: {w.size} weights for shape {rows}x{cols}")
    if b.size != cols:
        raise WeightFormatError(f"layer {index}: bias length {b.size} != {cols}")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
        raise WeightFormatError(f"layer {index}: non-finite values")
    return DenseLayer(w.reshape(rows, cols), b)


def load_weights(path: str | Path) -> PolicyParameters | ValueParameters:
    """Load a weight file, validating version, shapes and finiteness."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise WeightFormatError(f"cannot read weight file {path}: {e}") from e
    if doc.get("format_version") != WEIGHT_FORMAT_VERSION:
        raise WeightFormatError(f"unsupported format_version {doc.get('format_version')!r}")
    kind = doc.get("kind")
    if kind not in ("policy", "value"):
        raise WeightFormatError(f"unknown kind {kind!r}")
    if doc.get("activation") != "sigmoid":
        raise WeightFormatError(f"unsupported activation {doc.get('activation')!r}")
    layers = [_parse_layer(l, i) for i, l in enumerate(doc.get("layers", []))]
    if not layers:
        raise WeightFormatError("weight file holds no layers")
    obs_dim = int(doc["obs_dim"])
    if layers[0].w.shape[0] != obs_dim:
        raise WeightFormatError("first layer does not consume obs_dim inputs")
    for a, b in zip(layers, layers[1:]):
        if a.w.shape[1] != b.w.shape[0]:
            raise WeightFormatError("layer shapes do not chain")
    if kind == "value":
        if layers[-1].w.shape[1] != 1:
            raise WeightFormatError("value head must have one output")
        return ValueParameters(layers, obs_dim)
    act_dim = int(doc["act_dim"])
    if layers[-1].w.shape[1] != act_dim:
        raise WeightFormatError("last layer does not produce act_dim outputs")
    bounds = np.array(doc.get("bounds", []), dtype=float)
    log_std = np.array(doc.get("log_std", []), dtype=float)
    if bounds.shape != (act_dim,) or np.any(bounds <= 0.0):
        raise WeightFormatError("bounds must hold one positive entry per action")
    if log_std.shape != (act_dim,) or not np.all(np.isfinite(log_std)):
        raise WeightFormatError("log_std must hold one finite entry per action")
    return PolicyParameters(layers, log_std, obs_dim, act_dim, bounds)
