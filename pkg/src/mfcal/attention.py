"""Channel recalibration functions: forwards and analytic gradients.

Two recalibration families operate on a feature stack of shape
(H, W, C):

* scaling-exponent driven -- the stack's local exponent map is
  normalized, squeezed to one value per channel, and run through a
  bottleneck MLP with a sigmoid, gating each channel multiplicatively
  (``se_forward(source="alpha-map")``); or the exponent map is softly
  partitioned into Q learnable level sets whose normalized memberships
  are pooled into an additive per-pixel gate field (``multi_forward``).
* classic per-channel statistics -- mean (``se_forward``), mean plus
  standard deviation (``srm_forward``), spatial projection maxout
  (``scse_forward``), and cosine-basis squeezes (``fca_forward``).

The two exponent-driven paths also expose exact reverse-mode gradients
with respect to every learnable parameter and the input stack, built
for verification against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import as_field, window_sum_adjoint
from .holder import (
    DEFAULT_EPSILON,
    DEFAULT_SCALES,
    NormState,
    _normalize_with_cache,
    box_measures,
    log_slope_weights,
    normalize,
    normalize_vjp,
    slope_from_measures,
)

__all__ = [
    "MonoParams",
    "MultiParams",
    "MonoGradients",
    "MultiGradients",
    "init_mono_params",
    "init_multi_params",
    "gap",
    "gsp",
    "sigmoid",
    "se_forward",
    "scse_forward",
    "srm_gates",
    "srm_forward",
    "dct_basis",
    "lowest_frequency_pairs",
    "fca_gates",
    "fca_forward",
    "multi_membership",
    "multi_forward",
    "mono_backward",
    "multi_backward",
]


def _as_stack(values) -> np.ndarray:
    stack = as_field(values)
    if stack.ndim != 3:
        raise ValueError(f"feature stack must have shape (H, W, C), got {stack.shape}")
    return stack


def sigmoid(x) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gap(stack) -> np.ndarray:
    """Global average pooling: spatial mean per channel.

    Channels are reduced one at a time so the result is bit-identical
    to a per-channel mean of the same pixel sequence.
    """
    stack = _as_stack(stack)
    return np.array([stack[:, :, c].mean() for c in range(stack.shape[2])])


def gsp(stack) -> np.ndarray:
    """Global standard-deviation pooling (population std per channel)."""
    stack = _as_stack(stack)
    return np.array([stack[:, :, c].std() for c in range(stack.shape[2])])


# ---------------------------------------------------------------------------
# parameters


@dataclass
class MonoParams:
    """Bottleneck-MLP gate parameters shared by the squeeze-style methods.

    ``w1`` maps C channels down to floor(C / reduction), ``w2`` maps
    back up; the sigmoid of the second layer is the per-channel gate.
    ``norm`` standardizes the exponent map before pooling when the gate
    is driven by local exponents.  ``use_bias=False`` drops ``b1``/``b2``
    from the evaluation (strict two-matrix form).
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    reduction: int
    norm: NormState
    use_bias: bool = True

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        hidden, channels = self.w1.shape
        if self.w2.shape != (channels, hidden):
            raise ValueError("w2 must map the hidden layer back to the channels")
        if self.b1.shape != (hidden,) or self.b2.shape != (channels,):
            raise ValueError("bias shapes must match their layers")
        if not (1 <= self.reduction < max(channels, 2)):
            raise ValueError("reduction must satisfy 1 <= reduction < channels")

    @property
    def channels(self) -> int:
        return self.w1.shape[1]


@dataclass
class MultiParams:
    """Q learnable level sets over exponent space.

    Membership of an exponent value in level set q is a softmax over
    ``-sharpness_q * (alpha - centers_q)**2``; ``norm`` is the per-set
    normalization applied to memberships before pooling (its channel
    axis is the level-set axis).
    """

    centers: np.ndarray
    sharpness: np.ndarray
    norm: NormState

    def __post_init__(self):
        self.centers = np.atleast_1d(np.asarray(self.centers, dtype=np.float64))
        self.sharpness = np.atleast_1d(np.asarray(self.sharpness, dtype=np.float64))
        if self.centers.shape != self.sharpness.shape or self.centers.ndim != 1:
            raise ValueError("centers and sharpness must be matching 1-D arrays")
        if self.norm.channels != self.centers.size:
            raise ValueError("norm state must have one channel per level set")
        if not (np.all(np.isfinite(self.centers)) and np.all(np.isfinite(self.sharpness))):
            raise ValueError("level-set parameters must be finite")

    @property
    def q(self) -> int:
        return self.centers.size


def init_mono_params(channels: int, reduction: int = 2, rng=None,
                     norm_mode: str = "frozen", use_bias: bool = True) -> MonoParams:
    """Fan-balanced uniform init for the bottleneck MLP, zero biases."""
    rng = np.random.default_rng(rng)
    hidden = max(channels // reduction, 1)

    def fan_uniform(n_out, n_in):
        bound = np.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-bound, bound, size=(n_out, n_in))

    return MonoParams(
        w1=fan_uniform(hidden, channels),
        b1=np.zeros(hidden),
        w2=fan_uniform(channels, hidden),
        b2=np.zeros(channels),
        reduction=reduction,
        norm=NormState.identity(channels, mode=norm_mode),
        use_bias=use_bias,
    )


def init_multi_params(q: int, alpha_low: float, alpha_high: float,
                      norm_mode: str = "per-instance") -> MultiParams:
    """Centers spread over the observed exponent range, unit sharpness.

    Spanning the calibration range keeps every level set reachable at
    the start (dead memberships never recover under ReLU pooling).
    """
    if q < 1:
        raise ValueError("need at least one level set")
    if not (alpha_high >= alpha_low):
        raise ValueError("alpha range must be ordered")
    if q == 1:
        centers = np.array([0.5 * (alpha_low + alpha_high)])
    else:
        centers = np.linspace(alpha_low, alpha_high, q)
    return MultiParams(
        centers=centers,
        sharpness=np.ones(q),
        norm=NormState.identity(q, mode=norm_mode),
    )


# ---------------------------------------------------------------------------
# squeeze-and-gate forwards


def _mlp_logits(z: np.ndarray, params: MonoParams):
    a1 = params.w1 @ z
    if params.use_bias:
        a1 = a1 + params.b1
    h1 = np.maximum(a1, 0.0)
    a2 = params.w2 @ h1
    if params.use_bias:
        a2 = a2 + params.b2
    return a1, h1, a2


def _gate_from_squeeze(z: np.ndarray, params: MonoParams) -> np.ndarray:
    _, _, a2 = _mlp_logits(z, params)
    return sigmoid(a2)


def se_forward(stack, params: MonoParams, source: str = "features",
               scales=DEFAULT_SCALES, epsilon: float = DEFAULT_EPSILON):
    """Channel gates from a squeezed descriptor; multiplicative output.

    ``source="features"`` squeezes the raw stack by its spatial mean.
    ``source="alpha-map"`` squeezes the normalized local-exponent map of
    the stack instead, so the gate responds to each channel's scaling
    behaviour rather than its magnitude.  Returns ``(gates, stack * gates)``.
    """
    stack = _as_stack(stack)
    if stack.shape[2] != params.channels:
        raise ValueError("stack channel count does not match the parameters")
    if source == "features":
        z = gap(stack)
    elif source == "alpha-map":
        alpha = slope_from_measures(box_measures(stack, scales, epsilon), scales)
        z = gap(normalize(alpha, params.norm))
    else:
        raise ValueError(f"unknown squeeze source: {source!r}")
    gates = _gate_from_squeeze(z, params)
    return gates, stack * gates


def scse_forward(stack, channel_params: MonoParams, spatial_weights,
                 spatial_bias: float = 0.0) -> np.ndarray:
    """Element-wise maxout of the channel-gated and spatially-gated stack.

    The spatial branch projects each pixel's channel vector to a scalar
    logit (a 1x1 projection) and gates by its sigmoid.
    """
    stack = _as_stack(stack)
    spatial_weights = np.asarray(spatial_weights, dtype=np.float64)
    if spatial_weights.shape != (stack.shape[2],):
        raise ValueError("spatial projection needs one weight per channel")
    _, channel_branch = se_forward(stack, channel_params, source="features")
    logits = stack @ spatial_weights + spatial_bias
    spatial_branch = stack * sigmoid(logits)[:, :, None]
    return np.maximum(channel_branch, spatial_branch)


def srm_gates(stack, w_mean, w_std, norm: NormState) -> np.ndarray:
    """Per-channel gate from a learned blend of mean and std pooling.

    ``t_c = w_mean_c * GAP_c + w_std_c * GSP_c`` followed by the channel
    normalization and a sigmoid.  The squeeze vector has no spatial
    extent, so per-instance statistics degenerate (each channel
    standardizes its single value to zero); use frozen running
    statistics for an informative gate.
    """
    stack = _as_stack(stack)
    w_mean = np.asarray(w_mean, dtype=np.float64)
    w_std = np.asarray(w_std, dtype=np.float64)
    t = w_mean * gap(stack) + w_std * gsp(stack)
    return sigmoid(normalize(t, norm, channel_axis=0))


def srm_forward(stack, w_mean, w_std, norm: NormState) -> np.ndarray:
    """Recalibrate by the mean/std-pooled gates of :func:`srm_gates`."""
    stack = _as_stack(stack)
    return stack * srm_gates(stack, w_mean, w_std, norm)


# ---------------------------------------------------------------------------
# cosine-basis squeezes


def dct_basis(height: int, width: int, i: int, j: int) -> np.ndarray:
    """Separable cosine basis field for frequency pair (i, j).

    ``B[h, w] = cos(pi*i*(h+1/2)/H) * cos(pi*j*(w+1/2)/W)``.  Frequency
    (0, 0) is the all-ones field, so its squeeze of a stack equals
    H*W times the spatial mean; distinct frequency pairs give fields
    orthogonal under the plain dot product.
    """
    if not (0 <= i < height and 0 <= j < width):
        raise ValueError("frequency indices must satisfy 0 <= i < H, 0 <= j < W")
    rows = np.cos(np.pi * i * (np.arange(height) + 0.5) / height)
    cols = np.cos(np.pi * j * (np.arange(width) + 0.5) / width)
    return np.outer(rows, cols)


def lowest_frequency_pairs(count: int, height: int, width: int) -> list:
    """The ``count`` lowest cosine frequency pairs, lowest sum first."""
    pairs = sorted(
        ((i, j) for i in range(height) for j in range(width)),
        key=lambda p: (p[0] + p[1], max(p), p[0]),
    )
    if count > len(pairs):
        raise ValueError("not enough frequency pairs for this spatial extent")
    return pairs[:count]


def fca_gates(stack, params: MonoParams, freq_pairs=None) -> np.ndarray:
    """Gates from per-group cosine squeezes through the bottleneck MLP.

    Channels split into one contiguous group per frequency pair; each
    group is squeezed by its own basis field.  The channel count must be
    divisible by the group count (silent padding would corrupt the
    squeeze semantics).
    """
    stack = _as_stack(stack)
    h, w, c = stack.shape
    if freq_pairs is None:
        freq_pairs = lowest_frequency_pairs(16, h, w)
    groups = len(freq_pairs)
    if groups < 1 or c % groups != 0:
        raise ValueError(f"channel count {c} is not divisible by {groups} groups")
    size = c // groups
    z = np.empty(c)
    for g, (i, j) in enumerate(freq_pairs):
        basis = dct_basis(h, w, i, j)
        for ch in range(g * size, (g + 1) * size):
            # summed like gap() so the zero-frequency squeeze is bit-equal
            # to H*W*GAP
            z[ch] = (stack[:, :, ch] * basis).sum()
    return _gate_from_squeeze(z, params)


def fca_forward(stack, params: MonoParams, freq_pairs=None) -> np.ndarray:
    """Recalibrate by the cosine-squeeze gates of :func:`fca_gates`."""
    stack = _as_stack(stack)
    return stack * fca_gates(stack, params, freq_pairs)


# ---------------------------------------------------------------------------
# stochastic level sets


def multi_membership(alpha, params: MultiParams) -> np.ndarray:
    """Soft assignment of each exponent to the Q level sets.

    ``membership[..., q] = softmax_q(-sharpness_q * (alpha - centers_q)^2)``;
    memberships at every position sum to one.  Adding a constant to all
    squared-distance logits leaves the result unchanged.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    logits = -params.sharpness * (alpha[..., None] - params.centers) ** 2
    logits -= logits.max(axis=-1, keepdims=True)
    expl = np.exp(logits)
    return expl / expl.sum(axis=-1, keepdims=True)


def _multi_forward_cache(stack, alpha, params: MultiParams):
    stack = _as_stack(stack)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != stack.shape:
        raise ValueError("alpha map shape must match the stack")
    membership = multi_membership(alpha, params)
    normed, norm_cache = _normalize_with_cache(membership, params.norm, channel_axis=-1)
    rect = np.maximum(normed, 0.0)
    pooled = rect.sum(axis=-1)
    gate = sigmoid(pooled)
    out = stack + gate
    cache = (alpha, membership, normed, norm_cache, gate)
    return gate, out, cache


def multi_forward(stack, alpha, params: MultiParams):
    """Additive recalibration by pooled level-set memberships.

    Per position: normalize each level set's membership, rectify, sum
    over the level sets, squash with a sigmoid, and add the resulting
    gate field to the stack.  Returns ``(gate_field, stack + gate_field)``.
    """
    gate, out, _ = _multi_forward_cache(stack, alpha, params)
    return gate, out


# ---------------------------------------------------------------------------
# analytic gradients


@dataclass(frozen=True)
class MonoGradients:
    """Loss derivatives for the exponent-gated squeeze pipeline."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    stack: np.ndarray


@dataclass(frozen=True)
class MultiGradients:
    """Loss derivatives for the level-set pipeline (alpha treated as input)."""

    centers: np.ndarray
    sharpness: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    stack: np.ndarray
    alpha: np.ndarray


def mono_backward(stack, params: MonoParams, upstream,
                  scales=DEFAULT_SCALES, epsilon: float = DEFAULT_EPSILON) -> MonoGradients:
    """Exact reverse-mode gradients through the exponent-gated pipeline.

    ``upstream`` is the loss cotangent of the recalibrated stack.  The
    stack gradient combines the direct multiplicative path with the
    chain through windowed masses, logs, the slope fit, normalization,
    pooling, and the MLP.  The rectifier subgradient at zero is zero.
    """
    stack = _as_stack(stack)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != stack.shape:
        raise ValueError("upstream cotangent must match the stack shape")
    h, w, _ = stack.shape

    # forward pass, caching every intermediate
    measures = box_measures(stack, scales, epsilon)
    alpha = slope_from_measures(measures, scales)
    normed, norm_cache = _normalize_with_cache(alpha, params.norm, channel_axis=-1)
    z = gap(normed)
    a1, h1, a2 = _mlp_logits(z, params)
    gates = sigmoid(a2)

    # multiplicative head
    d_stack = upstream * gates
    d_gates = (upstream * stack).sum(axis=(0, 1))

    # MLP
    d_a2 = d_gates * gates * (1.0 - gates)
    d_w2 = np.outer(d_a2, h1)
    d_b2 = d_a2 if params.use_bias else np.zeros_like(params.b2)
    d_h1 = params.w2.T @ d_a2
    d_a1 = d_h1 * (a1 > 0.0)
    d_w1 = np.outer(d_a1, z)
    d_b1 = d_a1 if params.use_bias else np.zeros_like(params.b1)
    d_z = params.w1.T @ d_a1

    # pooling and normalization
    d_normed = np.broadcast_to(d_z / (h * w), alpha.shape)
    d_alpha, d_gamma, d_beta = normalize_vjp(d_normed, norm_cache)

    # slope fit and windowed masses
    weights = log_slope_weights(scales)
    for weight, side, mu in zip(weights, scales, measures):
        d_stack = d_stack + window_sum_adjoint(weight * d_alpha / mu, side)

    return MonoGradients(
        w1=d_w1, b1=d_b1, w2=d_w2, b2=d_b2,
        gamma=d_gamma, beta=d_beta, stack=d_stack,
    )


def multi_backward(stack, alpha, params: MultiParams, upstream) -> MultiGradients:
    """Exact reverse-mode gradients through the level-set pipeline.

    ``alpha`` is treated as an independent input; its gradient is
    returned so callers can chain it through an exponent-map backward of
    their choice.  The stack gradient of the additive head is the
    upstream cotangent itself.
    """
    stack = _as_stack(stack)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != stack.shape:
        raise ValueError("upstream cotangent must match the stack shape")

    _, _, cache = _multi_forward_cache(stack, alpha, params)
    alpha_arr, membership, normed, norm_cache, gate = cache

    d_pooled = upstream * gate * (1.0 - gate)
    d_normed = d_pooled[..., None] * (normed > 0.0)
    d_membership, d_gamma, d_beta = normalize_vjp(d_normed, norm_cache)

    # softmax over the level-set axis
    inner = (d_membership * membership).sum(axis=-1, keepdims=True)
    d_logits = membership * (d_membership - inner)

    diff = alpha_arr[..., None] - params.centers
    d_centers = (d_logits * 2.0 * params.sharpness * diff).sum(axis=(0, 1, 2))
    d_sharpness = (d_logits * -(diff ** 2)).sum(axis=(0, 1, 2))
    d_alpha = (d_logits * -2.0 * params.sharpness * diff).sum(axis=-1)

    return MultiGradients(
        centers=d_centers, sharpness=d_sharpness,
        gamma=d_gamma, beta=d_beta,
        stack=upstream.copy(), alpha=d_alpha,
    )
