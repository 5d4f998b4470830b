"""Forward model: LIF neurons with soft reset fed by per-connection IIR synapses.

Every layer holds, per connection ``(i, j)``, a synaptic potential ``F[i, j]``
driven by presynaptic spikes through a first order filter
``F[t] = alpha * F[t-1] + beta * O_pre[t-1]``.  Neurons integrate
``V[t] = lam * V[t-1] + sum_j w[i, j] * F[i, j, t] - v_th * O[t-1]`` and fire
when ``V > v_th``.  The input layer skips the filter and sees raw currents,
``F[i, j, t] = x[j, t]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import erfc

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class ConfigurationError(ValueError):
    """Raised on shape or parameter mismatches in network configuration."""


@dataclass
class LayerParams:
    w: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    is_input_layer: bool = False

    def __post_init__(self):
        if not (self.w.shape == self.alpha.shape == self.beta.shape):
            raise ConfigurationError(
                f"w, alpha, beta shapes differ: {self.w.shape}, "
                f"{self.alpha.shape}, {self.beta.shape}"
            )
        if self.w.ndim != 2:
            raise ConfigurationError("layer matrices must be 2-D [n_out, n_in]")
        if np.any(self.alpha < 0) or np.any(self.alpha >= 1):
            raise ConfigurationError("filter feedback alpha must lie in [0, 1)")

    @property
    def n_out(self) -> int:
        return self.w.shape[0]

    @property
    def n_in(self) -> int:
        return self.w.shape[1]

    def copy(self) -> "LayerParams":
        return LayerParams(self.w.copy(), self.alpha.copy(), self.beta.copy(),
                           self.is_input_layer)


@dataclass
class NetworkParams:
    """Trainable weights and filter kernels plus the shared neuron constants."""

    layers: list[LayerParams]
    lam: float = 0.9
    v_th: float = 1.0
    sigma: float = 0.4

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ConfigurationError(f"lam must be in (0, 1), got {self.lam}")
        if self.v_th <= 0:
            raise ConfigurationError(f"v_th must be positive, got {self.v_th}")
        if self.sigma <= 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        if not self.layers:
            raise ConfigurationError("network needs at least one layer")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.n_in != lower.n_out:
                raise ConfigurationError(
                    f"layer fan-in {upper.n_in} does not match previous "
                    f"layer size {lower.n_out}"
                )
            if upper.is_input_layer:
                raise ConfigurationError("only the first layer may be an input layer")

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim] + [layer.n_out for layer in self.layers]

    @property
    def dtype(self):
        return self.layers[0].w.dtype

    def copy(self) -> "NetworkParams":
        return replace(self, layers=[layer.copy() for layer in self.layers])


def init_params(
    sizes: Sequence[int],
    rng: np.random.Generator,
    *,
    lam: float = 0.9,
    v_th: float = 1.0,
    sigma: float = 0.4,
    alpha: float = 0.9,
    beta: float = 0.9,
    weight_scale: float = 1.0,
    input_filter: bool = False,
    dtype=np.float64,
) -> NetworkParams:
    """Build a fully connected network ``sizes[0] -> sizes[1] -> ... -> sizes[-1]``.

    Weights are drawn uniformly from ``[-k, k]`` with
    ``k = weight_scale / sqrt(n_in)``.  With ``input_filter=False`` the first
    layer consumes raw currents; otherwise it filters the input frames like
    any other layer (suitable for spike-coded inputs).
    """
    if len(sizes) < 2:
        raise ConfigurationError("sizes needs an input size and at least one layer")
    layers = []
    for idx, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        k = weight_scale / math.sqrt(n_in)
        w = rng.uniform(-k, k, size=(n_out, n_in)).astype(dtype)
        layers.append(LayerParams(
            w=w,
            alpha=np.full((n_out, n_in), alpha, dtype=dtype),
            beta=np.full((n_out, n_in), beta, dtype=dtype),
            is_input_layer=(idx == 0 and not input_filter),
        ))
    return NetworkParams(layers, lam=lam, v_th=v_th, sigma=sigma)


# -- scalar-level operations (vectorise transparently over numpy arrays) ------

def synapse_filter_step(f_prev, alpha, beta, spike_in):
    return alpha * f_prev + beta * spike_in


def membrane_step(v_prev, o_prev, drive, lam, v_th):
    return lam * v_prev + drive - v_th * o_prev


def heaviside_fire(v, v_th):
    """Spike when strictly above threshold; ``v == v_th`` stays silent."""
    return (np.asarray(v) > v_th).astype(np.result_type(v, float))


def firing_probability(v, v_th, sigma):
    """P(v + z > v_th) for z ~ N(0, sigma^2)."""
    return 0.5 * erfc((v_th - np.asarray(v, dtype=float)) / (math.sqrt(2.0) * sigma))


def surrogate_gradient(v, v_th, sigma):
    """Derivative of :func:`firing_probability` w.r.t. ``v`` (a Gaussian density)."""
    z = (np.asanyarray(v, dtype=float) - v_th) / sigma
    return np.exp(-0.5 * z * z) / (sigma * _SQRT_2PI)


# -- state -------------------------------------------------------------------

@dataclass
class LayerState:
    """One layer's state after a step, plus the one-step history the learner needs.

    ``F_prev`` and ``x`` are the synaptic potentials before this step's filter
    update and the input vector that drove it (presynaptic spikes from
    ``t - 1``, or raw currents for the input layer).  Arrays may carry
    leading batch dimensions.
    """

    V: np.ndarray
    O: np.ndarray
    F: np.ndarray
    F_prev: np.ndarray
    x: np.ndarray
    drive: np.ndarray

    @classmethod
    def zeros(cls, n_out: int, n_in: int, dtype=np.float64, batch: tuple = ()) -> "LayerState":
        vec = np.zeros(batch + (n_out,), dtype=dtype)
        mat = np.zeros(batch + (n_out, n_in), dtype=dtype)
        return cls(V=vec, O=vec.copy(), F=mat, F_prev=mat,
                   x=np.zeros(batch + (n_in,), dtype=dtype), drive=vec.copy())


@dataclass
class NetworkState:
    layers: list[LayerState]
    t: int = 0

    @classmethod
    def zeros(cls, params: NetworkParams, batch: tuple = ()) -> "NetworkState":
        return cls([LayerState.zeros(lp.n_out, lp.n_in, params.dtype, batch)
                    for lp in params.layers])

    @property
    def output(self) -> np.ndarray:
        return self.layers[-1].O


def layer_forward_step(state: LayerState, inputs: np.ndarray, params: LayerParams,
                       lam: float, v_th: float, *, sigma: float | None = None,
                       relaxed: bool = False) -> tuple[LayerState, np.ndarray, np.ndarray]:
    """Advance one layer by one frame.

    ``inputs`` are raw currents for an input layer, otherwise the presynaptic
    spikes of the previous step.  With ``relaxed=True`` the output is the
    firing probability instead of a hard spike (needs ``sigma``); this is the
    smooth relaxation used for finite-difference gradient checks.
    """
    inputs = np.asarray(inputs, dtype=params.w.dtype)
    if inputs.ndim < 1 or inputs.shape[-1] != params.n_in:
        raise ConfigurationError(
            f"expected input vector of length {params.n_in}, got shape {inputs.shape}"
        )
    if params.is_input_layer:
        # read-only view: every neuron sees the same raw current
        F = np.broadcast_to(inputs[..., None, :], inputs.shape[:-1] + params.w.shape)
        drive = inputs @ params.w.T
    else:
        F = synapse_filter_step(state.F, params.alpha, params.beta, inputs[..., None, :])
        drive = (F * params.w).sum(axis=-1)
    V = membrane_step(state.V, state.O, drive, lam, v_th)
    if relaxed:
        O = firing_probability(V, v_th, sigma)
    else:
        O = (V > v_th).astype(V.dtype)
    return LayerState(V=V, O=O, F=F, F_prev=state.F, x=inputs, drive=drive), O, drive


def network_forward_step(state: NetworkState, frame: np.ndarray, params: NetworkParams,
                         *, relaxed: bool = False) -> tuple[NetworkState, np.ndarray]:
    """Advance the whole network by one frame; returns the new state and output spikes.

    Layer ``l`` filters the spikes layer ``l - 1`` emitted at ``t - 1``, so
    every layer reads from the *old* state.  ``frame`` may be a batch
    ``(..., D)`` if ``state`` was built with the same batch shape.
    """
    frame = np.asarray(frame)
    if frame.ndim < 1 or frame.shape[-1] != params.input_dim:
        raise ConfigurationError(
            f"frame has shape {frame.shape}, network expects (..., {params.input_dim})"
        )
    new_layers = []
    below = frame
    for ls, lp in zip(state.layers, params.layers):
        new_ls, _, _ = layer_forward_step(ls, below, lp, params.lam, params.v_th,
                                          sigma=params.sigma, relaxed=relaxed)
        below = ls.O
        new_layers.append(new_ls)
    new_state = NetworkState(new_layers, state.t + 1)
    return new_state, new_state.output


def run_forward(params: NetworkParams, frames: np.ndarray, *, relaxed: bool = False) -> np.ndarray:
    """Stream frames through a fresh network and return the output raster.

    ``frames`` is ``T x D`` or, for a batch of equal-length sequences,
    ``T x B x D``; the raster has the matching ``T x [B x] K`` shape.
    """
    frames = np.asarray(frames, dtype=params.dtype)
    state = NetworkState.zeros(params, frames.shape[1:-1])
    raster = np.zeros(frames.shape[:-1] + (params.output_dim,), dtype=params.dtype)
    for t, frame in enumerate(frames):
        state, out = network_forward_step(state, frame, params, relaxed=relaxed)
        raster[t] = out
    return raster
