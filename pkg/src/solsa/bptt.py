"""Reference surrogate-gradient BPTT over the same forward model.

:func:`unrolled_forward` records every layer's state at every step, which is
exactly the memory a BPTT learner pays for.  :func:`bptt_gradients` is the
exact reverse-mode gradient of ``sum_t E[t]`` with every Heaviside derivative
replaced by :func:`~solsa.dynamics.surrogate_gradient`, propagated through
the leak, the soft reset, the synaptic filters and the inter-layer links.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import NetworkParams, NetworkState, network_forward_step, surrogate_gradient
from .learning import per_step_loss


@dataclass
class UnrollHistory:
    frames: np.ndarray          # T x D
    V: list[np.ndarray]         # per layer, T x n_out
    O: list[np.ndarray]         # per layer, T x n_out
    F: list[np.ndarray]         # per layer, T x n_out x n_in
    drive: list[np.ndarray]     # per layer, T x n_out
    dE_dO: np.ndarray           # T x K
    losses: np.ndarray          # T
    relaxed: bool = False

    @property
    def T(self) -> int:
        return len(self.frames)

    @property
    def nbytes(self) -> int:
        """Bytes held by the recorded neuron/synapse states."""
        return sum(a.nbytes for arrs in (self.V, self.O, self.F, self.drive) for a in arrs)

    def layer_input(self, l: int, t: int) -> np.ndarray:
        """Vector that drove layer ``l`` at step ``t``."""
        if l == 0:
            return self.frames[t]
        if t == 0:
            return np.zeros(self.V[l - 1].shape[1], dtype=self.V[l - 1].dtype)
        return self.O[l - 1][t - 1]


def history_values(params: NetworkParams, T: int) -> int:
    """Number of stored values in an :class:`UnrollHistory` of length ``T``."""
    return T * sum(2 * lp.n_out + lp.n_out * lp.n_in + lp.n_out for lp in params.layers)


def unrolled_forward(params: NetworkParams, frames: np.ndarray, label: int | None = None,
                     *, relaxed: bool = False) -> UnrollHistory:
    """Run the streaming forward step ``T`` times and keep everything.

    When ``label`` is given, per-step losses and ``dE/dO`` are recorded too.
    """
    frames = np.asarray(frames, dtype=params.dtype).reshape(-1, params.input_dim)
    T = len(frames)
    dt = params.dtype
    V = [np.zeros((T, lp.n_out), dt) for lp in params.layers]
    O = [np.zeros((T, lp.n_out), dt) for lp in params.layers]
    F = [np.zeros((T, lp.n_out, lp.n_in), dt) for lp in params.layers]
    drive = [np.zeros((T, lp.n_out), dt) for lp in params.layers]
    K = params.output_dim
    dE_dO = np.zeros((T, K), dt)
    losses = np.zeros(T, dt)
    state = NetworkState.zeros(params)
    for t in range(T):
        state, out = network_forward_step(state, frames[t], params, relaxed=relaxed)
        for l, ls in enumerate(state.layers):
            V[l][t] = ls.V
            O[l][t] = ls.O
            F[l][t] = ls.F
            drive[l][t] = ls.drive
        if label is not None:
            loss = per_step_loss(out, label, K)
            dE_dO[t] = loss.dE_dO
            losses[t] = loss.value
    return UnrollHistory(frames, V, O, F, drive, dE_dO, losses, relaxed)


def _reverse(history: UnrollHistory, params: NetworkParams, t_hi: int, t_lo: int,
             loss_steps: slice, grads) -> None:
    """Reverse sweep over steps ``t_hi .. t_lo``; losses enter only on ``loss_steps``."""
    lam, v_th, sigma = params.lam, params.v_th, params.sigma
    L = len(params.layers)
    gw, ga, gb = grads
    gV_next = [np.zeros(lp.n_out) for lp in params.layers]
    gF_next = [np.zeros_like(lp.w) for lp in params.layers]
    lo, hi = loss_steps.start, loss_steps.stop
    for t in range(t_hi, t_lo - 1, -1):
        gV_now = [None] * L
        gF_now = [None] * L
        for l in range(L - 1, -1, -1):
            lp = params.layers[l]
            gO = -v_th * gV_next[l]
            if l == L - 1 and lo <= t < hi:
                gO = gO + history.dE_dO[t]
            if l < L - 1:
                upper = params.layers[l + 1]
                gO = gO + (upper.beta * gF_next[l + 1]).sum(axis=0)
            eps = surrogate_gradient(history.V[l][t], v_th, sigma)
            gV = lam * gV_next[l] + eps * gO
            gw[l] += gV[:, None] * history.F[l][t]
            if lp.is_input_layer:
                gF = None
            else:
                gF = lp.w * gV[:, None] + lp.alpha * gF_next[l]
                if t > 0:
                    ga[l] += gF * history.F[l][t - 1]
                gb[l] += gF * history.layer_input(l, t)[None, :]
            gV_now[l] = gV
            gF_now[l] = gF if gF is not None else gF_next[l]
        gV_next, gF_next = gV_now, gF_now


def bptt_gradients(history: UnrollHistory, params: NetworkParams):
    """Exact surrogate gradients of ``sum_t E[t]``; returns ``(grad_w, grad_alpha, grad_beta)``."""
    grads = tuple([np.zeros_like(lp.w) for lp in params.layers] for _ in range(3))
    if history.T:
        _reverse(history, params, history.T - 1, 0, slice(0, history.T), grads)
    return grads


def truncated_bptt_gradients(history: UnrollHistory, params: NetworkParams, k: int = 20):
    """BPTT where each loss term ``E[t]`` only reaches back through steps ``t-k+1 .. t``.

    A step is a step whether it is taken along a neuron's own membrane or
    across the one-step synaptic delay between layers.  The ``k`` loss terms
    whose windows overlap a given step are carried side by side in a ring
    buffer, so one reverse sweep handles all of them.
    """
    if k < 1:
        raise ValueError(f"truncation window must be >= 1, got {k}")
    if k >= history.T:
        return bptt_gradients(history, params)
    lam, v_th, sigma = params.lam, params.v_th, params.sigma
    L = len(params.layers)
    gw, ga, gb = ([np.zeros_like(lp.w) for lp in params.layers] for _ in range(3))
    gV_next = [np.zeros((k, lp.n_out)) for lp in params.layers]
    gF_next = [np.zeros((k,) + lp.w.shape) for lp in params.layers]
    for t in range(history.T - 1, -1, -1):
        slot = t % k
        # the copy in this slot was injected k steps later and has used up its window
        for l in range(L):
            gV_next[l][slot] = 0.0
            gF_next[l][slot] = 0.0
        gV_now = [None] * L
        gF_now = [None] * L
        for l in range(L - 1, -1, -1):
            lp = params.layers[l]
            gO = -v_th * gV_next[l]
            if l == L - 1:
                gO[slot] += history.dE_dO[t]
            else:
                upper = params.layers[l + 1]
                gO += (upper.beta * gF_next[l + 1]).sum(axis=1)
            eps = surrogate_gradient(history.V[l][t], v_th, sigma)
            gV = lam * gV_next[l] + eps * gO
            gV_sum = gV.sum(axis=0)
            gw[l] += gV_sum[:, None] * history.F[l][t]
            if lp.is_input_layer:
                gF_now[l] = gF_next[l]
            else:
                gF = lp.w * gV[:, :, None] + lp.alpha * gF_next[l]
                gF_sum = gF.sum(axis=0)
                if t > 0:
                    ga[l] += gF_sum * history.F[l][t - 1]
                gb[l] += gF_sum * history.layer_input(l, t)[None, :]
                gF_now[l] = gF
            gV_now[l] = gV
        gV_next, gF_next = gV_now, gF_now
    return gw, ga, gb
