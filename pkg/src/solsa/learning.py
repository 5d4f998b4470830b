"""Online SOLSA learner: eligibility traces, learning signals and kernel gradients.

The learner advances in lockstep with the forward model.  At each step it

1. evaluates the surrogate derivative of every neuron,
2. backpropagates the per-step error *spatially* (same time step, no temporal
   terms) to get a learning signal ``mu`` per neuron,
3. advances the per-connection eligibility traces, and
4. accumulates ``mu * trace`` into the weight gradient plus a
   geometrically-weighted spatial gradient for the filter kernels.

Nothing older than one step is ever stored.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import NetworkParams, NetworkState, surrogate_gradient


G_MODES = ("cumulative", "step")


class SequencingError(RuntimeError):
    """Raised when learner/early-stop calls arrive out of order."""


@dataclass
class PerStepLoss:
    dE_dO: np.ndarray
    value: float


def per_step_loss(output_spikes, target_class: int, n_classes: int) -> PerStepLoss:
    """Squared error ``0.5 * sum_k (O_k - y_k)^2`` against a one-hot target."""
    if not 0 <= target_class < n_classes:
        raise IndexError(f"target class {target_class} outside [0, {n_classes})")
    out = np.asarray(output_spikes, dtype=float)
    if out.shape != (n_classes,):
        raise ValueError(f"expected {n_classes} outputs, got shape {out.shape}")
    diff = out.copy()
    diff[target_class] -= 1.0
    return PerStepLoss(dE_dO=diff, value=0.5 * float(diff @ diff))


def learning_signal_backprop(dE_dO: np.ndarray, eps: list[np.ndarray],
                             params: NetworkParams) -> list[np.ndarray]:
    """Spatial-path learning signal for every layer at a single time step.

    Top layer: ``mu = dE/dO * eps``.  Lower layers receive
    ``sum_k mu_k * w_ki * beta_ki`` from the layer above, times their own
    ``eps``.
    """
    if len(eps) != len(params.layers):
        raise ValueError(f"got {len(eps)} eps vectors for {len(params.layers)} layers")
    mu = [None] * len(params.layers)
    mu[-1] = np.asarray(dE_dO) * eps[-1]
    for l in range(len(params.layers) - 2, -1, -1):
        upper = params.layers[l + 1]
        mu[l] = (mu[l + 1] @ (upper.w * upper.beta)) * eps[l]
    return mu


def eligibility_trace_step(e_prev, eps_i, F_ij, lam, v_th):
    """Leaky integration of the synaptic potential with spike-dependent leak.

    ``eps_i`` is the surrogate derivative that governs how ``V[t-1]`` feeds
    ``V[t]`` (leak minus soft reset), i.e. the one evaluated at ``t - 1``.
    """
    return (lam - v_th * eps_i) * e_prev + F_ij


def kernel_decay_factor(t: int, gamma: float) -> float:
    """``sum_{n=0}^{t} gamma^n``."""
    return (1.0 - gamma ** (t + 1)) / (1.0 - gamma)


@dataclass
class LearnerState:
    eligibility: list[np.ndarray]
    grad_w: list[np.ndarray]
    grad_alpha: list[np.ndarray]
    grad_beta: list[np.ndarray]
    mu: list[np.ndarray]
    eps: list[np.ndarray]
    # weight gradient summed from sequence start; never reset by updates
    grad_w_total: list[np.ndarray]
    grad_log: list[float] = field(default_factory=list)
    gamma: float = 0.9
    adapt_kernels: bool = True
    track_g: bool = True
    # "cumulative": g_t = sum |grad since sequence start|; "step": sum |mu * e| of step t alone
    g_mode: str = "cumulative"
    t: int = -1

    @classmethod
    def zeros(cls, params: NetworkParams, *, gamma: float = 0.9,
              adapt_kernels: bool = True, track_g: bool = True,
              g_mode: str = "cumulative") -> "LearnerState":
        if not 0 < gamma < 1:
            raise ValueError(f"gamma must be in (0, 1), got {gamma}")
        if g_mode not in G_MODES:
            raise ValueError(f"g_mode must be one of {G_MODES}, got {g_mode!r}")

        def mats():
            return [np.zeros_like(lp.w) for lp in params.layers]

        def vecs():
            return [np.zeros(lp.n_out, dtype=lp.w.dtype) for lp in params.layers]

        return cls(eligibility=mats(), grad_w=mats(), grad_alpha=mats(),
                   grad_beta=mats(), mu=vecs(), eps=vecs(), grad_w_total=mats(),
                   gamma=gamma, adapt_kernels=adapt_kernels, track_g=track_g, g_mode=g_mode)

    def reset_sequence(self) -> None:
        """Start a new sequence: clear traces, per-step buffers and the g_t log.

        Gradient accumulators are left alone; they are cleared by
        :func:`apply_update`.
        """
        for arrs in (self.eligibility, self.mu, self.eps, self.grad_w_total):
            for a in arrs:
                a.fill(0.0)
        self.grad_log = []
        self.t = -1


def accumulate_step(learner: LearnerState, network: NetworkState, dE_dO: np.ndarray,
                    params: NetworkParams) -> LearnerState:
    """Fold time step ``network.t - 1`` into the learner (mutates and returns it)."""
    if network.t < 1:
        raise SequencingError("accumulate_step called before any forward step")
    t = network.t - 1
    if t != learner.t + 1:
        raise SequencingError(
            f"learner at step {learner.t} cannot accumulate step {t}; "
            "call reset_sequence() at sequence start"
        )
    lam, v_th = params.lam, params.v_th
    eps_prev = learner.eps
    eps = [surrogate_gradient(ls.V, v_th, params.sigma) for ls in network.layers]
    mu = learning_signal_backprop(dE_dO, eps, params)
    geo = kernel_decay_factor(t, learner.gamma) if learner.adapt_kernels else 0.0

    g_t = 0.0
    for l, (lp, ls) in enumerate(zip(params.layers, network.layers)):
        e = learner.eligibility[l]
        e *= (lam - v_th * eps_prev[l])[:, None]
        e += ls.F
        dw = mu[l][:, None] * e
        learner.grad_w[l] += dw
        if learner.track_g:
            if learner.g_mode == "step":
                g_t += float(np.abs(dw).sum())
            else:
                learner.grad_w_total[l] += dw
                g_t += float(np.abs(learner.grad_w_total[l]).sum())
        if geo and not lp.is_input_layer:
            scaled = (mu[l] * geo)[:, None] * lp.w
            learner.grad_alpha[l] += scaled * ls.F_prev
            learner.grad_beta[l] += scaled * ls.x[None, :]

    learner.eps = eps
    learner.mu = mu
    if learner.track_g:
        learner.grad_log.append(g_t)
    learner.t = t
    return learner


def sgd_step(params: NetworkParams, grad_w, grad_alpha, grad_beta, lr_w: float,
             lr_kernel: float, *, alpha_max: float = 0.999) -> NetworkParams:
    """In-place SGD on all three parameter families; ``alpha`` is clipped to ``[0, alpha_max]``."""
    for l, lp in enumerate(params.layers):
        lp.w -= lr_w * grad_w[l]
        if lp.is_input_layer or not lr_kernel:
            continue
        lp.alpha -= lr_kernel * grad_alpha[l]
        np.clip(lp.alpha, 0.0, alpha_max, out=lp.alpha)
        lp.beta -= lr_kernel * grad_beta[l]
    return params


def apply_update(params: NetworkParams, learner: LearnerState, lr_w: float,
                 lr_kernel: float, *, alpha_max: float = 0.999) -> NetworkParams:
    """Apply the accumulated gradients, then clear the accumulators.

    Mutates ``params`` in place and returns it.  Eligibility traces are
    untouched: they describe the network's history, not pending gradient.
    """
    sgd_step(params, learner.grad_w, learner.grad_alpha, learner.grad_beta,
             lr_w, lr_kernel, alpha_max=alpha_max)
    for arrs in (learner.grad_w, learner.grad_alpha, learner.grad_beta):
        for a in arrs:
            a.fill(0.0)
    return params
