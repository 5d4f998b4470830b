"""Analytic memory and per-step workload models for SOLSA versus BPTT.

Memory is counted in stored values times the value width.  Workload is
counted in floating point operations per time step of one training
sequence, derived from layer shapes.  :class:`CountingArray` gives an
independent, instrumented count by running the real code on arrays that
tally every ufunc they take part in.
"""
from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bptt import history_values

# exp-based surrogate: subtract, divide, scale, square, exp, normalise
_EPS_OPS = 6


def _layers(sizes: Sequence[int], input_filter: bool = False):
    """(n_out, n_in, filtered) per layer."""
    return [(n_out, n_in, input_filter or idx > 0)
            for idx, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:]))]


# -- memory ------------------------------------------------------------------

def solsa_memory_values(sizes: Sequence[int]) -> dict:
    conns = sum(o * i for o, i, _ in _layers(sizes))
    neurons = sum(o for o, _, _ in _layers(sizes))
    inputs = sum(i for _, i, _ in _layers(sizes))
    return {
        "params": 3 * conns,                     # w, alpha, beta
        "traces": conns,                         # eligibility
        "accumulators": 4 * conns,               # grad w/alpha/beta + running grad w for g_t
        "learning_signals": 3 * neurons,         # mu, eps, eps of previous step
        "state": 2 * conns + 3 * neurons + inputs,  # F, F[t-1], V, O, drive, last input
    }


def bptt_memory_values(sizes: Sequence[int], seq_len: int) -> dict:
    conns = sum(o * i for o, i, _ in _layers(sizes))
    neurons = sum(o for o, _, _ in _layers(sizes))
    return {
        "params": 3 * conns,
        "accumulators": 3 * conns,
        "adjoints": 2 * conns + 2 * neurons,     # carried dE/dF and dE/dV
        "history": history_values(_FakeParams(sizes), seq_len),
    }


class _FakeParams:
    """Just enough of NetworkParams for :func:`history_values`."""

    def __init__(self, sizes):
        self.layers = [_FakeLayer(o, i) for o, i, _ in _layers(sizes)]


@dataclass
class _FakeLayer:
    n_out: int
    n_in: int


def profile_memory(sizes: Sequence[int], seq_len: int, *, itemsize: int = 8) -> dict:
    """Training-memory estimate in bytes for SOLSA and BPTT plus their ratio."""
    solsa = solsa_memory_values(sizes)
    bptt = bptt_memory_values(sizes, seq_len)
    s_bytes = itemsize * sum(solsa.values())
    b_bytes = itemsize * sum(bptt.values())
    return {
        "sizes": list(sizes),
        "seq_len": seq_len,
        "itemsize": itemsize,
        "solsa_bytes": s_bytes,
        "bptt_bytes": b_bytes,
        "solsa_mb": s_bytes / 2**20,
        "bptt_mb": b_bytes / 2**20,
        "ratio": s_bytes / b_bytes,
        "solsa_breakdown": solsa,
        "bptt_breakdown": bptt,
    }


# -- workload ----------------------------------------------------------------

def forward_ops(sizes, input_filter=False) -> int:
    ops = 0
    for n_out, n_in, filtered in _layers(sizes, input_filter):
        c = n_out * n_in
        ops += (3 * c if filtered else 0) + 2 * c + 5 * n_out
    return ops


def solsa_learner_ops(sizes, input_filter=False, adapt_kernels=True) -> int:
    layers = _layers(sizes, input_filter)
    ops = 0
    for l, (n_out, n_in, filtered) in enumerate(layers):
        c = n_out * n_in
        ops += _EPS_OPS * n_out
        if l + 1 < len(layers):
            up_out, up_in, _ = layers[l + 1]
            ops += 3 * up_out * up_in + n_out    # (w*beta)^T mu, times eps
        else:
            ops += n_out
        ops += 2 * c + 2 * n_out                 # trace leak and integrate
        ops += 2 * c                             # grad_w += mu * e
        if adapt_kernels and filtered:
            ops += 5 * c + n_out                 # alpha and beta gradients
    return ops


def apply_ops(sizes, input_filter=False, adapt_kernels=True) -> int:
    ops = 0
    for n_out, n_in, filtered in _layers(sizes, input_filter):
        c = n_out * n_in
        ops += 2 * c
        if adapt_kernels and filtered:
            ops += 5 * c                         # alpha step + clip, beta step
    return ops


def bptt_backward_step_ops(sizes, input_filter=False) -> int:
    layers = _layers(sizes, input_filter)
    ops = 0
    for l, (n_out, n_in, filtered) in enumerate(layers):
        c = n_out * n_in
        # reset path and loss or upper-layer term into dE/dO, eps, leak + chain into dE/dV
        ops += 2 * n_out + _EPS_OPS * n_out + 3 * n_out
        if l + 1 < len(layers):
            up_out, up_in, _ = layers[l + 1]
            ops += 2 * up_out * up_in            # sum_k beta_ki * dE/dF_ki
        ops += 2 * c
        if filtered:
            ops += 3 * c + 4 * c
    return ops


def _spread_points(seq_len: int, n_points: int) -> set[int]:
    if n_points <= 0:
        return {seq_len - 1}
    step = seq_len / (n_points + 1)
    return {min(seq_len - 1, int(round(step * (k + 1))) - 1) for k in range(n_points)} | {seq_len - 1}


def profile_workload(sizes: Sequence[int], seq_len: int, *, n_points: int | None = None,
                     input_filter: bool = False, adapt_kernels: bool = True,
                     k_trunc: int = 20) -> dict:
    """Per-step operation counts for one training sequence under each algorithm.

    SOLSA does forward + learner work every step and an SGD step at each of
    ``n_points + 1`` update points.  BPTT only runs forward until the last
    step, which then carries the whole backward pass and the update.
    Truncated BPTT (as trained here) does the same, but its reverse sweep
    carries ``k_trunc`` adjoint copies side by side, one per live loss term.
    """
    if n_points is None:
        n_points = max(1, seq_len // 50)
    fwd = forward_ops(sizes, input_filter)
    learn = solsa_learner_ops(sizes, input_filter, adapt_kernels)
    upd = apply_ops(sizes, input_filter, adapt_kernels)
    back = bptt_backward_step_ops(sizes, input_filter)
    points = _spread_points(seq_len, n_points)

    solsa = np.full(seq_len, fwd + learn, dtype=float)
    for p in points:
        solsa[p] += upd
    bptt = np.full(seq_len, fwd, dtype=float)
    bptt[-1] += seq_len * back + upd
    # the ring buffer carries k adjoint copies through every step; k >= T is plain BPTT
    tb_sweeps = seq_len if k_trunc >= seq_len else seq_len * k_trunc
    tbptt = np.full(seq_len, fwd, dtype=float)
    tbptt[-1] += tb_sweeps * back + upd

    return {
        "sizes": list(sizes),
        "seq_len": seq_len,
        "update_points": sorted(points),
        "solsa_ops": solsa.tolist(),
        "bptt_ops": bptt.tolist(),
        "tbptt_ops": tbptt.tolist(),
        "solsa_max_over_mean": float(solsa.max() / solsa.mean()),
        "bptt_max_over_mean": float(bptt.max() / bptt.mean()),
        "bptt_last_over_forward": float(bptt[-1] / fwd),
        "tbptt_last_over_forward": float(tbptt[-1] / fwd),
        "solsa_total": float(solsa.sum()),
        "bptt_total": float(bptt.sum()),
    }


# -- instrumented counting -----------------------------------------------------

class CountingArray(np.ndarray):
    """ndarray that adds the work of every ufunc it touches to :attr:`counter`.

    Elementwise ufuncs count one op per output element, reductions one op
    per input element and ``matmul`` two ops per multiply-add.
    """

    counter = [0]

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        raw_in = [np.asarray(x) if isinstance(x, CountingArray) else x for x in inputs]
        outs = kwargs.get("out")
        if outs is not None:
            kwargs["out"] = tuple(np.asarray(o) if isinstance(o, CountingArray) else o
                                  for o in outs)
        result = getattr(ufunc, method)(*raw_in, **kwargs)
        if method == "reduce":
            CountingArray.counter[0] += int(np.size(raw_in[0]))
        elif ufunc is np.matmul:
            a, b = (np.asarray(x) for x in raw_in[:2])
            inner = a.shape[-1]
            CountingArray.counter[0] += 2 * inner * int(np.size(result))
        else:
            CountingArray.counter[0] += int(np.size(result))
        if outs is not None:
            return outs[0]
        if isinstance(result, np.ndarray):
            return result.view(CountingArray)
        return result


@contextlib.contextmanager
def counting():
    """Reset the global counter; yields a callable returning the current count."""
    CountingArray.counter[0] = 0
    yield lambda: CountingArray.counter[0]


def instrument_params(params):
    """Copy of ``params`` whose arrays are :class:`CountingArray` views."""
    out = params.copy()
    for lp in out.layers:
        lp.w = lp.w.view(CountingArray)
        lp.alpha = lp.alpha.view(CountingArray)
        lp.beta = lp.beta.view(CountingArray)
    return out
