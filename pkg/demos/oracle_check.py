#!/usr/bin/env python3
"""How close is the forward-only gradient to backpropagation through time?

For a single spiking layer the two are identical: the eligibility trace
carries the full temporal dependence of every weight.  Once hidden layers
are stacked, the learning signal only travels down through the current
step, so the deeper gradients become an approximation.  This script shows
both regimes on small random networks.

    python demos/oracle_check.py
"""
import numpy as np

from solsa.bptt import bptt_gradients, unrolled_forward
from solsa.dynamics import NetworkState, init_params, network_forward_step
from solsa.learning import LearnerState, accumulate_step, per_step_loss


def online_gradients(params, frames, label):
    learner = LearnerState.zeros(params, adapt_kernels=False)
    state = NetworkState.zeros(params)
    for frame in frames:
        state, out = network_forward_step(state, frame, params)
        accumulate_step(learner, state, per_step_loss(out, label, params.output_dim).dE_dO,
                        params)
    return learner.grad_w


def flat(arrays):
    return np.concatenate([a.ravel() for a in arrays])


def main():
    rng = np.random.default_rng(0)

    print("single layer, 20 random nets: relative error online vs BPTT")
    errs = []
    for _ in range(20):
        params = init_params([5, 4], rng, weight_scale=3.0)
        frames = rng.uniform(0, 1, (30, 5))
        online = flat(online_gradients(params, frames, 1))
        exact = flat(bptt_gradients(unrolled_forward(params, frames, 1), params)[0])
        if np.linalg.norm(exact):
            errs.append(np.linalg.norm(online - exact) / np.linalg.norm(exact))
    print(f"  worst {max(errs):.1e} over {len(errs)} nets with non-zero gradient")

    print("\n3-layer nets, 100 random draws: cosine(online, BPTT) of the full gradient")
    cosines = []
    for _ in range(100):
        params = init_params([4, 10, 10, 3], rng, weight_scale=3.0)
        frames = rng.uniform(0, 1, (40, 4))
        online = flat(online_gradients(params, frames, 0))
        exact = flat(bptt_gradients(unrolled_forward(params, frames, 0), params)[0])
        denom = np.linalg.norm(online) * np.linalg.norm(exact)
        if denom:
            cosines.append(online @ exact / denom)
    q = np.percentile(cosines, [0, 25, 50, 75, 100])
    print("  min {:.2f}  q1 {:.2f}  median {:.2f}  q3 {:.2f}  max {:.2f}".format(*q))
    print(f"  {np.mean(np.array(cosines) > 0):.0%} of draws point into the same half-space;"
          " a few are far off")


if __name__ == "__main__":
    main()
