#!/usr/bin/env python3
"""Memory and per-step work of forward-only learning versus BPTT.

BPTT has to keep every neuron and synapse state of the sequence and then
pays for the whole backward pass on the last step.  The forward-only
learner keeps one trace per synapse and does the same amount of work on
every step.  Both profiles are analytic counts that the test suite checks
against instrumented runs of the real code.

    python demos/profiles.py
"""
import numpy as np

from solsa.profiling import profile_memory, profile_workload


def main():
    print("memory, 8-200-200-10 network")
    for T in (1, 10, 100, 1000):
        r = profile_memory([8, 200, 200, 10], T)
        print(f"  T={T:5d}: forward-only {r['solsa_mb']:7.2f} MB, BPTT {r['bptt_mb']:8.2f} MB, "
              f"ratio {r['ratio']:.3f}")

    print("\nwork per step, 4-20-20-2 network, T=100")
    r = profile_workload([4, 20, 20, 2], 100)
    solsa, bptt = np.array(r["solsa_ops"], int), np.array(r["bptt_ops"], int)
    print(f"  forward-only: min {solsa.min()}, max {solsa.max()}, "
          f"max/mean {r['solsa_max_over_mean']:.2f}")
    print(f"  BPTT: forward steps {bptt[0]} ops, last step {bptt[-1]} ops, "
          f"ratio {r['bptt_last_over_forward']:.0f}")
    print(f"  totals: forward-only {int(r['solsa_total'])}, BPTT {int(r['bptt_total'])}")


if __name__ == "__main__":
    main()
