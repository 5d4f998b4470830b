#!/usr/bin/env python3
"""Train on the synthetic order task and compare with full BPTT.

Channels 0 and 1 each carry one burst; the class says which came first.
The network has to remember the first burst until the second arrives,
so a purely instantaneous readout cannot solve it.

    python demos/order_task.py [--epochs 30]
"""
import argparse

from solsa.training import RunConfig, train

TASK = dict(task="order", dim=4, length=100, classes=2, n_train=200, n_test=100, seed=0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=30)
    args = ap.parse_args()

    curves = {}
    for algorithm in ("solsa", "bptt"):
        cfg = RunConfig(algorithm=algorithm, synthetic=TASK, hidden=[20, 20], weight_scale=2.0,
                        epochs=args.epochs, seed=0)
        _, metrics = train(cfg)
        curves[algorithm] = [r["test_acc"] for r in metrics.epochs]
        if metrics.schedule:
            print(f"{algorithm}: update points {metrics.schedule}")

    print("\nepoch  solsa  bptt")
    for epoch, (a, b) in enumerate(zip(curves["solsa"], curves["bptt"]), 1):
        print(f"{epoch:5d}  {a:5.2f}  {b:5.2f}")


if __name__ == "__main__":
    main()
