#!/usr/bin/env python3
"""Where the update points land, and how early training stops.

g_t can be measured two ways.  The default ``cumulative`` mode sums the
gradient accumulated since the sequence began, so it grows almost
monotonically and the selected points pile up at the sequence end.  The
``step`` mode measures only the gradient produced at step t, which peaks
where the input is informative.  On the early-cue task the class burst
is in the first 20% of the sequence: the step mode pulls update points
forward, the first one into the cue window, and the early-stop point
falls as training proceeds.

    python demos/schedule_and_early_stop.py [--epochs 10]
"""
import argparse

from solsa.training import RunConfig, train

TASK = dict(task="early-cue", dim=4, length=100, classes=2, n_train=200, n_test=100, seed=0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=10)
    args = ap.parse_args()

    for g_mode in ("cumulative", "step"):
        cfg = RunConfig(synthetic=TASK, hidden=[20, 20], weight_scale=2.0, g_mode=g_mode,
                        epochs=args.epochs, seed=0)
        _, metrics = train(cfg)
        stops = [round(r["mean_stop_point"], 1) for r in metrics.epochs if r["phase"] == "train"]
        print(f"g_mode={g_mode}")
        print(f"  update points   {metrics.schedule}")
        print(f"  mean stop point {stops}")
        print(f"  final test acc  {metrics.final_test_accuracy:.2f}")


if __name__ == "__main__":
    main()
