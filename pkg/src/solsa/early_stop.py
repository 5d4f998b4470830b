"""Per-sample early termination of training, checked at update points."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .learning import SequencingError


def accuracy_fraction(spike_counts, target: int) -> float:
    """Share of all output spikes so far that came from the target neuron (0 if none)."""
    counts = np.asarray(spike_counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        return 0.0
    return float(counts[target] / total)


def _plurality_correct(counts: np.ndarray, target: int) -> bool:
    others = np.delete(counts, target)
    return bool(counts[target] > 0 and (others.size == 0 or counts[target] > others.max()))


@dataclass
class EarlyStopState:
    n_classes: int
    n_points: int
    threshold: float = 0.5
    enabled: bool = True
    mode: str = "fraction"
    counter: int = 0
    spike_counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mode not in ("fraction", "plurality"):
            raise ValueError(f"unknown early-stop mode {self.mode!r}")
        if self.spike_counts is None:
            self.spike_counts = np.zeros(self.n_classes)

    def observe(self, output_spikes) -> None:
        """Add one step's output spikes to the running counts."""
        self.spike_counts += output_spikes

    def correct(self, target: int) -> bool:
        if self.mode == "plurality":
            return _plurality_correct(self.spike_counts, target)
        return accuracy_fraction(self.spike_counts, target) > self.threshold


def early_stop_step(state: EarlyStopState, t: int, target: int,
                    update_points=None) -> tuple[EarlyStopState, bool]:
    """Check the running prediction at update point ``t``.

    Increments the counter on a correct prediction and requests a stop once
    ``2 * counter >= n_points``.  Disabled states never stop.
    """
    if update_points is not None and t not in update_points:
        raise SequencingError(f"early-stop check at step {t}, which is not an update point")
    if not state.enabled:
        return state, False
    if state.correct(target):
        state.counter = min(state.counter + 1, state.n_points)
    return state, 2 * state.counter >= state.n_points
