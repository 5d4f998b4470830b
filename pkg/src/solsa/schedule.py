"""Scheduled weight updates: choose the time steps at which gradients are applied.

Update points are picked from the per-step gradient magnitude
``g_t = sum |sum_{t' <= t} mu * e|`` recorded during the first training
epochs.  Each selection epoch trains with the current working schedule
``x0`` (the top-N steps of the previous epoch plus the sequence end), and the
single largest ``g_t`` of that epoch is added to the returned set ``X``.
Selection stops once ``|X| > N``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .dynamics import ConfigurationError
from .learning import LearnerState

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UpdateSchedule:
    points: tuple[int, ...]
    n_target: int

    def __post_init__(self):
        pts = tuple(int(p) for p in self.points)
        if not pts:
            raise ValueError("an update schedule must contain the sequence end")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError(f"update points must be strictly increasing: {pts}")
        if pts[0] < 0:
            raise ValueError("update points must be non-negative")
        object.__setattr__(self, "points", pts)

    @property
    def i_end(self) -> int:
        return self.points[-1]

    @property
    def length(self) -> int:
        return self.i_end + 1

    @classmethod
    def end_only(cls, seq_len: int) -> "UpdateSchedule":
        """Update only once, at the last step (unscheduled learning)."""
        return cls((seq_len - 1,), 0)

    def for_length(self, seq_len: int) -> frozenset[int]:
        """Update points for a sequence of ``seq_len`` steps; its own last step always counts."""
        return frozenset(p for p in self.points if p < seq_len - 1) | {seq_len - 1}

    def to_json(self) -> str:
        return json.dumps(list(self.points))

    @classmethod
    def from_json(cls, text: str, n_target: int | None = None) -> "UpdateSchedule":
        pts = json.loads(text)
        if not isinstance(pts, list) or not all(isinstance(p, int) for p in pts):
            raise ValueError("schedule file must hold a JSON array of integers")
        pts = sorted(set(pts))
        return cls(tuple(pts), len(pts) - 1 if n_target is None else n_target)


def is_update_point(t: int, schedule: UpdateSchedule) -> bool:
    return t in schedule.points


def default_n_points(seq_len: int) -> int:
    """One update point per 50 steps, at least one."""
    return max(1, seq_len // 50)


def record_gradient_magnitude(learner: LearnerState, t: int) -> float:
    """``g_t`` for step ``t`` of the current sequence (already logged by the learner)."""
    if not 0 <= t < len(learner.grad_log):
        raise IndexError(f"no gradient magnitude recorded for step {t}")
    return learner.grad_log[t]


def aggregate_gradient_logs(logs: Iterable[Sequence[float]], length: int) -> np.ndarray:
    """Average per-sequence ``g_t`` logs by absolute index.

    Shorter sequences contribute nothing at indices they never reached.
    """
    total = np.zeros(length)
    n = 0
    for g in logs:
        g = np.asarray(g, dtype=float)[:length]
        total[: len(g)] += g
        n += 1
    return total / max(n, 1)


def _top_n(g: np.ndarray, n: int) -> list[int]:
    # stable sort on -g keeps the smaller index first among ties
    return [int(i) for i in np.argsort(-g, kind="stable")[:n]]


def select_update_points(
    run_epoch: Callable[[UpdateSchedule], Sequence[float]],
    seq_len: int,
    n_points: int,
    *,
    schedule_from: str = "X",
) -> UpdateSchedule:
    """Update-point selection loop.

    ``run_epoch(schedule)`` trains one epoch with ``schedule`` and returns the
    epoch's ``g`` vector (length ``seq_len``).  If the epoch's argmax is
    already selected, the next-largest unselected index is taken instead so
    every epoch grows the set and the loop terminates.  Ties go to the
    smaller index.
    """
    if n_points < 1:
        raise ConfigurationError(f"number of update points must be >= 1, got {n_points}")
    if n_points >= seq_len:
        raise ConfigurationError(
            f"{n_points} update points do not fit a sequence of {seq_len} steps"
        )
    if schedule_from not in ("X", "x0"):
        raise ConfigurationError(f"schedule_from must be 'X' or 'x0', got {schedule_from!r}")
    i_end = seq_len - 1
    X = {i_end}
    x0 = UpdateSchedule((i_end,), n_points)
    while len(X) <= n_points:
        g = np.asarray(run_epoch(x0), dtype=float)
        if g.shape != (seq_len,):
            raise ValueError(f"epoch returned g of shape {g.shape}, expected ({seq_len},)")
        x0 = UpdateSchedule(tuple(sorted(set(_top_n(g, n_points)) | {i_end})), n_points)
        ranked = _top_n(g, seq_len)
        i_max = ranked[0]
        if i_max in X:
            fresh = [i for i in ranked if i not in X]
            if not fresh:
                break
            i_max = fresh[0]
        X.add(i_max)
        log.debug("schedule epoch: i_max=%d, X=%s, x0=%s", i_max, sorted(X), x0.points)
    if schedule_from == "x0":
        return x0
    return UpdateSchedule(tuple(sorted(X)), n_points)
