"""End-to-end training and evaluation with batch size one.

SOLSA-family runs stream every training sequence through the network one
frame at a time, folding each step into the learner and applying the
accumulated gradient at scheduled update points.  BPTT and truncated BPTT
unroll each sequence and update once at its end.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``: one
stream initialises the weights, a second shuffles the presentation order.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .bptt import bptt_gradients, truncated_bptt_gradients, unrolled_forward
from .data import Dataset, SyntheticTask, encode_input_frame, generate_synthetic, load_dataset
from .dynamics import (ConfigurationError, NetworkParams, NetworkState, init_params,
                       network_forward_step, run_forward)
from .early_stop import EarlyStopState, early_stop_step
from .learning import (G_MODES, LearnerState, accumulate_step, apply_update, per_step_loss,
                       sgd_step)
from .schedule import (UpdateSchedule, aggregate_gradient_logs, default_n_points,
                       select_update_points)

log = logging.getLogger(__name__)

ALGORITHMS = ("solsa", "solsa-variant1", "solsa-variant2", "solsa-variant3", "bptt", "tbptt")

# Ablation columns: which enhancement each SOLSA flavour switches on.
FEATURES = {
    "solsa":          {"synapse_filter": True, "adaptive_kernel": True,  "reset": True,
                       "scheduled": True, "early_stop": True},
    "solsa-variant1": {"synapse_filter": True, "adaptive_kernel": False, "reset": True,
                       "scheduled": True, "early_stop": False},
    "solsa-variant2": {"synapse_filter": True, "adaptive_kernel": True,  "reset": True,
                       "scheduled": True, "early_stop": False},
    "solsa-variant3": {"synapse_filter": True, "adaptive_kernel": False, "reset": True,
                       "scheduled": True, "early_stop": True},
}


@dataclass
class RunConfig:
    algorithm: str = "solsa"
    hidden: list[int] = field(default_factory=lambda: [20, 20])
    lam: float = 0.9
    v_th: float = 1.0
    sigma: float = 0.4
    gamma: float = 0.9
    alpha_init: float = 0.9
    beta_init: float = 0.9
    weight_scale: float = 1.0
    input_filter: bool = False
    lr_w: float = 1e-3
    lr_kernel: float = 1e-4
    alpha_max: float = 0.999
    # update points N; None -> one per 50 steps, 0 -> update only at sequence end
    n_points: int | None = None
    schedule_from: str = "X"
    g_mode: str = "cumulative"
    schedule_file: str | None = None
    k_trunc: int = 20
    early_stop_threshold: float = 0.5
    early_stop_mode: str = "fraction"
    epochs: int = 30
    seed: int = 0
    dataset: str | None = None
    synthetic: dict | None = None
    input_scale: float | None = None
    eval_every: int = 1
    output_dir: str | None = None

    # -- construction -------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data)

    def with_overrides(self, overrides: list[str]) -> "RunConfig":
        """Apply ``key=value`` strings; values are parsed as JSON when possible."""
        data = dataclasses.asdict(self)
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ConfigurationError(f"override {item!r} is not key=value")
            try:
                value: Any = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            if "." in key:
                head, sub = key.split(".", 1)
                if head != "synthetic":
                    raise ConfigurationError(f"unknown nested key {key!r}")
                data["synthetic"] = dict(data.get("synthetic") or {}, **{sub: value})
            else:
                data[key] = value
        return self.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    # -- derived ------------------------------------------------------------
    @property
    def features(self) -> dict:
        if self.algorithm in FEATURES:
            return FEATURES[self.algorithm]
        return {"synapse_filter": True, "adaptive_kernel": True, "reset": True,
                "scheduled": False, "early_stop": False}

    def validate(self) -> None:
        errors = []
        if self.algorithm not in ALGORITHMS:
            errors.append(f"algorithm must be one of {ALGORITHMS}")
        if not all(isinstance(h, int) and h > 0 for h in self.hidden):
            errors.append("hidden layer sizes must be positive integers")
        if not 0 < self.lam < 1:
            errors.append("lam must be in (0, 1)")
        if self.v_th <= 0 or self.sigma <= 0:
            errors.append("v_th and sigma must be positive")
        if not 0 < self.gamma < 1:
            errors.append("gamma must be in (0, 1)")
        if not 0 <= self.alpha_init < 1:
            errors.append("alpha_init must be in [0, 1)")
        if not 0 < self.alpha_max < 1:
            errors.append("alpha_max must be in (0, 1)")
        if self.lr_w < 0 or self.lr_kernel < 0:
            errors.append("learning rates must be non-negative")
        if self.n_points is not None and self.n_points < 0:
            errors.append("n_points must be >= 0")
        if self.schedule_from not in ("X", "x0"):
            errors.append("schedule_from must be 'X' or 'x0'")
        if self.g_mode not in G_MODES:
            errors.append(f"g_mode must be one of {G_MODES}")
        if self.k_trunc < 1:
            errors.append("k_trunc must be >= 1")
        if self.early_stop_mode not in ("fraction", "plurality"):
            errors.append("early_stop_mode must be 'fraction' or 'plurality'")
        if self.epochs < 0:
            errors.append("epochs must be >= 0")
        if self.eval_every < 0:
            errors.append("eval_every must be >= 0")
        if (self.dataset is None) == (self.synthetic is None):
            errors.append("give exactly one of dataset or synthetic")
        if self.synthetic is not None:
            try:
                SyntheticTask(**{k: v for k, v in self.synthetic.items() if k != "seed"})
            except TypeError as exc:
                errors.append(f"bad synthetic spec: {exc}")
        if errors:
            raise ConfigurationError("; ".join(errors))

    def load_data(self) -> Dataset:
        if self.dataset is not None:
            return load_dataset(self.dataset)
        spec = dict(self.synthetic)
        seed = spec.pop("seed", self.seed)
        return generate_synthetic(SyntheticTask(**spec), seed)

    def build_params(self, dataset: Dataset) -> NetworkParams:
        rng = np.random.Generator(np.random.PCG64(self.seed))
        return init_params([dataset.dim, *self.hidden, dataset.classes], rng,
                           lam=self.lam, v_th=self.v_th, sigma=self.sigma,
                           alpha=self.alpha_init, beta=self.beta_init,
                           weight_scale=self.weight_scale, input_filter=self.input_filter)


@dataclass
class RunMetrics:
    seed: int
    config_hash: str
    epochs: list[dict] = field(default_factory=list)
    g_traces: list[list[float]] = field(default_factory=list)
    schedule: list[int] | None = None
    memory: dict | None = None
    workload: dict | None = None

    def add_epoch(self, row: dict) -> None:
        self.epochs.append({"seed": self.seed, "config_hash": self.config_hash, **row})

    @property
    def final_test_accuracy(self) -> float | None:
        for row in reversed(self.epochs):
            if row.get("test_acc") is not None:
                return row["test_acc"]
        return None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if self.epochs:
            with (out / "metrics.csv").open("w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(self.epochs[0]),
                                        lineterminator="\n")
                writer.writeheader()
                writer.writerows(self.epochs)
        (out / "summary.json").write_text(json.dumps(self.to_dict(), indent=2) + "\n",
                                          encoding="utf-8")


# -- evaluation --------------------------------------------------------------

def predict(params: NetworkParams, frames: np.ndarray) -> np.ndarray:
    """Class with the most output spikes over the whole sequence (ties -> lowest index).

    ``frames`` is ``T x D`` or a batch ``T x B x D``.
    """
    counts = run_forward(params, frames).sum(axis=0)
    return np.argmax(counts, axis=-1)


def evaluate(params: NetworkParams, dataset: Dataset, *, split: str = "test",
             scale: float | None = None) -> float:
    """Fraction of sequences in ``split`` whose predicted class matches the label.

    Sequences of equal length are run together as one batch.
    """
    seqs = getattr(dataset, split)
    if dataset.dim != params.input_dim:
        raise ConfigurationError(
            f"dataset has {dataset.dim} input channels, network expects {params.input_dim}"
        )
    if dataset.classes != params.output_dim:
        raise ConfigurationError(
            f"dataset has {dataset.classes} classes, network has {params.output_dim} outputs"
        )
    if not seqs:
        return 0.0
    scale = dataset.input_scale() if scale is None else scale
    by_length: dict[int, list] = {}
    for seq in seqs:
        by_length.setdefault(seq.length, []).append(seq)
    correct = 0
    for length, group in by_length.items():
        if length == 0:
            correct += sum(s.label == 0 for s in group)
            continue
        frames = np.stack([encode_input_frame(s.frames, dataset.format, scale) for s in group],
                          axis=1)
        pred = predict(params, frames)
        correct += int(np.sum(pred == np.array([s.label for s in group])))
    return correct / len(seqs)


# -- per-sequence training ---------------------------------------------------

@dataclass
class SequenceResult:
    steps: int
    loss: float
    correct: bool
    g: list[float]


def train_sequence_solsa(params: NetworkParams, learner: LearnerState, frames: np.ndarray,
                         label: int, update_points: frozenset[int], cfg: RunConfig,
                         *, early_stop: bool) -> SequenceResult:
    """Stream one sequence through the network, updating at ``update_points``."""
    K = params.output_dim
    learner.reset_sequence()
    state = NetworkState.zeros(params)
    stopper = EarlyStopState(K, len(update_points), cfg.early_stop_threshold,
                             enabled=early_stop, mode=cfg.early_stop_mode)
    total_loss = 0.0
    steps = 0
    for t, frame in enumerate(frames):
        state, out = network_forward_step(state, frame, params)
        loss = per_step_loss(out, label, K)
        total_loss += loss.value
        accumulate_step(learner, state, loss.dE_dO, params)
        stopper.observe(out)
        steps = t + 1
        if t in update_points:
            apply_update(params, learner, cfg.lr_w, cfg.lr_kernel, alpha_max=cfg.alpha_max)
            _, stop = early_stop_step(stopper, t, label)
            if stop:
                break
    counts = stopper.spike_counts
    return SequenceResult(steps, total_loss, bool(np.argmax(counts) == label),
                          list(learner.grad_log))


def train_sequence_bptt(params: NetworkParams, frames: np.ndarray, label: int,
                        cfg: RunConfig) -> SequenceResult:
    history = unrolled_forward(params, frames, label)
    if cfg.algorithm == "tbptt":
        gw, ga, gb = truncated_bptt_gradients(history, params, cfg.k_trunc)
    else:
        gw, ga, gb = bptt_gradients(history, params)
    sgd_step(params, gw, ga, gb, cfg.lr_w, cfg.lr_kernel, alpha_max=cfg.alpha_max)
    counts = history.O[-1].sum(axis=0)
    return SequenceResult(history.T, float(history.losses.sum()),
                          bool(np.argmax(counts) == label), [])


# -- driver ------------------------------------------------------------------

class Trainer:
    """Holds the mutable pieces of one run so epochs can be driven step by step."""

    def __init__(self, cfg: RunConfig, dataset: Dataset | None = None,
                 params: NetworkParams | None = None):
        cfg.validate()
        self.cfg = cfg
        self.dataset = dataset if dataset is not None else cfg.load_data()
        if not self.dataset.train:
            raise ConfigurationError("training split is empty")
        self.params = params if params is not None else cfg.build_params(self.dataset)
        if self.params.input_dim != self.dataset.dim or self.params.output_dim != self.dataset.classes:
            raise ConfigurationError("network shape does not match dataset")
        self.scale = cfg.input_scale if cfg.input_scale is not None else self.dataset.input_scale()
        self.train_frames = [encode_input_frame(s.frames, self.dataset.format, self.scale)
                             for s in self.dataset.train]
        self.order_rng = np.random.Generator(np.random.PCG64([cfg.seed, 1]))
        feats = cfg.features
        self.is_solsa = cfg.algorithm in FEATURES
        self.early_stop = feats["early_stop"]
        self.learner = LearnerState.zeros(self.params, gamma=cfg.gamma,
                                          adapt_kernels=feats["adaptive_kernel"],
                                          track_g=False, g_mode=cfg.g_mode)
        self.seq_len = self.dataset.max_length
        self.schedule: UpdateSchedule | None = None
        self.metrics = RunMetrics(cfg.seed, cfg.config_hash())
        self.epoch = 0

    @property
    def n_points(self) -> int:
        if not self.cfg.features["scheduled"]:
            return 0
        if self.cfg.n_points is None:
            return default_n_points(self.seq_len)
        return self.cfg.n_points

    def run_epoch(self, schedule: UpdateSchedule | None, *, record_g: bool = False,
                  early_stop: bool | None = None, phase: str = "train") -> np.ndarray:
        """One pass over the shuffled training split; returns the epoch-mean ``g_t``."""
        cfg = self.cfg
        early_stop = self.early_stop if early_stop is None else early_stop
        self.learner.track_g = record_g
        t0 = time.perf_counter()
        order = self.order_rng.permutation(len(self.train_frames))
        results = []
        for idx in order:
            frames = self.train_frames[idx]
            label = self.dataset.train[idx].label
            if len(frames) == 0:
                continue
            if self.is_solsa:
                if schedule is None:
                    points = frozenset({len(frames) - 1})
                else:
                    points = schedule.for_length(len(frames))
                results.append(train_sequence_solsa(self.params, self.learner, frames, label,
                                                    points, cfg, early_stop=early_stop))
            else:
                results.append(train_sequence_bptt(self.params, frames, label, cfg))
        self.epoch += 1
        lengths = [len(self.train_frames[i]) for i in order if len(self.train_frames[i])]
        row = {
            "epoch": self.epoch,
            "phase": phase,
            "train_online_acc": float(np.mean([r.correct for r in results])),
            "mean_loss": float(np.mean([r.loss / r.steps for r in results])),
            "mean_stop_point": float(np.mean([r.steps for r in results])),
            "mean_stop_fraction": float(np.mean([r.steps / n for r, n in zip(results, lengths)])),
            "wall_time": time.perf_counter() - t0,
            "test_acc": None,
        }
        if cfg.eval_every and (self.epoch % cfg.eval_every == 0 or self.epoch == cfg.epochs):
            row["test_acc"] = evaluate(self.params, self.dataset, scale=self.scale)
        self.metrics.add_epoch(row)
        log.info("epoch %d (%s): %s", self.epoch, phase,
                 {k: row[k] for k in ("train_online_acc", "test_acc", "mean_stop_point")})
        return aggregate_gradient_logs((r.g for r in results), self.seq_len) if record_g else None

    def build_schedule(self) -> UpdateSchedule:
        """Pick update points during the first training epochs.

        Early stopping is held off while the schedule is being built so every
        step's ``g_t`` is observed.
        """
        n = self.n_points
        if n == 0:
            return UpdateSchedule.end_only(self.seq_len)
        if self.cfg.schedule_file:
            return UpdateSchedule.from_json(Path(self.cfg.schedule_file).read_text(), n)

        def epoch_fn(x0: UpdateSchedule):
            g = self.run_epoch(x0, record_g=True, early_stop=False, phase="schedule")
            self.metrics.g_traces.append([float(v) for v in g])
            return g

        return select_update_points(epoch_fn, self.seq_len, n,
                                    schedule_from=self.cfg.schedule_from)

    def fit(self) -> tuple[NetworkParams, RunMetrics]:
        cfg = self.cfg
        if cfg.epochs == 0:
            return self.params, self.metrics
        if self.is_solsa:
            self.schedule = self.build_schedule()
            self.metrics.schedule = list(self.schedule.points)
        while self.epoch < cfg.epochs:
            self.run_epoch(self.schedule)
        return self.params, self.metrics


def build_update_schedule(params: NetworkParams, dataset: Dataset, n_points: int,
                          cfg: RunConfig | None = None) -> UpdateSchedule:
    """Train ``params`` (in place) for the selection epochs and return the chosen schedule."""
    base = cfg or RunConfig(synthetic={})
    cfg = dataclasses.replace(base, n_points=n_points, algorithm=base.algorithm
                              if base.algorithm in FEATURES else "solsa")
    trainer = Trainer(cfg, dataset, params)
    return trainer.build_schedule()


def train(cfg: RunConfig, dataset: Dataset | None = None) -> tuple[NetworkParams, RunMetrics]:
    """Train per ``cfg``; deterministic for a fixed seed."""
    trainer = Trainer(cfg, dataset)
    params, metrics = trainer.fit()
    if cfg.output_dir:
        metrics.write(cfg.output_dir)
        save_params(params, Path(cfg.output_dir) / "params.npz")
    return params, metrics


def save_params(params: NetworkParams, path) -> None:
    arrays = {}
    for l, lp in enumerate(params.layers):
        arrays[f"w{l}"], arrays[f"alpha{l}"], arrays[f"beta{l}"] = lp.w, lp.alpha, lp.beta
    meta = {"lam": params.lam, "v_th": params.v_th, "sigma": params.sigma,
            "input_layer": [lp.is_input_layer for lp in params.layers]}
    np.savez(path, meta=json.dumps(meta), **arrays)


def load_params(path) -> NetworkParams:
    from .dynamics import LayerParams

    with np.load(path) as z:
        meta = json.loads(str(z["meta"]))
        layers = [LayerParams(z[f"w{l}"], z[f"alpha{l}"], z[f"beta{l}"], flag)
                  for l, flag in enumerate(meta["input_layer"])]
    return NetworkParams(layers, lam=meta["lam"], v_th=meta["v_th"], sigma=meta["sigma"])
