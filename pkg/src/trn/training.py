"""Joint loss, chop augmentation, the training loop and streaming evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import StreamDataset
from .metrics import ScoreTable
from .models import SequenceModel, StepOutput
from .numerics import Adam, NumericError, cross_entropy
from .rng import stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.0005
    weight_decay: float = 0.0005
    batch_size: int = 32
    epochs: int = 10
    alpha: float = 1.0
    seed: int = 0
    sequence_len: int = 90

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.sequence_len < 2:
            raise ValueError("sequence_len must be >= 2")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainingSample:
    frames: np.ndarray  # (T, input_dim)
    labels: np.ndarray  # (T,)
    future_labels: np.ndarray  # (T, L)
    future_mask: np.ndarray  # (T, L), False where t+i runs past the video


def future_targets(labels: np.ndarray, start: int, end: int, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Labels l_{t+i}, i = 1..steps, for t in [start, end), read from the whole video."""
    n = len(labels)
    idx = np.arange(start, end)[:, None] + np.arange(1, steps + 1)[None, :]
    mask = idx < n
    fut = np.where(mask, np.asarray(labels)[np.minimum(idx, n - 1)], 0)
    return fut.astype(np.int64), mask


def sequence_loss(outputs: list[StepOutput], labels, future_labels, future_mask, alpha: float) -> float:
    """Sum over t of CE(p_t, l_t) + alpha * sum_i mask * CE(p~_t^i, l_{t+i})."""
    labels = np.asarray(labels)
    if len(outputs) != len(labels) or len(future_labels) != len(outputs) or len(future_mask) != len(outputs):
        raise ValueError(f"misaligned lengths: {len(outputs)} outputs, {len(labels)} labels")
    total = 0.0
    for out, l, fl, fm in zip(outputs, labels, future_labels, future_mask):
        total += cross_entropy(out.p, int(l))
        if alpha:
            for i, q in enumerate(out.anticipated):
                if fm[i]:
                    total += alpha * cross_entropy(q, int(fl[i]))
    return total


def chop_augment(video_len: int, seq_len: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Drop a random prefix of 1..seq_len frames, then cut consecutive seq_len windows."""
    if video_len <= seq_len:
        log.warning("video of %d frames is too short for %d-frame windows; skipped", video_len, seq_len)
        return []
    delta = int(rng.integers(1, seq_len + 1))
    count = (video_len - delta) // seq_len
    return [(delta + k * seq_len, delta + (k + 1) * seq_len) for k in range(count)]


def make_samples(model: SequenceModel, dataset: StreamDataset, seq_len: int, rng, prepared=None) -> list[TrainingSample]:
    L = model.num_anticipated
    samples = []
    for n, video in enumerate(dataset.videos):
        inputs = prepared[n] if prepared is not None else model.prepare(video.features)
        labels = video.labels.astype(np.int64)
        for s, e in chop_augment(len(video), seq_len, rng):
            fut, mask = future_targets(labels, s, e, L)
            samples.append(TrainingSample(inputs[s:e], labels[s:e], fut, mask))
    return samples


def batch_loss_and_grad(model: SequenceModel, samples: list[TrainingSample], alpha: float):
    x = np.stack([s.frames for s in samples])
    y = np.stack([s.labels for s in samples])
    fl = np.stack([s.future_labels for s in samples])
    fm = np.stack([s.future_mask for s in samples])
    return model.loss_and_grad(x, y, fl, fm, alpha)


def train(
    model: SequenceModel,
    dataset: StreamDataset,
    config: TrainConfig,
    on_epoch: Callable[[int, float], None] | None = None,
) -> list[float]:
    """Train ``model`` in place; returns the mean per-sample loss of every epoch."""
    if not dataset.videos:
        raise ValueError("empty training dataset")
    if dataset.feature_dim != model.config.feature_dim:
        raise ValueError(f"dataset D={dataset.feature_dim} but model expects D={model.config.feature_dim}")
    chop_rng = stream(config.seed, "chop")
    shuffle_rng = stream(config.seed, "shuffle")
    opt = Adam(lr=config.lr, weight_decay=config.weight_decay)
    prepared = [model.prepare(v.features) for v in dataset.videos]
    trace = []
    for epoch in range(1, config.epochs + 1):
        samples = make_samples(model, dataset, config.sequence_len, chop_rng, prepared)
        if not samples:
            raise ValueError("no training windows: every video is shorter than sequence_len")
        order = shuffle_rng.permutation(len(samples))
        total = 0.0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = [samples[k] for k in order[start : start + config.batch_size]]
            loss, grads = batch_loss_and_grad(model, batch, config.alpha)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NumericError(f"non-finite loss/gradient at epoch {epoch}, batch {b}")
            opt.step(model.params, grads)
            total += loss * len(batch)
        epoch_loss = total / len(samples)
        trace.append(epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
    return trace


def evaluate(model: SequenceModel, dataset: StreamDataset) -> ScoreTable:
    """Stream every video from zero state and collect per-frame scores."""
    if dataset.feature_dim != model.config.feature_dim:
        raise ValueError(f"dataset D={dataset.feature_dim} but model expects D={model.config.feature_dim}")
    if dataset.num_actions != model.config.num_actions:
        raise ValueError(f"dataset K={dataset.num_actions} but model expects K={model.config.num_actions}")
    cur, ant, labels, vidx = [], [], [], []
    for n, video in enumerate(dataset.videos):
        out = model.stream(video.features)
        cur.append(out.current)
        ant.append(out.anticipated)
        labels.append(video.labels.astype(np.int64))
        vidx.append(np.full(len(video), n))
    frame = np.concatenate([np.arange(len(v)) for v in dataset.videos])
    return ScoreTable(
        video_ids=[v.id for v in dataset.videos],
        video=np.concatenate(vidx),
        frame=frame,
        labels=np.concatenate(labels),
        scores=np.concatenate(cur),
        anticipated=np.concatenate(ant),
    )
