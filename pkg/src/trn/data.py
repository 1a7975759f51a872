"""Synthetic labelled feature streams and the OADS dataset file format.

Labels follow a Markov chain over segments with geometric durations. Each
class emits features around its own mean; in the last few frames before a
segment boundary the emission drifts towards the next class's mean, which
is what makes the near future partly visible in the present.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import stream


MAGIC = b"OADS"
VERSION = 1


class FormatError(ValueError):
    pass


class GeneratorConfigError(ValueError):
    pass


@dataclass
class Video:
    id: str
    features: np.ndarray  # (T, D) float32
    labels: np.ndarray  # (T,) uint8

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class StreamDataset:
    videos: list[Video]
    num_actions: int
    feature_dim: int

    @property
    def num_frames(self) -> int:
        return sum(len(v) for v in self.videos)

    def class_histogram(self) -> np.ndarray:
        hist = np.zeros(self.num_actions + 1, dtype=np.int64)
        for v in self.videos:
            hist += np.bincount(v.labels, minlength=self.num_actions + 1)
        return hist

    def split(self, n_first: int) -> tuple["StreamDataset", "StreamDataset"]:
        a = StreamDataset(self.videos[:n_first], self.num_actions, self.feature_dim)
        b = StreamDataset(self.videos[n_first:], self.num_actions, self.feature_dim)
        return a, b

    def __eq__(self, other) -> bool:
        if not isinstance(other, StreamDataset):
            return NotImplemented
        return (
            self.num_actions == other.num_actions
            and self.feature_dim == other.feature_dim
            and len(self.videos) == len(other.videos)
            and all(
                a.id == b.id
                and np.array_equal(a.labels, b.labels)
                and a.features.shape == b.features.shape
                and a.features.tobytes() == b.features.tobytes()
                for a, b in zip(self.videos, other.videos)
            )
        )


def default_transitions(num_actions: int, background_return: float = 0.5) -> np.ndarray:
    """Background jumps to a uniform action; an action returns to background
    with ``background_return`` and otherwise moves to another action."""
    K = num_actions
    P = np.zeros((K + 1, K + 1))
    P[0, 1:] = 1.0 / K
    for a in range(1, K + 1):
        if K == 1:
            P[a, 0] = 1.0
            continue
        P[a, 0] = background_return
        others = [b for b in range(1, K + 1) if b != a]
        P[a, others] = (1.0 - background_return) / len(others)
    return P


@dataclass
class GeneratorConfig:
    num_videos: int = 50
    frames_per_video: int = 600
    num_actions: int = 4
    feature_dim: int = 16
    mean_segment_len: float = 20.0
    noise: float = 1.0
    precursor_strength: float = 0.7
    precursor_len: int = 6
    seed: int = 0
    video_offset: int = 0  # index of the first video, for disjoint splits from one seed
    transitions: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.transitions is None:
            self.transitions = default_transitions(self.num_actions)
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        C = self.num_actions + 1
        P = self.transitions
        if P.shape != (C, C):
            raise GeneratorConfigError(f"transition matrix must be {C}x{C}, got {P.shape}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise GeneratorConfigError("transition matrix must be row-stochastic (rows sum to 1 within 1e-9)")
        if self.noise < 0:
            raise GeneratorConfigError("noise must be >= 0")
        if not 0.0 <= self.precursor_strength <= 1.0:
            raise GeneratorConfigError("precursor_strength must lie in [0, 1]")
        if self.mean_segment_len < 1:
            raise GeneratorConfigError("mean_segment_len must be >= 1")
        if self.num_actions < 1 or self.num_actions > 255:
            raise GeneratorConfigError("num_actions must be in [1, 255]")
        if self.feature_dim < 1 or self.frames_per_video < 1 or self.num_videos < 0 or self.precursor_len < 0 or self.video_offset < 0:
            raise GeneratorConfigError("sizes must be positive")


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eig(np.asarray(P).T)
    k = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(V[:, k])
    return pi / pi.sum()


def class_means(config: GeneratorConfig) -> np.ndarray:
    rng = stream(config.seed, "datagen", 0)
    return rng.normal(0.0, 1.0, (config.num_actions + 1, config.feature_dim))


def sample_labels(config: GeneratorConfig, length: int, rng: np.random.Generator) -> np.ndarray:
    P = config.transitions
    C = P.shape[0]
    p_end = 1.0 / config.mean_segment_len
    labels = np.empty(length, dtype=np.int64)
    cur = rng.choice(C, p=stationary_distribution(P))
    t = 0
    while t < length:
        n = int(rng.geometric(p_end))
        labels[t : t + n] = cur
        t += n
        cur = rng.choice(C, p=P[cur])
    return labels


def emit_features(labels: np.ndarray, means: np.ndarray, config: GeneratorConfig, rng) -> np.ndarray:
    feats = means[labels].copy()
    rho, m = config.precursor_strength, config.precursor_len
    if rho > 0 and m > 0:
        starts = np.flatnonzero(np.diff(labels)) + 1
        seg_start = 0
        for b in starts:
            lo = max(seg_start, b - m)
            feats[lo:b] = rho * means[labels[b]] + (1.0 - rho) * means[labels[b - 1]]
            seg_start = b
    if config.noise > 0:
        feats = feats + config.noise * rng.normal(size=feats.shape)
    return feats.astype(np.float32)


def generate(config: GeneratorConfig) -> StreamDataset:
    means = class_means(config)
    videos = []
    for n in range(config.video_offset, config.video_offset + config.num_videos):
        rng = stream(config.seed, "datagen", n + 1)
        labels = sample_labels(config, config.frames_per_video, rng)
        feats = emit_features(labels, means, config, rng)
        videos.append(Video(f"video_{n:04d}", feats, labels.astype(np.uint8)))
    return StreamDataset(videos, config.num_actions, config.feature_dim)


def label_runs(labels: np.ndarray) -> list[tuple[int, int, int]]:
    """Maximal runs of equal labels as (label, start, end)."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return []
    edges = np.flatnonzero(np.diff(labels)) + 1
    bounds = np.concatenate([[0], edges, [labels.size]])
    return [(int(labels[s]), int(s), int(e)) for s, e in zip(bounds[:-1], bounds[1:])]


# --- OADS binary format ------------------------------------------------------

_HEADER = struct.Struct("<4sIIII")


def dataset_to_bytes(ds: StreamDataset) -> bytes:
    out = [_HEADER.pack(MAGIC, VERSION, len(ds.videos), ds.num_actions, ds.feature_dim)]
    for v in ds.videos:
        vid = v.id.encode("utf-8")
        feats = np.asarray(v.features, dtype="<f4")
        if feats.shape != (len(v.labels), ds.feature_dim):
            raise FormatError(f"video {v.id}: features {feats.shape} do not match {len(v.labels)} labels x D={ds.feature_dim}")
        out.append(struct.pack("<I", len(vid)) + vid)
        out.append(struct.pack("<I", len(v.labels)))
        out.append(feats.tobytes())
        out.append(np.asarray(v.labels, dtype=np.uint8).tobytes())
    return b"".join(out)


def dataset_from_bytes(buf: bytes) -> StreamDataset:
    if len(buf) < _HEADER.size:
        raise FormatError(f"truncated OADS header: {len(buf)} bytes")
    magic, version, n, K, D = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported OADS version {version}, expected {VERSION}")
    pos = _HEADER.size

    def take(nbytes: int, what: str) -> bytes:
        nonlocal pos
        if pos + nbytes > len(buf):
            raise FormatError(f"truncated file while reading {what} at byte {pos}")
        chunk = buf[pos : pos + nbytes]
        pos += nbytes
        return chunk

    videos = []
    for i in range(n):
        (id_len,) = struct.unpack("<I", take(4, f"video {i} id length"))
        try:
            vid = take(id_len, f"video {i} id").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"video {i} id is not valid UTF-8: {exc}") from None
        (T,) = struct.unpack("<I", take(4, f"video {i} length"))
        feats = np.frombuffer(take(4 * T * D, f"video {i} features"), dtype="<f4").reshape(T, D).astype(np.float32)
        labels = np.frombuffer(take(T, f"video {i} labels"), dtype=np.uint8).copy()
        if not np.all(np.isfinite(feats)):
            raise FormatError(f"video {vid}: non-finite feature values")
        if labels.size and labels.max() > K:
            raise FormatError(f"video {vid}: label {labels.max()} exceeds K={K}")
        videos.append(Video(vid, feats, labels))
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after last video")
    return StreamDataset(videos, K, D)


def save_dataset(ds: StreamDataset, path) -> None:
    Path(path).write_bytes(dataset_to_bytes(ds))


def load_dataset(path) -> StreamDataset:
    return dataset_from_bytes(Path(path).read_bytes())


def load_csv(path, num_actions: int | None = None) -> StreamDataset:
    """Import rows of ``video_id, frame, label, f0 .. f{D-1}``; a header row is optional."""
    rows: dict[str, list[tuple[int, int, list[float]]]] = {}
    order: list[str] = []
    D = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            if lineno == 1 and not row[1].strip().lstrip("-").isdigit():
                continue
            vid, frame, label, *feat = row
            if D is None:
                D = len(feat)
            if len(feat) != D or D == 0:
                raise FormatError(f"{path}:{lineno}: expected {D} feature columns, got {len(feat)}")
            if vid not in rows:
                rows[vid] = []
                order.append(vid)
            rows[vid].append((int(frame), int(label), [float(f) for f in feat]))
    videos = []
    for vid in order:
        r = sorted(rows[vid], key=lambda item: item[0])
        frames = [item[0] for item in r]
        if frames != list(range(frames[0], frames[0] + len(frames))):
            raise FormatError(f"{path}: video {vid} has non-contiguous frame indices")
        labels = np.array([item[1] for item in r])
        if labels.min() < 0 or labels.max() > 255:
            raise FormatError(f"{path}: video {vid} has labels outside [0, 255]")
        videos.append(Video(vid, np.array([item[2] for item in r], dtype=np.float32), labels.astype(np.uint8)))
    if not videos:
        raise FormatError(f"{path}: no rows")
    K = num_actions if num_actions is not None else int(max(v.labels.max() for v in videos))
    if any(v.labels.max() > K for v in videos):
        raise FormatError(f"{path}: labels exceed num_actions={K}")
    return StreamDataset(videos, K, D)
