"""Per-frame AP / calibrated AP, decile-stage and anticipation-horizon evaluation.

Rankings sort by descending score; ties keep ascending row order, and rows
are stored video by video in frame order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

NUM_DECILES = 10


class UndefinedMetricError(ValueError):
    pass


@dataclass
class ScoreTable:
    video_ids: list[str]
    video: np.ndarray  # (N,) index into video_ids
    frame: np.ndarray  # (N,)
    labels: np.ndarray  # (N,)
    scores: np.ndarray  # (N, C)
    anticipated: np.ndarray  # (N, L, C)

    @property
    def num_classes(self) -> int:
        return self.scores.shape[1]

    @property
    def decoder_steps(self) -> int:
        return self.anticipated.shape[1]

    def __len__(self) -> int:
        return len(self.labels)

    def video_lengths(self) -> np.ndarray:
        """Length of the video each row belongs to."""
        counts = np.bincount(self.video, minlength=len(self.video_ids))
        return counts[self.video]


def _ranked_positives(scores, is_positive):
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(is_positive, dtype=bool)
    if scores.shape != pos.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and flags {pos.shape} must be matching vectors")
    P = int(pos.sum())
    if P == 0:
        raise UndefinedMetricError("no positive frames")
    order = np.argsort(-scores, kind="stable")
    hits = pos[order]
    tp = np.cumsum(hits).astype(np.float64)
    rank = np.arange(1, len(hits) + 1, dtype=np.float64)
    return hits, tp, rank - tp, P, len(hits) - P


def average_precision(scores, is_positive) -> float:
    hits, tp, fp, P, _ = _ranked_positives(scores, is_positive)
    return float(np.sum((tp / (tp + fp))[hits]) / P)


def calibrated_ap(scores, is_positive) -> float:
    """AP with false positives down-weighted by w = #negatives / #positives."""
    hits, tp, fp, P, N = _ranked_positives(scores, is_positive)
    if N == 0:
        return 1.0
    w = N / P
    cprec = tp / (tp + fp / w)
    return float(np.sum(cprec[hits]) / P)


def _class_metrics(scores: np.ndarray, labels: np.ndarray, num_classes: int, context: str):
    ap, cap = {}, {}
    for c in range(1, num_classes):
        pos = labels == c
        if not pos.any():
            warnings.warn(f"{context}: class {c} has no positive frames; excluded from the mean", stacklevel=3)
            continue
        ap[c] = average_precision(scores[:, c], pos)
        cap[c] = calibrated_ap(scores[:, c], pos)
    if not ap:
        raise UndefinedMetricError(f"{context}: no action class has positive frames")
    return ap, cap


def per_frame_map(table: ScoreTable) -> dict:
    """Per-class AP and cAP over action classes 1..K plus their unweighted means."""
    if len(table) == 0:
        raise UndefinedMetricError("empty score table")
    ap, cap = _class_metrics(table.scores, table.labels, table.num_classes, "per-frame")
    return {"ap": ap, "cap": cap, "map": float(np.mean(list(ap.values()))), "mcap": float(np.mean(list(cap.values())))}


def decile_bins(length: int) -> np.ndarray:
    """Decile index floor(10 k / length) of every frame of an instance."""
    return (NUM_DECILES * np.arange(length)) // length


def instance_deciles(table: ScoreTable) -> np.ndarray:
    """Decile of each row inside its ground-truth action instance; -1 for background.

    Instances are maximal runs of one non-background label within a video.
    """
    out = np.full(len(table), -1, dtype=np.int64)
    labels = table.labels
    n = len(labels)
    start = 0
    while start < n:
        end = start + 1
        while end < n and labels[end] == labels[start] and table.video[end] == table.video[start]:
            end += 1
        if labels[start] != 0:
            out[start:end] = decile_bins(end - start)
        start = end
    return out


def decile_metric(table: ScoreTable, metric: str = "cap") -> list[float]:
    """Metric for each decile of the action instances, averaged over classes.

    Positives in bin j are class-c frames in the j-th tenth of their
    instance; negatives are every frame not labelled c, pooled globally.
    """
    fn = {"cap": calibrated_ap, "ap": average_precision}[metric]
    dec = instance_deciles(table)
    result = []
    for j in range(NUM_DECILES):
        vals = []
        for c in range(1, table.num_classes):
            pos = (table.labels == c) & (dec == j)
            if not pos.any():
                continue
            keep = pos | (table.labels != c)
            vals.append(fn(table.scores[keep, c], pos[keep]))
        result.append(float(np.mean(vals)) if vals else float("nan"))
    return result


def decile_cap(table: ScoreTable) -> list[float]:
    return decile_metric(table, "cap")


def anticipation_report(table: ScoreTable) -> dict:
    """Per-offset mAP / mcAP of p~_t^i against l_{t+i}, plus their averages over offsets."""
    L = table.decoder_steps
    report = {"map": [], "mcap": [], "avg_map": float("nan"), "avg_mcap": float("nan")}
    if L == 0:
        return report
    lengths = table.video_lengths()
    for i in range(1, L + 1):
        rows = np.flatnonzero(table.frame + i < lengths)
        target = table.labels[rows + i]
        ap, cap = _class_metrics(table.anticipated[rows, i - 1], target, table.num_classes, f"anticipation offset {i}")
        report["map"].append(float(np.mean(list(ap.values()))))
        report["mcap"].append(float(np.mean(list(cap.values()))))
    report["avg_map"] = float(np.mean(report["map"]))
    report["avg_mcap"] = float(np.mean(report["mcap"]))
    return report


@dataclass
class MetricReport:
    ap: dict[int, float]
    cap: dict[int, float]
    map: float
    mcap: float
    decile_cap: list[float] | None = None
    anticipation_map: list[float] = field(default_factory=list)
    anticipation_mcap: list[float] = field(default_factory=list)
    anticipation_avg_map: float = float("nan")
    anticipation_avg_mcap: float = float("nan")

    def to_kv(self) -> str:
        lines = []
        for c in sorted(self.ap):
            lines.append(f"ap.{c} = {self.ap[c]:.12f}")
            lines.append(f"cap.{c} = {self.cap[c]:.12f}")
        lines.append(f"map.all = {self.map:.12f}")
        lines.append(f"mcap.all = {self.mcap:.12f}")
        if self.decile_cap is not None:
            for j, v in enumerate(self.decile_cap, 1):
                lines.append(f"decile_cap.{j} = {v:.12f}")
        for i, (a, b) in enumerate(zip(self.anticipation_map, self.anticipation_mcap), 1):
            lines.append(f"anticipation_map.{i} = {a:.12f}")
            lines.append(f"anticipation_mcap.{i} = {b:.12f}")
        if self.anticipation_map:
            lines.append(f"anticipation_map.avg = {self.anticipation_avg_map:.12f}")
            lines.append(f"anticipation_mcap.avg = {self.anticipation_avg_mcap:.12f}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        """Aligned plain-text table, values in percent."""
        rows = [("class", "AP", "cAP")]
        rows += [(str(c), f"{100 * self.ap[c]:.2f}", f"{100 * self.cap[c]:.2f}") for c in sorted(self.ap)]
        rows.append(("mean", f"{100 * self.map:.2f}", f"{100 * self.mcap:.2f}"))
        out = [_align(rows)]
        if self.decile_cap is not None:
            head = tuple(f"{10 * j}-{10 * (j + 1)}%" for j in range(NUM_DECILES))
            out.append("decile cAP\n" + _align([head, tuple(f"{100 * v:.2f}" for v in self.decile_cap)]))
        if self.anticipation_map:
            head = ("",) + tuple(f"t+{i}" for i in range(1, len(self.anticipation_map) + 1)) + ("avg",)
            r1 = ("mAP",) + tuple(f"{100 * v:.2f}" for v in self.anticipation_map) + (f"{100 * self.anticipation_avg_map:.2f}",)
            r2 = ("mcAP",) + tuple(f"{100 * v:.2f}" for v in self.anticipation_mcap) + (f"{100 * self.anticipation_avg_mcap:.2f}",)
            out.append("anticipation\n" + _align([head, r1, r2]))
        return "\n\n".join(out) + "\n"


def _align(rows) -> str:
    widths = [max(len(r[k]) for r in rows) for k in range(len(rows[0]))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)


def build_report(table: ScoreTable, deciles: bool = False, anticipation: bool = False) -> MetricReport:
    m = per_frame_map(table)
    rep = MetricReport(ap=m["ap"], cap=m["cap"], map=m["map"], mcap=m["mcap"])
    if deciles:
        rep.decile_cap = decile_cap(table)
    if anticipation:
        a = anticipation_report(table)
        rep.anticipation_map = a["map"]
        rep.anticipation_mcap = a["mcap"]
        rep.anticipation_avg_map = a["avg_map"]
        rep.anticipation_avg_mcap = a["avg_mcap"]
    return rep
