"""Regression, ranking and retrieval metrics used by the evaluation reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DegenerateInput(ValueError):
    pass


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.float64).reshape(-1)
    t = np.asarray(truth, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    if p.size == 0:
        raise ValueError("metric of an empty input")
    return p, t


def mse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    d = p - t
    return float(np.mean(d * d))


def rmse(pred, truth) -> float:
    return float(np.sqrt(mse(pred, truth)))


def pearson(pred, truth) -> float:
    p, t = _pair(pred, truth)
    pc, tc_ = p - p.mean(), t - t.mean()
    sp, st = np.sqrt(np.sum(pc * pc)), np.sqrt(np.sum(tc_ * tc_))
    if sp == 0 or st == 0:
        raise DegenerateInput("Pearson correlation of a constant input")
    r = float(np.sum(pc * tc_) / (sp * st))
    return max(-1.0, min(1.0, r))


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    # boundaries of runs of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], len(x)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + 1 + e)
    return ranks


def spearman(pred, truth) -> float:
    p, t = _pair(pred, truth)
    try:
        return pearson(average_ranks(p), average_ranks(t))
    except DegenerateInput:
        raise DegenerateInput("Spearman correlation of an all-equal input") from None


def accuracy(pred_classes, truth) -> float:
    p = np.asarray(pred_classes).reshape(-1)
    t = np.asarray(truth).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    if p.size == 0:
        raise ValueError("accuracy of an empty input")
    return float(np.mean(p == t))


def precision_recall_steps(scores, labels):
    """Precision and recall after each distinct score threshold (descending).

    All items sharing a score enter together as one step.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(np.int64)
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: {s.size} vs {y.size}")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0/1")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise DegenerateInput("precision-recall needs at least one positive label")
    order = np.argsort(-s, kind="mergesort")
    ss, ys = s[order], y[order]
    last_of_group = np.r_[ss[1:] != ss[:-1], True]
    tp = np.cumsum(ys)[last_of_group]
    seen = (np.flatnonzero(last_of_group) + 1).astype(np.float64)
    return tp / seen, tp / n_pos, ss[last_of_group]


def aucpr(scores, labels) -> float:
    """Step-wise area under the precision-recall curve (average-precision form)."""
    precision, recall, _ = precision_recall_steps(scores, labels)
    dr = np.diff(np.r_[0.0, recall])
    return float(np.sum(dr * precision))


@dataclass
class MetricReport:
    task: str
    values: dict[str, float] = field(default_factory=dict)
    n_examples: int = 0

    def to_text(self) -> str:
        lines = [f"task={self.task}", f"n_examples={self.n_examples}"]
        lines += [f"{k}={v!r}" for k, v in self.values.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MetricReport":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        task = kv.pop("task")
        n = int(kv.pop("n_examples"))
        return cls(task, {k: float(v) for k, v in kv.items()}, n)

    def to_dict(self) -> dict:
        return {"task": self.task, "n_examples": self.n_examples, "metrics": dict(self.values)}

    def write(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
