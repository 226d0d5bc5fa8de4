"""Evaluation metrics: per-class P/R/F1, micro/macro/weighted F1,
micro-F1 without the neutral class, and grouped breakdowns."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError

DEFAULT_LENGTH_EDGES = (0, 100, 200, 300, 400, 500)


@dataclass
class Prediction:
    id: str
    logits: np.ndarray
    predicted: int
    gold: int
    length: int = 0


@dataclass
class ClassScore:
    name: str
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int


@dataclass
class GroupScore:
    micro_f1: float
    support: int


@dataclass
class MetricReport:
    micro_f1: float
    macro_f1: float
    weighted_f1: float
    micro_f1_excl_neutral: float | None
    per_class: list[ClassScore]
    support: int
    f1c: float | None = None
    groups: dict[str, dict[str, GroupScore]] = field(default_factory=dict)

    def to_text(self) -> str:
        """Stable ``key = value`` lines; floats use repr so they round-trip exactly."""
        lines = [
            f"micro_f1 = {self.micro_f1!r}",
            f"macro_f1 = {self.macro_f1!r}",
            f"weighted_f1 = {self.weighted_f1!r}",
            f"micro_f1_excl_neutral = {_opt(self.micro_f1_excl_neutral)}",
            f"f1c = {_opt(self.f1c)}",
            f"support = {self.support}",
        ]
        for c in self.per_class:
            p = f"class.{c.name}"
            lines += [
                f"{p}.precision = {c.precision!r}",
                f"{p}.recall = {c.recall!r}",
                f"{p}.f1 = {c.f1!r}",
                f"{p}.support = {c.support}",
            ]
        for kind in sorted(self.groups):
            for name in sorted(self.groups[kind]):
                g = self.groups[kind][name]
                lines += [
                    f"group.{kind}.{name}.micro_f1 = {g.micro_f1!r}",
                    f"group.{kind}.{name}.support = {g.support}",
                ]
        return "\n".join(lines) + "\n"


def _opt(x: float | None) -> str:
    return "none" if x is None else repr(x)


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den else 0.0


def _f1(tp: float, fp: float, fn: float) -> float:
    return _ratio(2 * tp, 2 * tp + fp + fn)


def confusion_matrix(golds: Sequence[int], preds: Sequence[int], num_classes: int) -> np.ndarray:
    """Rows are gold classes, columns predicted classes."""
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(golds, dtype=np.int64), np.asarray(preds, dtype=np.int64)), 1)
    return cm


def scores_from_confusion(
    cm: np.ndarray,
    neutral: int | None = None,
    class_names: Sequence[str] | None = None,
) -> MetricReport:
    c = cm.shape[0]
    names = list(class_names) if class_names is not None else [str(i) for i in range(c)]
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    fp = predicted - tp
    fn = support - tp
    per_class = []
    for i in range(c):
        per_class.append(ClassScore(
            names[i],
            _ratio(tp[i], predicted[i]),
            _ratio(tp[i], support[i]),
            _f1(tp[i], fp[i], fn[i]),
            int(support[i]),
            int(predicted[i]),
        ))
    n = int(support.sum())
    f1s = [s.f1 for s in per_class]
    excl = None
    if neutral is not None:
        keep = [i for i in range(c) if i != neutral]
        excl = _f1(tp[keep].sum(), fp[keep].sum(), fn[keep].sum())
    return MetricReport(
        micro_f1=_f1(tp.sum(), fp.sum(), fn.sum()),
        macro_f1=float(sum(f1s) / c),
        weighted_f1=float(sum(int(support[i]) / n * f1s[i] for i in range(c))) if n else 0.0,
        micro_f1_excl_neutral=excl,
        per_class=per_class,
        support=n,
    )


def f1_scores(
    preds: Sequence[Prediction],
    num_classes: int,
    neutral: int | None = None,
    class_names: Sequence[str] | None = None,
) -> MetricReport:
    if not preds:
        raise DataError("EMPTY_PREDICTIONS", "no predictions to score")
    for p in preds:
        if not (0 <= p.gold < num_classes and 0 <= p.predicted < num_classes):
            raise DataError("LABEL_OUT_OF_RANGE", f"prediction {p.id!r} outside [0, {num_classes})")
    cm = confusion_matrix([p.gold for p in preds], [p.predicted for p in preds], num_classes)
    return scores_from_confusion(cm, neutral, class_names)


@dataclass(frozen=True)
class LengthBuckets:
    """Half-open token-length buckets [e_i, e_i+1); the last is unbounded."""

    edges: tuple[int, ...] = DEFAULT_LENGTH_EDGES

    def label(self, length: int) -> str:
        for lo, hi in zip(self.edges, self.edges[1:] + (math.inf,)):
            if lo <= length < hi:
                return f"[{lo},{'inf' if hi == math.inf else hi})"
        raise DataError("UNMAPPED_LENGTH", f"length {length} below the first bucket")


def group_report(
    preds: Sequence[Prediction],
    grouping: Mapping[int, str] | LengthBuckets,
    num_classes: int,
    neutral: int | None = None,
    class_names: Sequence[str] | None = None,
    kind: str | None = None,
) -> MetricReport:
    """Global report plus per-group micro-F1.

    A mapping groups instances by their gold class; ``LengthBuckets`` groups
    them by dialogue token length.  Empty groups are omitted.
    """
    report = f1_scores(preds, num_classes, neutral, class_names)
    members: dict[str, list[Prediction]] = {}
    for p in preds:
        if isinstance(grouping, LengthBuckets):
            key = grouping.label(p.length)
        else:
            if p.gold not in grouping:
                raise DataError("UNMAPPED_CLASS", f"class {p.gold} has no group")
            key = grouping[p.gold]
        members.setdefault(key, []).append(p)
    if kind is None:
        kind = "length" if isinstance(grouping, LengthBuckets) else "class_group"
    report.groups[kind] = {
        name: GroupScore(f1_scores(items, num_classes, neutral).micro_f1, len(items))
        for name, items in members.items()
    }
    return report
