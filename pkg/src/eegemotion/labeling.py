"""Median-split valence/arousal flags and emotion quadrants."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Ratings
from .errors import SizeError, ValidationError


class Quadrant(str, enum.Enum):
    HAHV = "HAHV"
    HALV = "HALV"
    LAHV = "LAHV"
    LALV = "LALV"

    @classmethod
    def from_flags(cls, valence_positive: bool, arousal_positive: bool) -> Quadrant:
        return cls(("HA" if arousal_positive else "LA") + ("HV" if valence_positive else "LV"))

    @property
    def code(self) -> int:
        return _QUADRANT_CODES[self]


_QUADRANT_CODES = {q: i for i, q in enumerate(Quadrant)}


def median_split(values: Sequence[float]) -> np.ndarray:
    """``values >= median``; ties go to the positive side."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise SizeError("median_split needs at least one value")
    return values >= np.median(values)


@dataclass(frozen=True)
class LabelSet:
    valence_positive: np.ndarray
    arousal_positive: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.valence_positive, dtype=bool)
        a = np.asarray(self.arousal_positive, dtype=bool)
        if v.shape != a.shape or v.ndim != 1:
            raise ValidationError("label columns must be 1-D and of equal length")
        object.__setattr__(self, "valence_positive", v)
        object.__setattr__(self, "arousal_positive", a)

    def __len__(self):
        return len(self.valence_positive)

    @property
    def quadrant(self) -> list[Quadrant]:
        return [Quadrant.from_flags(v, a) for v, a in zip(self.valence_positive, self.arousal_positive)]

    def target(self, name: str) -> np.ndarray:
        """Integer class vector: 0/1 for valence or arousal, 0-3 for quadrant."""
        if name == "valence":
            return self.valence_positive.astype(np.int64)
        if name == "arousal":
            return self.arousal_positive.astype(np.int64)
        if name == "quadrant":
            return np.array([q.code for q in self.quadrant], dtype=np.int64)
        raise ValidationError(f"unknown target {name!r}")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "valence_positive", "arousal_positive", "quadrant"])
            for i, (v, a, q) in enumerate(zip(self.valence_positive, self.arousal_positive, self.quadrant)):
                w.writerow([i, int(v), int(a), q.value])

    @classmethod
    def from_csv(cls, path) -> LabelSet:
        v, a = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.DictReader(fh), 2):
                try:
                    trial = int(row["trial"])
                    vp, ap = bool(int(row["valence_positive"])), bool(int(row["arousal_positive"]))
                    quadrant = Quadrant(row["quadrant"])
                except (KeyError, TypeError, ValueError):
                    raise ValidationError(f"{path}:{lineno}: malformed label row") from None
                if trial != len(v):
                    raise ValidationError(f"{path}:{lineno}: trials must be listed as 0..n-1")
                if quadrant is not Quadrant.from_flags(vp, ap):
                    raise ValidationError(f"{path}:{lineno}: quadrant disagrees with flags")
                v.append(vp)
                a.append(ap)
        return cls(v, a)


def make_labels(ratings: Ratings | Sequence[Ratings]) -> LabelSet | list[LabelSet]:
    """Median-split labels.

    Passing a list of subjects pools the medians across all of them and
    returns one LabelSet per subject; call once per subject for
    per-subject medians.
    """
    if isinstance(ratings, Ratings):
        return LabelSet(median_split(ratings.valence), median_split(ratings.arousal))
    subjects = list(ratings)
    if not subjects:
        raise SizeError("no ratings given")
    v = median_split(np.concatenate([r.valence for r in subjects]))
    a = median_split(np.concatenate([r.arousal for r in subjects]))
    bounds = np.cumsum([0] + [len(r) for r in subjects])
    return [LabelSet(v[lo:hi], a[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]
