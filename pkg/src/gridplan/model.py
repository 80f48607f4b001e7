"""Generative model: structural prior, per-cell sensor likelihood, incremental scoring.

Scores are kept as integer sufficient statistics (a 3x3 confusion count of
predicted vs observed class, the overlap excess, the doorless room count
and the bad-angle count).  Log values are derived from those counts in a
fixed order, so an incrementally maintained score and a from-scratch
evaluation of the same world agree exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from gridplan.errors import DimensionMismatch
from gridplan.geometry import (
    COLLAPSE,
    Box,
    PredictedGrid,
    Rect,
    disjoint_boxes,
    rasterize,
    rasterize_window,
)
from gridplan.grid_io import ClassifiedGrid
from gridplan.world import World


@dataclass(frozen=True)
class PriorParams:
    psi1: float = 0.9
    psi2: float = 0.9
    psi3: float = 0.6
    right_angle_tolerance: float = 5.0

    def __post_init__(self):
        for name in ("psi1", "psi2", "psi3"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.right_angle_tolerance < 0:
            raise ValueError("right_angle_tolerance must be >= 0")


DEFAULT_TABLE = ((0.8, 0.1, 0.1), (0.1, 0.8, 0.1), (0.1, 0.1, 0.8))


@dataclass(frozen=True)
class SensorModel:
    """p(observed class | predicted class); rows Wall/Unknown/Free, columns Occupied/Unexplained/Free."""

    table: tuple[tuple[float, ...], ...] = DEFAULT_TABLE

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.shape != (3, 3):
            raise ValueError(f"sensor table must be 3x3, got {t.shape}")
        if not ((t > 0) & (t < 1)).all():
            raise ValueError("sensor table entries must lie in (0, 1)")
        if np.abs(t.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("sensor table rows must sum to 1")
        object.__setattr__(self, "table", tuple(tuple(float(v) for v in row) for row in t))

    @classmethod
    def normalized(cls, rows) -> SensorModel:
        t = np.asarray(rows, dtype=float)
        return cls(tuple(map(tuple, t / t.sum(axis=1, keepdims=True))))

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=float)

    @property
    def log_flat(self) -> tuple[float, ...]:
        return tuple(math.log(v) for row in self.table for v in row)


@dataclass(frozen=True)
class ScoreCounts:
    confusion: tuple[int, ...]  # 9 entries, index predicted*3 + observed
    overlap: int
    doorless: int
    bad_angles: int


@dataclass(frozen=True)
class LogScore:
    log_prior: float
    log_likelihood: float
    counts: ScoreCounts | None = field(default=None, compare=False)

    @property
    def log_posterior(self) -> float:
        return log_posterior(self)


def log_posterior(score: LogScore) -> float:
    """Unnormalized log p(W|M)."""
    return score.log_prior + score.log_likelihood


# -- prior -------------------------------------------------------------------

def count_bad_angles(walls: Sequence, tolerance_deg: float) -> int:
    """Adjacent wall pairs (cyclic) whose included angle is not 90 deg within tolerance.

    ``walls`` holds four ``((x0, y0), (x1, y1))`` endpoint pairs in order
    around the room.
    """
    bad = 0
    n = len(walls)
    for i in range(n):
        (ax0, ay0), (ax1, ay1) = walls[i]
        (bx0, by0), (bx1, by1) = walls[(i + 1) % n]
        ux, uy = ax1 - ax0, ay1 - ay0
        vx, vy = bx1 - bx0, by1 - by0
        norm = math.hypot(ux, uy) * math.hypot(vx, vy)
        if norm == 0:
            bad += 1
            continue
        cos = max(-1.0, min(1.0, abs(ux * vx + uy * vy) / norm))
        angle = math.degrees(math.acos(cos))
        if abs(90.0 - angle) > tolerance_deg:
            bad += 1
    return bad


@lru_cache(maxsize=65536)
def _rect_bad_angles(rect: Rect, tolerance_deg: float) -> int:
    return count_bad_angles([(tuple(s.a), tuple(s.b)) for s in rect.walls()], tolerance_deg)


def structural_counts(world: World, params: PriorParams) -> tuple[int, int]:
    """(doorless room count, bad angle count)."""
    with_door = set()
    for d in world.doors:
        with_door.update(d.room_ids)
    doorless = sum(1 for r in world.rooms if r.id not in with_door)
    bad = sum(_rect_bad_angles(r.rect, params.right_angle_tolerance) for r in world.rooms)
    return doorless, bad


def overlap_excess(coverage: np.ndarray) -> int:
    """Sum over cells of max(coverage - 1, 0)."""
    c = coverage[coverage > 1]
    return int(c.sum() - c.size)


def prior_from_counts(overlap: int, doorless: int, bad: int, params: PriorParams) -> float:
    return bad * math.log(params.psi1) + doorless * math.log(params.psi2) + overlap * math.log(params.psi3)


def log_prior(world: World, params: PriorParams, predicted: PredictedGrid) -> float:
    """log(alpha1 * alpha2 * alpha3); psi2 applies once per doorless room."""
    doorless, bad = structural_counts(world, params)
    return prior_from_counts(overlap_excess(predicted.coverage), doorless, bad, params)


# -- likelihood ----------------------------------------------------------------

def confusion_counts(pred: np.ndarray, obs: np.ndarray) -> np.ndarray:
    idx = COLLAPSE[pred].astype(np.intp) * 3 + obs
    return np.bincount(idx.ravel(), minlength=9)


def likelihood_from_counts(confusion: Sequence[int], sensor: SensorModel) -> float:
    total = 0.0
    for n, lg in zip(confusion, sensor.log_flat):
        total += n * lg
    return total


def log_likelihood(classified: ClassifiedGrid, predicted: PredictedGrid, sensor: SensorModel) -> float:
    """Sum over independent cells of log p(observed | predicted); Door scores as Free."""
    if classified.classes.shape != predicted.classes.shape:
        raise DimensionMismatch(
            f"classified {classified.classes.shape} vs predicted {predicted.classes.shape}"
        )
    return likelihood_from_counts(confusion_counts(predicted.classes, classified.classes), sensor)


# -- full and incremental evaluation ------------------------------------------

class Scorer:
    """Evaluates worlds against one classified map."""

    def __init__(self, classified: ClassifiedGrid, sensor: SensorModel = SensorModel(),
                 params: PriorParams = PriorParams()):
        self.classified = classified
        self.obs = classified.classes.astype(np.intp)
        self.sensor = sensor
        self.params = params
        self.width = classified.width
        self.height = classified.height

    def _score(self, confusion, overlap, world: World) -> LogScore:
        doorless, bad = structural_counts(world, self.params)
        counts = ScoreCounts(tuple(int(v) for v in confusion), int(overlap), doorless, bad)
        return LogScore(
            prior_from_counts(counts.overlap, doorless, bad, self.params),
            likelihood_from_counts(counts.confusion, self.sensor),
            counts,
        )

    def evaluate(self, world: World) -> LogScore:
        predicted = rasterize(world, self.width, self.height)
        return self._score(confusion_counts(predicted.classes, self.obs),
                           overlap_excess(predicted.coverage), world)

    def delta(self, score: LogScore, before: World, after: World, region: Sequence[Box]) -> LogScore:
        if score.counts is None:
            return self.evaluate(after)
        conf = np.array(score.counts.confusion, dtype=np.int64)
        overlap = score.counts.overlap
        for box in disjoint_boxes(region):
            obs = self.obs[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1]
            cls_b, cov_b = rasterize_window(before, box)
            cls_a, cov_a = rasterize_window(after, box)
            conf += confusion_counts(cls_a, obs) - confusion_counts(cls_b, obs)
            overlap += overlap_excess(cov_a) - overlap_excess(cov_b)
        return self._score(conf, overlap, after)


def evaluate(world: World, classified: ClassifiedGrid, sensor: SensorModel = SensorModel(),
             params: PriorParams = PriorParams()) -> LogScore:
    return Scorer(classified, sensor, params).evaluate(world)


def apply_delta(score: LogScore, world_before: World, world_after: World, region: Sequence[Box],
                classified: ClassifiedGrid, sensor: SensorModel = SensorModel(),
                params: PriorParams = PriorParams()) -> LogScore:
    """Score of ``world_after`` re-evaluating only the cells in ``region``."""
    return Scorer(classified, sensor, params).delta(score, world_before, world_after, region)


from gridplan.world import wall_types  # noqa: E402,F401  (part of the model surface)
