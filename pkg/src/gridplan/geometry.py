"""Axis-aligned cell geometry and rasterization of worlds into predicted grids.

Coordinates are (x, y) = (column, row); arrays are indexed ``[y, x]``.
Rectangles and segments use inclusive corners.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, NamedTuple

import numpy as np

from gridplan.errors import DegenerateSegment, OutOfBounds

if TYPE_CHECKING:
    from gridplan.world import World

NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3


class CellIndex(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True, slots=True)
class Segment:
    """Axis-aligned, non-degenerate cell segment with ``a <= b``."""

    a: CellIndex
    b: CellIndex

    def __post_init__(self):
        a, b = CellIndex(*self.a), CellIndex(*self.b)
        if a == b:
            raise DegenerateSegment(f"segment endpoints coincide at {tuple(a)}")
        if a.x != b.x and a.y != b.y:
            raise ValueError(f"segment {tuple(a)}-{tuple(b)} is not axis-aligned")
        if (a.x, a.y) > (b.x, b.y):
            a, b = b, a
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def of(cls, x0: int, y0: int, x1: int, y1: int) -> Segment:
        return cls(CellIndex(x0, y0), CellIndex(x1, y1))

    @property
    def vertical(self) -> bool:
        return self.a.x == self.b.x

    @property
    def ncells(self) -> int:
        return max(self.b.x - self.a.x, self.b.y - self.a.y) + 1

    def as_box(self) -> Box:
        return Box(self.a.x, self.a.y, self.b.x, self.b.y)


def segment_length(s: Segment) -> float:
    return math.hypot(s.b.x - s.a.x, s.b.y - s.a.y)


class Box(NamedTuple):
    """Inclusive cell box, possibly one cell thin. Used for regions and lines."""

    x0: int
    y0: int
    x1: int
    y1: int

    def clip(self, width: int, height: int) -> Box | None:
        b = Box(max(self.x0, 0), max(self.y0, 0), min(self.x1, width - 1), min(self.y1, height - 1))
        if b.x0 > b.x1 or b.y0 > b.y1:
            return None
        return b

    def intersect(self, other: Box) -> Box | None:
        b = Box(max(self.x0, other.x0), max(self.y0, other.y0), min(self.x1, other.x1), min(self.y1, other.y1))
        if b.x0 > b.x1 or b.y0 > b.y1:
            return None
        return b

    @property
    def area(self) -> int:
        return (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)


@dataclass(frozen=True, slots=True, order=True)
class Rect:
    """Room extent with inclusive corners; the perimeter ring is the wall."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"invalid rect {self.x0, self.y0, self.x1, self.y1}")

    @property
    def min(self) -> CellIndex:
        return CellIndex(self.x0, self.y0)

    @property
    def max(self) -> CellIndex:
        return CellIndex(self.x1, self.y1)

    @property
    def width(self) -> int:
        """Side length along x in cells."""
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def box(self) -> Box:
        return Box(self.x0, self.y0, self.x1, self.y1)

    def wall_box(self, k: int) -> Box:
        if k == NORTH:
            return Box(self.x0, self.y0, self.x1, self.y0)
        if k == EAST:
            return Box(self.x1, self.y0, self.x1, self.y1)
        if k == SOUTH:
            return Box(self.x0, self.y1, self.x1, self.y1)
        if k == WEST:
            return Box(self.x0, self.y0, self.x0, self.y1)
        raise IndexError(k)

    def walls(self) -> tuple[Segment, Segment, Segment, Segment]:
        return tuple(Segment.of(*self.wall_box(k)) for k in range(4))  # type: ignore[return-value]

    def within(self, width: int, height: int) -> bool:
        return self.x0 >= 0 and self.y0 >= 0 and self.x1 < width and self.y1 < height

    def intersection_area(self, other: Rect) -> int:
        w = min(self.x1, other.x1) - max(self.x0, other.x0) + 1
        h = min(self.y1, other.y1) - max(self.y0, other.y0) + 1
        return w * h if w > 0 and h > 0 else 0

    def iou(self, other: Rect) -> float:
        inter = self.intersection_area(other)
        return inter / (self.area + other.area - inter)

    def union_bounds(self, other: Rect) -> Rect:
        return Rect(min(self.x0, other.x0), min(self.y0, other.y0),
                    max(self.x1, other.x1), max(self.y1, other.y1))


def wall_is_vertical(k: int) -> bool:
    return k in (EAST, WEST)


class PredictedClass(enum.IntEnum):
    WALL = 0
    UNKNOWN = 1
    FREE = 2
    DOOR = 3


# Door counts as Free for likelihood purposes.
COLLAPSE = np.array([0, 1, 2, 2], dtype=np.uint8)


@dataclass(frozen=True)
class PredictedGrid:
    classes: np.ndarray  # (h, w) uint8 PredictedClass codes
    coverage: np.ndarray  # (h, w) int32 room counts

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def height(self) -> int:
        return self.classes.shape[0]


def rasterize_window(world: World, box: Box) -> tuple[np.ndarray, np.ndarray]:
    """Classes and coverage for the cells of ``box`` only.

    Precedence is Door > Wall > Free > Unknown.
    """
    xs, ys = box.x0, box.y0
    h, w = box.y1 - ys + 1, box.x1 - xs + 1
    cov = np.zeros((h, w), dtype=np.int32)
    cls = np.full((h, w), PredictedClass.UNKNOWN, dtype=np.uint8)
    hits = []
    for room in world.rooms:
        r = room.rect
        if r.x1 < box.x0 or r.x0 > box.x1 or r.y1 < box.y0 or r.y0 > box.y1:
            continue
        hits.append(r)
        cov[max(r.y0, box.y0) - ys : min(r.y1, box.y1) - ys + 1,
            max(r.x0, box.x0) - xs : min(r.x1, box.x1) - xs + 1] += 1
        iy0, iy1 = max(r.y0 + 1, box.y0), min(r.y1 - 1, box.y1)
        ix0, ix1 = max(r.x0 + 1, box.x0), min(r.x1 - 1, box.x1)
        if iy0 <= iy1 and ix0 <= ix1:
            cls[iy0 - ys : iy1 - ys + 1, ix0 - xs : ix1 - xs + 1] = PredictedClass.FREE
    for r in hits:
        for k in range(4):
            _paint(cls, r.wall_box(k), box, PredictedClass.WALL)
    if world.doors:
        for door in world.doors:
            for line in world.door_lines(door):
                _paint(cls, line, box, PredictedClass.DOOR)
    return cls, cov


def _paint(arr: np.ndarray, line: Box, window: Box, value: int) -> None:
    x0, y0 = max(line.x0, window.x0), max(line.y0, window.y0)
    x1, y1 = min(line.x1, window.x1), min(line.y1, window.y1)
    if x0 <= x1 and y0 <= y1:
        arr[y0 - window.y0 : y1 - window.y0 + 1, x0 - window.x0 : x1 - window.x0 + 1] = value


def rasterize(world: World, width: int, height: int) -> PredictedGrid:
    for room in world.rooms:
        if not room.rect.within(width, height):
            raise OutOfBounds(f"room {room.id} {room.rect} exceeds {width}x{height} grid")
    cls, cov = rasterize_window(world, Box(0, 0, width - 1, height - 1))
    return PredictedGrid(cls, cov)


def _room_change_box(old: Rect, new: Rect) -> Box:
    diffs = [old.x0 != new.x0, old.y0 != new.y0, old.x1 != new.x1, old.y1 != new.y1]
    if sum(diffs) == 1:
        if diffs[0]:
            return Box(min(old.x0, new.x0) - 1, old.y0 - 1, max(old.x0, new.x0) + 1, old.y1 + 1)
        if diffs[2]:
            return Box(min(old.x1, new.x1) - 1, old.y0 - 1, max(old.x1, new.x1) + 1, old.y1 + 1)
        if diffs[1]:
            return Box(old.x0 - 1, min(old.y0, new.y0) - 1, old.x1 + 1, max(old.y0, new.y0) + 1)
        return Box(old.x0 - 1, min(old.y1, new.y1) - 1, old.x1 + 1, max(old.y1, new.y1) + 1)
    u = old.union_bounds(new)
    return Box(u.x0 - 1, u.y0 - 1, u.x1 + 1, u.y1 + 1)


def diff_region(before: World, after: World, width: int, height: int) -> list[Box]:
    """Boxes covering every cell whose class or coverage may differ between the worlds."""
    boxes: list[Box] = []
    old_rooms = {r.id: r.rect for r in before.rooms}
    new_rooms = {r.id: r.rect for r in after.rooms}
    for rid, rect in old_rooms.items():
        other = new_rooms.get(rid)
        if other is None:
            boxes.append(Box(rect.x0 - 1, rect.y0 - 1, rect.x1 + 1, rect.y1 + 1))
        elif other != rect:
            boxes.append(_room_change_box(rect, other))
    for rid, rect in new_rooms.items():
        if rid not in old_rooms:
            boxes.append(Box(rect.x0 - 1, rect.y0 - 1, rect.x1 + 1, rect.y1 + 1))
    if before.doors or after.doors:
        old_lines = {d.id: tuple(before.door_lines(d)) for d in before.doors}
        new_lines = {d.id: tuple(after.door_lines(d)) for d in after.doors}
        for did in old_lines.keys() | new_lines.keys():
            a, b = old_lines.get(did), new_lines.get(did)
            if a != b:
                boxes.extend(a or ())
                boxes.extend(b or ())
    out = []
    for b in boxes:
        c = b.clip(width, height)
        if c is not None and c not in out:
            out.append(c)
    out.sort()
    return out


def disjoint_boxes(boxes: Iterable[Box]) -> list[Box]:
    """Split boxes into pairwise-disjoint pieces with the same union."""
    result: list[Box] = []
    for b in boxes:
        pieces = [b]
        for r in result:
            nxt = []
            for p in pieces:
                nxt.extend(_subtract(p, r))
            pieces = nxt
            if not pieces:
                break
        result.extend(pieces)
    return result


def _subtract(p: Box, r: Box) -> list[Box]:
    inter = p.intersect(r)
    if inter is None:
        return [p]
    out = []
    if p.y0 < inter.y0:
        out.append(Box(p.x0, p.y0, p.x1, inter.y0 - 1))
    if inter.y1 < p.y1:
        out.append(Box(p.x0, inter.y1 + 1, p.x1, p.y1))
    if p.x0 < inter.x0:
        out.append(Box(p.x0, inter.y0, inter.x0 - 1, inter.y1))
    if inter.x1 < p.x1:
        out.append(Box(inter.x1 + 1, inter.y0, p.x1, inter.y1))
    return out
