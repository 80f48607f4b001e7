"""Bottom-up proposal generators: Hough walls, WBR and FSR rooms, doors, weighted resampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Generic, Hashable, Sequence, TypeVar

import numpy as np
from scipy import ndimage

from gridplan.errors import CandidateExplosion, EmptyCandidateSet
from gridplan.geometry import Box, PredictedClass, PredictedGrid, Rect, Segment, segment_length, wall_is_vertical
from gridplan.grid_io import CellClass, ClassifiedGrid
from gridplan.world import World, wall_coord, wall_extent

T = TypeVar("T")


@dataclass(frozen=True)
class HoughParams:
    rho_resolution: int = 1
    theta_resolution: float = 1.0
    accumulator_threshold: int = 20
    min_segment_len: int = 10
    max_gap: int = 3

    def __post_init__(self):
        for name in ("rho_resolution", "theta_resolution", "accumulator_threshold",
                     "min_segment_len", "max_gap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if abs(180.0 / self.theta_resolution - round(180.0 / self.theta_resolution)) > 1e-9:
            raise ValueError("theta_resolution must divide 180")
        if self.min_segment_len < 2:
            raise ValueError("min_segment_len must be at least 2 cells")


@dataclass(frozen=True)
class DoorParams:
    expansion_depth: int = 5
    segment_len: int = 4
    verify_threshold: float = 0.6
    gap_threshold: int = 2
    min_door_len: int = 3
    max_door_len: int = 30


@dataclass(frozen=True)
class RoomCandidate:
    rect: Rect
    weight: float


@dataclass(frozen=True)
class DoorCandidate:
    span: Segment
    host_rooms: tuple[int, int]
    host_walls: tuple[int, int]
    weight: float

    @property
    def extent(self) -> tuple[int, int]:
        s = self.span
        return (s.a.y, s.b.y) if s.vertical else (s.a.x, s.b.x)


# -- weights -------------------------------------------------------------------

class WeightField:
    """Prefix sums of Occupied and Free cells along rows and columns.

    Gives O(1) match counts for any axis-aligned line of cells.
    """

    def __init__(self, classified: ClassifiedGrid):
        c = classified.classes
        self.width, self.height = classified.width, classified.height
        self._rows = {}
        self._cols = {}
        for cls in (CellClass.OCCUPIED, CellClass.FREE):
            m = (c == cls).astype(np.int32)
            self._rows[cls] = np.pad(np.cumsum(m, axis=1), ((0, 0), (1, 0)))
            self._cols[cls] = np.pad(np.cumsum(m, axis=0), ((1, 0), (0, 0)))

    def count(self, box: Box, cls: CellClass = CellClass.OCCUPIED) -> int:
        """Matching cells on a one-cell-thin line."""
        if box.y0 == box.y1:
            row = self._rows[cls][box.y0]
            return int(row[box.x1 + 1] - row[box.x0])
        col = self._cols[cls][:, box.x0]
        return int(col[box.y1 + 1] - col[box.y0])

    def line_weight(self, box: Box, cls: CellClass = CellClass.OCCUPIED) -> float:
        length = max(box.x1 - box.x0, box.y1 - box.y0)
        if length == 0:
            return 0.0
        return min(1.0, self.count(box, cls) / length)

    def room_weight(self, rect: Rect) -> float:
        return min(self.line_weight(rect.wall_box(k)) for k in range(4))

    def wall_weights(self, rect: Rect) -> list[float]:
        return [self.line_weight(rect.wall_box(k)) for k in range(4)]

    def room_weights(self, x0, y0, x1, y1) -> np.ndarray:
        """Vectorized room weights over broadcastable corner arrays."""
        R = self._rows[CellClass.OCCUPIED]
        C = self._cols[CellClass.OCCUPIED]
        hl = (x1 - x0).astype(float)
        vl = (y1 - y0).astype(float)
        north = (R[y0, x1 + 1] - R[y0, x0]) / hl
        south = (R[y1, x1 + 1] - R[y1, x0]) / hl
        west = (C[y1 + 1, x0] - C[y0, x0]) / vl
        east = (C[y1 + 1, x1] - C[y0, x1]) / vl
        w = np.minimum(np.minimum(north, south), np.minimum(west, east))
        return np.minimum(w, 1.0)


def wall_weight(wall: Segment, classified: ClassifiedGrid) -> float:
    """Fraction n(w)/l(w) of wall cells observed Occupied, clamped to [0, 1]."""
    cells = _segment_cells(wall, classified)
    n = int((cells == CellClass.OCCUPIED).sum())
    return min(1.0, n / segment_length(wall))


def door_weight(span: Segment, classified: ClassifiedGrid) -> float:
    """Like ``wall_weight`` but matching Free observations."""
    cells = _segment_cells(span, classified)
    return min(1.0, int((cells == CellClass.FREE).sum()) / segment_length(span))


def _segment_cells(s: Segment, classified: ClassifiedGrid) -> np.ndarray:
    return classified.classes[s.a.y : s.b.y + 1, s.a.x : s.b.x + 1].ravel()


def room_weight(rect: Rect, classified: ClassifiedGrid) -> float:
    """Weight of the worst-matching of the four walls."""
    return min(wall_weight(w, classified) for w in rect.walls())


# -- weighted resampling ---------------------------------------------------------

class WeightedSet(Generic[T]):
    """Candidates with normalized and cumulative weights for inverse-CDF draws.

    If every weight is zero the set falls back to uniform weights.
    """

    def __init__(self, items: Sequence[T], weights: Sequence[float] | np.ndarray,
                 key: Callable[[T], Hashable] | None = None):
        if len(items) == 0:
            raise EmptyCandidateSet("no candidates")
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(items),):
            raise ValueError("one weight per item")
        if (w < 0).any() or not np.isfinite(w).all():
            raise ValueError("weights must be finite and nonnegative")
        if w.sum() == 0:
            w = np.ones_like(w)
        self.items = list(items)
        self.weights = w
        self.total = float(w.sum())
        self.normalized = w / self.total
        cum = np.cumsum(self.normalized)
        last = int(np.flatnonzero(w > 0)[-1])
        cum[last:] = 1.0
        self.cumulative = cum
        self._key = key
        self._index: dict | None = None

    def __len__(self) -> int:
        return len(self.items)

    def index_of(self, item_key: Hashable) -> int | None:
        if self._index is None:
            keyf = self._key or (lambda x: x)
            self._index = {}
            for i, it in enumerate(self.items):
                self._index.setdefault(keyf(it), i)
        return self._index.get(item_key)

    def probability(self, i: int) -> float:
        return float(self.weights[i] / self.total)

    def draw(self, rng: np.random.Generator) -> tuple[int, float]:
        k = rng.random()
        # first index whose cumulative weight exceeds k; zero-weight items are never hit
        i = int(np.searchsorted(self.cumulative, k, side="right"))
        return i, self.probability(i)


def sample_weighted(candidates: WeightedSet[T], rng: np.random.Generator) -> tuple[T, float]:
    i, p = candidates.draw(rng)
    return candidates.items[i], p


# -- Hough walls -----------------------------------------------------------------

def _region_box(classified: ClassifiedGrid, region) -> Box:
    if region is None:
        return Box(0, 0, classified.width - 1, classified.height - 1)
    b = Box(region.x0, region.y0, region.x1, region.y1)
    if b.clip(classified.width, classified.height) != b:
        raise ValueError(f"region {b} outside the grid")
    return b


def hough_segments(classified: ClassifiedGrid, region: Rect | Box | None = None,
                   params: HoughParams = HoughParams()) -> list[Segment]:
    """Axis-aligned wall segments voted by Occupied cells.

    The accumulator is evaluated at the 0 and 90 degree bins only.  Each
    line bin above the vote threshold is scanned for runs of votes whose
    internal gaps are at most ``max_gap``; a run becomes a segment if it is
    at least ``min_segment_len`` cells long and carries at least the
    threshold number of votes itself.
    """
    box = _region_box(classified, region)
    occ = classified.classes[box.y0 : box.y1 + 1, box.x0 : box.x1 + 1] == CellClass.OCCUPIED
    r = int(params.rho_resolution)
    out: list[Segment] = []
    for vertical in (True, False):
        a = occ if vertical else occ.T  # lines run along axis 0
        nlines = a.shape[1]
        if r == 1:
            band = a
        else:
            band = np.logical_or.reduceat(a, np.arange(0, nlines, r), axis=1)
        votes = band.sum(axis=0)
        for b in np.flatnonzero(votes >= params.accumulator_threshold):
            pos = np.flatnonzero(band[:, b])
            breaks = np.flatnonzero(np.diff(pos) > params.max_gap + 1)
            starts = np.concatenate(([0], breaks + 1))
            ends = np.concatenate((breaks, [len(pos) - 1]))
            width = min(r, nlines - b * r)
            coord = int(b * r + (width - 1) // 2)
            for s, e in zip(starts, ends):
                lo, hi = int(pos[s]), int(pos[e])
                if hi - lo + 1 < params.min_segment_len or e - s + 1 < params.accumulator_threshold:
                    continue
                if vertical:
                    out.append(Segment.of(box.x0 + coord, box.y0 + lo, box.x0 + coord, box.y0 + hi))
                else:
                    out.append(Segment.of(box.x0 + lo, box.y0 + coord, box.x0 + hi, box.y0 + coord))
    return out


# -- WBR -------------------------------------------------------------------------

def sub_area_bounds(segments: Sequence[Segment], width: int, height: int) -> tuple[list[int], list[int]]:
    """Sorted x and y cut coordinates after extending every segment across the map."""
    xs = {0, width - 1}
    ys = {0, height - 1}
    for s in segments:
        if s.vertical:
            xs.add(s.a.x)
        else:
            ys.add(s.a.y)
    return sorted(xs), sorted(ys)


def block_count(xs: Sequence[int], ys: Sequence[int]) -> int:
    """Number of contiguous rectangular blocks of an (len(xs)-1) x (len(ys)-1) arrangement."""
    return math.comb(len(xs), 2) * math.comb(len(ys), 2)


def enumerate_blocks(xs: Sequence[int], ys: Sequence[int]) -> tuple[np.ndarray, ...]:
    """Corner arrays (x0, y0, x1, y1) of every contiguous block of sub-areas."""
    xi, xj = np.triu_indices(len(xs), k=1)
    yi, yj = np.triu_indices(len(ys), k=1)
    xs_a, ys_a = np.asarray(xs), np.asarray(ys)
    X0, Y0 = np.meshgrid(xs_a[xi], ys_a[yi])
    X1, Y1 = np.meshgrid(xs_a[xj], ys_a[yj])
    return X0.ravel(), Y0.ravel(), X1.ravel(), Y1.ravel()


def wbr_candidates(classified: ClassifiedGrid, hough: HoughParams = HoughParams(),
                   cap: int = 200_000, min_side: int = 3,
                   field: WeightField | None = None) -> list[RoomCandidate]:
    """Room candidates recombined from the sub-areas cut out by extended Hough lines."""
    segs = hough_segments(classified, None, hough)
    xs, ys = sub_area_bounds(segs, classified.width, classified.height)
    n = block_count(xs, ys)
    if n > cap:
        raise CandidateExplosion(
            f"{n} WBR rectangles from {len(xs)}x{len(ys)} cut lines exceeds cap {cap}; "
            "raise the Hough accumulator threshold"
        )
    if n == 0:
        return []
    field = field or WeightField(classified)
    x0, y0, x1, y1 = enumerate_blocks(xs, ys)
    keep = (x1 - x0 + 1 >= min_side) & (y1 - y0 + 1 >= min_side)
    x0, y0, x1, y1 = x0[keep], y0[keep], x1[keep], y1[keep]
    w = field.room_weights(x0, y0, x1, y1)
    out = []
    for i in np.flatnonzero(w > 0):
        out.append(RoomCandidate(Rect(int(x0[i]), int(y0[i]), int(x1[i]), int(y1[i])), float(w[i])))
    return out


# -- FSR -------------------------------------------------------------------------

_FOUR = ndimage.generate_binary_structure(2, 1)


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected labeling; labels 1..count in raster order of first appearance."""
    labels, count = ndimage.label(np.asarray(mask, dtype=bool), structure=_FOUR)
    return labels, int(count)


def fsr_candidates(classified: ClassifiedGrid, predicted: PredictedGrid,
                   field: WeightField | None = None, weight_floor: float = 0.05,
                   min_area: int = 25, min_side: int = 3) -> list[RoomCandidate]:
    """Bounding rooms of Free-observed regions the world leaves unexplained."""
    field = field or WeightField(classified)
    residual = (predicted.classes == PredictedClass.UNKNOWN) & (classified.classes == CellClass.FREE)
    labels, count = connected_components(residual)
    if count == 0:
        return []
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    out = []
    for lab, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl is None or sizes[lab] < min_area:
            continue
        ys, xs = sl
        # region is room interior; the walls sit one cell outside it
        x0 = max(xs.start - 1, 0)
        y0 = max(ys.start - 1, 0)
        x1 = min(xs.stop, classified.width - 1)
        y1 = min(ys.stop, classified.height - 1)
        if x1 - x0 + 1 < min_side or y1 - y0 + 1 < min_side:
            continue
        rect = Rect(x0, y0, x1, y1)
        out.append(RoomCandidate(rect, max(field.room_weight(rect), weight_floor)))
    return out


# -- doors -------------------------------------------------------------------------

def _expansion_box(rect: Rect, k: int, d: int) -> Box | None:
    """Wall k shortened by d+1 at both ends, then grown d cells to both sides."""
    c = wall_coord(rect, k)
    lo, hi = wall_extent(rect, k)
    lo, hi = lo + d + 1, hi - d - 1
    if lo > hi:
        return None
    if wall_is_vertical(k):
        return Box(c - d, lo, c + d, hi)
    return Box(lo, c - d, hi, c + d)


def _verified_intervals(free_a: np.ndarray, free_b: np.ndarray, params: DoorParams) -> list[tuple[int, int]]:
    """Steps 3-4 along one facing wall pair.

    Windows of ``segment_len`` cells slide along the pair; a window is
    verified when the Free fraction over its cells on both walls exceeds
    ``verify_threshold``.  Verified cells separated by fewer than
    ``gap_threshold`` cells are merged into one interval.  Each interval is
    then trimmed at both ends until its end cells are open on both walls
    (Free within one cell), so an opening seen on one wall only is cut back
    to where the other wall opens too.
    """
    n = len(free_a)
    L = min(params.segment_len, n)
    both = free_a.astype(np.int32) + free_b.astype(np.int32)
    csum = np.concatenate(([0], np.cumsum(both)))
    win = (csum[L:] - csum[:-L]) / (2.0 * L)
    covered = np.zeros(n, dtype=bool)
    for s in np.flatnonzero(win > params.verify_threshold):
        covered[s : s + L] = True
    pos = np.flatnonzero(covered)
    if len(pos) == 0:
        return []
    merged = []
    start = prev = int(pos[0])
    for p in pos[1:]:
        p = int(p)
        if p - prev - 1 >= params.gap_threshold:
            merged.append((start, prev))
            start = p
        prev = p
    merged.append((start, prev))
    open_both = ndimage.binary_dilation(free_a) & ndimage.binary_dilation(free_b)
    intervals = []
    for s, e in merged:
        while s <= e and not open_both[s]:
            s += 1
        while e >= s and not open_both[e]:
            e -= 1
        if s <= e:
            intervals.append((s, e))
    return intervals


def door_candidates(world: World, classified: ClassifiedGrid, params: DoorParams = DoorParams(),
                    exclude_existing: bool = True) -> list[DoorCandidate]:
    """Door openings located where expanded walls of two rooms overlap.

    1. each wall is shortened and grown perpendicular into a rectangle;
    2. overlapping rectangles of different rooms are found by labeling the
       overlap mask, and the facing wall portions are located;
    3. the portions are scanned with ``segment_len`` windows weighted by
       the Free fraction of their cells on both facing walls; windows above
       ``verify_threshold`` are verified;
    4. verified cells closer than ``gap_threshold`` are merged into spans,
       which only cover cells where both walls are open together.
    """
    rooms = world.rooms
    if len(rooms) < 2:
        return []
    H, W = classified.height, classified.width
    d = params.expansion_depth
    boxes = []
    for ri, room in enumerate(rooms):
        for k in range(4):
            b = _expansion_box(room.rect, k, d)
            if b is not None:
                b = b.clip(W, H)
                if b is not None:
                    boxes.append((ri, k, b))
    count = np.zeros((H, W), dtype=np.int16)
    for _, _, b in boxes:
        count[b.y0 : b.y1 + 1, b.x0 : b.x1 + 1] += 1
    labels, n = connected_components(count >= 2)
    if n == 0:
        return []
    free = classified.classes == CellClass.FREE
    pairs = set()
    for sl in ndimage.find_objects(labels):
        comp = Box(sl[1].start, sl[0].start, sl[1].stop - 1, sl[0].stop - 1)
        hit = [bx for bx in boxes if bx[2].intersect(comp) is not None]
        for i in range(len(hit)):
            for j in range(i + 1, len(hit)):
                (ra, ka, ba), (rb, kb, bb) = hit[i], hit[j]
                if ra == rb or wall_is_vertical(ka) != wall_is_vertical(kb):
                    continue
                if ra > rb:
                    ra, ka, ba, rb, kb, bb = rb, kb, bb, ra, ka, ba
                a, b = rooms[ra].rect, rooms[rb].rect
                if abs(wall_coord(a, ka) - wall_coord(b, kb)) > 1:
                    continue
                inter = ba.intersect(bb)
                if inter is None or inter.intersect(comp) is None:
                    continue
                pairs.add((ra, ka, rb, kb, inter))
    existing = {}
    if exclude_existing:
        for door in world.doors:
            existing.setdefault((door.room_ids, door.wall_indices), []).append(door.extent)
    out = []
    for ra, ka, rb, kb, inter in sorted(pairs):
        a, b = rooms[ra].rect, rooms[rb].rect
        vertical = wall_is_vertical(ka)
        lo, hi = (inter.y0, inter.y1) if vertical else (inter.x0, inter.x1)
        ca, cb = wall_coord(a, ka), wall_coord(b, kb)
        if vertical:
            line_a, line_b = free[lo : hi + 1, ca], free[lo : hi + 1, cb]
        else:
            line_a, line_b = free[ca, lo : hi + 1], free[cb, lo : hi + 1]
        for s0, e0 in _verified_intervals(line_a, line_b, params):
            s, e = lo + s0, lo + e0
            if not params.min_door_len <= e - s + 1 <= params.max_door_len:
                continue
            key = ((rooms[ra].id, rooms[rb].id), (ka, kb))
            if any(not (e < x0 or s > x1) for x0, x1 in existing.get(key, ())):
                continue
            if vertical:
                matched = int(free[s : e + 1, ca].sum() + free[s : e + 1, cb].sum())
                span = Segment.of(ca, s, ca, e)
            else:
                matched = int(free[ca, s : e + 1].sum() + free[cb, s : e + 1].sum())
                span = Segment.of(s, ca, e, ca)
            weight = min(1.0, matched / (2.0 * (e - s)))
            out.append(DoorCandidate(span, key[0], key[1], weight))
    return out
