"""Forward simulation of occupancy maps from known worlds, for tests and benchmarks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gridplan.errors import InvalidSpec
from gridplan.geometry import COLLAPSE, Rect, Segment, rasterize, wall_is_vertical
from gridplan.grid_io import OccupancyGrid
from gridplan.model import SensorModel
from gridplan.world import OPPOSITE, World, door_is_valid, wall_coord, wall_extent

# intensity written for each observed class (common robot-map convention)
CLASS_INTENSITY = np.array([0, 205, 254], dtype=np.uint8)


@dataclass(frozen=True)
class SyntheticSpec:
    """``rooms`` are (x0, y0, x1, y1); ``doors`` are (room_a, room_b, wall_a, wall_b, lo, hi)
    with room indices into ``rooms`` and an inclusive extent along the wall."""

    width: int
    height: int
    rooms: tuple[tuple[int, int, int, int], ...] = ()
    doors: tuple[tuple[int, int, int, int, int, int], ...] = ()

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height,
                "rooms": [list(r) for r in self.rooms], "doors": [list(d) for d in self.doors]}

    @classmethod
    def from_dict(cls, d: dict) -> SyntheticSpec:
        return cls(int(d["width"]), int(d["height"]),
                   tuple(tuple(int(v) for v in r) for r in d.get("rooms", ())),
                   tuple(tuple(int(v) for v in x) for x in d.get("doors", ())))


def world_from_spec(spec: SyntheticSpec, min_door_len: int = 3) -> World:
    if spec.width < 1 or spec.height < 1:
        raise InvalidSpec("grid dimensions must be positive")
    world = World()
    ids = []
    for r in spec.rooms:
        try:
            rect = Rect(*r)
        except ValueError as exc:
            raise InvalidSpec(str(exc)) from None
        if not rect.within(spec.width, spec.height):
            raise InvalidSpec(f"room {r} outside {spec.width}x{spec.height}")
        world, room = world.add_room(rect)
        ids.append(room.id)
    for a, b, ka, kb, lo, hi in spec.doors:
        try:
            ra = world.room(ids[a]).rect
        except IndexError:
            raise InvalidSpec(f"door references unknown room {a}") from None
        c = wall_coord(ra, ka)
        span = Segment.of(c, lo, c, hi) if wall_is_vertical(ka) else Segment.of(lo, c, hi, c)
        if b >= len(ids):
            raise InvalidSpec(f"door references unknown room {b}")
        world, door = world.add_door(span, (ids[a], ids[b]), (ka, kb))
        if not door_is_valid(door, world, min_door_len):
            raise InvalidSpec(f"door {(a, b, ka, kb, lo, hi)} does not sit on facing walls")
    return world


def generate_synthetic(spec: SyntheticSpec, noise_seed: int,
                       sensor: SensorModel | np.ndarray = SensorModel()) -> tuple[OccupancyGrid, World]:
    """Rasterize the spec world and sample each cell's observation from the sensor row.

    ``sensor`` may also be a plain 3x3 row-stochastic table; unlike a scoring
    model it may contain zeros (the identity table gives a noiseless map).
    """
    table = sensor.array if isinstance(sensor, SensorModel) else np.asarray(sensor, dtype=float)
    if table.shape != (3, 3) or (table < 0).any() or np.abs(table.sum(axis=1) - 1).max() > 1e-9:
        raise InvalidSpec("sensor table must be 3x3 with nonnegative rows summing to 1")
    world = world_from_spec(spec)
    predicted = rasterize(world, spec.width, spec.height)
    rows = COLLAPSE[predicted.classes]
    cum = np.cumsum(table, axis=1)
    u = np.random.default_rng(noise_seed).random(rows.shape)
    observed = (u[..., None] >= cum[rows][..., :2]).sum(axis=-1).astype(np.uint8)
    return OccupancyGrid(CLASS_INTENSITY[observed]), world


def random_spec(seed: int, n_rooms: int, n_doors: int, width: int = 220, height: int = 180,
                margin: int = 12, min_side: int = 36, door_len=(5, 8)) -> SyntheticSpec:
    """A rectangular footprint cut into ``n_rooms`` rooms by guillotine cuts.

    Neighbouring rooms are separated by a two-cell wall (each room owns one
    cell of it), so rooms never overlap.  Doors are placed on distinct
    neighbouring pairs, away from wall ends.
    """
    rng = np.random.default_rng(seed)
    rooms = [(margin, margin, width - 1 - margin, height - 1 - margin)]
    guard = 0
    while len(rooms) < n_rooms:
        guard += 1
        if guard > 1000:
            raise InvalidSpec(f"cannot fit {n_rooms} rooms of side >= {min_side}")
        i = int(rng.integers(len(rooms)))
        x0, y0, x1, y1 = rooms[i]
        vertical = (x1 - x0) >= (y1 - y0) if rng.random() < 0.8 else (x1 - x0) < (y1 - y0)
        lo, hi = (x0, x1) if vertical else (y0, y1)
        first, last = lo + min_side - 1, hi - min_side
        if first > last:
            continue
        c = int(rng.integers(first, last + 1))
        if vertical:
            rooms[i : i + 1] = [(x0, y0, c, y1), (c + 1, y0, x1, y1)]
        else:
            rooms[i : i + 1] = [(x0, y0, x1, c), (x0, c + 1, x1, y1)]
    rects = [Rect(*r) for r in rooms]
    pairs = []
    for a in range(len(rects)):
        for b in range(a + 1, len(rects)):
            for ka in range(4):
                kb = OPPOSITE[ka]
                if abs(wall_coord(rects[a], ka) - wall_coord(rects[b], kb)) != 1:
                    continue
                a0, a1 = wall_extent(rects[a], ka)
                b0, b1 = wall_extent(rects[b], kb)
                lo, hi = max(a0, b0) + 10, min(a1, b1) - 10
                if hi - lo + 1 >= door_len[1] and _facing(rects[a], ka, rects[b]):
                    pairs.append((a, b, ka, kb, lo, hi))
    order = rng.permutation(len(pairs))
    doors = []
    for j in order[: min(n_doors, len(pairs))]:
        a, b, ka, kb, lo, hi = pairs[int(j)]
        length = int(rng.integers(door_len[0], door_len[1] + 1))
        start = int(rng.integers(lo, hi - length + 2))
        doors.append((a, b, ka, kb, start, start + length - 1))
    doors.sort()
    return SyntheticSpec(width, height, tuple(rooms), tuple(doors))


def _facing(ra: Rect, ka: int, rb: Rect) -> bool:
    """Room b lies on the outer side of wall ka of room a."""
    if ka == 0:
        return rb.y1 < ra.y0
    if ka == 1:
        return rb.x0 > ra.x1
    if ka == 2:
        return rb.y0 > ra.y1
    return rb.x1 < ra.x0
