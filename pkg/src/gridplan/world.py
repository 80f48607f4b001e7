"""Scene-graph state: rooms, typed walls and doors."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import cached_property

from gridplan.geometry import Box, Rect, Segment, wall_is_vertical

WALL_NAMES = ("north", "east", "south", "west")
OPPOSITE = (2, 3, 0, 1)


class WallType(enum.Enum):
    DWALL = "dwall"
    NWALL = "nwall"
    BWALL = "bwall"


@dataclass(frozen=True)
class Room:
    id: int
    rect: Rect
    wall_types: tuple[WallType, WallType, WallType, WallType] = (WallType.BWALL,) * 4

    @property
    def walls(self) -> tuple[Segment, Segment, Segment, Segment]:
        return self.rect.walls()


@dataclass(frozen=True)
class Door:
    """An opening shared by two rooms.

    ``span`` lies on wall ``wall_indices[0]`` of room ``room_ids[0]``; on the
    second room it is the same extent projected onto its facing wall.
    """

    id: int
    span: Segment
    room_ids: tuple[int, int]
    wall_indices: tuple[int, int]

    def __post_init__(self):
        if self.room_ids[0] == self.room_ids[1]:
            raise ValueError("a door joins two distinct rooms")

    @property
    def extent(self) -> tuple[int, int]:
        """Inclusive cell range along the wall axis."""
        s = self.span
        return (s.a.y, s.b.y) if s.vertical else (s.a.x, s.b.x)


def wall_coord(rect: Rect, k: int) -> int:
    return (rect.y0, rect.x1, rect.y1, rect.x0)[k]


def wall_extent(rect: Rect, k: int) -> tuple[int, int]:
    return (rect.y0, rect.y1) if wall_is_vertical(k) else (rect.x0, rect.x1)


def span_line(rect: Rect, k: int, lo: int, hi: int) -> Box:
    c = wall_coord(rect, k)
    return Box(c, lo, c, hi) if wall_is_vertical(k) else Box(lo, c, hi, c)


@dataclass(frozen=True)
class World:
    rooms: tuple[Room, ...] = ()
    doors: tuple[Door, ...] = ()
    next_id: int = 0

    @cached_property
    def by_id(self) -> dict[int, Room]:
        return {r.id: r for r in self.rooms}

    def room(self, rid: int) -> Room:
        return self.by_id[rid]

    def door_lines(self, door: Door) -> list[Box]:
        lo, hi = door.extent
        out = []
        for rid, k in zip(door.room_ids, door.wall_indices):
            out.append(span_line(self.by_id[rid].rect, k, lo, hi))
        return out

    def key(self) -> tuple:
        """Hashable identity ignoring derived wall types."""
        return (tuple((r.id, r.rect) for r in self.rooms), self.doors)

    # -- structural edits (return new worlds) ---------------------------------

    def add_room(self, rect: Rect) -> tuple[World, Room]:
        room = Room(self.next_id, rect)
        return World(self.rooms + (room,), self.doors, self.next_id + 1), room

    def remove_rooms(self, ids) -> World:
        ids = set(ids)
        rooms = tuple(r for r in self.rooms if r.id not in ids)
        doors = tuple(d for d in self.doors if not ids.intersection(d.room_ids))
        return World(rooms, doors, self.next_id)

    def replace_room(self, rid: int, rect: Rect) -> World:
        rooms = tuple(replace(r, rect=rect) if r.id == rid else r for r in self.rooms)
        return World(rooms, self.doors, self.next_id)

    def add_door(self, span: Segment, room_ids, wall_indices) -> tuple[World, Door]:
        door = Door(self.next_id, span, tuple(room_ids), tuple(wall_indices))
        return World(self.rooms, self.doors + (door,), self.next_id + 1), door

    def remove_door(self, did: int) -> World:
        return World(self.rooms, tuple(d for d in self.doors if d.id != did), self.next_id)

    def drop_invalid_doors(self, min_door_len: int = 3) -> World:
        doors = tuple(d for d in self.doors if door_is_valid(d, self, min_door_len))
        if len(doors) == len(self.doors):
            return self
        return World(self.rooms, doors, self.next_id)


def door_is_valid(door: Door, world: World, min_door_len: int = 3) -> bool:
    """Door span sits strictly inside both host walls, which face each other within one cell."""
    lo, hi = door.extent
    if hi - lo + 1 < min_door_len:
        return False
    coords = []
    for rid, k in zip(door.room_ids, door.wall_indices):
        room = world.by_id.get(rid)
        if room is None or wall_is_vertical(k) != door.span.vertical:
            return False
        e0, e1 = wall_extent(room.rect, k)
        if not (e0 < lo and hi < e1):
            return False
        coords.append(wall_coord(room.rect, k))
    first = world.by_id[door.room_ids[0]].rect
    if wall_coord(first, door.wall_indices[0]) != (door.span.a.x if door.span.vertical else door.span.a.y):
        return False
    return abs(coords[0] - coords[1]) <= 1


def walls_adjacent(ra: Rect, ka: int, rb: Rect, kb: int) -> bool:
    """Parallel walls within one cell of each other with overlapping extents."""
    if wall_is_vertical(ka) != wall_is_vertical(kb):
        return False
    if abs(wall_coord(ra, ka) - wall_coord(rb, kb)) > 1:
        return False
    a0, a1 = wall_extent(ra, ka)
    b0, b1 = wall_extent(rb, kb)
    return min(a1, b1) - max(a0, b0) >= 1


def wall_types(world: World) -> World:
    """Recompute every wall's type from doors and neighbouring rooms."""
    door_walls = set()
    for d in world.doors:
        for rid, k in zip(d.room_ids, d.wall_indices):
            door_walls.add((rid, k))
    rooms = []
    for room in world.rooms:
        types = []
        for k in range(4):
            if (room.id, k) in door_walls:
                types.append(WallType.DWALL)
                continue
            nwall = False
            for other in world.rooms:
                if other.id == room.id:
                    continue
                if walls_adjacent(room.rect, k, other.rect, OPPOSITE[k]) or walls_adjacent(
                    room.rect, k, other.rect, k
                ):
                    nwall = True
                    break
            types.append(WallType.NWALL if nwall else WallType.BWALL)
        types = tuple(types)
        rooms.append(room if types == room.wall_types else replace(room, wall_types=types))
    return World(tuple(rooms), world.doors, world.next_id)
