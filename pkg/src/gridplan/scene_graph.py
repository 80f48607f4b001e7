"""JSON export/import of worlds as scene graphs."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

from gridplan.geometry import Rect, Segment
from gridplan.world import WALL_NAMES, OPPOSITE, Door, Room, WallType, World, walls_adjacent, wall_types

SCHEMA_ID = "gridplan.scene_graph/1"


def load_schema() -> dict:
    return json.loads(resources.files("gridplan").joinpath("scene_graph.schema.json").read_text())


def _meters(v: int, resolution: float) -> float:
    return round(v * resolution, 6)


def adjacency(world: World) -> list[dict]:
    """Room pairs connected by a door or sharing a wall (dwall / nwall relations)."""
    door_pairs = {tuple(sorted(d.room_ids)) for d in world.doors}
    out = []
    rooms = sorted(world.rooms, key=lambda r: r.id)
    for i, a in enumerate(rooms):
        for b in rooms[i + 1 :]:
            pair = (a.id, b.id)
            if pair in door_pairs:
                out.append({"rooms": list(pair), "relation": "door"})
            elif any(walls_adjacent(a.rect, k, b.rect, OPPOSITE[k]) for k in range(4)):
                out.append({"rooms": list(pair), "relation": "neighbor"})
    return out


def to_dict(world: World, width: int, height: int, resolution: float = 0.05) -> dict[str, Any]:
    world = wall_types(world)
    rooms = []
    for room in world.rooms:
        r = room.rect
        walls = []
        for k, (seg, wt) in enumerate(zip(room.walls, room.wall_types)):
            walls.append({"index": k, "side": WALL_NAMES[k], "a": list(seg.a), "b": list(seg.b),
                          "type": wt.value})
        rooms.append({
            "id": room.id,
            "rect": {"min": [r.x0, r.y0], "max": [r.x1, r.y1]},
            "rect_m": {"min": [_meters(r.x0, resolution), _meters(r.y0, resolution)],
                       "max": [_meters(r.x1, resolution), _meters(r.y1, resolution)]},
            "walls": walls,
        })
    doors = [{"id": d.id, "span": {"a": list(d.span.a), "b": list(d.span.b)},
              "rooms": list(d.room_ids), "walls": list(d.wall_indices)} for d in world.doors]
    return {
        "schema": SCHEMA_ID,
        "grid": {"width": width, "height": height, "resolution": resolution},
        "rooms": rooms,
        "doors": doors,
        "adjacency": adjacency(world),
    }


def dumps(world: World, width: int, height: int, resolution: float = 0.05) -> str:
    return json.dumps(to_dict(world, width, height, resolution), indent=2) + "\n"


def write(world: World, path: str | Path, width: int, height: int, resolution: float = 0.05) -> None:
    Path(path).write_text(dumps(world, width, height, resolution))


def from_dict(doc: dict) -> World:
    rooms = []
    for r in doc["rooms"]:
        rect = Rect(*r["rect"]["min"], *r["rect"]["max"])
        types = tuple(WallType(w["type"]) for w in sorted(r["walls"], key=lambda w: w["index"]))
        rooms.append(Room(r["id"], rect, types))
    doors = []
    for d in doc["doors"]:
        span = Segment.of(*d["span"]["a"], *d["span"]["b"])
        doors.append(Door(d["id"], span, tuple(d["rooms"]), tuple(d["walls"])))
    ids = [r.id for r in rooms] + [d.id for d in doors]
    return World(tuple(rooms), tuple(doors), max(ids) + 1 if ids else 0)


def read(path: str | Path) -> World:
    return from_dict(json.loads(Path(path).read_text()))
