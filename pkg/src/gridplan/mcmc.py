"""Metropolis-Hastings over worlds with data-driven kernel pairs.

Kernel pairs: ADD/REMOVE rooms, SPLIT/MERGE rooms, SHRINK/DILATE a wall,
ALLOCATE/DELETE doors.  Kernel choice follows an iteration-indexed
schedule; each kernel reports log Q(W'|W) and log Q(W|W') for the
acceptance test.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from gridplan import detectors as det
from gridplan.errors import InvariantViolation, ProposalUnavailable
from gridplan.geometry import Box, Rect, diff_region, rasterize
from gridplan.grid_io import CellClass, ClassifiedGrid
from gridplan.model import LogScore, PriorParams, Scorer, SensorModel
from gridplan.world import Door, World, wall_types

log = logging.getLogger(__name__)


class KernelKind(enum.Enum):
    ADD = "add"
    REMOVE = "remove"
    SPLIT = "split"
    MERGE = "merge"
    SHRINK = "shrink"
    DILATE = "dilate"
    ALLOCATE = "allocate"
    DELETE = "delete"


KINDS = tuple(KernelKind)
REVERSE = {
    KernelKind.ADD: KernelKind.REMOVE, KernelKind.REMOVE: KernelKind.ADD,
    KernelKind.SPLIT: KernelKind.MERGE, KernelKind.MERGE: KernelKind.SPLIT,
    KernelKind.SHRINK: KernelKind.DILATE, KernelKind.DILATE: KernelKind.SHRINK,
    KernelKind.ALLOCATE: KernelKind.DELETE, KernelKind.DELETE: KernelKind.ALLOCATE,
}


@dataclass(frozen=True)
class Phase:
    bound: float  # inclusive upper bound on the iteration index
    probs: tuple[float, ...]  # one per KernelKind, in KINDS order

    def __post_init__(self):
        if len(self.probs) != len(KINDS):
            raise ValueError(f"need {len(KINDS)} kernel probabilities")
        if min(self.probs) < 0 or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"kernel probabilities must be >= 0 and sum to 1, got {self.probs}")


def _phase(bound, **probs) -> Phase:
    return Phase(bound, tuple(float(probs.get(k.value, 0.0)) for k in KINDS))


@dataclass(frozen=True)
class Schedule:
    phases: tuple[Phase, ...]

    def __post_init__(self):
        bounds = [p.bound for p in self.phases]
        if not bounds or any(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:])):
            raise ValueError("phase bounds must be strictly increasing")
        if bounds[-1] != math.inf:
            raise ValueError("last phase bound must be infinite")
        cums = []
        for p in self.phases:
            c = np.cumsum(p.probs)
            c[int(np.flatnonzero(np.asarray(p.probs) > 0)[-1]):] = 1.0
            cums.append(c)
        object.__setattr__(self, "_cums", tuple(cums))

    @classmethod
    def default(cls) -> Schedule:
        return cls((
            _phase(1000, add=0.8, remove=0.2),
            _phase(4000, add=0.05, remove=0.05, split=0.2, merge=0.2, shrink=0.25, dilate=0.25),
            _phase(math.inf, add=0.05, remove=0.05, split=0.2, merge=0.2, shrink=0.2, dilate=0.2,
                   allocate=0.05, delete=0.05),
        ))

    def phase_index(self, beta: int) -> int:
        for i, p in enumerate(self.phases):
            if beta <= p.bound:
                return i
        return len(self.phases) - 1

    def probabilities(self, beta: int) -> dict[KernelKind, float]:
        return dict(zip(KINDS, self.phases[self.phase_index(beta)].probs))


def select_kernel(schedule: Schedule, beta: int, rng: np.random.Generator) -> KernelKind:
    cum = schedule._cums[schedule.phase_index(beta)]
    return KINDS[int(np.searchsorted(cum, rng.random(), side="right"))]


def accept(score_before: LogScore, score_after: LogScore, log_q_fwd: float, log_q_bwd: float,
           rng: np.random.Generator) -> bool:
    """Metropolis-Hastings test; consumes exactly one uniform draw."""
    u = rng.random()
    log_ratio = (score_after.log_posterior - score_before.log_posterior) + (log_q_bwd - log_q_fwd)
    if log_ratio >= 0:
        return True
    return u < math.exp(log_ratio)


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 15000
    seed: int = 0
    prior: PriorParams = PriorParams()
    sensor: SensorModel = SensorModel()
    hough: det.HoughParams = det.HoughParams()
    doors: det.DoorParams = det.DoorParams()
    schedule: Schedule = field(default_factory=Schedule.default)
    h_b: float = 100.0
    h_v: float = 100.0
    h_g: float = 100.0
    shift_sigma: float = 5.0
    fsr_activation: int = 4000
    fsr_weight_floor: float = 0.05
    fsr_min_area: int = 25
    min_room_side: int = 3
    wbr_cap: int = 200_000
    verify: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if min(self.h_b, self.h_v, self.h_g) <= 0 or self.shift_sigma <= 0:
            raise ValueError("weight caps and shift sigma must be positive")
        if self.min_room_side < 3:
            raise ValueError("min_room_side must be at least 3 cells")


@dataclass(frozen=True)
class KernelProposal:
    kind: KernelKind
    world_after: World
    log_q_forward: float
    log_q_backward: float
    diff: list[Box]


@dataclass
class ChainState:
    iteration: int
    world: World
    score: LogScore
    rng: np.random.Generator
    fsr_activation: int = 4000

    @property
    def fsr_active(self) -> bool:
        return self.iteration > self.fsr_activation


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    kernel: KernelKind
    log_posterior: float
    accepted: bool


class ChainTrace:
    def __init__(self):
        self.iterations: list[int] = []
        self.kernels: list[KernelKind] = []
        self.log_posterior: list[float] = []
        self.accepted: list[bool] = []

    def append(self, rec: TraceRecord) -> None:
        self.iterations.append(rec.iteration)
        self.kernels.append(rec.kernel)
        self.log_posterior.append(rec.log_posterior)
        self.accepted.append(rec.accepted)

    def __len__(self) -> int:
        return len(self.iterations)

    def acceptance_rate(self, window: int = 100) -> np.ndarray:
        """Trailing-window acceptance rate at every record."""
        a = np.asarray(self.accepted, dtype=float)
        if len(a) == 0:
            return a
        c = np.concatenate(([0.0], np.cumsum(a)))
        idx = np.arange(1, len(a) + 1)
        lo = np.maximum(idx - window, 0)
        return (c[idx] - c[lo]) / (idx - lo)

    def to_csv(self, path: str | Path) -> None:
        rates = self.acceptance_rate(100)
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["iteration", "kernel", "log_posterior", "accepted", "acceptance_rate_window100"])
            for i in range(len(self)):
                w.writerow([self.iterations[i], self.kernels[i].value, repr(self.log_posterior[i]),
                            int(self.accepted[i]), f"{rates[i]:.6f}"])


def _capped_inverse(w: float, cap: float) -> float:
    return cap if w <= 0 or 1.0 / w > cap else 1.0 / w


def _gaussian_cell_mass(offset: int, sigma: float) -> float:
    s = sigma * math.sqrt(2.0)
    return 0.5 * (math.erf((offset + 0.5) / s) - math.erf((offset - 0.5) / s))


class _Lru(OrderedDict):
    def __init__(self, size: int):
        super().__init__()
        self.size = size

    def get_or(self, key, make):
        if key in self:
            self.move_to_end(key)
            return self[key]
        val = make()
        self[key] = val
        if len(self) > self.size:
            self.popitem(last=False)
        return val


class Sampler:
    """Static context of one map: detectors, caches and the kernel implementations."""

    def __init__(self, classified: ClassifiedGrid, config: ChainConfig = ChainConfig(),
                 wbr: Sequence[det.RoomCandidate] | None = None):
        self.classified = classified
        self.config = config
        self.width, self.height = classified.width, classified.height
        self.scorer = Scorer(classified, config.sensor, config.prior)
        self.field = det.WeightField(classified)
        if wbr is None:
            wbr = det.wbr_candidates(classified, config.hough, config.wbr_cap,
                                     config.min_room_side, self.field)
        self.wbr = list(wbr)
        self.wbr_set = det.WeightedSet(self.wbr, [c.weight for c in self.wbr],
                                       key=lambda c: c.rect) if self.wbr else None
        self._split_cache = _Lru(4096)
        self._fsr_cache = _Lru(8)
        self._door_cache = _Lru(8)

    # -- weights ------------------------------------------------------------

    def room_weight(self, rect: Rect) -> float:
        return self.field.room_weight(rect)

    def remove_weights(self, world: World) -> list[float]:
        return [_capped_inverse(self.room_weight(r.rect), self.config.h_b) for r in world.rooms]

    def door_weight(self, world: World, door: Door) -> float:
        lines = world.door_lines(door)
        matched = sum(self.field.count(b, CellClass.FREE) for b in lines)
        lo, hi = door.extent
        return min(1.0, matched / (2.0 * (hi - lo)))

    def delete_weights(self, world: World) -> list[float]:
        return [_capped_inverse(self.door_weight(world, d), self.config.h_g) for d in world.doors]

    # -- candidate pools --------------------------------------------------------

    def fsr(self, world: World) -> list[det.RoomCandidate]:
        def make():
            predicted = rasterize(world, self.width, self.height)
            cands = det.fsr_candidates(self.classified, predicted, self.field,
                                       self.config.fsr_weight_floor, self.config.fsr_min_area,
                                       self.config.min_room_side)
            if self.wbr_set is not None:
                cands = [c for c in cands if self.wbr_set.index_of(c.rect) is None]
            return cands
        return self._fsr_cache.get_or(world.key(), make)

    def add_pool(self, world: World, fsr_active: bool) -> det.WeightedSet | None:
        if not fsr_active:
            return self.wbr_set
        extra = self.fsr(world)
        if not extra:
            return self.wbr_set
        items = self.wbr + extra
        return det.WeightedSet(items, [c.weight for c in items], key=lambda c: c.rect)

    def add_probability(self, world: World, rect: Rect, fsr_active: bool) -> float:
        """Probability that ADD applied to ``world`` proposes ``rect``."""
        pool = self.add_pool(world, fsr_active)
        if pool is not None:
            i = pool.index_of(rect)
            if i is not None:
                return pool.probability(i)
        # rooms shaped by other kernels: weight them as an extra candidate
        w = max(self.room_weight(rect), self.config.fsr_weight_floor)
        total = pool.total if pool is not None else 0.0
        return w / (total + w)

    def doors(self, world: World) -> det.WeightedSet | None:
        def make():
            cands = det.door_candidates(world, self.classified, self.config.doors)
            if not cands:
                return None
            return det.WeightedSet(cands, [c.weight for c in cands],
                                   key=lambda c: (c.host_rooms, c.host_walls, c.extent))
        return self._door_cache.get_or(world.key(), make)

    def split_options(self, rect: Rect) -> det.WeightedSet | None:
        """Split cuts (vertical, coordinate) detected inside a room, weighted by segment length."""
        def make():
            if rect.x1 - rect.x0 < 2 or rect.y1 - rect.y0 < 2:
                return None
            interior = Box(rect.x0 + 1, rect.y0 + 1, rect.x1 - 1, rect.y1 - 1)
            segs = det.hough_segments(self.classified, interior, self.config.hough)
            m = self.config.min_room_side
            weights: dict[tuple[bool, int], float] = {}
            for s in segs:
                if s.vertical:
                    c = s.a.x
                    ok = c - rect.x0 + 1 >= m and rect.x1 - c >= m
                else:
                    c = s.a.y
                    ok = c - rect.y0 + 1 >= m and rect.y1 - c >= m
                if ok:
                    key = (s.vertical, c)
                    weights[key] = weights.get(key, 0.0) + det.segment_length(s)
            if not weights:
                return None
            keys = sorted(weights)
            return det.WeightedSet(keys, [weights[k] for k in keys])
        return self._split_cache.get_or(rect, make)

    @staticmethod
    def split_children(rect: Rect, vertical: bool, c: int) -> tuple[Rect, Rect]:
        if vertical:
            return Rect(rect.x0, rect.y0, c, rect.y1), Rect(c + 1, rect.y0, rect.x1, rect.y1)
        return Rect(rect.x0, rect.y0, rect.x1, c), Rect(rect.x0, c + 1, rect.x1, rect.y1)

    def merge_pair_probability(self, world: World, ida: int, idb: int) -> float:
        """Probability MERGE picks the unordered pair {a, b} (either room first)."""
        rooms = world.rooms
        n = len(rooms)
        centers = {r.id: r.rect.center for r in rooms}
        total = 0.0
        for first, second in ((ida, idb), (idb, ida)):
            cx, cy = centers[first]
            weights = {}
            for r in rooms:
                if r.id != first:
                    ox, oy = centers[r.id]
                    weights[r.id] = 1.0 / max(math.hypot(cx - ox, cy - oy), 1.0)
            total += (1.0 / n) * weights[second] / sum(weights.values())
        return total

    # -- kernels ----------------------------------------------------------------

    def propose(self, kind: KernelKind, state: ChainState) -> KernelProposal:
        world, rng = state.world, state.rng
        if kind is KernelKind.ADD:
            after, fwd, bwd = self._add(world, rng, state.fsr_active)
        elif kind is KernelKind.REMOVE:
            after, fwd, bwd = self._remove(world, rng, state.fsr_active)
        elif kind is KernelKind.SPLIT:
            after, fwd, bwd = self._split(world, rng)
        elif kind is KernelKind.MERGE:
            after, fwd, bwd = self._merge(world, rng)
        elif kind in (KernelKind.SHRINK, KernelKind.DILATE):
            after, fwd, bwd, kind = self._shift(world, rng)
        elif kind is KernelKind.ALLOCATE:
            after, fwd, bwd = self._allocate(world, rng)
        else:
            after, fwd, bwd = self._delete(world, rng)
        region = diff_region(world, after, self.width, self.height)
        return KernelProposal(kind, after, math.log(fwd), math.log(bwd), region)

    def _add(self, world, rng, fsr_active):
        pool = self.add_pool(world, fsr_active)
        if pool is None:
            raise ProposalUnavailable("no room candidates")
        cand, p = det.sample_weighted(pool, rng)
        after, room = world.add_room(cand.rect)
        w = self.remove_weights(after)
        return after, p, w[-1] / sum(w)

    def _remove(self, world, rng, fsr_active):
        if not world.rooms:
            raise ProposalUnavailable("no rooms to remove")
        ws = det.WeightedSet(world.rooms, self.remove_weights(world))
        room, p = det.sample_weighted(ws, rng)
        after = world.remove_rooms([room.id])
        return after, p, self.add_probability(after, room.rect, fsr_active)

    def _split(self, world, rng):
        n = len(world.rooms)
        if n == 0:
            raise ProposalUnavailable("no rooms to split")
        room = world.rooms[int(rng.integers(n))]
        options = self.split_options(room.rect)
        if options is None:
            raise ProposalUnavailable("no split line inside the room")
        (vertical, c), p = det.sample_weighted(options, rng)
        a, b = self.split_children(room.rect, vertical, c)
        after = world.remove_rooms([room.id])
        after, ra = after.add_room(a)
        after, rb = after.add_room(b)
        return after, p / n, self.merge_pair_probability(after, ra.id, rb.id)

    def _merge(self, world, rng):
        n = len(world.rooms)
        if n < 2:
            raise ProposalUnavailable("merge needs two rooms")
        first = world.rooms[int(rng.integers(n))]
        others = [r for r in world.rooms if r.id != first.id]
        cx, cy = first.rect.center
        weights = [1.0 / max(math.hypot(cx - r.rect.center[0], cy - r.rect.center[1]), 1.0)
                   for r in others]
        second, _ = det.sample_weighted(det.WeightedSet(others, weights), rng)
        merged = first.rect.union_bounds(second.rect)
        fwd = self.merge_pair_probability(world, first.id, second.id)
        after = world.remove_rooms([first.id, second.id])
        after, mroom = after.add_room(merged)
        bwd = self._split_back_probability(after, mroom.rect, first.rect, second.rect)
        if bwd <= 0.0:
            raise ProposalUnavailable("merged room cannot be split back into the pair")
        return after, fwd, bwd

    def _split_back_probability(self, world: World, merged: Rect, a: Rect, b: Rect) -> float:
        """Probability SPLIT cuts ``merged`` along the line between ``a`` and ``b``.

        A cut the Hough detector did not find is weighted as an extra option
        with weight equal to its length.
        """
        vertical, c = self._separating_cut(merged, a, b)
        m = self.config.min_room_side
        lo, hi = (merged.x0, merged.x1) if vertical else (merged.y0, merged.y1)
        if c - lo + 1 < m or hi - c < m:
            return 0.0
        n = len(world.rooms)
        options = self.split_options(merged)
        if options is not None:
            i = options.index_of((vertical, c))
            if i is not None:
                return options.probability(i) / n
        length = float(merged.y1 - merged.y0) if vertical else float(merged.x1 - merged.x0)
        total = options.total if options is not None else 0.0
        return length / (total + length) / n

    @staticmethod
    def _separating_cut(merged: Rect, a: Rect, b: Rect) -> tuple[bool, int]:
        """(vertical, coordinate) of the cut that best separates two rooms."""
        (ax, ay), (bx, by) = a.center, b.center
        if a.x1 < b.x0 or b.x1 < a.x0:
            left = a if a.x1 < b.x0 else b
            return True, left.x1
        if a.y1 < b.y0 or b.y1 < a.y0:
            top = a if a.y1 < b.y0 else b
            return False, top.y1
        if abs(ax - bx) >= abs(ay - by):
            return True, int((ax + bx) // 2)
        return False, int((ay + by) // 2)

    def _shift(self, world, rng):
        if not world.rooms:
            raise ProposalUnavailable("no rooms to reshape")
        cfg = self.config
        rooms_set = det.WeightedSet(world.rooms, self.remove_weights(world))
        room, p_room = det.sample_weighted(rooms_set, rng)
        wall_w = [_capped_inverse(w, cfg.h_v) for w in self.field.wall_weights(room.rect)]
        k, p_wall = det.sample_weighted(det.WeightedSet([0, 1, 2, 3], wall_w), rng)
        offset = int(round(rng.normal(0.0, cfg.shift_sigma)))
        if offset == 0:
            offset = int(round(rng.normal(0.0, cfg.shift_sigma)))
            if offset == 0:
                raise ProposalUnavailable("zero wall shift")
        r = room.rect
        x0, y0, x1, y1 = r.x0, r.y0, r.x1, r.y1
        # positive offsets move the wall outward
        if k == 0:
            y0 -= offset
        elif k == 1:
            x1 += offset
        elif k == 2:
            y1 += offset
        else:
            x0 -= offset
        m = cfg.min_room_side
        if x1 - x0 + 1 < m or y1 - y0 + 1 < m:
            raise ProposalUnavailable("shift below minimum room side")
        if x0 < 0 or y0 < 0 or x1 >= self.width or y1 >= self.height:
            raise ProposalUnavailable("shift leaves the map")
        after = world.replace_room(room.id, Rect(x0, y0, x1, y1)).drop_invalid_doors(cfg.doors.min_door_len)
        q = p_room * p_wall * _gaussian_cell_mass(offset, cfg.shift_sigma)
        kind = KernelKind.DILATE if offset > 0 else KernelKind.SHRINK
        return after, q, q, kind

    def _allocate(self, world, rng):
        cands = self.doors(world)
        if cands is None:
            raise ProposalUnavailable("no door candidates")
        cand, p = det.sample_weighted(cands, rng)
        after, door = world.add_door(cand.span, cand.host_rooms, cand.host_walls)
        z = self.delete_weights(after)
        return after, p, z[-1] / sum(z)

    def _delete(self, world, rng):
        if not world.doors:
            raise ProposalUnavailable("no doors to delete")
        ws = det.WeightedSet(world.doors, self.delete_weights(world))
        door, p = det.sample_weighted(ws, rng)
        after = world.remove_door(door.id)
        cands = self.doors(after)
        key = (door.room_ids, door.wall_indices, door.extent)
        i = cands.index_of(key) if cands is not None else None
        if i is not None:
            bwd = cands.probability(i)
        else:
            w = max(self.door_weight(world, door), self.config.fsr_weight_floor)
            bwd = w / ((cands.total if cands is not None else 0.0) + w)
        return after, p, bwd

    # -- chain ----------------------------------------------------------------

    def initial_state(self, seed: int | None = None, chain_index: int = 0) -> ChainState:
        seed = self.config.seed if seed is None else seed
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain_index,)))
        world = World()
        return ChainState(0, world, self.scorer.evaluate(world), rng, self.config.fsr_activation)

    def step(self, state: ChainState) -> tuple[ChainState, TraceRecord]:
        beta = state.iteration + 1
        state.iteration = beta
        kind = select_kernel(self.config.schedule, beta, state.rng)
        accepted = False
        try:
            prop = self.propose(kind, state)
        except ProposalUnavailable:
            prop = None
        if prop is not None:
            kind = prop.kind
            new_score = self.scorer.delta(state.score, state.world, prop.world_after, prop.diff)
            if self.config.verify:
                self._verify(prop.world_after, new_score)
            if accept(state.score, new_score, prop.log_q_forward, prop.log_q_backward, state.rng):
                accepted = True
                state.world = wall_types(prop.world_after)
                state.score = new_score
        rec = TraceRecord(beta, kind, state.score.log_posterior, accepted)
        return state, rec

    def _verify(self, world: World, score: LogScore) -> None:
        full = self.scorer.evaluate(world)
        if full.counts != score.counts or abs(full.log_posterior - score.log_posterior) > 1e-9:
            raise InvariantViolation(
                f"incremental score {score.log_posterior!r} != full recompute {full.log_posterior!r}"
            )


@dataclass
class RunResult:
    best_world: World
    best_score: LogScore
    final_world: World
    final_score: LogScore
    trace: ChainTrace
    elapsed: float
    chain_index: int = 0

    @property
    def iterations_per_second(self) -> float:
        return len(self.trace) / self.elapsed if self.elapsed > 0 and len(self.trace) else 0.0


def run(classified: ClassifiedGrid, config: ChainConfig = ChainConfig(),
        sampler: Sampler | None = None, chain_index: int = 0,
        callback: Callable[[ChainState], None] | None = None) -> RunResult:
    """Run one chain; returns the MAP-so-far world, the final sample and the trace."""
    sampler = sampler or Sampler(classified, config)
    state = sampler.initial_state(config.seed, chain_index)
    best_world, best_score = state.world, state.score
    trace = ChainTrace()
    t0 = time.perf_counter()
    for _ in range(config.iterations):
        state, rec = sampler.step(state)
        trace.append(rec)
        if rec.accepted and state.score.log_posterior > best_score.log_posterior:
            best_world, best_score = state.world, state.score
        if callback is not None:
            callback(state)
    elapsed = time.perf_counter() - t0
    return RunResult(best_world, best_score, state.world, state.score, trace, elapsed, chain_index)


def _run_chain(args) -> RunResult:
    classified, config, wbr, index = args
    return run(classified, config, Sampler(classified, config, wbr), chain_index=index)


def run_chains(classified: ClassifiedGrid, config: ChainConfig, chains: int = 1) -> tuple[RunResult, list[RunResult]]:
    """Independent seeded chains sharing the read-only map and WBR candidates.

    Returns the best chain's result (ties go to the lowest index) and all results.
    """
    sampler = Sampler(classified, config)
    if chains <= 1:
        results = [run(classified, config, sampler)]
    else:
        from concurrent.futures import ProcessPoolExecutor

        jobs = [(classified, config, sampler.wbr, i) for i in range(chains)]
        with ProcessPoolExecutor(max_workers=chains) as pool:
            results = list(pool.map(_run_chain, jobs))
    best = max(results, key=lambda r: (r.best_score.log_posterior, -r.chain_index))
    return best, results
