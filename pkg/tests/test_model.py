import math

import numpy as np
import pytest

from gridplan.errors import DimensionMismatch
from gridplan.geometry import PredictedClass, PredictedGrid, Rect, Segment, diff_region, rasterize
from gridplan.grid_io import ClassifiedGrid
from gridplan.model import (
    LogScore,
    PriorParams,
    Scorer,
    SensorModel,
    apply_delta,
    count_bad_angles,
    evaluate,
    log_likelihood,
    log_posterior,
    log_prior,
)
from gridplan.world import WallType, World, wall_coord, wall_types

from helpers import random_transitions

W, U, F, D = PredictedClass.WALL, PredictedClass.UNKNOWN, PredictedClass.FREE, PredictedClass.DOOR
OCC, UNX, FRE = 0, 1, 2


def _pred(classes) -> PredictedGrid:
    c = np.array(classes, dtype=np.uint8)
    return PredictedGrid(c, np.zeros(c.shape, dtype=np.int32))


def _obs(classes) -> ClassifiedGrid:
    return ClassifiedGrid(np.array(classes, dtype=np.uint8))


# -- oracle: per-cell geometry and fsum, no rasterizer --------------------------------

def oracle_cell(world: World, x: int, y: int) -> tuple[int, int]:
    """(predicted class, coverage) of one cell by direct membership tests."""
    cover = 0
    wall = free = False
    for room in world.rooms:
        r = room.rect
        if r.x0 <= x <= r.x1 and r.y0 <= y <= r.y1:
            cover += 1
            if x in (r.x0, r.x1) or y in (r.y0, r.y1):
                wall = True
            else:
                free = True
    for door in world.doors:
        lo, hi = door.extent
        for rid, k in zip(door.room_ids, door.wall_indices):
            c = wall_coord(world.room(rid).rect, k)
            along, across = (y, x) if door.span.vertical else (x, y)
            if across == c and lo <= along <= hi:
                return D, cover
    if wall:
        return W, cover
    if free:
        return F, cover
    return U, cover


def oracle_score(world: World, obs: np.ndarray, sensor: SensorModel, params: PriorParams) -> float:
    table = sensor.array
    terms = []
    overlap = 0
    h, w = obs.shape
    for y in range(h):
        for x in range(w):
            cls, cover = oracle_cell(world, x, y)
            row = FRE if cls == D else int(cls)
            terms.append(math.log(table[row, obs[y, x]]))
            overlap += max(cover - 1, 0)
    doored = {rid for d in world.doors for rid in d.room_ids}
    doorless = sum(1 for r in world.rooms if r.id not in doored)
    terms.append(doorless * math.log(params.psi2))
    terms.append(overlap * math.log(params.psi3))
    return math.fsum(terms)


# -- prior -------------------------------------------------------------------------------

def test_empty_world_prior_is_zero():
    w = World()
    assert log_prior(w, PriorParams(), rasterize(w, 5, 5)) == 0.0


def test_one_doorless_room():
    w, _ = World().add_room(Rect(1, 1, 6, 6))
    assert log_prior(w, PriorParams(), rasterize(w, 10, 10)) == pytest.approx(math.log(0.9), abs=1e-15)


def test_two_rooms_overlapping_six_cells_with_doors():
    w, a = World().add_room(Rect(0, 0, 9, 9))
    w, b = w.add_room(Rect(8, 7, 20, 20))  # overlap x 8..9, y 7..9
    w, c = w.add_room(Rect(21, 7, 30, 20))
    w, d = w.add_room(Rect(0, 10, 7, 19))
    w, _ = w.add_door(Segment.of(20, 10, 20, 13), (b.id, c.id), (1, 3))
    w, _ = w.add_door(Segment.of(2, 9, 5, 9), (a.id, d.id), (2, 0))
    p = rasterize(w, 32, 22)
    assert int((p.coverage == 2).sum()) == 6 and p.coverage.max() == 2
    assert log_prior(w, PriorParams(), p) == pytest.approx(6 * math.log(0.6), abs=1e-12)


def test_k_overlap_cells_and_m_doorless_rooms():
    params = PriorParams()
    for k_side in range(1, 5):
        w, _ = World().add_room(Rect(0, 0, 9, 9))
        w, _ = w.add_room(Rect(10 - k_side, 0, 19, 0 + 2))
        p = rasterize(w, 25, 15)
        k = int((p.coverage - 1).clip(min=0).sum())
        assert k == 3 * k_side
        expected = k * math.log(0.6) + 2 * math.log(0.9)
        assert log_prior(w, params, p) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("walls,expected", [
    ([((0, 0), (10, 0)), ((10, 0), (10, 8)), ((10, 8), (0, 8)), ((0, 8), (0, 0))], 0),
    ([((0, 0), (10, 0)), ((10, 0), (12, 8)), ((12, 8), (0, 8)), ((0, 8), (0, 0))], 2),
    ([((0, 0), (100, 0)), ((100, 0), (103, 50)), ((103, 50), (0, 50)), ((0, 50), (0, 0))], 0),
])
def test_bad_angles(walls, expected):
    # 2/8 slope is 14 deg off square; 3/50 is 3.4 deg, inside the 5 deg tolerance
    assert count_bad_angles(walls, 5.0) == expected


def test_bad_angle_factor_enters_prior():
    walls = [((0, 0), (10, 0)), ((10, 0), (12, 8)), ((12, 8), (0, 8)), ((0, 8), (0, 0))]
    bad = count_bad_angles(walls, PriorParams().right_angle_tolerance)
    assert bad * math.log(PriorParams().psi1) == pytest.approx(2 * math.log(0.9))


def test_prior_param_validation():
    with pytest.raises(ValueError):
        PriorParams(psi3=0.0)
    with pytest.raises(ValueError):
        PriorParams(psi1=1.5)


# -- likelihood ------------------------------------------------------------------------------

@pytest.mark.parametrize("pred", [W, U, F, D])
@pytest.mark.parametrize("obs", [OCC, UNX, FRE])
def test_single_cell_table(pred, obs):
    row = {W: 0, U: 1, F: 2, D: 2}[pred]
    expected = math.log(0.8) if row == obs else math.log(0.1)
    assert log_likelihood(_obs([[obs]]), _pred([[pred]]), SensorModel()) == pytest.approx(expected, abs=1e-15)


def test_independent_cells_multiply():
    got = log_likelihood(_obs([[UNX, FRE]]), _pred([[U, F]]), SensorModel())
    assert got == pytest.approx(2 * math.log(0.8), abs=1e-15)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        log_likelihood(_obs([[0, 0]]), _pred([[W]]), SensorModel())


def test_sensor_validation():
    with pytest.raises(ValueError):
        SensorModel(((1.0, 0.0, 0.0), (0.1, 0.8, 0.1), (0.1, 0.1, 0.8)))
    with pytest.raises(ValueError):
        SensorModel(((0.5, 0.1, 0.1), (0.1, 0.8, 0.1), (0.1, 0.1, 0.8)))
    s = SensorModel.normalized([[8, 1, 1], [1, 8, 1], [1, 1, 8]])
    assert s.table[0][0] == pytest.approx(0.8)


# -- posterior and incremental evaluation ---------------------------------------------------------

@pytest.mark.parametrize("prior,lik,expected", [(0, -5, -5), (-1, 0, -1), (-2.5, -7.5, -10.0)])
def test_log_posterior_adds(prior, lik, expected):
    assert log_posterior(LogScore(prior, lik)) == expected


def _noisy(shape, seed):
    return ClassifiedGrid(np.random.default_rng(seed).integers(0, 3, size=shape).astype(np.uint8))


def test_full_evaluation_matches_oracle():
    obs = _noisy((30, 40), 0)
    w, a = World().add_room(Rect(2, 3, 15, 20))
    w, b = w.add_room(Rect(16, 3, 30, 12))
    w, _ = w.add_room(Rect(10, 15, 25, 28))
    w, _ = w.add_door(Segment.of(15, 5, 15, 8), (a.id, b.id), (1, 3))
    got = evaluate(w, obs).log_posterior
    assert got == pytest.approx(oracle_score(w, obs.classes, SensorModel(), PriorParams()), abs=1e-9)


def test_identity_delta():
    obs = _noisy((10, 10), 1)
    w, _ = World().add_room(Rect(1, 1, 7, 7))
    s = evaluate(w, obs)
    assert apply_delta(s, w, w, [], obs) == s


def test_add_delta_on_unexplained_map():
    obs = ClassifiedGrid(np.full((20, 20), UNX, dtype=np.uint8))
    s0 = evaluate(World(), obs)
    w, _ = World().add_room(Rect(4, 4, 12, 15))
    got = apply_delta(s0, World(), w, diff_region(World(), w, 20, 20), obs)
    assert got.log_posterior == pytest.approx(evaluate(w, obs).log_posterior, abs=1e-9)


def test_shrink_by_one_delta():
    obs = _noisy((25, 25), 2)
    w, r = World().add_room(Rect(3, 3, 20, 20))
    after = w.replace_room(r.id, Rect(3, 3, 19, 20))
    s = evaluate(w, obs)
    got = apply_delta(s, w, after, diff_region(w, after, 25, 25), obs)
    full = evaluate(after, obs)
    assert got.log_posterior - s.log_posterior == pytest.approx(full.log_posterior - s.log_posterior, abs=1e-9)


def test_incremental_tracks_oracle_on_random_transitions():
    for sampler, before, score, prop in random_transitions(150, seed=4):
        inc = sampler.scorer.delta(score, before, prop.world_after, prop.diff)
        expected = oracle_score(prop.world_after, sampler.classified.classes,
                                sampler.config.sensor, sampler.config.prior)
        assert abs(inc.log_posterior - expected) <= 1e-9


def test_scorer_matches_module_functions():
    obs = _noisy((12, 12), 3)
    w, _ = World().add_room(Rect(0, 0, 11, 6))
    s = Scorer(obs).evaluate(w)
    p = rasterize(w, 12, 12)
    assert s.log_prior == pytest.approx(log_prior(w, PriorParams(), p))
    assert s.log_likelihood == pytest.approx(log_likelihood(obs, p, SensorModel()))


# -- wall types --------------------------------------------------------------------------------

def test_door_on_north_wall():
    w, a = World().add_room(Rect(0, 0, 19, 9))
    w, b = w.add_room(Rect(0, 10, 19, 19))
    w, _ = w.add_door(Segment.of(5, 10, 9, 10), (b.id, a.id), (0, 2))
    typed = wall_types(w)
    assert typed.room(b.id).wall_types == (WallType.DWALL, WallType.BWALL, WallType.BWALL, WallType.BWALL)
    assert typed.room(a.id).wall_types[2] is WallType.DWALL


def test_shared_side_without_door_is_nwall():
    w, a = World().add_room(Rect(0, 0, 9, 9))
    w, b = w.add_room(Rect(10, 0, 19, 9))
    typed = wall_types(w)
    assert typed.room(a.id).wall_types[1] is WallType.NWALL
    assert typed.room(b.id).wall_types[3] is WallType.NWALL
    assert typed.room(a.id).wall_types[3] is WallType.BWALL


def test_shared_side_with_door_is_dwall():
    w, a = World().add_room(Rect(0, 0, 9, 9))
    w, b = w.add_room(Rect(10, 0, 19, 9))
    w, _ = w.add_door(Segment.of(9, 3, 9, 6), (a.id, b.id), (1, 3))
    typed = wall_types(w)
    assert typed.room(a.id).wall_types[1] is WallType.DWALL
    assert typed.room(b.id).wall_types[3] is WallType.DWALL


def test_wall_types_idempotent():
    for _, _, _, prop in random_transitions(100, seed=8):
        once = wall_types(prop.world_after)
        assert wall_types(once) == once
