import itertools
import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridplan.detectors import (
    DoorParams,
    HoughParams,
    WeightedSet,
    WeightField,
    block_count,
    connected_components,
    door_candidates,
    enumerate_blocks,
    fsr_candidates,
    hough_segments,
    room_weight,
    sample_weighted,
    sub_area_bounds,
    wall_weight,
    wbr_candidates,
)
from gridplan.errors import CandidateExplosion, EmptyCandidateSet
from gridplan.geometry import Rect, Segment, rasterize
from gridplan.grid_io import ClassifiedGrid
from gridplan.world import World

from helpers import blank, draw_room


def _grid(arr) -> ClassifiedGrid:
    return ClassifiedGrid(arr)


# -- Hough -------------------------------------------------------------------------

def test_hough_single_column():
    arr = blank(30, 60, code=2)
    arr[10:50, 17] = 0
    segs = hough_segments(_grid(arr))
    assert len(segs) == 1
    s = segs[0]
    assert s.vertical and abs(s.a.x - 17) <= 1
    assert (s.a.y, s.b.y) == (10, 49)


def test_hough_all_free():
    assert hough_segments(_grid(blank(40, 40, code=2))) == []


def test_hough_perpendicular_walls():
    arr = blank(50, 50, code=2)
    arr[5, 10:40] = 0
    arr[12:42, 30] = 0
    segs = hough_segments(_grid(arr))
    assert sorted(s.vertical for s in segs) == [False, True]


def test_hough_short_and_sparse_runs_ignored():
    arr = blank(60, 60, code=2)
    arr[5:14, 3] = 0  # 9 cells < min length 10 and < 20 votes
    arr[20, 0:60:5] = 0  # gaps of 4 > max_gap 3
    assert hough_segments(_grid(arr)) == []


def test_hough_region_offsets():
    arr = blank(50, 50, code=2)
    arr[5:45, 25] = 0
    segs = hough_segments(_grid(arr), Rect(20, 0, 30, 49))
    assert segs == [Segment.of(25, 5, 25, 44)]


# -- weights -----------------------------------------------------------------------------

def test_wall_weight_examples():
    arr = blank(5, 12, code=2)
    wall = Segment.of(1, 0, 1, 10)  # length 10, 11 cells
    assert wall_weight(wall, _grid(arr)) == 0.0
    arr[0:5, 1] = 0
    assert wall_weight(wall, _grid(arr)) == pytest.approx(0.5)
    arr[:, 1] = 0
    assert wall_weight(wall, _grid(arr)) == 1.0  # 11 / 10 clamped


def test_room_weight_perfect_and_missing_wall():
    arr = blank(30, 30)
    draw_room(arr, 2, 3, 20, 25)
    assert room_weight(Rect(2, 3, 20, 25), _grid(arr)) == 1.0
    arr[3:26, 20] = 2
    assert room_weight(Rect(2, 3, 20, 25), _grid(arr)) == 0.0


def test_room_weight_is_minimum():
    arr = blank(21, 21, code=2)
    r = Rect(0, 0, 20, 20)
    # corners stay Free; each wall has 19 inner cells, wall length 20
    for k, n in zip(range(4), (18, 16, 14, 19)):
        b = r.wall_box(k)
        if b.x0 == b.x1:
            arr[1 : 1 + n, b.x0] = 0
        else:
            arr[b.y0, 1 : 1 + n] = 0
    weights = [wall_weight(w, _grid(arr)) for w in r.walls()]
    assert weights == pytest.approx([0.9, 0.8, 0.7, 0.95])
    assert room_weight(r, _grid(arr)) == pytest.approx(0.7)
    field = WeightField(_grid(arr))
    assert field.room_weight(r) == pytest.approx(0.7)
    assert field.wall_weights(r) == pytest.approx(weights)


# -- WBR -------------------------------------------------------------------------------

def _figure3_map():
    arr = blank(60, 40)
    draw_room(arr, 0, 0, 59, 39)
    arr[:, 20] = 0
    arr[:, 40] = 0
    arr[20, :] = 0
    return _grid(arr)


def test_figure3_has_18_candidates():
    g = _figure3_map()
    xs, ys = sub_area_bounds(hough_segments(g), g.width, g.height)
    assert xs == [0, 20, 40, 59] and ys == [0, 20, 39]
    assert (len(xs) - 1) * (len(ys) - 1) == 6
    assert len(enumerate_blocks(xs, ys)[0]) == block_count(xs, ys) == 18
    cands = wbr_candidates(g)
    assert len(cands) == 18
    assert all(c.weight == 1.0 for c in cands)


def test_no_interior_lines_gives_one_candidate():
    arr = blank(30, 20)
    draw_room(arr, 0, 0, 29, 19)
    cands = wbr_candidates(_grid(arr))
    assert [c.rect for c in cands] == [Rect(0, 0, 29, 19)]


def _brute_blocks(xs, ys):
    out = set()
    for i0, i1 in itertools.combinations(range(len(xs)), 2):
        for j0, j1 in itertools.combinations(range(len(ys)), 2):
            out.add((xs[i0], ys[j0], xs[i1], ys[j1]))
    return out


def _brute_by_subareas(m, n):
    """Count contiguous unions of sub-areas by testing every subset for rectangularity."""
    count = 0
    cells = [(i, j) for i in range(m) for j in range(n)]
    for size in range(1, m * n + 1):
        for subset in itertools.combinations(cells, size):
            i_vals = {c[0] for c in subset}
            j_vals = {c[1] for c in subset}
            lo_i, hi_i, lo_j, hi_j = min(i_vals), max(i_vals), min(j_vals), max(j_vals)
            if (hi_i - lo_i + 1) * (hi_j - lo_j + 1) == size:
                count += 1
    return count


@pytest.mark.parametrize("m", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_block_counts_match_brute_force(m, n):
    xs = list(range(0, 10 * m + 1, 10))
    ys = list(range(0, 7 * n + 1, 7))
    x0, y0, x1, y1 = enumerate_blocks(xs, ys)
    got = set(zip(x0.tolist(), y0.tolist(), x1.tolist(), y1.tolist()))
    assert got == _brute_blocks(xs, ys)
    assert len(got) == block_count(xs, ys) == math.comb(m + 1, 2) * math.comb(n + 1, 2)
    if m * n <= 9:
        assert _brute_by_subareas(m, n) == len(got)


def test_two_by_two_is_nine():
    assert block_count([0, 5, 10], [0, 5, 10]) == 9


def test_candidate_explosion():
    arr = blank(80, 80)
    for c in range(0, 80, 4):
        arr[:, c] = 0
        arr[c, :] = 0
    with pytest.raises(CandidateExplosion):
        wbr_candidates(_grid(arr), HoughParams(), cap=1000)


# -- connected components and FSR --------------------------------------------------------------

def _bfs_labels(mask):
    h, w = mask.shape
    lab = np.zeros((h, w), dtype=int)
    n = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] and not lab[y, x]:
                n += 1
                lab[y, x] = n
                q = deque([(y, x)])
                while q:
                    cy, cx = q.popleft()
                    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not lab[ny, nx]:
                            lab[ny, nx] = n
                            q.append((ny, nx))
    return lab, n


def test_cc_examples():
    assert connected_components(np.zeros((4, 4), bool))[1] == 0
    m = np.zeros((4, 4), bool)
    m[2, 1] = True
    assert connected_components(m)[1] == 1
    m = np.zeros((4, 4), bool)
    m[0:2, 0:2] = True
    m[2:4, 2:4] = True
    assert connected_components(m)[1] == 2


@given(arrays(np.bool_, st.tuples(st.integers(1, 12), st.integers(1, 12))))
@settings(max_examples=150, deadline=None)
def test_cc_matches_bfs_and_is_transpose_invariant(mask):
    lab, n = connected_components(mask)
    ref, rn = _bfs_labels(mask)
    assert n == rn
    # same partition: labels correspond one-to-one
    pairs = set(zip(lab[mask].tolist(), ref[mask].tolist()))
    assert len(pairs) == n
    assert connected_components(mask.T)[1] == n


def test_fsr_world_covering_map_is_empty():
    arr = blank(20, 20, code=2)
    w, _ = World().add_room(Rect(0, 0, 19, 19))
    assert fsr_candidates(_grid(arr), rasterize(w, 20, 20)) == []


def test_fsr_single_region_bounding_room():
    arr = blank(40, 30)
    arr[5:13, 10:20] = 2  # 10 wide, 8 tall
    cands = fsr_candidates(_grid(arr), rasterize(World(), 40, 30))
    assert [c.rect for c in cands] == [Rect(9, 4, 20, 13)]
    assert cands[0].weight == pytest.approx(0.05)  # walls all Unexplained, floor applies


def test_fsr_two_regions():
    arr = blank(60, 30)
    arr[5:13, 10:20] = 2
    arr[15:25, 30:50] = 2
    cands = fsr_candidates(_grid(arr), rasterize(World(), 60, 30))
    assert sorted(c.rect for c in cands) == [Rect(9, 4, 20, 13), Rect(29, 14, 50, 25)]


def test_fsr_skips_tiny_regions():
    arr = blank(20, 20)
    arr[3:5, 3:5] = 2
    assert fsr_candidates(_grid(arr), rasterize(World(), 20, 20)) == []


# -- doors ---------------------------------------------------------------------------------

def _two_rooms(second_x0):
    arr = blank(second_x0 + 25, 35)
    draw_room(arr, 0, 0, 20, 30)
    draw_room(arr, second_x0, 0, second_x0 + 20, 30)
    w, a = World().add_room(Rect(0, 0, 20, 30))
    w, b = w.add_room(Rect(second_x0, 0, second_x0 + 20, 30))
    return arr, w


def test_door_in_shared_wall_line():
    arr, w = _two_rooms(20)
    arr[13:17, 20] = 2
    cands = door_candidates(w, _grid(arr))
    assert len(cands) == 1
    lo, hi = cands[0].extent
    assert abs(lo - 13) <= 1 and abs(hi - 16) <= 1
    assert cands[0].span.vertical and cands[0].span.a.x == 20


def test_door_on_thick_wall_covers_gap():
    arr, w = _two_rooms(21)
    arr[13:17, 20:22] = 2
    cands = door_candidates(w, _grid(arr))
    assert len(cands) == 1
    assert cands[0].extent == (12, 17)  # the gap plus one cell each side
    assert cands[0].weight == pytest.approx(8 / 10)


def test_rooms_far_apart_give_no_doors():
    arr, w = _two_rooms(32)
    arr[13:17, 20] = 2
    arr[13:17, 32] = 2
    assert door_candidates(w, _grid(arr)) == []


def test_door_limited_to_window_of_other_wall():
    arr, w = _two_rooms(21)
    arr[1:30, 20] = 2  # first wall open along its whole length
    arr[13:17, 21] = 2  # second wall opens in one window only
    cands = door_candidates(w, _grid(arr))
    assert len(cands) == 1
    lo, hi = cands[0].extent
    assert 12 <= lo <= 14 and 15 <= hi <= 17


def test_existing_door_excluded():
    arr, w = _two_rooms(21)
    arr[13:17, 20:22] = 2
    a, b = w.rooms
    w2, _ = w.add_door(Segment.of(20, 13, 20, 16), (a.id, b.id), (1, 3))
    assert door_candidates(w2, _grid(arr)) == []
    assert len(door_candidates(w2, _grid(arr), exclude_existing=False)) == 1


def test_door_length_limits():
    arr, w = _two_rooms(21)
    arr[13:15, 20:22] = 2  # two cells: below the minimum door length
    assert door_candidates(w, _grid(arr), DoorParams()) == []


# -- weighted sampling ----------------------------------------------------------------------------

def test_single_candidate_probability_one():
    item, p = sample_weighted(WeightedSet(["only"], [0.3]), np.random.default_rng(0))
    assert item == "only" and p == 1.0


def test_zero_weight_never_drawn():
    ws = WeightedSet(["a", "b"], [0.0, 5.0])
    rng = np.random.default_rng(1)
    assert {sample_weighted(ws, rng)[0] for _ in range(2000)} == {"b"}


def test_all_zero_weights_fall_back_to_uniform():
    ws = WeightedSet(["a", "b"], [0.0, 0.0])
    assert ws.probability(0) == ws.probability(1) == 0.5


def test_empty_set_rejected():
    with pytest.raises(EmptyCandidateSet):
        WeightedSet([], [])


def test_weights_one_three_frequencies():
    ws = WeightedSet(["a", "b"], [1.0, 3.0])
    rng = np.random.default_rng(2)
    n = 100_000
    hits = sum(sample_weighted(ws, rng)[0] == "a" for _ in range(n))
    sigma = math.sqrt(n * 0.25 * 0.75)
    assert abs(hits - 0.25 * n) <= 3 * sigma
