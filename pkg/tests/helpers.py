"""Shared builders for tests: tiny maps drawn as text, and the synthetic suite."""
from __future__ import annotations

import numpy as np

from gridplan.grid_io import ClassifiedGrid
from gridplan.synthetic import SyntheticSpec, random_spec

_CODES = {"#": 0, "?": 1, ".": 2}


def grid_from_text(text: str) -> ClassifiedGrid:
    """'#' Occupied, '?' Unexplained, '.' Free; one row per line."""
    rows = [line.strip() for line in text.strip().splitlines()]
    return ClassifiedGrid(np.array([[_CODES[c] for c in row] for row in rows], dtype=np.uint8))


def blank(width: int, height: int, code: int = 1) -> np.ndarray:
    return np.full((height, width), code, dtype=np.uint8)


def draw_room(arr: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> None:
    """Occupied perimeter, Free interior."""
    arr[y0 : y1 + 1, x0 : x1 + 1] = 0
    arr[y0 + 1 : y1, x0 + 1 : x1] = 2


def suite_specs() -> list[tuple[int, SyntheticSpec]]:
    """Ten (seed, spec) worlds with 2-5 rooms and 1-4 doors on a 220x180 map."""
    out = []
    for seed in range(10):
        n_rooms = 2 + seed % 4
        n_doors = 1 + (seed * 3) % 4
        out.append((seed, random_spec(seed, n_rooms, n_doors)))
    return out


def door_matches(found, truth, tol: int = 3) -> bool:
    """Same orientation and both span endpoints within ``tol`` cells."""
    a, b = found.span, truth.span
    if a.vertical != b.vertical:
        return False
    return all(abs(p - q) <= tol for p, q in zip((*a.a, *a.b), (*b.a, *b.b)))


def random_transitions(count: int, seed: int):
    """Yield ``count`` (before, proposal) pairs from every kernel on random worlds.

    A uniform one-phase schedule drives the real kernels over a synthetic
    map and every proposal is taken, so the walk wanders through
    overlapping, split, reshaped and doored worlds.
    """
    import math

    from gridplan import mcmc
    from gridplan.errors import ProposalUnavailable
    from gridplan.grid_io import classify
    from gridplan.synthetic import generate_synthetic
    from gridplan.world import wall_types

    spec = random_spec(seed, 4, 3, width=120, height=100, min_side=20)
    grid, _ = generate_synthetic(spec, seed)
    classified = classify(grid)
    uniform = mcmc.Schedule((mcmc.Phase(math.inf, tuple([1.0 / len(mcmc.KINDS)] * len(mcmc.KINDS))),))
    config = mcmc.ChainConfig(seed=seed, schedule=uniform, fsr_activation=0)
    sampler = mcmc.Sampler(classified, config)
    state = sampler.initial_state()
    made = 0
    while made < count:
        state.iteration += 1
        kind = mcmc.select_kernel(uniform, state.iteration, state.rng)
        try:
            prop = sampler.propose(kind, state)
        except ProposalUnavailable:
            continue
        if len(prop.world_after.rooms) > 8:
            continue
        yield sampler, state.world, state.score, prop
        made += 1
        # carry the incremental score forward so any drift would accumulate
        state.score = sampler.scorer.delta(state.score, state.world, prop.world_after, prop.diff)
        state.world = wall_types(prop.world_after)
