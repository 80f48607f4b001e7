"""Command line: ``gridplan run`` extracts a floor plan, ``gridplan synth`` makes a test map."""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from gridplan import mcmc, scene_graph
from gridplan.config import RunConfig, load_config
from gridplan.errors import ConfigError, GridplanError, InvariantViolation
from gridplan.grid_io import OccupancyGrid, classify, load_grid, write_pgm, write_ppm, write_raster
from gridplan.render import render_overlay, render_world
from gridplan.synthetic import SyntheticSpec, generate_synthetic, random_spec

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2, 3


def run_pipeline(config: RunConfig, out=None) -> mcmc.RunResult:
    """Load, classify, sample and write every artifact into ``config.out_dir``."""
    out = out or sys.stdout
    if config.map_path is None:
        raise ConfigError("no map given (use --map or [run] map)")
    grid = load_grid(config.map_path, config.metadata_path)
    classified = classify(grid, config.thresholds)
    chain = config.chain_config()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if config.chains > 1:
        if config.snapshot_every:
            print("note: snapshots are only written for single-chain runs", file=sys.stderr)
        result, _ = mcmc.run_chains(classified, chain, config.chains)
    else:
        callback = None
        if config.snapshot_every:
            snap_dir = out_dir / "snapshots"
            snap_dir.mkdir(exist_ok=True)

            def callback(state: mcmc.ChainState) -> None:
                if state.iteration % config.snapshot_every == 0:
                    write_ppm(render_overlay(grid, state.world), snap_dir / f"overlay_{state.iteration:07d}.ppm")

        result = mcmc.run(classified, chain, callback=callback)

    write_outputs(out_dir, grid, classified, result)
    print(f"best log-posterior: {result.best_score.log_posterior:.6f}", file=out)
    print(f"rooms: {len(result.best_world.rooms)}  doors: {len(result.best_world.doors)}", file=out)
    print(f"iterations: {len(result.trace)}  iterations/second: {result.iterations_per_second:.1f}", file=out)
    return result


def write_outputs(out_dir: Path, grid: OccupancyGrid, classified, result: mcmc.RunResult) -> None:
    w, h, res = grid.width, grid.height, grid.resolution
    scene_graph.write(result.best_world, out_dir / "world_best.json", w, h, res)
    scene_graph.write(result.final_world, out_dir / "world_final.json", w, h, res)
    write_ppm(render_overlay(grid, result.best_world), out_dir / "overlay_best.ppm")
    write_ppm(render_world(result.best_world, w, h), out_dir / "world_best.ppm")
    write_raster(classified, out_dir / "classified.ppm")
    result.trace.to_csv(out_dir / "trace.csv")


def synthesize(args) -> None:
    if args.spec:
        spec = SyntheticSpec.from_dict(json.loads(Path(args.spec).read_text()))
    else:
        spec = random_spec(args.seed, args.rooms, args.doors, args.width, args.height)
    grid, truth = generate_synthetic(spec, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_pgm(grid.intensities, out_dir / "map.pgm")
    (out_dir / "map.yaml").write_text(f"resolution: {grid.resolution}\n")
    (out_dir / "spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    scene_graph.write(truth, out_dir / "truth.json", spec.width, spec.height, grid.resolution)
    print(f"wrote {out_dir / 'map.pgm'} ({spec.width}x{spec.height}, "
          f"{len(truth.rooms)} rooms, {len(truth.doors)} doors)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="extract a floor plan from an occupancy grid")
    r.add_argument("--map", type=Path, help="P2/P5 graymap")
    r.add_argument("--metadata", type=Path, help="YAML file with the map resolution")
    r.add_argument("--config", type=Path, help="INI config file")
    r.add_argument("--seed", type=int)
    r.add_argument("--iterations", type=int)
    r.add_argument("--out-dir", type=Path)
    r.add_argument("--snapshot-every", type=int)
    r.add_argument("--chains", type=int)
    r.add_argument("--verify", action="store_true", default=None,
                   help="recompute the score from scratch after every step")

    s = sub.add_parser("synth", help="write a synthetic map with known ground truth")
    s.add_argument("--out-dir", type=Path, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rooms", type=int, default=4)
    s.add_argument("--doors", type=int, default=3)
    s.add_argument("--width", type=int, default=220)
    s.add_argument("--height", type=int, default=180)
    s.add_argument("--spec", type=Path, help="JSON spec instead of a random layout")
    return parser


def _config_from_args(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {
        "map_path": args.map,
        "metadata_path": args.metadata,
        "seed": args.seed,
        "iterations": args.iterations,
        "out_dir": args.out_dir,
        "snapshot_every": args.snapshot_every,
        "chains": args.chains,
        "verify": args.verify,
    }
    return dataclasses.replace(config, **{k: v for k, v in overrides.items() if v is not None})


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            synthesize(args)
        else:
            run_pipeline(_config_from_args(args))
    except ConfigError as e:
        print(f"gridplan: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as e:
        print(f"gridplan: invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    except FileNotFoundError as e:
        print(f"gridplan: FileNotFound: {e}", file=sys.stderr)
        return EXIT_IO
    except (OSError, GridplanError, ValueError) as e:
        print(f"gridplan: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
