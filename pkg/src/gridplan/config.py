"""Run configuration: an INI file with one section per parameter group.

Every section and key is optional; missing values keep their defaults.

    [run]
    map = maps/office.pgm
    metadata = maps/office.yaml
    seed = 7
    iterations = 15000
    out_dir = out
    snapshot_every = 0
    verify = false

    [classifier]
    h_occupied = 100
    h_unexplained = 230

    [prior]
    psi1 = 0.9
    psi2 = 0.9
    psi3 = 0.6
    right_angle_tolerance = 5

    [sensor]
    # rows: predicted wall / unknown / free; columns: occupied / unexplained / free
    wall = 0.8, 0.1, 0.1
    unknown = 0.1, 0.8, 0.1
    free = 0.1, 0.1, 0.8

    [hough]        ; HoughParams fields
    [doors]        ; DoorParams fields
    [mcmc]         ; h_b, h_v, h_g, shift_sigma, fsr_activation, ...

    [schedule]
    bounds = 1000, 4000
    phase1 = add:0.8 remove:0.2
    phase2 = add:0.05 remove:0.05 split:0.2 merge:0.2 shrink:0.25 dilate:0.25
    phase3 = add:0.05 remove:0.05 split:0.2 merge:0.2 shrink:0.2 dilate:0.2 allocate:0.05 delete:0.05
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

from gridplan.detectors import DoorParams, HoughParams
from gridplan.errors import ConfigError
from gridplan.grid_io import ClassifierThresholds
from gridplan.mcmc import KINDS, ChainConfig, Schedule, _phase
from gridplan.model import PriorParams, SensorModel

_MCMC_KEYS = ("h_b", "h_v", "h_g", "shift_sigma", "fsr_activation", "fsr_weight_floor",
              "fsr_min_area", "min_room_side", "wbr_cap")


@dataclass(frozen=True)
class RunConfig:
    map_path: Path | None = None
    metadata_path: Path | None = None
    seed: int = 0
    iterations: int = 15000
    thresholds: ClassifierThresholds = ClassifierThresholds()
    chain: ChainConfig = field(default_factory=ChainConfig)
    out_dir: Path = Path("out")
    snapshot_every: int = 0
    verify: bool = False
    chains: int = 1

    def __post_init__(self):
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def chain_config(self) -> ChainConfig:
        """The sampler configuration with run-level seed, length and verify flag applied."""
        return dataclasses.replace(self.chain, iterations=self.iterations, seed=self.seed,
                                   verify=self.verify)


def _typed(cls, section: configparser.SectionProxy, name: str):
    """Build dataclass ``cls`` from a section, converting values by the defaults' types."""
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        kwargs[key] = _convert(raw, getattr(defaults, key), f"[{name}] {key}")
    try:
        return cls(**kwargs)
    except ValueError as e:
        raise ConfigError(f"[{name}] {e}") from e


def _convert(raw: str, default, where: str):
    try:
        if isinstance(default, bool):
            return configparser.ConfigParser.BOOLEAN_STATES[raw.strip().lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (KeyError, ValueError):
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None
    return raw


def _sensor(section: configparser.SectionProxy) -> SensorModel:
    rows = [list(r) for r in SensorModel().table]
    for i, name in enumerate(("wall", "unknown", "free")):
        if name in section:
            try:
                rows[i] = [float(v) for v in section[name].split(",")]
            except ValueError:
                raise ConfigError(f"[sensor] {name}: expected three comma-separated numbers") from None
    extra = set(section) - {"wall", "unknown", "free"}
    if extra:
        raise ConfigError(f"[sensor] unknown key {sorted(extra)[0]!r}")
    try:
        return SensorModel(tuple(map(tuple, rows)))
    except ValueError as e:
        raise ConfigError(f"[sensor] {e}") from e


def _schedule(section: configparser.SectionProxy) -> Schedule:
    names = {k.value for k in KINDS}
    try:
        bounds = [float(b) for b in section.get("bounds", "").split(",") if b.strip()]
    except ValueError:
        raise ConfigError("[schedule] bounds: expected comma-separated iteration counts") from None
    bounds.append(math.inf)
    phases = []
    for i, bound in enumerate(bounds, start=1):
        key = f"phase{i}"
        if key not in section:
            raise ConfigError(f"[schedule] missing {key}")
        probs = {}
        for item in section[key].split():
            kind, _, value = item.partition(":")
            if kind not in names:
                raise ConfigError(f"[schedule] {key}: unknown kernel {kind!r}")
            try:
                probs[kind] = float(value)
            except ValueError:
                raise ConfigError(f"[schedule] {key}: bad probability {value!r}") from None
        try:
            phases.append(_phase(bound, **probs))
        except ValueError as e:
            raise ConfigError(f"[schedule] {key}: {e}") from e
    try:
        return Schedule(tuple(phases))
    except ValueError as e:
        raise ConfigError(f"[schedule] {e}") from e


def load_config(path: str | Path | None = None, text: str | None = None) -> RunConfig:
    """Parse a config file (or ``text``); relative paths resolve against the file's folder."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    base = Path.cwd()
    try:
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise FileNotFoundError(f"config not found: {path}")
            parser.read_string(path.read_text(), source=str(path))
            base = path.parent
        elif text is not None:
            parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from e
    known = {"run", "classifier", "prior", "sensor", "hough", "doors", "mcmc", "schedule"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"unknown section [{sorted(unknown)[0]}]")

    run = parser["run"] if parser.has_section("run") else {}
    run_keys = {"map", "metadata", "seed", "iterations", "out_dir", "snapshot_every", "verify", "chains"}
    for key in run:
        if key not in run_keys:
            raise ConfigError(f"[run] unknown key {key!r}")

    def opt_path(key):
        return base / run[key] if key in run else None

    def section(name):
        return parser[name] if parser.has_section(name) else parser[parser.default_section]

    chain_kwargs = {}
    mcmc = section("mcmc")
    defaults = ChainConfig()
    for key, raw in mcmc.items():
        if key not in _MCMC_KEYS:
            raise ConfigError(f"[mcmc] unknown key {key!r}")
        chain_kwargs[key] = _convert(raw, getattr(defaults, key), f"[mcmc] {key}")
    try:
        chain = ChainConfig(
            prior=_typed(PriorParams, section("prior"), "prior"),
            sensor=_sensor(section("sensor")),
            hough=_typed(HoughParams, section("hough"), "hough"),
            doors=_typed(DoorParams, section("doors"), "doors"),
            schedule=_schedule(parser["schedule"]) if parser.has_section("schedule") else Schedule.default(),
            **chain_kwargs,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e

    return RunConfig(
        map_path=opt_path("map"),
        metadata_path=opt_path("metadata"),
        seed=_convert(run.get("seed", "0"), 0, "[run] seed"),
        iterations=_convert(run.get("iterations", "15000"), 0, "[run] iterations"),
        thresholds=_typed(ClassifierThresholds, section("classifier"), "classifier"),
        chain=chain,
        out_dir=opt_path("out_dir") or Path("out"),
        snapshot_every=_convert(run.get("snapshot_every", "0"), 0, "[run] snapshot_every"),
        verify=_convert(run.get("verify", "false"), False, "[run] verify"),
        chains=_convert(run.get("chains", "1"), 0, "[run] chains"),
    )
