"""Occupancy grid rasters: netpbm I/O, three-class classification, rendering."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from gridplan.errors import MalformedRaster

DEFAULT_RESOLUTION = 0.05

# P6 palette, RGB
PALETTE_OCCUPIED = (0, 0, 0)
PALETTE_UNEXPLAINED = (128, 128, 128)
PALETTE_FREE = (255, 255, 255)
PALETTE_DOOR = (192, 192, 192)
OVERLAY_WALL = (128, 128, 128)
OVERLAY_DOOR = (192, 192, 192)


class CellClass(enum.IntEnum):
    """Observation class of a map cell. Integer values are array codes only."""

    OCCUPIED = 0
    UNEXPLAINED = 1
    FREE = 2


@dataclass(frozen=True)
class OccupancyGrid:
    intensities: np.ndarray  # (height, width) uint8
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self):
        arr = np.array(self.intensities)  # own copy; frozen below
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"grid must be 2-D and non-empty, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "intensities", arr)

    @property
    def width(self) -> int:
        return self.intensities.shape[1]

    @property
    def height(self) -> int:
        return self.intensities.shape[0]


@dataclass(frozen=True)
class ClassifierThresholds:
    h_occupied: int = 100
    h_unexplained: int = 230

    def __post_init__(self):
        if not 0 <= self.h_occupied < self.h_unexplained <= 255:
            raise ValueError(
                f"need 0 <= h_occupied < h_unexplained <= 255, "
                f"got {self.h_occupied}, {self.h_unexplained}"
            )


@dataclass(frozen=True)
class ClassifiedGrid:
    classes: np.ndarray  # (height, width) uint8 of CellClass codes

    def __post_init__(self):
        arr = np.array(self.classes, dtype=np.uint8)
        if arr.ndim != 2:
            raise ValueError("classes must be 2-D")
        if arr.size and arr.max() > 2:
            raise ValueError("class codes must be 0, 1 or 2")
        arr.setflags(write=False)
        object.__setattr__(self, "classes", arr)

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def height(self) -> int:
        return self.classes.shape[0]

    def __getitem__(self, xy: tuple[int, int]) -> CellClass:
        x, y = xy
        return CellClass(int(self.classes[y, x]))


def classify(grid: OccupancyGrid, thresholds: ClassifierThresholds = ClassifierThresholds()) -> ClassifiedGrid:
    """Low intensities are occupied, the middle band unexplained, high free."""
    v = grid.intensities
    out = np.full(v.shape, CellClass.FREE, dtype=np.uint8)
    out[v <= thresholds.h_unexplained] = CellClass.UNEXPLAINED
    out[v <= thresholds.h_occupied] = CellClass.OCCUPIED
    return ClassifiedGrid(out)


# -- netpbm parsing ---------------------------------------------------------

def _read_header(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last token.
    """
    tokens: list[bytes] = []
    i, n = 0, len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise MalformedRaster("truncated header")
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        tokens.append(data[start:i])
    if i >= n:
        raise MalformedRaster("header not terminated")
    return tokens, i + 1


def _parse_dims(tokens: list[bytes]) -> tuple[int, int, int]:
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise MalformedRaster(f"non-numeric header field: {exc}") from None
    if width < 1 or height < 1:
        raise MalformedRaster(f"bad dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise MalformedRaster(f"maxval {maxval} is not 8-bit")
    return width, height, maxval


def parse_netpbm(data: bytes) -> np.ndarray:
    """Decode a P2/P5 graymap or P6 pixmap into a uint8 array.

    Graymaps give shape (h, w), pixmaps (h, w, 3).
    """
    if len(data) < 2:
        raise MalformedRaster("empty or truncated file")
    magic = data[:2]
    if magic not in (b"P2", b"P5", b"P6"):
        raise MalformedRaster(f"unsupported magic {magic!r}")
    tokens, offset = _read_header(data, 4)
    width, height, _ = _parse_dims(tokens)
    channels = 3 if magic == b"P6" else 1
    n = width * height * channels
    if magic == b"P2":
        body = data[offset:].split()
        if len(body) < n:
            raise MalformedRaster(f"expected {n} samples, found {len(body)}")
        try:
            values = np.array([int(t) for t in body[:n]], dtype=np.int64)
        except ValueError:
            raise MalformedRaster("non-numeric sample in ASCII graymap") from None
        if values.min() < 0 or values.max() > 255:
            raise MalformedRaster("sample outside [0, 255]")
        pixels = values.astype(np.uint8)
    else:
        payload = data[offset : offset + n]
        if len(payload) < n:
            raise MalformedRaster(f"truncated payload: {len(payload)} of {n} bytes")
        pixels = np.frombuffer(payload, dtype=np.uint8).copy()
    shape = (height, width, 3) if channels == 3 else (height, width)
    return pixels.reshape(shape)


def _read_resolution(path: Path) -> float:
    for sidecar in (path.with_suffix(".yaml"), path.with_suffix(".yml")):
        if sidecar.exists():
            meta = yaml.safe_load(sidecar.read_text()) or {}
            if "resolution" in meta:
                return float(meta["resolution"])
    return DEFAULT_RESOLUTION


def load_grid(path: str | Path, metadata: str | Path | None = None) -> OccupancyGrid:
    """Load an 8-bit P2/P5 graymap.

    Resolution comes from ``metadata`` (a YAML file with a ``resolution``
    key) when given, else from a ``.yaml`` sidecar next to the map.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"map not found: {path}")
    pixels = parse_netpbm(path.read_bytes())
    if pixels.ndim != 2:
        raise MalformedRaster(f"{path}: expected a graymap, got a pixmap")
    if metadata is not None:
        metadata = Path(metadata)
        if not metadata.exists():
            raise FileNotFoundError(f"metadata not found: {metadata}")
        meta = yaml.safe_load(metadata.read_text()) or {}
        resolution = float(meta.get("resolution", DEFAULT_RESOLUTION))
    else:
        resolution = _read_resolution(path)
    return OccupancyGrid(pixels, resolution=resolution)


# -- writing ------------------------------------------------------------------

def class_colors(classified: ClassifiedGrid) -> np.ndarray:
    lut = np.array([PALETTE_OCCUPIED, PALETTE_UNEXPLAINED, PALETTE_FREE], dtype=np.uint8)
    return lut[classified.classes]


def write_pgm(pixels: np.ndarray, path: str | Path) -> None:
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


def write_ppm(rgb: np.ndarray, path: str | Path) -> None:
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    h, w, c = rgb.shape
    if c != 3:
        raise ValueError("pixmap needs 3 channels")
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes())


def write_raster(grid: ClassifiedGrid | OccupancyGrid | np.ndarray, path: str | Path) -> None:
    """Write a classified grid (P6 palette), an occupancy grid (P5) or an RGB overlay (P6)."""
    if isinstance(grid, ClassifiedGrid):
        write_ppm(class_colors(grid), path)
    elif isinstance(grid, OccupancyGrid):
        write_pgm(grid.intensities, path)
    else:
        arr = np.asarray(grid)
        if arr.ndim == 2:
            write_pgm(arr, path)
        else:
            write_ppm(arr, path)


def load_classified(path: str | Path) -> ClassifiedGrid:
    """Inverse of ``write_raster`` for classified grids."""
    rgb = parse_netpbm(Path(path).read_bytes())
    if rgb.ndim != 3:
        raise MalformedRaster("classified rasters are pixmaps")
    out = np.full(rgb.shape[:2], 255, dtype=np.uint8)
    for code, color in enumerate((PALETTE_OCCUPIED, PALETTE_UNEXPLAINED, PALETTE_FREE)):
        out[np.all(rgb == color, axis=2)] = code
    if (out == 255).any():
        raise MalformedRaster("pixel outside the class palette")
    return ClassifiedGrid(out)


def load_pixmap(path: str | Path) -> np.ndarray:
    rgb = parse_netpbm(Path(path).read_bytes())
    if rgb.ndim != 3:
        raise MalformedRaster("expected a pixmap")
    return rgb
