"""Independently marked homogeneous Poisson patterns on rectangular windows."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .marks import MarkModel, sample_marks

TORUS = "torus"
OPEN = "open"


@dataclass(frozen=True)
class Window:
    width: float
    height: float
    boundary: str = TORUS

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise InvalidArgumentError(f"window sides must be positive, got {self.width}x{self.height}")
        if self.boundary not in (TORUS, OPEN):
            raise InvalidArgumentError(f"boundary must be 'torus' or 'open', got {self.boundary!r}")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * self.width, 0.5 * self.height)


@dataclass(frozen=True)
class PlanarMetric:
    """Planar distance on the open plane or on the torus built from a window.

    Torus mode wraps coordinate differences: ``min(|dx|, W - |dx|)``.
    """

    boundary: str = OPEN
    width: float | None = None
    height: float | None = None

    def __post_init__(self):
        if self.boundary not in (TORUS, OPEN):
            raise InvalidArgumentError(f"boundary must be 'torus' or 'open', got {self.boundary!r}")
        if self.boundary == TORUS and not (self.width and self.height and self.width > 0 and self.height > 0):
            raise InvalidArgumentError("torus metric needs a window width and height")

    @classmethod
    def for_window(cls, window: Window, boundary: str | None = None) -> "PlanarMetric":
        return cls(boundary or window.boundary, window.width, window.height)

    @property
    def boxsize(self):
        return (self.width, self.height) if self.boundary == TORUS else None

    def deltas(self, p, q):
        """Absolute coordinate differences, wrapped on the torus. Broadcasts."""
        diff = np.abs(np.asarray(q, dtype=float) - np.asarray(p, dtype=float))
        if self.boundary == TORUS:
            box = np.array([self.width, self.height])
            diff = np.mod(diff, box)
            diff = np.minimum(diff, box - diff)
        return diff

    def distance2(self, p, q):
        d = self.deltas(p, q)
        return np.sum(d * d, axis=-1)

    def distance(self, p, q):
        out = np.sqrt(self.distance2(p, q))
        return out if np.ndim(out) else float(out)


def planar_distance(metric: PlanarMetric, p, q) -> float:
    return metric.distance(p, q)


@dataclass
class MarkedPattern:
    """Atom positions ``xy`` (n x 2) and marks ``z`` (n,), in generation order."""

    xy: np.ndarray
    z: np.ndarray
    window: Window | None = None
    intensity: float | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.z = np.asarray(self.z, dtype=float).ravel()
        if self.xy.shape[0] != self.z.shape[0]:
            raise InvalidArgumentError("positions and marks differ in length")
        if not np.all(np.isfinite(self.xy)):
            raise InvalidArgumentError("atom positions must be finite")
        if not np.all((self.z > 0) & np.isfinite(self.z)):
            raise InvalidArgumentError("atom marks must be positive and finite")
        if self.window is not None and len(self):
            x, y = self.xy[:, 0], self.xy[:, 1]
            if np.any((x < 0) | (x > self.window.width) | (y < 0) | (y > self.window.height)):
                raise InvalidArgumentError("atom outside the window")

    def __len__(self):
        return self.z.shape[0]

    def metric(self, boundary: str | None = None) -> PlanarMetric:
        if self.window is None:
            if boundary == TORUS:
                raise InvalidArgumentError("torus boundary needs a window")
            return PlanarMetric(OPEN)
        return PlanarMetric.for_window(self.window, boundary)


def sample_ppp(lam: float, window: Window, marks: MarkModel, rng: np.random.Generator,
               seed: int | None = None) -> MarkedPattern:
    """Poisson(lam * area) atoms, uniform positions, i.i.d. marks."""
    if not lam > 0:
        raise InvalidArgumentError(f"intensity must be positive, got {lam}")
    n = int(rng.poisson(lam * window.area))
    xy = rng.uniform(0.0, 1.0, size=(n, 2)) * np.array([window.width, window.height])
    z = sample_marks(marks, n, rng)
    return MarkedPattern(xy, z, window, lam, seed)


# --------------------------------------------------------------------------
# CSV pattern files with a JSON sidecar


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_pattern(pattern: MarkedPattern, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z"])
        for (x, y), z in zip(pattern.xy, pattern.z):
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(z))])
    if pattern.window is not None:
        meta = {
            "width": pattern.window.width,
            "height": pattern.window.height,
            "boundary": pattern.window.boundary,
            "lambda": pattern.intensity,
            "seed": pattern.seed,
        }
        sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


class PatternFormatError(InvalidArgumentError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def read_pattern(path, window: Window | None = None) -> MarkedPattern:
    """Read an ``x,y,z`` CSV file; the sidecar JSON, if present, supplies the window.

    An explicit ``window`` overrides the sidecar. Malformed rows raise
    :class:`PatternFormatError` naming the 1-based file line.
    """
    path = Path(path)
    xy, zs = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["x", "y", "z"]:
            raise PatternFormatError("expected header 'x,y,z'", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise PatternFormatError(f"expected 3 fields, got {len(row)}", line=line)
            try:
                x, y, z = (float(c) for c in row)
            except ValueError:
                raise PatternFormatError(f"non-numeric field in {row!r}", line=line) from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise PatternFormatError("position must be finite", line=line)
            if not (z > 0 and math.isfinite(z)):
                raise PatternFormatError(f"mark must be positive, got {z}", line=line)
            xy.append((x, y))
            zs.append(z)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
        if window is None:
            window = Window(float(meta["width"]), float(meta["height"]), meta.get("boundary", TORUS))
    return MarkedPattern(np.array(xy, dtype=float).reshape(-1, 2), np.array(zs, dtype=float),
                         window, meta.get("lambda"), meta.get("seed"), meta)
