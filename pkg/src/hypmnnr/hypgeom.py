"""Hyperbolic half-space geometry for resource-marked nodes.

A node is a point ``(x, y, z)`` of the upper half-space: planar position
plus a strictly positive resource mark. Distances use the half-space metric,
hyperbolic balls are Euclidean balls with shifted centers, and the union of
the two nearest-neighbor balls of a pair is described by a handful of
derived lens quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePairError, InvalidArgumentError


@dataclass(frozen=True)
class MarkedAtom:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidArgumentError(f"atom position must be finite, got ({self.x}, {self.y})")
        if not (self.z > 0 and math.isfinite(self.z)):
            raise InvalidArgumentError(f"atom mark must be positive and finite, got {self.z}")

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Ball3:
    center_x: float
    center_y: float
    center_h: float
    radius: float

    def contains(self, x, y, h):
        """Strict interior membership; vectorizes over the point coordinates."""
        dx = np.asarray(x) - self.center_x
        dy = np.asarray(y) - self.center_y
        dh = np.asarray(h) - self.center_h
        return dx * dx + dy * dy + dh * dh < self.radius * self.radius


@dataclass(frozen=True)
class LensGeometry:
    """Derived quantities of the union of the two balls of radius R.

    ``r``/``c``/``h``/``delta`` belong to the first atom's ball and the
    ``*_t`` fields to the second one. ``h`` is the height of the cap of the
    first ball cut off by the radical plane (the part lying inside the other
    ball) and ``delta`` the angle between the center-to-center axis and the
    vertical.
    """

    R: float
    s: float
    d: float
    r: float
    r_t: float
    c: float
    c_t: float
    h: float
    h_t: float
    delta: float
    delta_t: float


def cosh_excess(d2, z, zt):
    """Return ``cosh(R) - 1`` for squared planar distance ``d2`` and marks.

    Written as ``(d2 + (z - zt)**2) / (2 z zt)``, which is the hyperbolic
    distance argument minus one without the cancellation that the textbook
    form suffers from when the two atoms nearly coincide.
    """
    z = np.asarray(z, dtype=float)
    zt = np.asarray(zt, dtype=float)
    dz = z - zt
    return (np.asarray(d2, dtype=float) + dz * dz) / (2.0 * z * zt)


def acosh1p(t):
    """``acosh(1 + t)`` accurate for small ``t``."""
    t = np.asarray(t, dtype=float)
    return np.log1p(t + np.sqrt(t * (t + 2.0)))


def _planar(a: MarkedAtom, b: MarkedAtom, planar) -> float:
    if planar is None:
        return math.hypot(a.x - b.x, a.y - b.y)
    return float(planar.distance(a.position, b.position))


def hyperbolic_distance(a: MarkedAtom, b: MarkedAtom, planar=None) -> float:
    """Half-space distance between two marked atoms.

    ``planar`` is any object with a ``distance(p, q)`` method (see
    :class:`hypmnnr.pointprocess.PlanarMetric`); ``None`` means the open
    Euclidean plane.
    """
    s = _planar(a, b, planar)
    return float(acosh1p(cosh_excess(s * s, a.z, b.z)))


def euclidean_ball(a: MarkedAtom, eps: float) -> Ball3:
    """The Euclidean ball occupied by the hyperbolic ball of radius ``eps`` about ``a``."""
    if not eps > 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps}")
    return Ball3(a.x, a.y, a.z * math.cosh(eps), a.z * math.sinh(eps))


def lens_arrays(s, z, zt):
    """Vectorized lens quantities for arrays of ``(s, z, zt)``.

    Returns a dict with keys ``R, cosh, sinh, d, r, r_t, c, c_t, h, h_t,
    delta, delta_t`` plus the ball bottoms and tops ``bot, top, bot_t,
    top_t`` (``z exp(-R)`` and ``z exp(R)``, free of the cancellation in
    ``c - r`` when ``R`` is large). No validation is done here; degenerate
    rows produce nan/inf.
    """
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    zt = np.asarray(zt, dtype=float)
    # sqrt(cosh R - 1) without squaring s, which would underflow for tiny s
    root = np.hypot(s, z - zt) / np.sqrt(2.0 * z * zt)
    t = root * root
    ch = 1.0 + t
    sh = root * np.sqrt(t + 2.0)
    eR = 1.0 + t + sh
    R = np.log1p(t + sh)
    r = z * sh
    r_t = zt * sh
    c = z * ch
    c_t = zt * ch
    d = np.hypot(s, (z - zt) * ch)
    overlap = r + r_t - d
    with np.errstate(invalid="ignore", divide="ignore"):
        h = (r_t - r + d) * (overlap / (2.0 * d))
        h_t = (r - r_t + d) * (overlap / (2.0 * d))
        sin_axis = np.clip((c_t - c) / d, -1.0, 1.0)
    delta = 0.5 * np.pi - np.arcsin(sin_axis)
    delta_t = 0.5 * np.pi + np.arcsin(sin_axis)
    return {
        "R": R, "cosh": ch, "sinh": sh, "d": d, "r": r, "r_t": r_t,
        "c": c, "c_t": c_t, "h": h, "h_t": h_t, "delta": delta, "delta_t": delta_t,
        "bot": z / eR, "top": z * eR, "bot_t": zt / eR, "top_t": zt * eR,
        "z": z * np.ones_like(t), "zt": zt * np.ones_like(t),
    }


def check_distinct(s: float, z: float, zt: float) -> None:
    if not (z > 0 and zt > 0):
        raise InvalidArgumentError(f"marks must be positive, got z={z}, zt={zt}")
    if s < 0 or not math.isfinite(s):
        raise InvalidArgumentError(f"planar distance must be finite and >= 0, got {s}")
    if s == 0 and z == zt:
        raise DegeneratePairError("s = 0 with equal marks: the two atoms coincide")


def lens_geometry(s: float, z: float, zt: float) -> LensGeometry:
    check_distinct(s, z, zt)
    g = lens_arrays(s, z, zt)
    return LensGeometry(
        R=float(g["R"]), s=float(s), d=float(g["d"]),
        r=float(g["r"]), r_t=float(g["r_t"]),
        c=float(g["c"]), c_t=float(g["c_t"]),
        h=float(g["h"]), h_t=float(g["h_t"]),
        delta=float(g["delta"]), delta_t=float(g["delta_t"]),
    )


def circle_union_area(rho1, rho2, s):
    """Area of the union of two disks of radii ``rho1``, ``rho2`` whose centers are ``s`` apart.

    Broadcasts over array arguments.
    """
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    s = np.asarray(s, dtype=float)
    rho1, rho2, s = np.broadcast_arrays(rho1, rho2, s)
    big = np.maximum(rho1, rho2)
    small = np.minimum(rho1, rho2)
    out = np.pi * (rho1 * rho1 + rho2 * rho2)

    nested = s <= big - small
    out = np.where(nested, np.pi * big * big, out)

    cross = (~nested) & (s < rho1 + rho2)
    if np.any(cross):
        a, b, d = rho1[cross], rho2[cross], s[cross]
        ca = np.clip((d * d + a * a - b * b) / (2.0 * d * a), -1.0, 1.0)
        cb = np.clip((d * d + b * b - a * a) / (2.0 * d * b), -1.0, 1.0)
        k = (-d + a + b) * (d + a - b) * (d - a + b) * (d + a + b)
        lens = a * a * np.arccos(ca) + b * b * np.arccos(cb) - 0.5 * np.sqrt(np.maximum(k, 0.0))
        out[cross] = np.pi * (a * a + b * b) - lens
    return out if out.ndim else float(out)
