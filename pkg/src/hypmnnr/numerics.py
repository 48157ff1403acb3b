"""Evaluation of the f-weighted volume of the two-ball union.

``F(s, z, zt)`` is the mark-density-weighted volume of the union of the two
Euclidean balls that represent the hyperbolic nearest-neighbor balls of a
pair of atoms at planar distance ``s`` with marks ``z`` and ``zt``. It does
not depend on the intensity; the cooperation probability of the pair is
``exp(-lambda * F) * 1_D``.

Three routes are provided and cross-check one another:

* ``volume_F_slice``: integrate the area of the horizontal slice (a union of
  two disks) against the mark law. This is the default.
* ``volume_F_paper``: the literal ball-plus-ball-minus-two-caps triple
  integral, evaluated by nested quadrature. Slow; kept as an oracle.
* ``volume_F_mc``: hit-or-miss Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NonConvergenceError, UnsupportedOperationError
from .hypgeom import check_distinct, circle_union_area, lens_arrays
from .marks import DegenerateMarks, MarkModel, sample_marks

# area of the union of two radius-s disks whose centers are s apart, over s**2
DEGENERATE_UNION_CONSTANT = 4.0 * math.pi / 3.0 + math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_depth: int = 40

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise InvalidArgumentError("quadrature tolerances must be positive")
        if self.max_depth < 1:
            raise InvalidArgumentError("max_depth must be >= 1")

    def tighter(self, factor: float) -> "QuadratureSpec":
        return QuadratureSpec(self.abs_tol * factor, self.rel_tol * factor, self.max_depth)


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    stderr: float
    method: str  # "slice", "paper", "mc" or "degenerate"
    converged: bool = True


# --------------------------------------------------------------------------
# adaptive Gauss-Kronrod (7, 15)

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_KRONROD_X = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[[13, 11, 9]] = _WG[:3]
_GAUSS_W[7] = _WG[3]


def adaptive_quad(fn, lo: float, hi: float, q: QuadratureSpec = QuadratureSpec(), breakpoints=()):
    """Integrate ``fn`` over ``[lo, hi]``.

    ``fn`` maps a 1-d array of abscissae to an array of values; every round
    of subdivision is evaluated in a single call. ``breakpoints`` are known
    kinks or jumps of the integrand (e.g. the support ends of a density);
    the interval is split there before any work is done.

    Raises :class:`NonConvergenceError` (with the best estimate attached)
    when ``q.max_depth`` rounds of bisection do not meet
    ``max(abs_tol, rel_tol * |value|)``.
    """
    if hi < lo:
        raise InvalidArgumentError(f"integration bounds reversed: [{lo}, {hi}]")
    if hi == lo:
        return 0.0
    edges = np.unique(np.concatenate([[lo, hi], np.asarray(breakpoints, dtype=float).ravel()]))
    edges = edges[(edges >= lo) & (edges <= hi)]
    a, b = edges[:-1], edges[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    length = hi - lo
    done_val = 0.0
    done_err = 0.0
    total = err = 0.0
    for _ in range(q.max_depth + 1):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        x = mid[:, None] + half[:, None] * _KRONROD_X[None, :]
        y = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
        kron = half * (y @ _KRONROD_W)
        gauss = half * (y @ _GAUSS_W)
        est = np.abs(kron - gauss)
        total = done_val + kron.sum()
        err = done_err + est.sum()
        if not np.isfinite(total):
            raise NonConvergenceError("integrand produced non-finite values", estimate=total, error=err)
        tol = max(q.abs_tol, q.rel_tol * abs(total))
        if err <= tol:
            return float(total)
        local_ok = est <= 0.5 * tol * (b - a) / length
        done_val += kron[local_ok].sum()
        done_err += est[local_ok].sum()
        a, b, mid = a[~local_ok], b[~local_ok], mid[~local_ok]
        if a.size == 0:
            return float(total)
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    raise NonConvergenceError(
        f"adaptive quadrature did not converge on [{lo}, {hi}] (error estimate {err:.3g})",
        estimate=float(total), error=float(err))


def _smooth_nodes(m: int):
    """Gauss-Legendre nodes on [0, 1] composed with t -> 3t^2 - 2t^3.

    The map has vanishing derivative at both ends, which tames algebraic
    endpoint behavior (square roots, 3/2 powers, quantile-function blow-up).
    """
    x, w = np.polynomial.legendre.leggauss(m)
    t = 0.5 * (x + 1.0)
    wt = 0.5 * w
    return t * t * (3.0 - 2.0 * t), wt * 6.0 * t * (1.0 - t)


# --------------------------------------------------------------------------
# geometry shared by the evaluators


def _height_breaks(g, s):
    """Heights where the slice-area function is not smooth.

    Ball bottoms/tops and the lowest/highest points of the circle where the
    two spheres meet (the slice disks are tangent there). Shape ``(..., 6)``.

    In the vertical plane through both centers the spheres are the circles
    ``x^2 + w^2 - 2 c w + z^2 = 0`` and ``(x - s)^2 + w^2 - 2 ct w + zt^2 = 0``;
    eliminating ``x`` leaves ``d^2 w^2 - B w + C = 0``, whose roots are
    taken in the cancellation-free form.
    """
    s = np.asarray(s, dtype=float)
    c, d = g["c"], g["d"]
    z, zt = g["z"], g["zt"]
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        k = s * s + (zt - z) * (zt + z)
        B = k * (g["c_t"] - c) + 2.0 * c * s * s
        C = 0.25 * k * k + s * s * z * z
        q = 0.5 * (B + np.sqrt(np.maximum(B * B - 4.0 * d * d * C, 0.0)))
        w_hi = q / (d * d)
        w_lo = C / q
    return np.stack([g["bot"], g["top"], g["bot_t"], g["top_t"], w_lo, w_hi], axis=-1)


def _slice_area(w, s, g):
    rho1 = np.sqrt(np.maximum((w - g["bot"]) * (g["top"] - w), 0.0))
    rho2 = np.sqrt(np.maximum((w - g["bot_t"]) * (g["top_t"] - w), 0.0))
    return circle_union_area(rho1, rho2, s)


def _degenerate_value(s, z, zt, mu):
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    zt = np.asarray(zt, dtype=float)
    same = (z == mu) & (zt == mu)
    g = lens_arrays(s, z, zt)
    general = _slice_area(mu, s, g)
    return np.where(same, DEGENERATE_UNION_CONSTANT * s * s, general)


# --------------------------------------------------------------------------
# public evaluators


def volume_F_slice(s: float, z: float, zt: float, m: MarkModel,
                   q: QuadratureSpec = QuadratureSpec()) -> VolumeEstimate:
    """F by integrating horizontal slice areas against the mark law.

    The height integral is done in probability coordinates ``w = Q(u)``
    (``Q`` the quantile function), which is the same integral as
    ``int f(w) A(w) dw`` but stays well-conditioned for very peaked or
    endpoint-singular densities.
    """
    check_distinct(s, z, zt)
    if isinstance(m, DegenerateMarks):
        return VolumeEstimate(float(_degenerate_value(s, z, zt, m.mu)), 0.0, "degenerate")
    g = lens_arrays(s, z, zt)
    breaks = _height_breaks(g, s)
    h_lo = min(float(breaks[0]), float(breaks[2]))
    h_hi = max(float(breaks[1]), float(breaks[3]))
    u_lo, u_hi = float(m.cdf(h_lo)), float(m.cdf(h_hi))
    if u_hi <= u_lo:
        return VolumeEstimate(0.0, 0.0, "slice")
    u_breaks = np.asarray(m.cdf(breaks), dtype=float)

    def integrand(u):
        return _slice_area(m.ppf(u), s, g)

    value = adaptive_quad(integrand, u_lo, u_hi, q, breakpoints=u_breaks)
    return VolumeEstimate(float(value), 0.0, "slice")


def volume_F_batch(s, z, zt, m: MarkModel, nodes: int = 16) -> np.ndarray:
    """Vectorized F over arrays of ``(s, z, zt)`` with a fixed rule.

    Uses the same slice representation as :func:`volume_F_slice`; each
    smooth piece between consecutive kink heights gets ``nodes`` smoothed
    Gauss-Legendre points in probability coordinates. Rows with ``s = 0``
    and ``z = zt`` return 0 (the limit value). Intended for the inner loops
    of the pair-fraction integral; accuracy is checked against the adaptive
    route in the tests.
    """
    s, z, zt = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(z, dtype=float),
                                   np.asarray(zt, dtype=float))
    shape = s.shape
    s, z, zt = s.ravel(), z.ravel(), zt.ravel()
    coincide = (s == 0) & (z == zt)
    if isinstance(m, DegenerateMarks):
        with np.errstate(invalid="ignore", divide="ignore"):
            out = _degenerate_value(s, z, zt, m.mu)
        return np.where(coincide, 0.0, out).reshape(shape)
    g = lens_arrays(s, z, zt)
    breaks = _height_breaks(g, s)
    lo = np.minimum(breaks[:, 0], breaks[:, 2])
    hi = np.maximum(breaks[:, 1], breaks[:, 3])
    breaks = np.clip(breaks, lo[:, None], hi[:, None])
    ub = np.sort(np.asarray(m.cdf(breaks), dtype=float), axis=1)
    a, b = ub[:, :-1], ub[:, 1:]
    t, wt = _smooth_nodes(nodes)
    width = (b - a)[:, :, None]
    u = a[:, :, None] + width * t
    weight = width * wt
    w = m.ppf(u)
    gg = {k: v[:, None, None] for k, v in g.items()}
    with np.errstate(invalid="ignore"):
        area = _slice_area(w, s[:, None, None], gg)
    area = np.where(weight > 0, area, 0.0)
    out = (area * weight).sum(axis=(1, 2))
    out = np.where(coincide, 0.0, out)
    return out.reshape(shape)


def volume_F_paper(s: float, z: float, zt: float, m: MarkModel,
                   q: QuadratureSpec = QuadratureSpec()) -> VolumeEstimate:
    """F as two f-weighted ball integrals minus the two f-weighted lens caps.

    The caps are integrated in the frame of each ball, with the axis pointing
    at the other center: axial coordinate ``w``, polar angle ``theta`` and
    radius ``rho``; the mark density is evaluated at the height
    ``c + w cos(delta) - rho cos(theta) sin(delta)``.
    """
    check_distinct(s, z, zt)
    if not m.has_density:
        raise UnsupportedOperationError("literal volume integral needs a mark density")
    g = lens_arrays(s, z, zt)
    lo, hi = m.support
    inner = q.tighter(1e-2)

    def ball(r, c):
        def fn(w):
            return m.density(w + c) * (r * r - w * w)
        return math.pi * adaptive_quad(fn, -r, r, q.tighter(0.25), breakpoints=(lo - c, hi - c))

    t_nodes, t_weights = _smooth_nodes(24)

    def radial(w, theta, r, c, delta):
        # int_0^rho f(base - x * k) x dx for every theta, split at the support ends
        rho = math.sqrt(max(r * r - w * w, 0.0))
        base = c + w * math.cos(delta)
        k = np.cos(theta) * math.sin(delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            cuts = np.stack([(base - lo) / k, (base - hi) / k], axis=-1)
        cuts = np.where(np.isfinite(cuts), np.clip(cuts, 0.0, rho), 0.0)
        cuts.sort(axis=-1)
        pts = np.concatenate([np.zeros_like(cuts[:, :1]), cuts, np.full_like(cuts[:, :1], rho)], axis=1)
        pa, pb = pts[:, :-1], pts[:, 1:]
        width = (pb - pa)[:, :, None]
        x = pa[:, :, None] + width * t_nodes
        vals = m.density(base - x * k[:, None, None]) * x
        return (vals * width * t_weights).sum(axis=(1, 2))

    def cap(r, c, h, delta):
        sin_d, cos_d = math.sin(delta), math.cos(delta)

        def theta_integral(w):
            rho = math.sqrt(max(r * r - w * w, 0.0))
            base = c + w * cos_d
            tb = []
            if rho * sin_d > 0:
                for edge in (lo, hi):
                    arg = (base - edge) / (rho * sin_d)
                    if -1.0 < arg < 1.0:
                        t0 = math.acos(arg)
                        tb.extend([t0, 2.0 * math.pi - t0])
            return adaptive_quad(lambda th: radial(w, th, r, c, delta), 0.0, 2.0 * math.pi,
                                 inner, breakpoints=tb)

        def fn(ws):
            return np.array([theta_integral(float(w)) for w in ws])

        return adaptive_quad(fn, r - h, r, q.tighter(0.25))

    value = (ball(g["r"], g["c"]) + ball(g["r_t"], g["c_t"])
             - cap(float(g["r"]), float(g["c"]), float(g["h"]), float(g["delta"]))
             - cap(float(g["r_t"]), float(g["c_t"]), float(g["h_t"]), float(g["delta_t"])))
    return VolumeEstimate(max(float(value), 0.0), 0.0, "paper")


def volume_F_mc(s: float, z: float, zt: float, m: MarkModel, n: int,
                rng: np.random.Generator, chunk: int = 1_000_000) -> VolumeEstimate:
    """Hit-or-miss estimate of F.

    Heights are drawn from the mark law and planar coordinates uniformly on
    a rectangle covering both balls' footprints; the hit fraction times the
    rectangle area is unbiased for F.
    """
    if n < 1000:
        raise InvalidArgumentError(f"Monte Carlo volume needs n >= 1000, got {n}")
    check_distinct(s, z, zt)
    g = {k: float(v) for k, v in lens_arrays(s, z, zt).items()}
    r, rt, c, ct = g["r"], g["r_t"], g["c"], g["c_t"]
    x0, x1 = min(-r, s - rt), max(r, s + rt)
    y1 = max(r, rt)
    area = (x1 - x0) * 2.0 * y1
    hits = 0
    left = int(n)
    while left > 0:
        k = min(left, chunk)
        w = sample_marks(m, k, rng)
        x = rng.uniform(x0, x1, k)
        y = rng.uniform(-y1, y1, k)
        inside = (x * x + y * y + (w - c) ** 2 < r * r) | ((x - s) ** 2 + y * y + (w - ct) ** 2 < rt * rt)
        hits += int(np.count_nonzero(inside))
        left -= k
    p = hits / n
    value = area * p
    stderr = area * math.sqrt(p * (1.0 - p) / (n - 1))
    return VolumeEstimate(value, stderr, "mc")
