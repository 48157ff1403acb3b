"""Cooperation probability, pair fraction and expected interference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NonConvergenceError
from .marks import ControlSet, DegenerateMarks, MarkModel, sample_marks
from .numerics import QuadratureSpec, VolumeEstimate, volume_F_batch, volume_F_slice

QUADRATURE = "quadrature"
MONTE_CARLO = "mc"

_PANEL_NODES = 16
_MAX_PANELS = 60
_TAIL_MAX = 1e-12
_INNER_NODES = 8
_OUTER_PANEL_NODES = 8
_SCALE_STEPS = 12
# inner panel edges, in units of the local ridge width
_INNER_STEPS = np.concatenate([[0.0, 0.25, 0.5], 2.0 ** np.arange(0, 40)])


@dataclass(frozen=True)
class PathlossModel:
    """Received power ``|x|**-beta`` from nodes farther than ``excl_radius``."""

    beta: float
    excl_radius: float

    def __post_init__(self):
        if not self.beta > 2:
            raise InvalidArgumentError(f"pathloss exponent must exceed 2 for integrability, got {self.beta}")
        if not self.excl_radius > 0:
            raise InvalidArgumentError(f"exclusion radius must be positive, got {self.excl_radius}")

    def gain(self, dist, r_max: float = math.inf):
        dist = np.asarray(dist, dtype=float)
        inside = (dist > self.excl_radius) & (dist <= r_max)
        with np.errstate(divide="ignore"):
            return np.where(inside, dist ** -self.beta, 0.0)


@dataclass(frozen=True)
class ExpectationSpec:
    """How the expectation over the two marks is taken.

    ``method="quadrature"`` uses Gauss-Legendre in probability coordinates
    with ``nodes`` points for the outer mark and panels adapted to the
    near-diagonal ridge for the inner one (see ``_ridge_rule``);
    ``method="mc"`` averages over ``n`` sampled mark pairs drawn with ``seed``.
    """

    method: str = QUADRATURE
    nodes: int = 32
    n: int = 4000
    seed: int = 0

    def __post_init__(self):
        if self.method == QUADRATURE:
            if self.nodes < 8:
                raise InvalidArgumentError("mark quadrature needs at least 8 outer nodes")
        elif self.method == MONTE_CARLO:
            if self.n < 1000:
                raise InvalidArgumentError("Monte Carlo expectation needs n >= 1000")
        else:
            raise InvalidArgumentError(f"unknown expectation method {self.method!r}")


def pair_probability(s: float, z: float, zt: float, lam: float, D: ControlSet, m: MarkModel,
                     q: QuadratureSpec = QuadratureSpec()) -> float:
    """Probability that atoms at planar distance ``s`` with marks ``z``, ``zt`` cooperate."""
    if not lam > 0:
        raise InvalidArgumentError(f"intensity must be positive, got {lam}")
    if not D.contains(z, zt):
        return 0.0
    return math.exp(-lam * volume_F_slice(s, z, zt, m, q).value)


def _ridge_rule(m: MarkModel, nodes: int):
    """Mark pairs and weights for the expectation over two independent marks.

    The per-pair integrand is concentrated near ``z = zt`` with a width of
    order one in ``log(zt / z)``, which in probability coordinates is about
    ``z f(z)`` and becomes very narrow where the mark law piles up near zero.
    So the outer mark uses ``nodes`` composite Gauss-Legendre points in
    ``u`` (equal panels of eight); the inner mark covers ``u <= ut <= 1`` (the other half follows by symmetry)
    on panels whose widths grow geometrically from that local width.
    """
    panels = max(1, nodes // _OUTER_PANEL_NODES)
    per = nodes // panels
    x, wx = np.polynomial.legendre.leggauss(per)
    u1 = ((np.arange(panels)[:, None] + 0.5 * (x + 1.0)) / panels).ravel()
    w1 = np.tile(0.5 * wx / panels, panels)
    nodes = u1.size
    xi, wi = np.polynomial.legendre.leggauss(_INNER_NODES)
    ti, wti = 0.5 * (xi + 1.0), 0.5 * wi
    z1 = m.ppf(u1)
    width = np.clip(z1 * m.density(z1), 1e-12, 1.0)
    us, ws, owner = [], [], []
    for k in range(nodes):
        edges = u1[k] + width[k] * _INNER_STEPS
        edges = np.unique(np.minimum(edges, 1.0))
        if edges[-1] < 1.0:
            edges = np.append(edges, 1.0)
        a, b = edges[:-1], edges[1:]
        us.append((a[:, None] + (b - a)[:, None] * ti).ravel())
        ws.append(((b - a)[:, None] * wti).ravel())
        owner.append(np.full(us[-1].size, k))
    us, ws, owner = np.concatenate(us), np.concatenate(ws), np.concatenate(owner)
    return z1[owner], m.ppf(us), 2.0 * w1[owner] * ws


def _mark_pairs(m: MarkModel, D: ControlSet, e: ExpectationSpec):
    """Mark pairs and their weights; pairs outside ``D`` are dropped."""
    if isinstance(m, DegenerateMarks):
        z = zt = np.array([m.mu])
        w = np.array([1.0])
    elif e.method == QUADRATURE:
        z, zt, w = _ridge_rule(m, e.nodes)
    else:
        rng = np.random.default_rng(e.seed)
        z = sample_marks(m, e.n, rng)
        zt = sample_marks(m, e.n, rng)
        w = np.full(e.n, 1.0 / e.n)
    ok = np.asarray(D.contains(z, zt), dtype=bool)
    return z, zt, w, ok


def _scales(lam, z, zt, m):
    """Per pair: a planar distance where lam*(F(s) - F(0)) is about one, and F(0).

    Bisection in log s on a bracket that scales with the marks and with
    ``lam``; a factor of two is plenty since the panels adapt beyond it.
    """
    f0 = volume_F_batch(np.zeros_like(z), z, zt, m)
    root = np.sqrt(z * zt)
    lo = np.log(1e-3 * np.minimum(root, 1.0 / math.sqrt(lam)))
    hi = np.log(np.maximum(1e4 / math.sqrt(lam), 1e3 * root))
    for _ in range(_SCALE_STEPS):
        mid = 0.5 * (lo + hi)
        reached = lam * (volume_F_batch(np.exp(mid), z, zt, m) - f0) >= 1.0
        hi = np.where(reached, mid, hi)
        lo = np.where(reached, lo, mid)
    return np.exp(hi), f0


def _support_breaks(z, zt, m):
    """Planar distances at which a ball end crosses a finite end of the mark support.

    There the volume picks up a non-smooth term (sharp when the density is
    singular at that end), so the radial rule puts a panel edge on each.
    Invalid crossings are returned as ``inf`` and sort to the end.
    """
    lo, hi = (float(v) for v in m.support)
    cols = []
    for c in (z, zt):
        for end in (lo, hi):
            if not (0.0 < end < math.inf):
                continue
            with np.errstate(invalid="ignore", divide="ignore"):
                t = (end - c) ** 2 / (2.0 * end * c)
                s2 = 2.0 * z * zt * t - (z - zt) ** 2
            cols.append(np.where(s2 > 0, np.sqrt(np.abs(s2)), np.inf))
    return np.stack(cols, axis=1) if cols else np.zeros((z.size, 0))


def _radial_integrals(lam, z, zt, m, q: QuadratureSpec):
    """``G = int_0^inf exp(-lam F(s, z, zt)) s ds`` for every mark pair.

    Each pair is integrated in units of its own length scale over doubling
    panels [0, 1/8], [1/8, 1/4], ..., [1, 2], [2, 4], ..., further split
    where a ball end crosses the mark support boundary; a pair is retired
    once a panel adds less than ``abs_tol`` times its running total and the
    integrand has dropped below 1e-12 on that panel.
    """
    n = z.size
    G = np.zeros(n)
    if n == 0:
        return G
    scale, f0 = _scales(lam, z, zt, m)
    x, wx = np.polynomial.legendre.leggauss(_PANEL_NODES)
    t, wt = 0.5 * (x + 1.0), 0.5 * wx
    doubling = np.concatenate([[0.0], 0.125 * 2.0 ** np.arange(_MAX_PANELS)])
    edges = np.concatenate([scale[:, None] * doubling[None, :], _support_breaks(z, zt, m)], axis=1)
    edges.sort(axis=1)
    active = np.arange(n)
    for j in range(_MAX_PANELS):
        a, b = edges[active, j, None], edges[active, j + 1, None]
        s = a + (b - a) * t[None, :]
        F = volume_F_batch(s, z[active, None], zt[active, None], m)
        vals = np.exp(-lam * F) * s
        panel = (vals * ((b - a) * wt)).sum(axis=1)
        G[active] += panel
        done = (panel <= q.abs_tol * G[active]) & (vals.max(axis=1) < _TAIL_MAX)
        active = active[~done]
        if active.size == 0:
            return G
    raise NonConvergenceError(
        f"pair-fraction tail did not decay for {active.size} mark pairs within {_MAX_PANELS} panels",
        estimate=G)


def pair_fraction_estimate(lam: float, m: MarkModel, D: ControlSet,
                           e: ExpectationSpec = ExpectationSpec(),
                           q: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """Pair fraction and its standard error (zero unless ``e`` is Monte Carlo)."""
    if not lam > 0:
        raise InvalidArgumentError(f"intensity must be positive, got {lam}")
    z, zt, w, ok = _mark_pairs(m, D, e)
    G = np.zeros(z.size)
    G[ok] = _radial_integrals(lam, z[ok], zt[ok], m, q)
    per_pair = 2.0 * math.pi * lam * G
    value = float(np.dot(w, per_pair))
    stderr = 0.0
    if e.method == MONTE_CARLO and not isinstance(m, DegenerateMarks):
        stderr = float(per_pair.std(ddof=1) / math.sqrt(per_pair.size))
    return min(max(value, 0.0), 1.0), stderr


def pair_fraction(lam: float, m: MarkModel, D: ControlSet, e: ExpectationSpec = ExpectationSpec(),
                  q: QuadratureSpec = QuadratureSpec()) -> float:
    """Fraction of atoms that belong to a cooperative pair."""
    return pair_fraction_estimate(lam, m, D, e, q)[0]


def pathloss_tail_integral(pl: PathlossModel, r_max: float = math.inf) -> float:
    """Integral of ``|x|**-beta`` over the annulus ``excl_radius < |x| <= r_max``."""
    R, beta = pl.excl_radius, pl.beta
    if r_max <= R:
        return 0.0
    outer = 0.0 if math.isinf(r_max) else r_max ** (2.0 - beta)
    return 2.0 * math.pi * (R ** (2.0 - beta) - outer) / (beta - 2.0)


def expected_interference(lam: float, m: MarkModel, D: ControlSet, pl: PathlossModel,
                          e: ExpectationSpec = ExpectationSpec(), q: QuadratureSpec = QuadratureSpec(),
                          r_max: float = math.inf, p_d: float | None = None) -> tuple[float, float]:
    """Mean interference at the origin from singles and from paired nodes.

    Both follow from the intensity split: singles have intensity
    ``(1 - P_D) lam`` and paired nodes ``P_D lam``; with the additive
    pathloss kernel each paired node contributes its own gain. ``r_max``
    truncates the annulus (use it to compare with a finite window).
    Pass ``p_d`` to reuse an already computed pair fraction.
    """
    if p_d is None:
        p_d = pair_fraction(lam, m, D, e, q)
    total = lam * pathloss_tail_integral(pl, r_max)
    return (1.0 - p_d) * total, p_d * total


def expected_interference_singles(lam, m, D, pl, e=ExpectationSpec(), q=QuadratureSpec(),
                                  r_max=math.inf, p_d=None) -> float:
    return expected_interference(lam, m, D, pl, e, q, r_max, p_d)[0]


def expected_interference_pairs(lam, m, D, pl, e=ExpectationSpec(), q=QuadratureSpec(),
                                r_max=math.inf, p_d=None) -> float:
    return expected_interference(lam, m, D, pl, e, q, r_max, p_d)[1]


def additive_pathloss_kernel(pl: PathlossModel, r_max: float = math.inf):
    """``k(a, b) = g(a) + g(b)`` with ``g`` the truncated pathloss gain."""
    def kernel(a, b):
        return pl.gain(np.hypot(a[:, 0], a[:, 1]), r_max) + pl.gain(np.hypot(b[:, 0], b[:, 1]), r_max)
    return kernel


def expected_interference_pairs_general(lam: float, m: MarkModel, D: ControlSet, kernel,
                                        mc_budget: int = 200_000, seed: int = 0,
                                        domain_radius: float = 15.0, target_rel_stderr: float | None = None,
                                        batch: int = 20_000) -> VolumeEstimate:
    """Monte Carlo value of ``lam**2 / 2 * int int k(a, b) E[exp(-lam F) 1_D] da db``.

    ``kernel(a, b)`` receives two ``(n, 2)`` position arrays and returns
    ``n`` nonnegative values. The first position is drawn uniformly on the
    disk of radius ``domain_radius`` about the origin (kernel mass with the
    first argument outside it is not counted); the offset to the second is
    drawn with a half-Cauchy length and uniform direction, and the marks from
    the mark law. Sampling stops at ``mc_budget`` draws, or earlier once the
    relative standard error reaches ``target_rel_stderr``; ``converged`` on
    the result is False when a requested target was not met.
    """
    if not lam > 0:
        raise InvalidArgumentError(f"intensity must be positive, got {lam}")
    if mc_budget < 1000:
        raise InvalidArgumentError("mc_budget must be at least 1000")
    rng = np.random.default_rng(seed)
    sigma = 1.0 / math.sqrt(lam)
    area = math.pi * domain_radius ** 2
    total = total2 = 0.0
    count = 0
    while count < mc_budget:
        k = min(batch, mc_budget - count)
        rad = domain_radius * np.sqrt(rng.uniform(size=k))
        ang = rng.uniform(0.0, 2.0 * math.pi, size=k)
        a = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        s = sigma * np.tan(0.5 * math.pi * rng.uniform(size=k))
        phi = rng.uniform(0.0, 2.0 * math.pi, size=k)
        b = a + s[:, None] * np.column_stack([np.cos(phi), np.sin(phi)])
        z = sample_marks(m, k, rng)
        zt = sample_marks(m, k, rng)
        kv = np.asarray(kernel(a, b), dtype=float)
        vals = np.zeros(k)
        live = (kv > 0) & np.asarray(D.contains(z, zt), dtype=bool) & (s > 0)
        if np.any(live):
            F = volume_F_batch(s[live], z[live], zt[live], m)
            density_s = 2.0 * sigma / (math.pi * (sigma ** 2 + s[live] ** 2))
            vals[live] = kv[live] * np.exp(-lam * F) * s[live] / density_s
        vals *= 0.5 * lam * lam * area * 2.0 * math.pi
        total += vals.sum()
        total2 += (vals * vals).sum()
        count += k
        mean = total / count
        var = max(total2 / count - mean * mean, 0.0)
        stderr = math.sqrt(var / (count - 1))
        if target_rel_stderr is not None and mean > 0 and stderr <= target_rel_stderr * mean:
            return VolumeEstimate(mean, stderr, "mc")
    converged = target_rel_stderr is None or mean == 0
    return VolumeEstimate(mean, stderr, "mc", converged)
