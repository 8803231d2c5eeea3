"""Axisymmetric log-spherical grids, regions, quadrature and test fields.

Cells are products ``[s_k, s_{k+1}] x [theta_j, theta_{j+1}]`` with
``s = log r``; every node sits at a cell midpoint, so no node touches the
axis or the origin. Quadrature weights are the exact volumes
``2 pi (r_hi^3 - r_lo^3)/3 * (cos theta_lo - cos theta_hi)`` of the cells, and
region membership is decided at node centres, so each region is a union of
cells (a staircase domain).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, CoverageError, DataError, UsageError


# ---------------------------------------------------------------------------
# grid


class AxisymGrid:
    """Tensor grid in ``(s, theta)`` with cell-exact volume weights."""

    def __init__(self, s_edges, theta_edges):
        s_edges = np.asarray(s_edges, dtype=float)
        theta_edges = np.asarray(theta_edges, dtype=float)
        if np.any(np.diff(s_edges) <= 0) or np.any(np.diff(theta_edges) <= 0):
            raise ConfigurationError("grid edges must be strictly increasing")
        if theta_edges[0] < 0 or theta_edges[-1] > np.pi:
            raise ConfigurationError("theta edges must lie in [0, pi]")
        self.s_edges = s_edges
        self.theta_edges = theta_edges
        self.s_nodes = 0.5 * (s_edges[1:] + s_edges[:-1])
        self.theta_nodes = 0.5 * (theta_edges[1:] + theta_edges[:-1])
        self.r_min = float(np.exp(s_edges[0]))
        self.r_max = float(np.exp(s_edges[-1]))
        r_e = np.exp(s_edges)
        shell = 2 * np.pi * np.diff(r_e**3) / 3
        cap = -np.diff(np.cos(theta_edges))
        self.weights = shell[:, None] * cap[None, :]
        self.S, self.TH = np.meshgrid(self.s_nodes, self.theta_nodes, indexing="ij")
        self.R = np.exp(self.S)
        self.rho = self.R * np.sin(self.TH)
        self.z = self.R * np.cos(self.TH)

    @classmethod
    def from_nodes(cls, s_nodes, theta_nodes):
        """Rebuild a grid from its node coordinates (midpoint edges)."""
        s_nodes = np.asarray(s_nodes, dtype=float)
        t = np.asarray(theta_nodes, dtype=float)
        s_mid = 0.5 * (s_nodes[1:] + s_nodes[:-1])
        s_edges = np.concatenate([[2 * s_nodes[0] - s_mid[0]], s_mid, [2 * s_nodes[-1] - s_mid[-1]]])
        # theta edges: walk outwards from 0 so that nodes remain midpoints
        e = [0.0]
        for tn in t:
            e.append(2 * tn - e[-1])
        return cls(s_edges, np.clip(np.array(e), 0.0, np.pi))

    @property
    def shape(self):
        return self.S.shape

    @property
    def n_r(self):
        return len(self.s_nodes)

    @property
    def n_theta(self):
        return len(self.theta_nodes)

    def same_nodes(self, other):
        return (self is other) or (np.array_equal(self.s_nodes, other.s_nodes)
                                   and np.array_equal(self.theta_nodes, other.theta_nodes))

    def __repr__(self):
        return (f"AxisymGrid(r=[{self.r_min:.4g}, {self.r_max:.4g}], "
                f"n_r={self.n_r}, n_theta={self.n_theta})")


def axis_graded_theta_edges(theta_min, ratio=1.15, n_uniform=16):
    """Theta partition with geometric cells at both poles.

    The first cell is ``[0, theta_min]``; widths grow by ``ratio`` until they
    reach the uniform width ``pi / (2 n_uniform)``.
    """
    if not 0 < theta_min < 0.1 or ratio <= 1:
        raise ConfigurationError("graded theta grid needs 0 < theta_min < 0.1 and ratio > 1")
    h_max = np.pi / (2 * n_uniform)
    half = [0.0]
    w = theta_min
    while w < h_max and half[-1] + w < np.pi / 2 - h_max:
        half.append(half[-1] + w)
        w *= ratio
    rest = np.pi / 2 - half[-1]
    n_rest = max(1, int(np.ceil(rest / h_max)))
    half.extend(half[-1] + rest * np.arange(1, n_rest + 1) / n_rest)
    half = np.array(half)
    half[-1] = np.pi / 2
    return np.concatenate([half, np.pi - half[-2::-1]])


def build_grid(spec=None, **kw):
    """Build a grid from ``{r_min, r_max, n_r, n_theta}``.

    Optional keys: ``theta_min`` and ``theta_ratio`` switch to an axis-graded
    theta partition (``n_theta`` then counts uniform cells per hemisphere
    doubled).
    """
    cfg = dict(spec or {})
    cfg.update(kw)
    try:
        r_min = float(cfg["r_min"])
        r_max = float(cfg["r_max"])
        n_r = int(cfg["n_r"])
        n_theta = int(cfg["n_theta"])
    except KeyError as exc:
        raise ConfigurationError(f"grid spec missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad grid spec: {exc}") from None
    if not (np.isfinite(r_min) and np.isfinite(r_max)) or r_min <= 0 or r_max <= r_min:
        raise ConfigurationError(f"need 0 < r_min < r_max, got ({r_min}, {r_max})")
    if n_r < 8 or n_theta < 8:
        raise ConfigurationError("n_r and n_theta must be at least 8")
    s_edges = np.linspace(np.log(r_min), np.log(r_max), n_r + 1)
    if cfg.get("theta_min") is not None:
        th = axis_graded_theta_edges(float(cfg["theta_min"]), float(cfg.get("theta_ratio", 1.15)),
                                     max(4, n_theta // 2))
    else:
        th = np.linspace(0.0, np.pi, n_theta + 1)
    return AxisymGrid(s_edges, th)


# ---------------------------------------------------------------------------
# regions


_REGION_ARITY = {"annulus": 2, "omega": 2, "cylinder": 2, "wedge": 2, "omega_de": 2,
                 "complement": 2, "ball": 1, "all": 0}


@dataclass(frozen=True)
class Region:
    """Integration domain; membership is evaluated at node centres.

    ========== ===================== ==========================================
    kind       params                set
    ========== ===================== ==========================================
    annulus    (R, eps)              eps < r < R
    omega      (R, eps)              eps < r < R and rho > eps
    cylinder   (delta, eps)          rho <= eps and delta <= r <= 2/delta
    wedge      (delta, eps)          eps <= rho <= sqrt(eps), delta <= r <= 2/delta
    omega_de   (delta, eps)          delta < r < 2/delta and rho > eps
    complement (delta, eps)          r < 2/delta minus omega_de
    ball       (R,)                  r < R
    all        ()                    whole grid
    ========== ===================== ==========================================
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _REGION_ARITY:
            raise ConfigurationError(f"unknown region kind {self.kind!r}")
        if len(self.params) != _REGION_ARITY[self.kind]:
            raise ConfigurationError(
                f"region {self.kind!r} takes {_REGION_ARITY[self.kind]} parameters")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if any(p <= 0 for p in self.params):
            raise ConfigurationError("region scales must be positive")

    @classmethod
    def parse(cls, text):
        """Parse ``"omega:10:0.2"``-style specifications."""
        parts = str(text).strip().split(":")
        try:
            return cls(parts[0], tuple(float(p) for p in parts[1:]))
        except ValueError as exc:
            raise ConfigurationError(f"bad region {text!r}: {exc}") from None

    def __str__(self):
        return ":".join([self.kind] + [repr(p) for p in self.params])

    def contains(self, r, theta):
        r = np.asarray(r, dtype=float)
        rho = r * np.sin(theta)
        k, p = self.kind, self.params
        if k == "annulus":
            return (r > p[1]) & (r < p[0])
        if k == "omega":
            return (r > p[1]) & (r < p[0]) & (rho > p[1])
        if k == "cylinder":
            return (rho <= p[1]) & (r >= p[0]) & (r <= 2 / p[0])
        if k == "wedge":
            return (rho >= p[1]) & (rho <= np.sqrt(p[1])) & (r >= p[0]) & (r <= 2 / p[0])
        if k == "omega_de":
            return (r > p[0]) & (r < 2 / p[0]) & (rho > p[1])
        if k == "complement":
            return (r < 2 / p[0]) & ~((r > p[0]) & (rho > p[1]))
        if k == "ball":
            return r < p[0]
        return np.ones(np.broadcast(r, theta).shape, dtype=bool)

    def mask(self, grid: AxisymGrid):
        return self.contains(grid.R, grid.TH)

    def radial_extent(self):
        """``(r_lo, r_hi)`` spanned by the set; 0 / inf mark unbounded ends."""
        k, p = self.kind, self.params
        if k in ("annulus", "omega"):
            return p[1], p[0]
        if k in ("cylinder", "wedge", "omega_de"):
            return p[0], 2 / p[0]
        if k == "complement":
            return 0.0, 2 / p[0]
        if k == "ball":
            return 0.0, p[0]
        return 0.0, np.inf

    def touches_axis(self):
        return self.kind in ("annulus", "cylinder", "complement", "ball", "all")

    def check_coverage(self, grid: AxisymGrid):
        lo, hi = self.radial_extent()
        bad = []
        if lo > 0 and lo < grid.r_min * (1 - 1e-12):
            bad.append(f"[{lo:.6g}, {grid.r_min:.6g})")
        if np.isfinite(hi) and hi > grid.r_max * (1 + 1e-12):
            bad.append(f"({grid.r_max:.6g}, {hi:.6g}]")
        if bad:
            raise CoverageError(f"region {self} not covered by {grid}; uncovered r in " + ", ".join(bad))
        if not np.any(self.mask(grid)):
            raise CoverageError(f"region {self} contains no nodes of {grid}")

    def is_unbounded_on(self, grid: AxisymGrid):
        """Whether the set extends past the grid (so a tail estimate applies)."""
        lo, hi = self.radial_extent()
        return lo == 0 or not np.isfinite(hi)


# ---------------------------------------------------------------------------
# fields


class ScalarField:
    """Node values with optional analytic partials ``(d/dr, d/dtheta)``.

    ``sampler`` (optional) maps arrays ``(r, theta)`` to
    ``(values, d_r, d_theta)`` and is used when a field has to be re-evaluated
    off the grid.
    """

    def __init__(self, grid: AxisymGrid, values, d_r=None, d_theta=None, sampler=None):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            values = np.broadcast_to(values, grid.shape).copy()
        if not np.all(np.isfinite(values)):
            raise DataError("field values must be finite at every node")
        self.grid = grid
        self.values = values
        self.d_r = None if d_r is None else np.broadcast_to(np.asarray(d_r, dtype=float), grid.shape)
        self.d_theta = None if d_theta is None else np.broadcast_to(np.asarray(d_theta, dtype=float),
                                                                    grid.shape)
        self.sampler = sampler

    @classmethod
    def from_sampler(cls, grid, sampler: Callable):
        v, dr, dt = sampler(grid.R, grid.TH)
        return cls(grid, v, dr, dt, sampler=sampler)

    @classmethod
    def constant(cls, grid, c=0.0):
        return cls(grid, np.full(grid.shape, float(c)), 0.0, 0.0, sampler=_const_sampler(c))

    @property
    def has_partials(self):
        return self.d_r is not None and self.d_theta is not None

    def _binary(self, other, sign):
        if isinstance(other, ScalarField):
            if not self.grid.same_nodes(other.grid):
                raise UsageError("fields live on different grids")
            both = self.has_partials and other.has_partials
            samp = None
            if self.sampler is not None and other.sampler is not None:
                samp = _combine_samplers(self.sampler, other.sampler, sign)
            return ScalarField(self.grid, self.values + sign * other.values,
                               self.d_r + sign * other.d_r if both else None,
                               self.d_theta + sign * other.d_theta if both else None, samp)
        c = float(other)
        samp = None if self.sampler is None else _shift_sampler(self.sampler, sign * c)
        return ScalarField(self.grid, self.values + sign * c, self.d_r, self.d_theta, samp)

    def __add__(self, other):
        return self._binary(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, c):
        c = float(c)
        samp = None if self.sampler is None else _scale_sampler(self.sampler, c)
        return ScalarField(self.grid, c * self.values,
                           None if self.d_r is None else c * self.d_r,
                           None if self.d_theta is None else c * self.d_theta, samp)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def _const_sampler(c):
    def f(r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        z = np.zeros(r.shape)
        return z + c, z, z
    return f


def _combine_samplers(f, g, sign):
    def h(r, theta):
        a, b = f(r, theta), g(r, theta)
        return tuple(x + sign * y for x, y in zip(a, b))
    return h


def _shift_sampler(f, c):
    def h(r, theta):
        v, dr, dt = f(r, theta)
        return v + c, dr, dt
    return h


def _scale_sampler(f, c):
    def h(r, theta):
        return tuple(c * x for x in f(r, theta))
    return h


@dataclass
class MapField:
    """A map sampled on a grid, stored as named scalar components.

    ``target`` is ``"H2"`` (components ``x, Y`` or ``U, w``) or ``"CH2"``
    (components ``U, v, chi, psi``).
    """

    grid: AxisymGrid
    target: str
    components: dict = field(default_factory=dict)

    def __getitem__(self, name) -> ScalarField:
        return self.components[name]

    @property
    def names(self):
        return tuple(self.components)

    def values(self):
        return np.stack([self.components[k].values for k in self.components], axis=-1)

    def replace(self, **comps):
        new = dict(self.components)
        new.update(comps)
        return MapField(self.grid, self.target, new)


# ---------------------------------------------------------------------------
# quadrature and differencing


def _values(f):
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)


def integrate(f, region: Region, grid: AxisymGrid | None = None):
    """Weighted node sum over the region (pairwise summation)."""
    grid = grid or f.grid
    region.check_coverage(grid)
    vals = _values(f)
    m = region.mask(grid)
    terms = (grid.weights * np.where(m, vals, 0.0)).ravel()
    if not np.all(np.isfinite(terms)):
        raise DataError(f"non-finite integrand on region {region}")
    return float(np.sum(terms))


def shell_density(f, region: Region, grid: AxisymGrid | None = None):
    """Per-cell-in-s integrals divided by the cell width in s."""
    grid = grid or f.grid
    vals = np.where(region.mask(grid), _values(f), 0.0)
    return (grid.weights * vals).sum(axis=1) / np.diff(grid.s_edges)


def fd_partials(values, grid: AxisymGrid):
    """Second-order finite-difference ``(d/dr, d/dtheta)``.

    Centred in the interior, one-sided second order at the patch edges; the
    theta stencil handles nonuniform (graded) partitions.
    """
    values = _values(values)
    d_s = np.gradient(values, grid.s_nodes, axis=0, edge_order=2)
    d_t = np.gradient(values, grid.theta_nodes, axis=1, edge_order=2)
    return d_s / grid.R, d_t


def partials(f: ScalarField, analytic=True):
    if analytic and f.has_partials:
        return f.d_r, f.d_theta
    return fd_partials(f.values, f.grid)


def gradient(f: ScalarField, analytic=True):
    """Orthonormal components ``(d_r f, r^{-1} d_theta f)``."""
    dr, dt = partials(f, analytic)
    return dr, dt / f.grid.R


def grad_dot(f: ScalarField, g: ScalarField, analytic=True):
    fr, ft = gradient(f, analytic)
    gr, gt = gradient(g, analytic)
    return fr * gr + ft * gt


def grad_norm2(f: ScalarField, analytic=True):
    return grad_dot(f, f, analytic)


def _diff(values, x, axis, order):
    """First derivative along ``axis``.

    ``order=4`` uses the five-point centred stencil at interior nodes of a
    uniform axis; the two nodes at each end, and nonuniform axes, keep the
    second-order stencil.
    """
    out = np.gradient(values, x, axis=axis, edge_order=2)
    dx = np.diff(x)
    if order == 4 and len(x) >= 5 and np.allclose(dx, dx[0], rtol=1e-10, atol=0):
        v = np.moveaxis(values, axis, 0)
        o = np.moveaxis(out, axis, 0)
        o[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dx[0])
    return out


def divergence(flux_r, flux_t, grid: AxisymGrid, order=4):
    """Divergence of the orthonormal-component vector field by differencing.

    ``div F = r^{-3} d_s(r^2 F_r) + (r sin theta)^{-1} d_theta(sin theta F_theta)``.
    """
    R, sin = grid.R, np.sin(grid.TH)
    a = _diff(R**2 * flux_r, grid.s_nodes, 0, order) / R**3
    b = _diff(sin * flux_t, grid.theta_nodes, 1, order) / (R * sin)
    return a + b


def laplacian(f: ScalarField, analytic=True):
    """Flat Laplacian; differences analytic partials when they are present."""
    if analytic and f.has_partials:
        gr, gt = gradient(f)
        return divergence(gr, gt, f.grid)
    g = f.grid
    v = f.values
    v_s = np.gradient(v, g.s_nodes, axis=0, edge_order=2)
    v_ss = np.gradient(v_s, g.s_nodes, axis=0, edge_order=2)
    v_t = np.gradient(v, g.theta_nodes, axis=1, edge_order=2)
    v_tt = np.gradient(v_t, g.theta_nodes, axis=1, edge_order=2)
    return (v_ss + v_s + v_tt + v_t / np.tan(g.TH)) / g.R**2


def _edge_value(a, b):
    return 1.5 * a - 0.5 * b


def boundary_flux_log_rho(h, region: Region, grid: AxisymGrid | None = None):
    """``int_{dOmega} h d(log rho)/dn dsigma`` over the staircase boundary.

    Each face carries the exact integral of ``d(log rho)/dn`` times the mean
    of ``h`` on the two adjacent cells.
    """
    grid = grid or h.grid
    hv = _values(h)
    m = region.mask(grid)
    r_e = np.exp(grid.s_edges)
    cos_e = np.cos(grid.theta_edges)
    total = 0.0
    # faces normal to e_r, between s-cells k and k+1
    flux_r = 2 * np.pi * r_e[1:-1, None] * (cos_e[None, :-1] - cos_e[None, 1:])
    jump = m[1:].astype(int) - m[:-1].astype(int)  # -1: outward +e_r, +1: outward -e_r
    hf = 0.5 * (hv[1:] + hv[:-1])
    total += float(np.sum(-jump * flux_r * hf))
    # faces normal to e_theta, between theta-cells j and j+1
    flux_t = 2 * np.pi * cos_e[None, 1:-1] * np.diff(r_e)[:, None]
    jump = m[:, 1:].astype(int) - m[:, :-1].astype(int)
    hf = 0.5 * (hv[:, 1:] + hv[:, :-1])
    total += float(np.sum(-jump * flux_t * hf))
    # region cells touching the outer edges of the patch
    if np.any(m[0]) or np.any(m[-1]):
        cap = cos_e[:-1] - cos_e[1:]
        lo = _edge_value(hv[0], hv[1])
        hi = _edge_value(hv[-1], hv[-2])
        total += float(np.sum(m[-1] * 2 * np.pi * r_e[-1] * cap * hi))
        total -= float(np.sum(m[0] * 2 * np.pi * r_e[0] * cap * lo))
    return total


# ---------------------------------------------------------------------------
# perturbation generators


def smoothstep(x):
    """Quintic smoothstep on [0, 1] (C2, flat at both ends)."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10 - 15 * x + 6 * x**2)


def smoothstep_prime(x):
    inside = (x > 0) & (x < 1)
    x = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30 * x**2 * (1 - x) ** 2, 0.0)


def _bump1d(xi):
    a = np.abs(xi)
    val = smoothstep(1 - a)
    der = -np.sign(xi) * smoothstep_prime(1 - a)
    return val, der


@dataclass(frozen=True)
class BumpShape:
    """Product bump ``B((s - s_c)/hs) * B((t - t_c)/ht)``.

    ``t`` is ``cos(theta)`` when ``in_cos`` is set, else ``theta``.
    """

    s_c: float
    hs: float
    t_c: float
    ht: float
    in_cos: bool
    scale: float = 1.0

    def __call__(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        bs, dbs = _bump1d((np.log(r) - self.s_c) / self.hs)
        t = np.cos(theta) if self.in_cos else theta
        bt, dbt = _bump1d((t - self.t_c) / self.ht)
        dt_dtheta = -np.sin(theta) if self.in_cos else 1.0
        v = self.scale * bs * bt
        dr = self.scale * dbs * bt / (self.hs * r)
        dth = self.scale * bs * dbt * dt_dtheta / self.ht
        return v, dr, dth


def _bump_shape(region: Region, kind: str, rng):
    if kind == "alpha":
        if region.kind not in ("annulus", "ball"):
            raise UsageError(f"alpha bumps need an annulus region, got {region.kind!r}")
        lo, hi = region.radial_extent()
        lo = lo if lo > 0 else hi * 1e-2
        s_lo, s_hi = np.log(lo), np.log(hi)
        half = 0.5 * (s_hi - s_lo) * rng.uniform(0.3, 0.9)
        s_c = rng.uniform(s_lo + half, s_hi - half)
        ht = rng.uniform(0.4, 1.2)
        t_c = rng.uniform(-0.6, 0.6)
        return BumpShape(s_c, half, t_c, ht, True)
    if kind in ("y", "em"):
        if region.kind not in ("omega", "omega_de"):
            raise UsageError(f"{kind} bumps need an omega-type region, got {region.kind!r}")
        r_lo, r_hi = region.radial_extent()
        eps = region.params[1]
        s_lo, s_hi = np.log(max(r_lo, 2.5 * eps)), np.log(r_hi)
        if s_hi <= s_lo:
            raise UsageError(f"region {region} too thin for an off-axis bump")
        half = 0.5 * (s_hi - s_lo) * rng.uniform(0.3, 0.9)
        s_c = rng.uniform(s_lo + half, s_hi - half)
        # keep rho > eps on the support, with margin
        th_a = np.arcsin(min(1.0, 1.25 * eps / np.exp(s_c - half)))
        span = np.pi / 2 - th_a
        ht = span * rng.uniform(0.3, 0.9)
        t_c = rng.uniform(th_a + ht, np.pi - th_a - ht)
        return BumpShape(s_c, half, t_c, ht, False)
    raise UsageError(f"unknown bump kind {kind!r}")


def bump_perturbation(region: Region, amplitude, profile_seed, kind, grid: AxisymGrid):
    """Compactly supported C2 bump(s) normalised to ``max |f| = |amplitude|``.

    ``kind`` is ``"alpha"`` (annulus, may reach the axis), ``"y"`` (omega-type
    region, kept off the axis) or ``"em"`` (tuple of three ``y``-type bumps
    for ``(dv, dchi, dpsi)``). The seed fixes centres, widths and signs.
    """
    rng = np.random.default_rng(int(profile_seed))
    n = 3 if kind == "em" else 1
    base = "y" if kind == "em" else kind
    out = []
    for _ in range(n):
        shape = _bump_shape(region, base, rng)
        sign = 1.0 if rng.uniform() < 0.5 else -1.0
        v, _, _ = shape(grid.R, grid.TH)
        peak = np.abs(v).max()
        if amplitude == 0:
            out.append(ScalarField.constant(grid, 0.0))
            continue
        if peak == 0:
            raise UsageError(f"bump for seed {profile_seed} is not resolved by {grid}")
        scaled = BumpShape(shape.s_c, shape.hs, shape.t_c, shape.ht, shape.in_cos,
                           sign * abs(float(amplitude)) / peak)
        out.append(ScalarField.from_sampler(grid, scaled))
    return tuple(out) if kind == "em" else out[0]


@dataclass(frozen=True)
class DecayProfile:
    """``amp * sin^p(theta) * r^k / (r0^2 + r^2)^{e/2}`` and its partials."""

    amp: float
    p: int
    k: float
    e: float
    r0: float = 0.5

    def __call__(self, r, theta):
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        s = np.sin(theta)
        q = self.r0**2 + r**2
        radial = r**self.k * q ** (-self.e / 2)
        radial_r = radial * (self.k / r - self.e * r / q)
        ang = s**self.p
        ang_t = self.p * s ** (self.p - 1) * np.cos(theta) if self.p else np.zeros_like(s)
        return self.amp * ang * radial, self.amp * ang * radial_r, self.amp * ang_t * radial


def class_member_vacuum(grid, lam=2.0, amp_U=0.1, amp_w=0.1, r0=0.5):
    """Smooth non-compact ``(dU, dw)`` with far-field decay set by ``lam``.

    ``dU = amp_U r0^2 / (r0^2 + r^2)`` and
    ``dw = amp_w sin^4 r^7 / (r0^2 + r^2)^{(lam + 4)/2}``, so ``dw`` vanishes
    to fourth order on the axis and ``|D dw| = rho^2 O(r^{-lam})`` at infinity.
    """
    dU = DecayProfile(amp_U * r0**2, 0, 0.0, 2.0, r0)
    dw = DecayProfile(amp_w, 4, 7.0, lam + 4.0, r0)
    return ScalarField.from_sampler(grid, dU), ScalarField.from_sampler(grid, dw)


def class_member_em(grid, psi0: ScalarField, lam=2.0, amp_U=0.1, amp_v=0.1, amp_chi=0.1,
                    amp_psi=0.1, r0=0.5):
    """Smooth ``(dU, dv, dchi, dpsi)`` respecting the axis condition.

    ``dchi`` and ``dpsi`` vanish like ``rho^2`` on the axis, and ``dv``
    carries the compensating term ``psi0 * dchi`` so that the change of
    ``omega`` stays ``O(rho^3)`` near the axis.
    """
    dU = ScalarField.from_sampler(grid, DecayProfile(amp_U * r0**2, 0, 0.0, 2.0, r0))
    dchi = ScalarField.from_sampler(grid, DecayProfile(amp_chi, 2, 6.0, lam + 4.0, r0))
    dpsi = ScalarField.from_sampler(grid, DecayProfile(amp_psi, 2, 6.0, lam + 4.0, r0))
    extra = ScalarField.from_sampler(grid, DecayProfile(amp_v, 4, 7.0, lam + 4.0, r0))
    v = psi0.values * dchi.values + extra.values
    dv = ScalarField(grid, v,
                     psi0.d_r * dchi.values + psi0.values * dchi.d_r + extra.d_r,
                     psi0.d_theta * dchi.values + psi0.values * dchi.d_theta + extra.d_theta,
                     _product_sampler(psi0.sampler, dchi.sampler, extra.sampler))
    return dU, dv, dchi, dpsi


def _product_sampler(f, g, h):
    if f is None or g is None or h is None:
        return None

    def p(r, theta):
        a, ar, at = f(r, theta)
        b, br, bt = g(r, theta)
        c, cr, ct = h(r, theta)
        return a * b + c, ar * b + a * br + cr, at * b + a * bt + ct
    return p


# ---------------------------------------------------------------------------
# background fields


def kerr_fields(grid: AxisymGrid, params, form="xY"):
    """Extreme Kerr map on the grid as a MapField (``form`` ``"xY"`` or ``"Uw"``)."""
    from .kerr_maps import extreme_kerr

    def comp(name, factor):
        def samp(r, theta):
            m = extreme_kerr(r, theta, params)
            return (factor * m.values[name], factor * m.dr[name], factor * m.dtheta[name])
        return ScalarField.from_sampler(grid, samp)

    if form == "xY":
        return MapField(grid, "H2", {"x": comp("x", 1.0), "Y": comp("Y", 1.0)})
    if form == "Uw":
        return MapField(grid, "H2", {"U": comp("x", -0.5), "w": comp("Y", 0.5)})
    raise UsageError(f"unknown Kerr field form {form!r}")


def kerr_newman_fields(grid: AxisymGrid, params):
    """Extreme Kerr-Newman map ``(U, v, chi, psi)`` on the grid."""
    from .kerr_maps import extreme_kerr_newman

    def comp(name):
        def samp(r, theta):
            m = extreme_kerr_newman(r, theta, params)
            return m.values[name], m.dr[name], m.dtheta[name]
        return ScalarField.from_sampler(grid, samp)

    return MapField(grid, "CH2", {k: comp(k) for k in ("U", "v", "chi", "psi")})


# ---------------------------------------------------------------------------
# CSV


def write_field_csv(target, fields: dict, grid: AxisymGrid | None = None):
    """Write ``s,theta,<columns>`` rows; floats use ``repr`` so they round-trip."""
    if isinstance(fields, MapField):
        grid = fields.grid
        fields = fields.components
    grid = grid or next(iter(fields.values())).grid
    names = list(fields)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "theta"] + names)
    cols = [_values(fields[k]).ravel() for k in names]
    for idx, (s, t) in enumerate(zip(grid.S.ravel(), grid.TH.ravel())):
        w.writerow([repr(float(s)), repr(float(t))] + [repr(float(c[idx])) for c in cols])
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)
    return text


def read_field_csv(source):
    """Inverse of :func:`write_field_csv`; returns ``(grid, {name: ScalarField})``."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:2] != ["s", "theta"]:
        raise DataError("field CSV must start with header 's,theta,...'")
    names = rows[0][2:]
    data = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float)
    s = np.unique(data[:, 0])
    t = np.unique(data[:, 1])
    if len(s) * len(t) != len(data):
        raise DataError("field CSV is not a tensor grid")
    grid = AxisymGrid.from_nodes(s, t)
    shape = (len(s), len(t))
    if not (np.array_equal(data[:, 0].reshape(shape)[:, 0], s)
            and np.array_equal(data[:, 1].reshape(shape)[0], t)):
        raise DataError("field CSV rows must be ordered s-major")
    fields = {n: ScalarField(grid, data[:, 2 + i].reshape(shape)) for i, n in enumerate(names)}
    return grid, fields
