"""Geodesic deformation families, first and second variations, gap checks.

A family joins two map fields node by node along target geodesics:

* ``M``      fields ``(x, Y)``; target point ``(X, Y) = (rho^2 e^x, Y)`` in H2.
* ``I_vac``  fields ``(U, w)``; target point ``(rho^2 e^{-2U}, 2w)`` in H2.
* ``I_em``   fields ``(U, v, chi, psi)``; target point ``(U - log rho, v, chi, psi)`` in CH2.

Spatial partials of the interpolated fields are directional central
differences in target space: both endpoints are moved along their own
partials at once, which is exact up to the O(eta^2) truncation of a smooth
map. The distance gradient uses the same trick on ``sinh^2`` of the
distance, which stays smooth where the endpoints meet.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import energy
from .errors import InequalityViolation, UsageError
from .fields_grid import MapField, Region, ScalarField, divergence, gradient, integrate
from .hyperbolic_targets import (ch2_geodesic_field, ch2_sinh2_field, h2_geodesic_field,
                                 h2_sinh2_half_field)
from .sobolev import C_S, S3

FD_STEP_FIELD = 1e-5
FD_STEP_DIST = 1e-6
FIRST_STEP = 1e-3
SECOND_STEP = 1e-2
CONVEXITY_SLACK = 5e-2
FIRST_VARIATION_TOL = 1e-4

#: lemma constant ``c`` in ``d^2/dt^2 F >= c int |grad d|^2``
LEMMA_CONSTANT = {"M": 2.0, "I_vac": 0.5, "I_em": 2.0}
#: constant in ``gap >= c int |grad d|^2`` obtained by integrating twice in t
GAP_CONSTANT = {k: v / 2 for k, v in LEMMA_CONSTANT.items()}


def functional_for(fields: MapField):
    names = set(fields.names)
    if fields.target == "CH2" and {"U", "v", "chi", "psi"} <= names:
        return "I_em"
    if {"x", "Y"} <= names:
        return "M"
    if {"U", "w"} <= names:
        return "I_vac"
    raise UsageError(f"cannot infer functional from components {sorted(names)}")


# ---------------------------------------------------------------------------
# target-space adapters


class _Adapter:
    """Converts map fields to target coordinates and back, with partials."""

    def __init__(self, functional_id, grid):
        self.fid = functional_id
        self.grid = grid
        R, TH = grid.R, grid.TH
        self.log_rho = np.log(grid.rho)
        self.dlog_rho = (1 / R, 1 / np.tan(TH))  # (d/dr, d/dtheta)

    def to_target(self, m: MapField):
        """Stack ``(P, P_r, P_theta)`` each of shape ``grid.shape + (n,)``."""
        from .fields_grid import partials

        lr = (self.log_rho,) + self.dlog_rho
        if self.fid == "M":
            x, Y = m["x"], m["Y"]
            cx, cY = (x.values,) + partials(x), (Y.values,) + partials(Y)
            comps = [[cx[i] + 2 * lr[i], cY[i]] for i in range(3)]
        elif self.fid == "I_vac":
            U, w = m["U"], m["w"]
            cU, cw = (U.values,) + partials(U), (w.values,) + partials(w)
            comps = [[-2 * cU[i] + 2 * lr[i], 2 * cw[i]] for i in range(3)]
        else:
            c = {k: (m[k].values,) + partials(m[k]) for k in ("U", "v", "chi", "psi")}
            comps = [[c["U"][i] - lr[i], c["v"][i], c["chi"][i], c["psi"][i]] for i in range(3)]
        return tuple(np.stack(cs, axis=-1) for cs in comps)

    def from_target(self, P, Pr, Pt):
        g = self.grid
        lr = (self.log_rho,) + self.dlog_rho
        cols = [(P[..., k], Pr[..., k], Pt[..., k]) for k in range(P.shape[-1])]
        if self.fid == "M":
            x = [cols[0][i] - 2 * lr[i] for i in range(3)]
            return MapField(g, "H2", {"x": ScalarField(g, *x), "Y": ScalarField(g, *cols[1])})
        if self.fid == "I_vac":
            U = [-(cols[0][i] - 2 * lr[i]) / 2 for i in range(3)]
            w = [cols[1][i] / 2 for i in range(3)]
            return MapField(g, "H2", {"U": ScalarField(g, *U), "w": ScalarField(g, *w)})
        U = [cols[0][i] + lr[i] for i in range(3)]
        return MapField(g, "CH2", {"U": ScalarField(g, *U), "v": ScalarField(g, *cols[1]),
                                   "chi": ScalarField(g, *cols[2]), "psi": ScalarField(g, *cols[3])})

    def geodesic(self, P0, P1, t):
        if self.fid == "I_em":
            return ch2_geodesic_field(P0, P1, t)
        lx, Y = h2_geodesic_field(P0[..., 0], P0[..., 1], P1[..., 0], P1[..., 1], t)
        return np.stack([lx, Y], axis=-1)

    def sinh2(self, P0, P1):
        if self.fid == "I_em":
            return ch2_sinh2_field(P0, P1)
        return h2_sinh2_half_field(P0[..., 0], P0[..., 1], P1[..., 0], P1[..., 1])

    def distance_from_sinh2(self, Q):
        if self.fid == "I_em":
            return np.arcsinh(np.sqrt(Q))
        return 2 * np.arcsinh(np.sqrt(Q))

    def ddist_dQ(self, Q):
        root = np.sqrt(Q * (1 + Q))
        safe = np.where(Q > 0, root, 1.0)
        scale = 0.5 if self.fid == "I_em" else 1.0
        return np.where(Q > 0, scale / safe, 0.0)


def _steps(D0, D1, target):
    size = np.maximum(np.abs(D0).max(axis=-1), np.abs(D1).max(axis=-1))
    return np.where(size > 0, target / np.where(size > 0, size, 1.0), 1.0)[..., None]


# ---------------------------------------------------------------------------
# families


class GeodesicFamily:
    """Pointwise geodesic interpolation ``F_t`` between two map fields."""

    def __init__(self, map0: MapField, map1: MapField, functional_id=None):
        if not map0.grid.same_nodes(map1.grid):
            raise UsageError("family endpoints must share a grid")
        fid = functional_id or functional_for(map0)
        if functional_for(map1) != fid:
            raise UsageError("family endpoints have different component sets")
        self.functional_id = fid
        self.map0, self.map1 = map0, map1
        self.grid = map0.grid
        self._ad = _Adapter(fid, self.grid)
        self._P0 = self._ad.to_target(map0)
        self._P1 = self._ad.to_target(map1)
        self._cache = {}
        self.distance = self._distance_field()

    @property
    def endpoints(self):
        return self.map0, self.map1

    def _distance_field(self):
        (P0, P0r, P0t), (P1, P1r, P1t) = self._P0, self._P1
        ad = self._ad
        Q = ad.sinh2(P0, P1)
        grads = []
        for D0, D1 in ((P0r, P1r), (P0t, P1t)):
            h = _steps(D0, D1, FD_STEP_DIST)
            dQ = (ad.sinh2(P0 + h * D0, P1 + h * D1) - ad.sinh2(P0 - h * D0, P1 - h * D1)) / (2 * h[..., 0])
            grads.append(ad.ddist_dQ(Q) * dQ)
        d = ad.distance_from_sinh2(Q)
        return ScalarField(self.grid, d, grads[0], grads[1])

    def grad_distance_norm2(self):
        gr, gt = gradient(self.distance)
        return gr**2 + gt**2

    def at(self, t) -> MapField:
        t = float(t)
        if t in self._cache:
            return self._cache[t]
        (P0, P0r, P0t), (P1, P1r, P1t) = self._P0, self._P1
        ad = self._ad
        P = ad.geodesic(P0, P1, t)
        parts = []
        for D0, D1 in ((P0r, P1r), (P0t, P1t)):
            h = _steps(D0, D1, FD_STEP_FIELD)
            Pp = ad.geodesic(P0 + h * D0, P1 + h * D1, t)
            Pm = ad.geodesic(P0 - h * D0, P1 - h * D1, t)
            parts.append((Pp - Pm) / (2 * h))
        m = ad.from_target(P, *parts)
        if len(self._cache) < 64:
            self._cache[t] = m
        return m

    __call__ = at

    def energy(self, t, region: Region):
        return energy.evaluate(self.functional_id, self.at(t), region).value


def geodesic_family(map0: MapField, map1: MapField, functional_id=None):
    return GeodesicFamily(map0, map1, functional_id)


# ---------------------------------------------------------------------------
# derivatives in t


def _one_sided_first(f, h):
    return (-25 * f(0) + 48 * f(h) - 36 * f(2 * h) + 16 * f(3 * h) - 3 * f(4 * h)) / (12 * h)


def _centered_second(f, t, h):
    return (-f(t - 2 * h) + 16 * f(t - h) - 30 * f(t) + 16 * f(t + h) - f(t + 2 * h)) / (12 * h * h)


def first_variation(functional_id, family: GeodesicFamily, region: Region | None = None,
                    step=FIRST_STEP):
    """``d/dt F(F_t)`` at ``t = 0``: one-sided 5-point stencil plus one Richardson level."""
    region = region or Region("all")
    vals = {}

    def E(t):
        key = round(t, 15)
        if key not in vals:
            vals[key] = energy.evaluate(functional_id, family.at(t), region).value
        return vals[key]

    d1 = _one_sided_first(E, step)
    d2 = _one_sided_first(E, step / 2)
    return (16 * d2 - d1) / 15


@dataclass
class VariationReport:
    functional: str
    t: np.ndarray
    E: np.ndarray
    second_diff: np.ndarray
    rhs_bound: float
    lemma_constant: float
    dirichlet: float
    first_derivative: float = np.nan
    step: float = SECOND_STEP
    slack: float = CONVEXITY_SLACK
    E0: float = np.nan
    E1: float = np.nan

    @property
    def passes(self):
        return self.second_diff >= self.rhs_bound - self.slack * abs(self.rhs_bound)

    @property
    def convex(self):
        return bool(np.all(self.passes))

    @property
    def gap(self):
        return self.E1 - self.E0

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "E", "second_diff", "rhs_bound", "pass"])
        for t, e, s, p in zip(self.t, self.E, self.second_diff, self.passes):
            w.writerow([repr(float(t)), repr(float(e)), repr(float(s)), repr(float(self.rhs_bound)),
                        "true" if p else "false"])
        return buf.getvalue()


def second_variation_profile(functional_id, family: GeodesicFamily, t_grid=None,
                             region: Region | None = None, step=SECOND_STEP, with_first=False):
    """Second derivative of ``t -> F(F_t)`` with the lemma lower bound.

    Centered 5-point stencil at step ``h`` and ``h/2`` combined by one
    Richardson level. The bound is ``c int |grad d|^2`` over the region.
    """
    region = region or Region("all")
    t_grid = np.round(np.arange(1, 10) / 10, 12) if t_grid is None else np.asarray(t_grid, float)
    vals = {}

    def E(t):
        key = round(float(t), 13)
        if key not in vals:
            vals[key] = energy.evaluate(functional_id, family.at(t), region).value
        return vals[key]

    sec = []
    for t in t_grid:
        a = _centered_second(E, t, step)
        b = _centered_second(E, t, step / 2)
        sec.append((16 * b - a) / 15)
    c = LEMMA_CONSTANT[functional_id]
    dirichlet = integrate(family.grad_distance_norm2(), region, family.grid)
    rep = VariationReport(functional_id, np.asarray(t_grid), np.array([E(t) for t in t_grid]),
                          np.array(sec), c * dirichlet, c, dirichlet, step=step,
                          E0=E(0.0), E1=E(1.0))
    if with_first:
        rep.first_derivative = first_variation(functional_id, family, region)
    return rep


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals


@dataclass
class ELResidual:
    res_x: ScalarField
    res_Y: ScalarField
    norm_x: float
    norm_Y: float
    scale_x: float
    scale_Y: float

    @property
    def norm(self):
        return float(np.hypot(self.norm_x, self.norm_Y))

    @property
    def scale(self):
        return float(np.hypot(self.scale_x, self.scale_Y))

    @property
    def relative(self):
        return self.norm / self.scale


def el_residual_kerr(grid, params, region: Region | None = None, order=4):
    """Residuals of the harmonic-map equations at the extreme Kerr map.

    ``res_x = Lap(x0) + |DY0|^2 / X0^2`` (``Lap g = 0`` off the axis) and
    ``res_Y = Lap(Y0) - 2 <DY0, DX0> / X0``; Laplacians difference the
    analytic gradients (``order`` 4 or 2 in the interior). Norms are weighted
    L2 over the region.
    """
    from .fields_grid import kerr_fields

    region = region or Region("omega", (10.0, 0.2))
    m = kerr_fields(grid, params)
    x, Y = m["x"], m["Y"]
    X = energy.X_from_x(x)
    xr, xt = gradient(x)
    yr, yt = gradient(Y)
    Xr, Xt = gradient(X)
    src_x = (yr**2 + yt**2) / X.values**2
    src_Y = 2 * (yr * Xr + yt * Xt) / X.values
    res_x = divergence(xr, xt, grid, order) + src_x
    res_Y = divergence(yr, yt, grid, order) - src_Y

    def norm(a):
        return float(np.sqrt(integrate(a**2, region, grid)))

    return ELResidual(ScalarField(grid, res_x), ScalarField(grid, res_Y), norm(res_x), norm(res_Y),
                      norm(src_x), norm(src_Y))


def convergence_order(h, values):
    """Least-squares slope of ``log values`` against ``log h``."""
    return float(np.polyfit(np.log(h), np.log(values), 1)[0])


# ---------------------------------------------------------------------------
# gap inequality


@dataclass
class GapResult:
    functional: str
    gap: float
    dirichlet: float
    l6_term: float
    constant_used: float
    gap_constant: float
    tol: float = 0.0

    @property
    def ratio(self):
        return self.gap / self.l6_term if self.l6_term > 0 else np.inf

    @property
    def sobolev_ratio(self):
        return self.dirichlet / self.l6_term if self.l6_term > 0 else np.inf

    @property
    def gap_ok(self):
        return self.gap >= self.gap_constant * self.dirichlet - self.tol

    @property
    def sobolev_ok(self):
        return self.dirichlet >= self.l6_term / self.constant_used - self.tol

    @property
    def passed(self):
        return bool(self.gap_ok and self.sobolev_ok)


def gap_check(map1: MapField, functional_id=None, background: MapField | None = None,
              region: Region | None = None, tol=1e-10, strict=False):
    """Gap ``F(map) - F(background)`` against the Dirichlet and L6 routes.

    Returns a :class:`GapResult`; ``strict`` raises
    :class:`InequalityViolation` on failure.
    """
    if background is None:
        raise UsageError("gap_check needs the matched extremal background")
    fid = functional_id or functional_for(map1)
    region = region or Region("all")
    fam = GeodesicFamily(background, map1, fid)
    grid = fam.grid
    gap = (energy.evaluate(fid, map1, region).value - energy.evaluate(fid, background, region).value)
    dirichlet = integrate(fam.grad_distance_norm2(), region, grid)
    l6 = integrate(fam.distance.values**6, region, grid) ** (1 / 3)
    res = GapResult(fid, float(gap), float(dirichlet), float(l6), C_S, GAP_CONSTANT[fid], tol)
    if strict and not res.passed:
        raise InequalityViolation(
            f"{fid}: gap {res.gap:.6e}, c*dirichlet {res.gap_constant * res.dirichlet:.6e}, "
            f"S3*L6 {S3 * res.l6_term:.6e}")
    return res
