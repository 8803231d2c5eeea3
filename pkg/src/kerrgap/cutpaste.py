"""Cutoff families and the three-stage cut-and-paste operators.

Stages, applied in this order:

1. far:    ``F -> F0 + phi1_delta(r) (F - F0)`` (identity for r <= 1/delta,
   background for r >= 2/delta);
2. origin: the momentum-type components are pasted with ``phi_delta(r)``
   (background for r <= delta);
3. axis:   the same components are pasted with ``phi_eps(rho)``
   (background for rho <= eps).

Vacuum: ``U`` takes part only in stage 1, ``w`` in all three. Electromagnetic:
``U`` only in stage 1, ``(v, chi, psi)`` jointly in all three.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import energy
from .errors import ClassError, ConfigurationError, UsageError
from .fields_grid import AxisymGrid, MapField, Region, ScalarField, build_grid, integrate, smoothstep, \
    smoothstep_prime

DELTA_MIN = 1e-3
STAGES = ("far", "origin", "axis")


@dataclass(frozen=True)
class CutoffSpec:
    delta: float
    eps: float

    def __post_init__(self):
        d, e = float(self.delta), float(self.eps)
        if not (DELTA_MIN <= d < 0.5):
            raise ConfigurationError(f"delta must lie in [{DELTA_MIN}, 0.5), got {d}")
        if not (0 < e <= d * d):
            raise ConfigurationError(f"eps must satisfy 0 < eps <= delta^2, got eps={e}, delta={d}")

    def check_grid(self, grid: AxisymGrid):
        """Both pasting regions must contain grid nodes."""
        cyl = Region("cylinder", (self.delta, self.eps))
        wedge = Region("wedge", (self.delta, self.eps))
        for reg in (cyl, wedge):
            if not np.any(reg.mask(grid)):
                raise ConfigurationError(f"region {reg} has no nodes on {grid}")
        if grid.r_min > self.delta or grid.r_max < 2 / self.delta:
            raise ConfigurationError(
                f"grid r-range [{grid.r_min:.3g}, {grid.r_max:.3g}] must contain "
                f"[{self.delta:.3g}, {2 / self.delta:.3g}]")


def default_ladder(n=4, delta0=0.25):
    """``delta_k = delta0 * 2^{-k}``, ``eps_k = delta_k^4``."""
    return [CutoffSpec(delta0 * 2.0**-k, (delta0 * 2.0**-k) ** 4) for k in range(n)]


def cutoff(kind, coordinate, spec: CutoffSpec, derivative=False):
    """Cutoff value (and derivative in its own coordinate when requested).

    ``phi1_delta`` and ``phi_delta`` are quintic smoothsteps in ``r``; their
    slopes peak at ``1.875 delta`` and ``1.875 / delta``. ``phi_eps`` is the
    logarithmic profile on ``[eps, sqrt(eps)]``.
    """
    x = np.asarray(coordinate, dtype=float)
    d, e = spec.delta, spec.eps
    if kind == "phi1_delta":
        xi = x * d - 1.0
        val, der = 1.0 - smoothstep(xi), -d * smoothstep_prime(xi)
    elif kind == "phi_delta":
        xi = (x - d) / d
        val, der = smoothstep(xi), smoothstep_prime(xi) / d
    elif kind == "phi_eps":
        span = 0.5 * np.log(1 / e)
        inside = (x > e) & (x < np.sqrt(e))
        safe = np.where(inside, x, 1.0)
        val = np.where(x <= e, 0.0, np.where(x >= np.sqrt(e), 1.0, np.log(safe / e) / span))
        der = np.where(inside, 1.0 / (safe * span), 0.0)
    else:
        raise UsageError(f"unknown cutoff kind {kind!r}")
    if derivative:
        return val, der
    return val


def _cut_fields(grid, kind, spec):
    """Cutoff as node values with ``(d/dr, d/dtheta)`` partials."""
    if kind == "phi_eps":
        v, d = cutoff(kind, grid.rho, spec, True)
        return v, d * np.sin(grid.TH), d * grid.R * np.cos(grid.TH)
    v, d = cutoff(kind, grid.R, spec, True)
    return v, d, np.zeros_like(v)


def paste(F: ScalarField, F0: ScalarField, phi, D: ScalarField | None = None):
    """``F0 + phi (F - F0)`` with node-exact ends where ``phi`` is 0 or 1.

    ``D`` may carry ``F - F0`` exactly; near the axis the subtraction would
    otherwise lose the small difference to rounding.
    """
    p, pr, pt = phi
    D = F - F0 if D is None else D
    diff = D.values
    vals = np.where(p == 1, F.values, np.where(p == 0, F0.values, F0.values + p * diff))
    if not (F.has_partials and F0.has_partials and D.has_partials):
        return ScalarField(F.grid, vals)
    parts = []
    for dF, dF0, dD, dp in ((F.d_r, F0.d_r, D.d_r, pr), (F.d_theta, F0.d_theta, D.d_theta, pt)):
        mixed = dF0 + p * dD + dp * diff
        parts.append(np.where((p == 1) & (dp == 0), dF, np.where((p == 0) & (dp == 0), dF0, mixed)))
    return ScalarField(F.grid, vals, *parts)


def _scaled(phi, D: ScalarField):
    """``phi * D`` with product-rule partials."""
    p, pr, pt = phi
    if not D.has_partials:
        return ScalarField(D.grid, p * D.values)
    return ScalarField(D.grid, p * D.values, pr * D.values + p * D.d_r, pt * D.values + p * D.d_theta)


@dataclass
class CutPasteResult:
    spec: CutoffSpec
    original: MapField
    stages: dict = field(default_factory=dict)

    @property
    def final(self) -> MapField:
        return self.stages["axis"]


def cut_paste_vacuum(U: ScalarField, w: ScalarField, spec: CutoffSpec, U0: ScalarField,
                     w0: ScalarField, dU: ScalarField | None = None,
                     dw: ScalarField | None = None) -> CutPasteResult:
    """Three-stage paste of ``(U, w)`` onto the background ``(U0, w0)``.

    ``dU``, ``dw`` optionally give the differences to the background exactly.
    """
    grid = U.grid
    spec.check_grid(grid)
    dU = U - U0 if dU is None else dU
    dw = w - w0 if dw is None else dw
    far = _cut_fields(grid, "phi1_delta", spec)
    U1 = paste(U, U0, far, dU)
    w1 = paste(w, w0, far, dw)
    dw1 = _scaled(far, dw)
    org = _cut_fields(grid, "phi_delta", spec)
    w2 = paste(w1, w0, org, dw1)
    w3 = paste(w2, w0, _cut_fields(grid, "phi_eps", spec), _scaled(org, dw1))
    orig = MapField(grid, "H2", {"U": U, "w": w})
    return CutPasteResult(spec, orig, {
        "far": MapField(grid, "H2", {"U": U1, "w": w1}),
        "origin": MapField(grid, "H2", {"U": U1, "w": w2}),
        "axis": MapField(grid, "H2", {"U": U1, "w": w3}),
    })


def axis_defect(Psi: MapField, Psi0: MapField | None):
    """Axis values of ``(v, chi, psi) - background`` extrapolated in ``rho^2``.

    Uses the two node rows closest to each pole; returns the largest absolute
    extrapolated value over all radii. With ``Psi0=None`` the components of
    ``Psi`` are taken as the differences themselves.
    """
    g = Psi.grid
    worst = 0.0
    for rows in ((0, 1), (-1, -2)):
        rho2 = g.rho[:, rows[0]] ** 2, g.rho[:, rows[1]] ** 2
        for k in ("v", "chi", "psi"):
            d = Psi[k].values if Psi0 is None else Psi[k].values - Psi0[k].values
            d1, d2 = d[:, rows[0]], d[:, rows[1]]
            ext = (rho2[1] * d1 - rho2[0] * d2) / (rho2[1] - rho2[0])
            worst = max(worst, float(np.abs(ext).max()))
    return worst


def cut_paste_em(Psi: MapField, spec: CutoffSpec, Psi0: MapField, axis_tol=1e-6,
                 delta: MapField | None = None) -> CutPasteResult:
    """Three-stage paste of ``(U, v, chi, psi)`` onto the background ``Psi0``.

    ``delta`` optionally holds ``Psi - Psi0`` exactly. Raises
    :class:`ClassError` when the input changes the axis values of
    ``(v, chi, psi)``.
    """
    grid = Psi.grid
    spec.check_grid(grid)
    keys = ("v", "chi", "psi")
    D = {k: (Psi[k] - Psi0[k]) if delta is None else delta[k] for k in ("U",) + keys}
    scale = max(float(np.abs(D[k].values).max()) for k in keys)
    defect = axis_defect(MapField(grid, "CH2", D), None)
    if defect > axis_tol + 1e-4 * scale:
        raise ClassError(f"axis condition violated: (v, chi, psi) change by {defect:.3e} on the axis")
    far = _cut_fields(grid, "phi1_delta", spec)
    s1 = {k: paste(Psi[k], Psi0[k], far, D[k]) for k in ("U",) + keys}
    D1 = {k: _scaled(far, D[k]) for k in keys}
    org = _cut_fields(grid, "phi_delta", spec)
    s2 = dict(s1, **{k: paste(s1[k], Psi0[k], org, D1[k]) for k in keys})
    D2 = {k: _scaled(org, D1[k]) for k in keys}
    ax = _cut_fields(grid, "phi_eps", spec)
    s3 = dict(s2, **{k: paste(s2[k], Psi0[k], ax, D2[k]) for k in keys})
    return CutPasteResult(spec, Psi, {name: MapField(grid, "CH2", dict(s)) for name, s in
                                      (("far", s1), ("origin", s2), ("axis", s3))})


# ---------------------------------------------------------------------------
# convergence study


@dataclass
class StudyRow:
    delta: float
    eps: float
    stage: str
    delta_I: float
    fitted_exponent: float = np.nan


@dataclass
class StudyTable:
    functional: str
    rows: list
    axis_constants: list = field(default_factory=list)

    def stage(self, name):
        return [r for r in self.rows if r.stage == name]

    def values(self, name):
        return np.array([abs(r.delta_I) for r in self.stage(name)])

    def exponent(self, name):
        return self.stage(name)[0].fitted_exponent

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delta", "eps", "stage", "delta_I", "fitted_exponent"])
        for r in self.rows:
            w.writerow([repr(r.delta), repr(r.eps), r.stage, repr(float(r.delta_I)),
                        repr(float(r.fitted_exponent))])
        return buf.getvalue()


def _fit(x, y):
    y = np.abs(np.asarray(y, dtype=float))
    if len(y) < 2 or np.any(y == 0):
        return np.nan
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def convergence_study(fields: MapField, background: MapField, ladder=None, functional_id=None,
                      region: Region | None = None, perturbation: MapField | None = None):
    """Per-rung energy changes of each paste stage and fitted rates.

    Stage rows hold the change caused by that stage alone; the ``total`` row
    holds ``I(pasted) - I(original)``. Exponents are fitted against ``delta``
    (far, origin, total) and against ``1/|ln eps|`` (axis). Each difference is
    the integral of the integrand difference. ``perturbation`` optionally
    holds ``fields - background`` exactly.
    """
    ladder = list(ladder or default_ladder())
    deltas = [s.delta for s in ladder]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigurationError("ladder must have strictly decreasing delta")
    fid = functional_id or ("I_em" if fields.target == "CH2" else "I_vac")
    region = region or Region("all")
    grid = fields.grid
    base = energy.integrand(fid, fields)
    per = {s: [] for s in STAGES + ("total",)}
    for spec in ladder:
        if fid == "I_em":
            res = cut_paste_em(fields, spec, background, delta=perturbation)
        else:
            dU = perturbation["U"] if perturbation is not None else None
            dw = perturbation["w"] if perturbation is not None else None
            res = cut_paste_vacuum(fields["U"], fields["w"], spec, background["U"], background["w"],
                                   dU, dw)
        prev = base
        for name in STAGES:
            cur = energy.integrand(fid, res.stages[name])
            per[name].append(integrate(cur - prev, region, grid))
            prev = cur
        per["total"].append(integrate(prev - base, region, grid))
    inv_log = [1 / abs(np.log(s.eps)) for s in ladder]
    fits = {"far": _fit(deltas, per["far"]), "origin": _fit(deltas, per["origin"]),
            "axis": _fit(inv_log, per["axis"]), "total": _fit(deltas, per["total"])}
    rows = []
    for k, spec in enumerate(ladder):
        for name in STAGES + ("total",):
            rows.append(StudyRow(spec.delta, spec.eps, name, float(per[name][k]), fits[name]))
    consts = [abs(a) * abs(np.log(s.eps)) for a, s in zip(per["axis"], ladder)]
    return StudyTable(fid, rows, consts)


def select_rung(table: StudyTable, c0):
    """First rung whose total energy change is below ``c0``, or ``None``."""
    for row in table.stage("total"):
        if abs(row.delta_I) < c0:
            return row
    return None


def study_grid(ladder, r_max=1e6, cells_per_unit_s=20, ratio=1.15, n_uniform=24):
    """Grid resolving every rung: axis-graded in theta, log-uniform in r."""
    d_min = min(s.delta for s in ladder)
    e_min = min(s.eps for s in ladder)
    r_min = d_min / 4
    n_r = int(np.ceil(cells_per_unit_s * np.log(r_max / r_min)))
    theta_min = min(0.05, e_min * d_min / 4)
    return build_grid(r_min=r_min, r_max=r_max, n_r=n_r, n_theta=2 * n_uniform,
                      theta_min=theta_min, theta_ratio=ratio)
