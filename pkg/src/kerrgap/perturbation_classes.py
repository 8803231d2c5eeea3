"""Admissibility checks for the perturbation classes and their derived rates.

Class ids:

* ``vacuum_thm11``: differences ``(alpha, y)`` of ``(x, Y)`` from extreme Kerr,
  with ``alpha`` in H^1, ``alpha_- = min(0, alpha)`` bounded, ``y`` in
  ``H^1_{0, X0}``.
* ``chrusciel``: differences ``(dU, dw)`` with ``|D dw| <= C rho^2 r^-lam`` at
  infinity, ``C rho^2 r^(lam-6)`` at the origin and ``C rho^2`` near the axis.
* ``em_eq59``: differences ``(dU, dv, dchi, dpsi)`` with ``dU`` in H^1,
  ``(dU)_+`` bounded, ``omega - omega0`` in ``L^2_{e^{2U0}/rho^2}``, ``dchi``,
  ``dpsi`` in ``H^1_{0, e^{U0}/rho}`` and ``e^{U0} rho^-1 (dchi, dpsi)`` bounded.
* ``em_asymptotic``: the rates ``|omega| = rho^2 O(r^-lam)``,
  ``|Dchi|, |Dpsi| = rho O(r^-lam)`` at infinity, ``rho^2 O(r^(lam-6))`` and
  ``rho O(r^(lam-4))`` at the origin, ``O(rho^2)`` and ``O(rho)`` near the axis.

Every class also checks the axis condition (the momentum-type differences
vanish on the axis). Rates are one-sided: the fitted exponent must not be
worse than the class exponent by more than ``tol``; the sup of
``|f| / (rho^k r^p)`` over the fitting window is reported as the constant.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .energy import tail_bound
from .errors import ConfigurationError, DataError
from .fields_grid import MapField, Region, ScalarField, gradient, integrate, shell_density

CLASS_IDS = ("vacuum_thm11", "chrusciel", "em_eq59", "em_asymptotic")
MIN_DECADES = 1.5
REPORT_HEADER = ["condition", "measured", "threshold", "pass"]

_COMPONENTS = {
    "vacuum_thm11": ("x", "Y"),
    "chrusciel": ("U", "w"),
    "em_eq59": ("U", "v", "chi", "psi"),
    "em_asymptotic": ("U", "v", "chi", "psi"),
}
_AXIS_KEYS = {
    "vacuum_thm11": ("Y",),
    "chrusciel": ("w",),
    "em_eq59": ("v", "chi", "psi"),
    "em_asymptotic": ("v", "chi", "psi"),
}


@dataclass(frozen=True)
class ClassSpec:
    """Class id, decay exponent ``lam > 3/2`` and optional caps.

    ``bound_constants`` maps condition names to caps on the measured value;
    missing caps default to ``inf`` (finiteness only).
    """

    class_id: str
    lam: float = 2.0
    bound_constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.class_id not in CLASS_IDS:
            raise ConfigurationError(f"unknown class {self.class_id!r}; expected one of {CLASS_IDS}")
        if not (np.isfinite(self.lam) and self.lam > 1.5):
            raise ConfigurationError(f"lambda must exceed 3/2, got {self.lam}")
        for k, v in self.bound_constants.items():
            if not (float(v) > 0 and np.isfinite(float(v))):
                raise ConfigurationError(f"cap {k!r} must be finite and positive, got {v}")

    def cap(self, name):
        return float(self.bound_constants.get(name, np.inf))


@dataclass
class ClassReport:
    spec: ClassSpec
    rows: list
    sample_nodes: int

    @property
    def passed(self):
        return all(r[3] for r in self.rows)

    def row(self, condition):
        for r in self.rows:
            if r[0] == condition:
                return r
        raise KeyError(condition)

    def failures(self):
        return [r for r in self.rows if not r[3]]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for name, measured, threshold, ok in self.rows:
            w.writerow([name, repr(float(measured)), repr(float(threshold)), str(bool(ok)).lower()])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# measurements


def _weighted_norm(density, grid):
    """Grid integral plus the exponential tail estimate at both radial ends."""
    reg = Region("all", ())
    total = integrate(density, reg, grid)
    tail = tail_bound([shell_density(density, reg, grid)], reg, grid)
    return float(total + tail)


def _norm2(f: ScalarField):
    a, b = gradient(f)
    return a * a + b * b


def _windows(grid, r_near, r_far):
    lo = grid.R[:, 0] <= r_near
    hi = grid.R[:, 0] >= r_far
    for name, m, lo_r, hi_r in (("origin", lo, grid.r_min, r_near), ("infinity", hi, r_far, grid.r_max)):
        if np.count_nonzero(m) < 4 or np.log10(hi_r / lo_r) < MIN_DECADES:
            raise DataError(f"{name} window [{lo_r:.3g}, {hi_r:.3g}] spans less than "
                            f"{MIN_DECADES} decades")
    return lo, hi


def _axis_window(grid, axis_r, sin_max=0.1):
    """Theta rows near both poles and radial columns inside ``axis_r``."""
    sin_t = np.sin(grid.theta_nodes)
    rows = sin_t <= sin_max
    cols = (grid.R[:, 0] >= axis_r[0]) & (grid.R[:, 0] <= axis_r[1])
    if np.count_nonzero(rows) < 4 or not np.any(cols):
        raise DataError("no nodes near the axis inside the axis window")
    span = np.log10(sin_max / sin_t[rows].min())
    if span < MIN_DECADES:
        raise DataError(f"axis window spans {span:.2f} < {MIN_DECADES} decades in rho; "
                        "use an axis-graded theta grid")
    return rows, cols


def _fit_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x`` over the positive samples."""
    ok = y > 0
    if np.count_nonzero(ok) < 3:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _radial_rate(mag, grid, rho_pow, mask, at_infinity):
    """Fitted exponent of ``sup_theta |f| / rho^k`` against ``r`` on a radial window."""
    q = mag[mask] / grid.rho[mask] ** rho_pow
    sup = q.max(axis=1)
    p = _fit_slope(grid.R[mask, 0], sup)
    if p is None:
        p = -np.inf if at_infinity else np.inf
    return p, q, grid.R[mask]


def _rate_rows(name, mag, grid, rho_pow, exp_inf, exp_zero, windows, axis, tol):
    """Rows for the rates at infinity, origin and axis of one quantity."""
    rows = []
    lo, hi = windows
    p, q, R = _radial_rate(mag, grid, rho_pow, hi, True)
    const = float(np.max(q * R ** (-exp_inf))) if q.size else 0.0
    rows.append((f"{name}_rate_infinity", p, exp_inf + tol, p <= exp_inf + tol))
    rows.append((f"{name}_const_infinity", const, np.inf, np.isfinite(const)))
    p, q, R = _radial_rate(mag, grid, rho_pow, lo, False)
    const = float(np.max(q * R ** (-exp_zero))) if q.size else 0.0
    rows.append((f"{name}_rate_origin", p, exp_zero - tol, p >= exp_zero - tol))
    rows.append((f"{name}_const_origin", const, np.inf, np.isfinite(const)))
    rows_t, cols = axis
    sub = mag[np.ix_(cols, rows_t)]
    sin_t = np.sin(grid.theta_nodes[rows_t])
    sup = sub.max(axis=0)
    p = _fit_slope(sin_t, sup)
    p = np.inf if p is None else p
    rows.append((f"{name}_rate_axis", p, rho_pow - tol, p >= rho_pow - tol))
    return rows


def axis_values(f: ScalarField):
    """Axis values of ``f`` at every radius, extrapolated in ``rho^2`` from the two rows nearest each pole."""
    g = f.grid
    out = []
    for a, b in ((0, 1), (-1, -2)):
        r1, r2 = g.rho[:, a] ** 2, g.rho[:, b] ** 2
        out.append((r2 * f.values[:, a] - r1 * f.values[:, b]) / (r2 - r1))
    return np.concatenate(out)


def omega_difference(D: MapField, background: MapField):
    """``omega(Psi0 + D) - omega(Psi0)`` assembled from the differences.

    Avoids subtracting two nearly equal ``omega`` values near the axis.
    """
    gv = gradient(D["v"])
    gc, gp = gradient(D["chi"]), gradient(D["psi"])
    gc0, gp0 = gradient(background["chi"]), gradient(background["psi"])
    c0, p0 = background["chi"].values, background["psi"].values
    dc, dp = D["chi"].values, D["psi"].values
    return tuple(gv[i] + c0 * gp[i] + dc * gp0[i] + dc * gp[i]
                 - p0 * gc[i] - dp * gc0[i] - dp * gc[i] for i in range(2))


def hybrid_weight(U0: ScalarField):
    """Pointwise minimum of ``e^{U0}/rho`` and ``e^{2 U0}/rho^2``."""
    a = np.exp(U0.values) / U0.grid.rho
    return np.minimum(a, a * a)


# ---------------------------------------------------------------------------
# validation


def validate(perturbation: MapField, spec: ClassSpec, background: MapField, *, is_map=False,
             r_near=0.05, r_far=20.0, axis_r=(0.5, 2.0), tol=0.1, axis_tol=1e-8):
    """Check a perturbation (differences to ``background``) against its class.

    With ``is_map=True`` the first argument is the full map and the
    differences are formed here. Sup conditions are sampled at the grid
    nodes (``report.sample_nodes``). Raises :class:`DataError` when a fitting
    window spans less than 1.5 decades.
    """
    names = _COMPONENTS[spec.class_id]
    missing = [k for k in names if k not in perturbation.names or k not in background.names]
    if missing:
        raise DataError(f"class {spec.class_id} needs components {names}; missing {missing}")
    grid = perturbation.grid
    if not grid.same_nodes(background.grid):
        raise DataError("perturbation and background must share a grid")
    D = perturbation
    if is_map:
        D = MapField(grid, perturbation.target, {k: perturbation[k] - background[k] for k in names})
    rows = []
    cid = spec.class_id

    axis_scale = max(1.0, max(float(np.abs(background[k].values).max()) for k in _AXIS_KEYS[cid]))
    for k in _AXIS_KEYS[cid]:
        val = float(np.abs(axis_values(D[k])).max())
        thr = axis_tol * axis_scale
        rows.append((f"axis_value_{k}", val, thr, val <= thr))

    rho = grid.rho
    if cid == "vacuum_thm11":
        alpha, y = D["x"], D["Y"]
        X0 = rho**2 * np.exp(background["x"].values)
        a_minus = float(np.max(-np.minimum(alpha.values, 0.0)))
        rows.append(("sup_alpha_minus", a_minus, spec.cap("sup_alpha_minus"),
                     a_minus <= spec.cap("sup_alpha_minus")))
        for name, dens in (("norm_alpha_H1", _norm2(alpha)), ("norm_y_H1_X0", _norm2(y) / X0**2)):
            val = _weighted_norm(dens, grid)
            rows.append((name, val, spec.cap(name), bool(np.isfinite(val) and val <= spec.cap(name))))
    elif cid == "chrusciel":
        dU, dw = D["U"], D["w"]
        val = _weighted_norm(_norm2(dU), grid)
        rows.append(("norm_dU_H1", val, spec.cap("norm_dU_H1"),
                     bool(np.isfinite(val) and val <= spec.cap("norm_dU_H1"))))
        mag = np.sqrt(_norm2(dw))
        rows += _rate_rows("Dw", mag, grid, 2, -spec.lam, spec.lam - 6,
                           _windows(grid, r_near, r_far), _axis_window(grid, axis_r), tol)
    else:
        dU = D["U"]
        U0 = background["U"].values
        om = omega_difference(D, background)
        om_mag = np.sqrt(om[0] ** 2 + om[1] ** 2)
        if cid == "em_eq59":
            up = float(np.max(np.maximum(dU.values, 0.0)))
            rows.append(("sup_dU_plus", up, spec.cap("sup_dU_plus"), up <= spec.cap("sup_dU_plus")))
            weight = np.exp(U0) / rho
            for k in ("chi", "psi"):
                name = f"sup_weighted_d{k}"
                val = float(np.max(weight * np.abs(D[k].values)))
                rows.append((name, val, spec.cap(name), val <= spec.cap(name)))
            dens = {"norm_dU_H1": _norm2(dU),
                    "norm_domega_L2": weight**4 * om_mag**2,
                    "norm_dchi_H1": weight**2 * _norm2(D["chi"]),
                    "norm_dpsi_H1": weight**2 * _norm2(D["psi"])}
        else:
            win = _windows(grid, r_near, r_far)
            ax = _axis_window(grid, axis_r)
            lam = spec.lam
            rows += _rate_rows("omega", om_mag, grid, 2, -lam, lam - 6, win, ax, tol)
            for k in ("chi", "psi"):
                rows += _rate_rows(f"D{k}", np.sqrt(_norm2(D[k])), grid, 1, -lam, lam - 4, win, ax, tol)
            dens = {"norm_dU_H1": _norm2(dU),
                    "norm_dv_H1_hybrid": hybrid_weight(background["U"]) ** 2 * _norm2(D["v"])}
        for name, d in dens.items():
            val = _weighted_norm(d, grid)
            rows.append((name, val, spec.cap(name), bool(np.isfinite(val) and val <= spec.cap(name))))
    rows = [(n, float(m), float(t), bool(ok)) for n, m, t, ok in rows]
    return ClassReport(spec, rows, int(grid.R.size))


# ---------------------------------------------------------------------------
# derived rates


@dataclass(frozen=True)
class Rate:
    """``rho^k O(r^p)``; ``p`` is ignored in the axis regime."""

    rho_power: float
    r_exponent: float

    def __mul__(self, other):
        return Rate(self.rho_power + other.rho_power, self.r_exponent + other.r_exponent)

    def expression(self, regime):
        k = self.rho_power
        lead = "" if k == 0 else ("rho" if k == 1 else f"rho^{_fmt(k)}")
        if regime == "axis":
            return f"O({lead or '1'})"
        tail = f"O(r^{_fmt(self.r_exponent)})"
        return f"{lead}*{tail}" if lead else tail


def _fmt(x):
    x = float(x)
    return str(int(x)) if x == int(x) else f"{x:g}"


def _dominant(terms, regime):
    """Sum of rates, bounded with ``rho <= r`` to the smallest rho power."""
    k = min(t.rho_power for t in terms)
    if regime == "axis":
        return Rate(k, 0.0)
    lifted = [t.r_exponent + (t.rho_power - k) for t in terms]
    p = max(lifted) if regime == "infinity" else min(lifted)
    return Rate(k, p)


def derived_rates(spec: ClassSpec):
    """Rate table for ``(chi, psi, Dv)`` in the regimes infinity, origin, axis.

    Starts from the class rates of ``omega`` and ``Dchi, Dpsi``, integrates
    them perpendicular to the axis, and bounds
    ``|Dv| <= |omega| + |chi Dpsi - psi Dchi|``.
    Returns a list of ``(quantity, regime, Rate, expression)``.
    """
    lam = spec.lam
    base = {
        "infinity": (Rate(2, -lam), Rate(1, -lam)),
        "origin": (Rate(2, lam - 6), Rate(1, lam - 4)),
        "axis": (Rate(2, 0), Rate(1, 0)),
    }
    out = []
    for regime, (omega, dchi) in base.items():
        chi = Rate(dchi.rho_power + 1, dchi.r_exponent)
        # psi = const + rho^2 O(...); away from the axis rho^2 <= r^2 absorbs it
        psi = Rate(0, 0) if regime == "axis" else Rate(0, chi.r_exponent + chi.rho_power)
        dv = _dominant([omega, chi * dchi, psi * dchi], regime)
        for name, rate in (("chi", chi), ("psi", psi), ("Dv", dv)):
            out.append((name, regime, rate, rate.expression(regime)))
    return out


def rates_to_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["quantity", "regime", "rho_power", "r_exponent", "expression"])
    for name, regime, rate, expr in table:
        w.writerow([name, regime, _fmt(rate.rho_power), repr(float(rate.r_exponent)), expr])
    return buf.getvalue()
