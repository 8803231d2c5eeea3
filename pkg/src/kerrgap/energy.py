"""Energy functionals and the energy/boundary identities.

Integrands (``g = 2 log rho``):

* ``M(x, Y)    = |Dx|^2 + e^{-2x} rho^{-4} |DY|^2``
* ``E(X, Y)    = (|DX|^2 + |DY|^2) / X^2`` with ``X = rho^2 e^x``
* ``I(U, w)    = |DU|^2 + e^{4U} rho^{-4} |Dw|^2``
* ``I(Psi)     = |DU|^2 + e^{4U} rho^{-4} |omega|^2 + e^{2U} rho^{-2} (|Dchi|^2 + |Dpsi|^2)``
  with ``omega = Dv + chi Dpsi - psi Dchi``
* ``E(Psi~)``  = the same with ``u = U - log rho`` in place of ``U`` and no
  ``rho`` weights.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError
from .fields_grid import (MapField, Region, ScalarField, boundary_flux_log_rho, gradient,
                          integrate, shell_density)

FUNCTIONALS = ("M", "E", "I_vac", "I_em", "E_em")


@dataclass
class EnergyReport:
    functional: str
    region: Region
    value: float
    terms: tuple
    tail_bound: float = 0.0

    def __post_init__(self):
        self.terms = tuple(float(t) for t in self.terms)

    @property
    def integrand_breakdown(self):
        return self.terms

    def csv_row(self):
        t = list(self.terms) + [0.0] * (3 - len(self.terms))
        return [self.functional, str(self.region), repr(self.value)] + [repr(x) for x in t] \
            + [repr(float(self.tail_bound))]


REPORT_HEADER = ["functional", "region", "value", "term1", "term2", "term3", "tail_bound"]


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for rep in reports:
        w.writerow(rep.csv_row())
    return buf.getvalue()


# ---------------------------------------------------------------------------
# tails


def tail_bound(densities, region: Region, grid):
    """Truncation estimate from exponential fits of the shell densities.

    ``densities`` is a list of per-term arrays from :func:`shell_density`.
    Each end of the radial range that the region leaves open is extrapolated
    by fitting ``log(dI/ds)`` over its last cells; a non-decaying density
    gives ``inf``.
    """
    lo, hi = region.radial_extent()
    total = 0.0
    d = np.sum(densities, axis=0)
    k = max(4, grid.n_r // 8)
    ends = []
    if lo == 0:
        ends.append((slice(0, k), grid.s_edges[0], 1.0))
    if not np.isfinite(hi):
        ends.append((slice(-k, None), grid.s_edges[-1], -1.0))
    for sl, s_edge, direction in ends:
        dd, ss = d[sl], grid.s_nodes[sl]
        if np.all(dd == 0):
            continue
        if np.any(dd <= 0):
            return np.inf
        p = np.polyfit(ss, np.log(dd), 1)[0]
        if direction * p <= 1e-3:
            return np.inf
        ref = dd[0] if direction > 0 else dd[-1]
        s_ref = ss[0] if direction > 0 else ss[-1]
        total += ref * np.exp(p * (s_edge - s_ref)) / abs(p)
    return float(total)


def _report(name, integrands, region, grid):
    region.check_coverage(grid)
    terms = [integrate(f, region, grid) for f in integrands]
    tail = 0.0
    if region.is_unbounded_on(grid):
        tail = tail_bound([shell_density(f, region, grid) for f in integrands], region, grid)
    return EnergyReport(name, region, float(np.sum(terms)), terms, tail)


def _same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if not g.same_nodes(f.grid):
            raise UsageError("fields must share a grid")
    return g


# ---------------------------------------------------------------------------
# integrands


def integrand_M(x: ScalarField, Y: ScalarField, analytic=True):
    g = _same_grid(x, Y)
    xr, xt = gradient(x, analytic)
    yr, yt = gradient(Y, analytic)
    return xr**2 + xt**2, np.exp(-2 * x.values) / g.rho**4 * (yr**2 + yt**2)


def integrand_I_vac(U: ScalarField, w: ScalarField, analytic=True):
    g = _same_grid(U, w)
    ur, ut = gradient(U, analytic)
    wr, wt = gradient(w, analytic)
    return ur**2 + ut**2, np.exp(4 * U.values) / g.rho**4 * (wr**2 + wt**2)


def omega_components(Psi: MapField, analytic=True):
    vr, vt = gradient(Psi["v"], analytic)
    cr, ct = gradient(Psi["chi"], analytic)
    pr, pt = gradient(Psi["psi"], analytic)
    chi, psi = Psi["chi"].values, Psi["psi"].values
    return vr + chi * pr - psi * cr, vt + chi * pt - psi * ct


def integrand_I_em(Psi: MapField, analytic=True):
    g = Psi.grid
    U = Psi["U"].values
    ur, ut = gradient(Psi["U"], analytic)
    om_r, om_t = omega_components(Psi, analytic)
    cr, ct = gradient(Psi["chi"], analytic)
    pr, pt = gradient(Psi["psi"], analytic)
    return (ur**2 + ut**2,
            np.exp(4 * U) / g.rho**4 * (om_r**2 + om_t**2),
            np.exp(2 * U) / g.rho**2 * (cr**2 + ct**2 + pr**2 + pt**2))


def integrand_E_em(Psi: MapField, analytic=True):
    """Harmonic-energy integrand of ``(u, v, chi, psi)`` with ``u = U - log rho``."""
    g = Psi.grid
    ur, ut = gradient(Psi["U"], analytic)
    ur = ur - 1 / g.R
    ut = ut - 1 / (np.tan(g.TH) * g.R)
    u = Psi["U"].values - np.log(g.rho)
    om_r, om_t = omega_components(Psi, analytic)
    cr, ct = gradient(Psi["chi"], analytic)
    pr, pt = gradient(Psi["psi"], analytic)
    return (ur**2 + ut**2,
            np.exp(4 * u) * (om_r**2 + om_t**2),
            np.exp(2 * u) * (cr**2 + ct**2 + pr**2 + pt**2))


def X_from_x(x: ScalarField) -> ScalarField:
    """``X = rho^2 e^x`` with chain-rule partials."""
    g = x.grid
    X = g.rho**2 * np.exp(x.values)
    if not x.has_partials:
        return ScalarField(g, X)
    return ScalarField(g, X, X * (x.d_r + 2 / g.R), X * (x.d_theta + 2 / np.tan(g.TH)))


def integrand_E(X: ScalarField, Y: ScalarField, analytic=True):
    _same_grid(X, Y)
    xr, xt = gradient(X, analytic)
    yr, yt = gradient(Y, analytic)
    X2 = X.values**2
    return (xr**2 + xt**2) / X2, (yr**2 + yt**2) / X2


# ---------------------------------------------------------------------------
# functionals


def reduced_energy_M(x: ScalarField, Y: ScalarField, region: Region, analytic=True):
    """Renormalized energy ``M_Omega(x, Y)``."""
    return _report("M", integrand_M(x, Y, analytic), region, x.grid)


def harmonic_energy_E(X: ScalarField, Y: ScalarField, region: Region, analytic=True):
    """Harmonic-map energy into the half-plane; diverges on the axis."""
    if region.touches_axis():
        raise DomainError(f"harmonic energy E is infinite on regions meeting the axis ({region})")
    return _report("E", integrand_E(X, Y, analytic), region, X.grid)


def functional_I_vacuum(U: ScalarField, w: ScalarField, region: Region, analytic=True):
    return _report("I_vac", integrand_I_vac(U, w, analytic), region, U.grid)


def em_energy_I(Psi: MapField, region: Region, analytic=True):
    return _report("I_em", integrand_I_em(Psi, analytic), region, Psi.grid)


def em_harmonic_energy_E(Psi: MapField, region: Region, analytic=True):
    if region.touches_axis():
        raise DomainError(f"harmonic energy E is infinite on regions meeting the axis ({region})")
    return _report("E_em", integrand_E_em(Psi, analytic), region, Psi.grid)


def evaluate(functional_id, fields: MapField, region: Region, analytic=True):
    """Dispatch by functional id: ``M`` (x, Y), ``I_vac`` (U, w), ``I_em`` (U, v, chi, psi)."""
    if functional_id == "M":
        return reduced_energy_M(fields["x"], fields["Y"], region, analytic)
    if functional_id == "I_vac":
        return functional_I_vacuum(fields["U"], fields["w"], region, analytic)
    if functional_id == "I_em":
        return em_energy_I(fields, region, analytic)
    raise UsageError(f"unknown functional {functional_id!r}")


def integrand(functional_id, fields: MapField, analytic=True):
    """Summed pointwise integrand of a functional."""
    if functional_id == "M":
        parts = integrand_M(fields["x"], fields["Y"], analytic)
    elif functional_id == "I_vac":
        parts = integrand_I_vac(fields["U"], fields["w"], analytic)
    elif functional_id == "I_em":
        parts = integrand_I_em(fields, analytic)
    else:
        raise UsageError(f"unknown functional {functional_id!r}")
    return np.sum(parts, axis=0)


def boundary_identity_defect(fields: MapField, region: Region, variant=None, analytic=True):
    """Defect of the exact energy/boundary identity on an axis-free region.

    ``vacuum`` (fields ``x, Y``): ``E - M - int dg/dn (g + 2x)``.
    ``em`` (fields ``U, v, chi, psi``): ``I - E - int dlog(rho)/dn (2U - log rho)``.
    Returns ``(defect, reference)`` with ``reference`` the value of ``E``.
    """
    variant = variant or ("em" if fields.target == "CH2" else "vacuum")
    if region.touches_axis():
        raise DomainError(f"boundary identity needs a region away from the axis, got {region}")
    grid = fields.grid
    log_rho = np.log(grid.rho)
    if variant == "vacuum":
        x, Y = fields["x"], fields["Y"]
        E = harmonic_energy_E(X_from_x(x), Y, region, analytic).value
        M = reduced_energy_M(x, Y, region, analytic).value
        # dg/dn = 2 dlog(rho)/dn
        flux = boundary_flux_log_rho(2 * (2 * log_rho + 2 * x.values), region, grid)
        return E - M - flux, E
    if variant == "em":
        I = em_energy_I(fields, region, analytic).value
        E = em_harmonic_energy_E(fields, region, analytic).value
        flux = boundary_flux_log_rho(2 * fields["U"].values - log_rho, region, grid)
        return I - E - flux, E
    raise UsageError(f"unknown identity variant {variant!r}")


def mass_lower_bound(I_value):
    """ADM mass lower bound ``I / (8 pi)``."""
    I_value = float(I_value)
    if not np.isfinite(I_value) or I_value < 0:
        raise DomainError(f"energy must be finite and nonnegative, got {I_value}")
    return I_value / (8 * np.pi)
