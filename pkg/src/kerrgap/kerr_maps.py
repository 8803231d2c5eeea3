"""Closed-form extreme Kerr and extreme Kerr-Newman harmonic maps.

All evaluators are vectorized: ``r`` and ``theta`` may be arrays of a common
shape. Partial derivatives are hand-differentiated and returned alongside the
values; finite differences are used only in the tests.

Conventions
-----------
Kerr map (target H2): ``X0 = P sin^2(theta)`` with
``P = rt^2 + |J| + 2 |J|^{3/2} rt sin^2/Sigma``, ``rt = r + sqrt|J|``,
``Sigma = rt^2 + |J| cos^2``, and
``Y0 = 2 J (cos^3 - 3 cos) - 2 J |J| cos sin^4 / Sigma``.
The second term of ``Y0`` carries ``J |J|`` so the map stays harmonic for
``J < 0``; for ``J > 0`` this is the familiar ``J^2``.

Kerr-Newman map (target CH2): coordinates ``(u, v, chi, psi)``; the energy
variable is ``U = u + log(rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError, SingularEvaluationError

AXIS_TOL = 1e-8


@dataclass(frozen=True)
class KerrParams:
    J: float

    def __post_init__(self):
        if not np.isfinite(self.J) or self.J == 0:
            raise DomainError(f"angular momentum must be finite and nonzero, got {self.J}")

    @property
    def mass(self):
        return float(np.sqrt(abs(self.J)))


@dataclass(frozen=True)
class KerrNewmanParams:
    m: float
    a: float
    q: float

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.m, self.a, self.q)):
            raise DomainError("Kerr-Newman parameters must be finite")
        if self.m <= 0:
            raise DomainError(f"mass must be positive, got {self.m}")
        if abs(self.m**2 - self.a**2 - self.q**2) > 1e-12 * self.m**2:
            raise DomainError(
                f"extremality m^2 = a^2 + q^2 violated: {self.m**2!r} vs {self.a**2 + self.q**2!r}")

    @classmethod
    def from_charge(cls, a, q):
        """Extreme parameters with ``m = sqrt(a^2 + q^2)``."""
        return cls(float(np.hypot(a, q)), a, q)

    @property
    def J(self):
        return self.m * self.a


@dataclass
class MapSample:
    """Values and (r, theta) partials of named components at sample points."""

    values: dict
    dr: dict
    dtheta: dict
    omega: tuple | None = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def point(self):
        from .hyperbolic_targets import CH2Point, H2Point

        v = self.values
        if "chi" in v:
            return CH2Point(float(v["u"]), float(v["v"]), float(v["chi"]), float(v["psi"]))
        return H2Point(float(v["X"]), float(v["Y"]))

    @property
    def partials(self):
        return {k: (self.dr[k], self.dtheta[k]) for k in self.dr}


def _check_interior(r, theta):
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r <= 0):
        raise SingularEvaluationError("closed-form maps need r > 0; the origin is singular")
    if np.any((theta <= 0) | (theta >= np.pi)):
        raise SingularEvaluationError("theta on the axis; use axis_limits for axis values")
    return np.broadcast_arrays(r, theta)


def extreme_kerr(r, theta, params: KerrParams) -> MapSample:
    """The extreme Kerr map ``(X0, Y0)`` plus ``x0 = log X0 - 2 log rho``."""
    r, theta = _check_interior(r, theta)
    J = params.J
    j = abs(J)
    k = np.sqrt(j)
    c, s = np.cos(theta), np.sin(theta)
    R = r + k
    S = R**2 + j * c**2
    S2 = S**2
    A = R * s**2 / S
    A_r = s**2 * (S - 2 * R**2) / S2
    A_t = 2 * R * s * c * (S + j * s**2) / S2
    P = R**2 + j + 2 * j * k * A
    P_r = 2 * R + 2 * j * k * A_r
    P_t = 2 * j * k * A_t

    B = c * s**4 / S
    B_r = -2 * R * c * s**4 / S2
    B_t = (s**3 * (4 * c**2 - s**2) * S + 2 * j * c**2 * s**5) / S2
    Y = 2 * J * (c**3 - 3 * c) - 2 * J * j * B
    Y_r = -2 * J * j * B_r
    Y_t = 6 * J * s**3 - 2 * J * j * B_t

    X = P * s**2
    X_r = P_r * s**2
    X_t = P_t * s**2 + 2 * P * s * c
    x = np.log(P) - 2 * np.log(r)
    x_r = P_r / P - 2 / r
    x_t = P_t / P
    return MapSample(
        values={"X": X, "Y": Y, "x": x, "P": P},
        dr={"X": X_r, "Y": Y_r, "x": x_r},
        dtheta={"X": X_t, "Y": Y_t, "x": x_t},
    )


def kerr_potentials(r, theta, params: KerrParams) -> MapSample:
    """Potentials ``U0 = -x0/2 = log rho - log(X0)/2`` and ``w0 = Y0/2``."""
    m = extreme_kerr(r, theta, params)
    return MapSample(
        values={"U": -0.5 * m.values["x"], "w": 0.5 * m.values["Y"]},
        dr={"U": -0.5 * m.dr["x"], "w": 0.5 * m.dr["Y"]},
        dtheta={"U": -0.5 * m.dtheta["x"], "w": 0.5 * m.dtheta["Y"]},
    )


def extreme_kerr_newman(r, theta, params: KerrNewmanParams) -> MapSample:
    """The extreme Kerr-Newman map ``(u0, v0, chi0, psi0)``.

    Also returns ``U0 = u0 + log rho`` (smooth up to the axis) and the
    one-form ``omega0 = Dv + chi Dpsi - psi Dchi`` as ``(omega_r, omega_theta)``.
    """
    r, theta = _check_interior(r, theta)
    m, a, q = params.m, params.a, params.q
    a2, q2 = a * a, q * q
    c, s = np.cos(theta), np.sin(theta)
    R = r + m
    S = R**2 + a2 * c**2
    S2 = S**2

    g = 2 * m * R - q2
    F = s**2 * g / S
    F_r = s**2 * (2 * m * S - 2 * R * g) / S2
    F_t = 2 * s * c * g * (S + a2 * s**2) / S2
    P = R**2 + a2 + a2 * F
    P_r = 2 * R + a2 * F_r
    P_t = a2 * F_t

    U = np.log(r) - 0.5 * np.log(P)
    U_r = 1 / r - 0.5 * P_r / P
    U_t = -0.5 * P_t / P
    u = U - np.log(r * s)
    u_r = -0.5 * P_r / P
    u_t = U_t - c / s

    b = q2 * R - m * a2 * s**2
    N = b * c * s**2
    N_r = q2 * c * s**2
    N_t = -2 * m * a2 * s**3 * c**2 + b * s * (2 * c**2 - s**2)
    H = N / S
    H_r = (N_r * S - 2 * R * N) / S2
    H_t = (N_t * S + 2 * a2 * c * s * N) / S2
    v = m * a * c * (3 - c**2) - a * H
    v_r = -a * H_r
    v_t = -3 * m * a * s**3 - a * H_t

    K = R * s**2 / S
    K_r = s**2 * (S - 2 * R**2) / S2
    K_t = 2 * R * s * c * (S + a2 * s**2) / S2
    chi, chi_r, chi_t = -q * a * K, -q * a * K_r, -q * a * K_t

    L = (R**2 + a2) * c / S
    L_r = -2 * R * c * a2 * s**2 / S2
    L_t = (R**2 + a2) * s * (a2 * c**2 - R**2) / S2
    psi, psi_r, psi_t = q * L, q * L_r, q * L_t

    om_r = v_r + chi * psi_r - psi * chi_r
    om_t = v_t + chi * psi_t - psi * chi_t
    return MapSample(
        values={"u": u, "v": v, "chi": chi, "psi": psi, "U": U, "P": P},
        dr={"u": u_r, "v": v_r, "chi": chi_r, "psi": psi_r, "U": U_r},
        dtheta={"u": u_t, "v": v_t, "chi": chi_t, "psi": psi_t, "U": U_t},
        omega=(om_r, om_t),
    )


def axis_limits(params, branch="+"):
    """Exact axis values. ``branch`` is ``"+"`` for z > 0, ``"-"`` for z < 0.

    Kerr returns ``{"Y": -+4J, "w": -+2J}``; Kerr-Newman returns
    ``{"v": +-2ma, "chi": 0, "psi": +-q}``.
    """
    if branch in ("+", "z>0", 1):
        sgn = 1.0
    elif branch in ("-", "z<0", -1):
        sgn = -1.0
    else:
        raise DomainError(f"unknown axis branch {branch!r}")
    if isinstance(params, KerrParams):
        return {"Y": -4.0 * sgn * params.J, "w": -2.0 * sgn * params.J}
    if isinstance(params, KerrNewmanParams):
        return {"v": 2.0 * sgn * params.m * params.a, "chi": 0.0, "psi": sgn * params.q}
    raise DomainError(f"unsupported parameter type {type(params).__name__}")


@dataclass
class RateReport:
    scales: np.ndarray
    samples: np.ndarray
    fitted_exponent: float
    expected: float
    one_sided: bool
    regime: str
    passed: bool
    constant: float = field(default=np.nan)


def asymptotic_rate_check(sampler, expected, regime, *, scales=None, one_sided=False,
                          tol=0.1, n_scales=12):
    """Fit ``log|sampler(scale)|`` against ``log scale`` by least squares.

    ``regime`` is ``"r->inf"``, ``"r->0"`` or ``"rho->0"``. For a one-sided
    ``O(scale^p)`` claim the fit passes when the samples decay at least as
    fast as claimed (slope <= p + tol at infinity, slope >= p - tol at zero).
    """
    if scales is None:
        if regime == "r->inf":
            scales = np.geomspace(1e2, 1e5, n_scales)
        elif regime in ("r->0", "rho->0"):
            scales = np.geomspace(1e-5, 1e-2, n_scales)
        else:
            raise DomainError(f"unknown regime {regime!r}")
    scales = np.asarray(scales, dtype=float)
    if len(scales) < 8:
        raise DataError("rate fits need at least 8 scales")
    vals = np.abs(np.array([sampler(x) for x in scales], dtype=float))
    if not np.all(np.isfinite(vals)) or np.any(vals == 0):
        raise DataError("rate sampler returned non-finite or zero values")
    slope, icpt = np.polyfit(np.log(scales), np.log(vals), 1)
    if not one_sided:
        ok = abs(slope - expected) <= tol
    elif regime == "r->inf":
        ok = slope <= expected + tol
    else:
        ok = slope >= expected - tol
    return RateReport(scales, vals, float(slope), float(expected), one_sided, regime,
                      bool(ok), float(np.exp(icpt)))
