"""Geometry of the two harmonic-map targets.

* ``H2``: the right half-plane ``{X > 0}`` with metric ``(dX^2 + dY^2) / X^2``
  (curvature -1).
* ``CH2``: the complex hyperbolic plane in horospherical coordinates
  ``(u, v, chi, psi)`` with metric
  ``du^2 + e^{4u} (dv + chi dpsi - psi dchi)^2 + e^{2u} (dchi^2 + dpsi^2)``
  (sectional curvature in ``[-4, -1]``).

Scalar helpers take point objects. The ``*_field`` helpers are vectorized over
numpy arrays and are what the grid code uses; they rely on the closed-form
geodesics of the projective models, while :func:`ch2_geodesic` solves the
boundary-value problem by shooting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, DomainError

NEWTON_MAX_ITER = 50
ENDPOINT_TOL = 1e-9
CURVATURE_STEP = 1e-4
SHOT_BOUND = 1e3


@dataclass(frozen=True)
class H2Point:
    X: float
    Y: float

    def __post_init__(self):
        if not (np.isfinite(self.X) and np.isfinite(self.Y)):
            raise DomainError(f"non-finite H2 point {self!r}")
        if self.X <= 0:
            raise DomainError(f"H2 point needs X > 0, got X={self.X}")

    def as_array(self):
        return np.array([self.X, self.Y], dtype=float)


@dataclass(frozen=True)
class CH2Point:
    u: float
    v: float
    chi: float
    psi: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise DomainError(f"non-finite CH2 point {self!r}")

    def as_array(self):
        return np.array([self.u, self.v, self.chi, self.psi], dtype=float)


@dataclass
class GeodesicCurve:
    """Sampled constant-speed geodesic parametrized on ``[0, 1]``."""

    endpoints: tuple
    t: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    length: float
    residual: float = 0.0
    iterations: int = 0

    @property
    def samples(self):
        return list(zip(self.t, self.points, self.velocities))


# ---------------------------------------------------------------------------
# H2


def _h2_arr(p):
    if isinstance(p, H2Point):
        return p.as_array()
    p = np.asarray(p, dtype=float)
    H2Point(*p)
    return p


def h2_distance(p, q):
    """Half-plane distance between two points."""
    p, q = _h2_arr(p), _h2_arr(q)
    s = np.hypot(p[0] - q[0], p[1] - q[1]) / (2.0 * np.sqrt(p[0] * q[0]))
    return float(2.0 * np.arcsinh(s))


def h2_geodesic(p, q, t):
    """Point at parameter ``t`` on the constant-speed geodesic from p to q."""
    p, q = _h2_arr(p), _h2_arr(q)
    lx, Y = h2_geodesic_field(np.log(p[0]), p[1], np.log(q[0]), q[1], t)
    return H2Point(float(np.exp(lx)), float(Y))


def h2_metric(p):
    p = np.asarray(p, dtype=float)
    return np.eye(2) / p[..., 0, None, None] ** 2


def h2_christoffel(x):
    """Christoffel symbols ``Gamma[..., a, b, c]`` of the half-plane."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    inv = 1.0 / x[:, 0]
    G = np.zeros(x.shape[:1] + (2, 2, 2))
    G[:, 0, 0, 0] = -inv
    G[:, 0, 1, 1] = inv
    G[:, 1, 0, 1] = -inv
    G[:, 1, 1, 0] = -inv
    return G


def h2_log_metric(p):
    """Half-plane metric in the boundary-free chart ``(log X, Y)``: ``dl^2 + e^{-2l} dY^2``."""
    p = np.asarray(p, dtype=float)
    G = np.zeros(p.shape[:-1] + (2, 2))
    G[..., 0, 0] = 1.0
    G[..., 1, 1] = np.exp(-2 * p[..., 0])
    return G


def h2_log_christoffel(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    G = np.zeros(x.shape[:1] + (2, 2, 2))
    G[:, 0, 1, 1] = np.exp(-2 * x[:, 0])
    G[:, 1, 0, 1] = -1.0
    G[:, 1, 1, 0] = -1.0
    return G


def _normalized_h2(lx0, Y0, lx1, Y1):
    # isometry sending the first endpoint to (1, 0)
    a = np.exp(lx1 - lx0)
    b = (Y1 - Y0) * np.exp(-lx0)
    return a, b


def h2_sinh2_half_field(lx0, Y0, lx1, Y1):
    """``sinh^2(d/2)`` for points given as ``(log X, Y)``; smooth across the diagonal."""
    a, b = _normalized_h2(lx0, Y0, lx1, Y1)
    return (np.expm1(lx1 - lx0) ** 2 + b**2) / (4.0 * a)


def h2_distance_field(lx0, Y0, lx1, Y1):
    """Vectorized distance with points given as ``(log X, Y)``."""
    return 2.0 * np.arcsinh(np.sqrt(h2_sinh2_half_field(lx0, Y0, lx1, Y1)))


def h2_geodesic_field(lx0, Y0, lx1, Y1, t):
    """Vectorized geodesic interpolation in ``(log X, Y)`` coordinates.

    Where ``Y0 == Y1`` the result is the exact vertical geodesic
    ``log X_t = (1 - t) log X0 + t log X1``.
    """
    lx0, Y0, lx1, Y1 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (lx0, Y0, lx1, Y1)))
    a, b = _normalized_h2(lx0, Y0, lx1, Y1)
    D = h2_distance_field(lx0, Y0, lx1, Y1)
    w0, w1 = _sinh_weights(D, t)
    den = w0 + w1 / a
    lxh = -np.log(den)
    Yh = w1 * (b / a) / den
    vertical = Y0 == Y1
    lx_t = np.where(vertical, lx0 + t * (lx1 - lx0), lx0 + lxh)
    Y_t = np.where(vertical, Y0, Y0 + np.exp(lx0) * Yh)
    return lx_t, Y_t


def _sinh_weights(D, t):
    D = np.asarray(D, dtype=float)
    small = D < 1e-8
    Ds = np.where(small, 1.0, D)
    sh = np.sinh(Ds)
    w0 = np.where(small, 1.0 - t, np.sinh((1.0 - t) * Ds) / sh)
    w1 = np.where(small, t, np.sinh(t * Ds) / sh)
    return w0, w1


# ---------------------------------------------------------------------------
# CH2


def _ch2_arr(p):
    if isinstance(p, CH2Point):
        return p.as_array()
    p = np.asarray(p, dtype=float)
    CH2Point(*p)
    return p


def ch2_metric(p):
    """Metric tensor in coordinate order ``(u, v, chi, psi)``.

    Accepts a single point or an array of shape ``(..., 4)``.
    """
    p = np.asarray(p.as_array() if isinstance(p, CH2Point) else p, dtype=float)
    u, chi, psi = p[..., 0], p[..., 2], p[..., 3]
    w = np.stack([np.zeros_like(u), np.ones_like(u), -psi, chi], axis=-1)
    G = np.exp(4 * u)[..., None, None] * w[..., :, None] * w[..., None, :]
    e2 = np.exp(2 * u)
    G[..., 0, 0] += 1.0
    G[..., 2, 2] += e2
    G[..., 3, 3] += e2
    return G


def ch2_metric_derivatives(p):
    """``dG[..., k, i, j] = d G_ij / d x^k`` from the closed form."""
    p = np.asarray(p, dtype=float)
    u, chi, psi = p[..., 0], p[..., 2], p[..., 3]
    zero = np.zeros_like(u)
    one = np.ones_like(u)
    w = np.stack([zero, one, -psi, chi], axis=-1)
    e4 = np.exp(4 * u)[..., None, None]
    e2 = np.exp(2 * u)
    dG = np.zeros(p.shape[:-1] + (4, 4, 4))
    ww = w[..., :, None] * w[..., None, :]
    dG[..., 0, :, :] = 4 * e4 * ww
    dG[..., 0, 2, 2] += 2 * e2
    dG[..., 0, 3, 3] += 2 * e2
    # d w / d chi = e_psi, d w / d psi = -e_chi
    e_psi = np.stack([zero, zero, zero, one], axis=-1)
    e_chi = np.stack([zero, zero, -one, zero], axis=-1)
    for k, dw in ((2, e_psi), (3, e_chi)):
        dG[..., k, :, :] = e4 * (dw[..., :, None] * w[..., None, :] + w[..., :, None] * dw[..., None, :])
    return dG


def christoffel_from_metric(G, dG):
    """``Gamma[..., a, b, c]`` from the metric and its first derivatives."""
    Ginv = np.linalg.inv(G)
    # lowered: Gamma_{d b c} = (d_b G_dc + d_c G_db - d_d G_bc) / 2
    low = 0.5 * (np.einsum("...bdc->...dbc", dG) + np.einsum("...cdb->...dbc", dG) - dG)
    return np.einsum("...ad,...dbc->...abc", Ginv, low)


def ch2_christoffel(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return christoffel_from_metric(ch2_metric(x), ch2_metric_derivatives(x))


def _to_origin(u0, v0, z0, u1, v1, z1):
    # Heisenberg translation then dilation sending the first point to 0
    zh = np.exp(u0) * (z1 - z0)
    vh = np.exp(2 * u0) * (v1 - v0 + np.imag(np.conj(z0) * z1))
    return u1 - u0, vh, zh


def _from_origin(u0, v0, z0, uh, vh, zh):
    z = z0 + np.exp(-u0) * zh
    v = v0 + np.exp(-2 * u0) * vh - np.exp(-u0) * np.imag(np.conj(z0) * zh)
    return u0 + uh, v, z


def _sinh2_from_origin(uh, vh, zh):
    b = np.exp(-2 * uh)
    az = np.abs(zh) ** 2
    # every term is nonnegative, so no cancellation for nearby points
    return (np.expm1(-2 * uh) ** 2 + 2 * (1 + b) * az + az**2 + 4 * vh**2) / (4 * b)


def ch2_sinh2_field(P0, P1):
    """``sinh^2(d)`` between CH2 points; smooth across the diagonal."""
    P0, P1 = np.asarray(P0, dtype=float), np.asarray(P1, dtype=float)
    return _sinh2_from_origin(*_to_origin(P0[..., 0], P0[..., 1], P0[..., 2] + 1j * P0[..., 3],
                                          P1[..., 0], P1[..., 1], P1[..., 2] + 1j * P1[..., 3]))


def ch2_distance_field(P0, P1):
    """Vectorized closed-form distance; ``P0``, ``P1`` have shape ``(..., 4)``."""
    P0, P1 = np.asarray(P0, dtype=float), np.asarray(P1, dtype=float)
    uh, vh, zh = _to_origin(P0[..., 0], P0[..., 1], P0[..., 2] + 1j * P0[..., 3],
                            P1[..., 0], P1[..., 1], P1[..., 2] + 1j * P1[..., 3])
    return np.arcsinh(np.sqrt(_sinh2_from_origin(uh, vh, zh)))


def ch2_geodesic_field(P0, P1, t):
    """Vectorized closed-form geodesic point at parameter ``t``.

    Works in the projective model: after moving ``P0`` to the origin the
    endpoints lift to negative vectors of a Hermitian form of signature
    (2, 1), and the geodesic is the real span of phase-aligned normalized
    lifts. Where ``v, chi, psi`` agree the exact ``u``-line is returned.
    """
    P0, P1 = np.broadcast_arrays(np.asarray(P0, dtype=float), np.asarray(P1, dtype=float))
    u0, v0, z0 = P0[..., 0], P0[..., 1], P0[..., 2] + 1j * P0[..., 3]
    u1, v1, z1 = P1[..., 0], P1[..., 1], P1[..., 2] + 1j * P1[..., 3]
    uh, vh, zh = _to_origin(u0, v0, z0, u1, v1, z1)
    b = np.exp(-2 * uh)
    D = np.arcsinh(np.sqrt(_sinh2_from_origin(uh, vh, zh)))
    c = (-1 - np.abs(zh) ** 2 - b - 2j * vh) / (2 * np.sqrt(b))
    phase = -c / np.abs(c)
    w0, w1 = _sinh_weights(D, t)
    sb = np.sqrt(2 * b)
    L1 = w0 * (-1 / np.sqrt(2)) + w1 * phase * (-np.abs(zh) ** 2 - b + 2j * vh) / sb
    L2 = w1 * phase * np.sqrt(2) * zh / sb
    L3 = w0 / np.sqrt(2) + w1 * phase / sb
    Z1, Z2 = L1 / L3, L2 / L3
    zt = Z2 / np.sqrt(2)
    vt = np.imag(Z1) / 2
    ut = -0.5 * np.log(-np.real(Z1) - np.abs(zt) ** 2)
    u, v, z = _from_origin(u0, v0, z0, ut, vt, zt)
    line = (v0 == v1) & (z0 == z1)
    u = np.where(line, u0 + t * (u1 - u0), u)
    v = np.where(line, v0, v)
    z = np.where(line, z0, z)
    return np.stack([u, v, z.real, z.imag], axis=-1)


# ---------------------------------------------------------------------------
# shooting


def shoot_geodesics(christoffel: Callable, metric: Callable, p, q, *,
                    max_iter=NEWTON_MAX_ITER, tol=ENDPOINT_TOL, t_eval=None,
                    continuation_steps=8):
    """Solve the geodesic boundary-value problem for a batch of endpoint pairs.

    Newton iteration on the initial velocity, with the endpoint Jacobian from
    finite differences of the shot trajectories. Pairs that fail are retried
    by continuation along the coordinate chord. Returns ``(v0, result)``
    where ``result`` is the final ``solve_ivp`` output for the accepted
    velocities.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    v0, iters, res = _newton_shoot(christoffel, p, q, q - p, max_iter, tol)
    for i in np.flatnonzero(res > tol):
        v0[i], res[i] = _continuation(christoffel, p[i], q[i], max_iter, tol, continuation_steps)
    if np.any(res > tol):
        raise ConvergenceError(
            f"geodesic shooting did not reach tolerance {tol:g}; worst residual {res.max():.3e}",
            residual=float(res.max()))
    sol = _integrate(christoffel, p, v0, t_eval)
    return v0, sol, iters, res


def _rhs(christoffel, n, m):
    def f(_, y):
        Y = y.reshape(m, 2 * n)
        x, v = Y[:, :n], Y[:, n:]
        acc = -np.einsum("kabc,kb,kc->ka", christoffel(x), v, v)
        return np.concatenate([v, acc], axis=1).ravel()
    return f


def _escape(_, y):
    return SHOT_BOUND - np.abs(y).max()


_escape.terminal = True


def _integrate(christoffel, x0, v0, t_eval=None):
    """Shoot all trajectories to ``t = 1``; stops early (status 1) if any state leaves the box."""
    m, n = x0.shape
    y0 = np.concatenate([x0, v0], axis=1).ravel()
    return solve_ivp(_rhs(christoffel, n, m), (0.0, 1.0), y0, method="DOP853",
                     rtol=1e-13, atol=1e-13, t_eval=t_eval, events=_escape)


def _endpoints(christoffel, x0, v0):
    """Endpoints at ``t = 1``; rows of shots that blow up are NaN.

    A failed batch is bisected so that one bad shot does not spoil the rest.
    """
    m, n = x0.shape
    with np.errstate(all="ignore"):
        try:
            sol = _integrate(christoffel, x0, v0)
            ends = sol.y[:, -1].reshape(m, 2 * n)[:, :n] if sol.status == 0 else None
        except (np.linalg.LinAlgError, ValueError, OverflowError):
            ends = None
    if ends is not None and np.all(np.isfinite(ends)):
        return ends
    if m == 1:
        return np.full((1, n), np.nan)
    h = m // 2
    return np.concatenate([_endpoints(christoffel, x0[:h], v0[:h]),
                           _endpoints(christoffel, x0[h:], v0[h:])])


def _continuation(christoffel, p, q, max_iter, tol, steps, min_step=1.0 / 512):
    """Walk the target from ``p`` to ``q`` along the chord, halving the step on failure."""
    lam, dlam = 0.0, 1.0 / steps
    v = np.zeros_like(p)
    v_prev, lam_prev = v.copy(), 0.0
    res = np.inf
    while lam < 1.0:
        nxt = min(1.0, lam + dlam)
        # linear predictor in the homotopy parameter
        guess = v + (v - v_prev) * (nxt - lam) / (lam - lam_prev) if lam > 0 else (q - p) * nxt
        target = p + nxt * (q - p)
        vn, _, r = _newton_shoot(christoffel, p[None], target[None], guess[None], max_iter, tol)
        if r[0] <= tol:
            v_prev, lam_prev, v, lam = v, lam, vn[0], nxt
            res = r[0]
            dlam = min(2 * dlam, 1.0 / steps)
        else:
            dlam /= 2
            if dlam < min_step:
                return v, np.inf
    return v, res


def _newton_shoot(christoffel, p, q, v, max_iter, tol):
    """Damped Newton on the initial velocities with backtracking.

    A trial velocity whose shot blows up or whose endpoint residual does not
    decrease is pulled halfway back to the last accepted one. Converged pairs
    drop out.
    """
    m, n = p.shape
    v = v.copy()
    v_ok = np.zeros_like(v)
    res_ok = np.abs(q - p).max(axis=1)
    res = np.full(m, np.inf)
    active = np.arange(m)
    it = 0
    for it in range(1, max_iter + 1):
        pa, va = p[active], v[active]
        k = len(active)
        h = 1e-7 * np.maximum(1.0, np.abs(va).max(axis=1))
        # one batched solve: base trajectories plus n perturbed copies
        xs = np.concatenate([pa] * (n + 1))
        vs = np.concatenate([va] + [va + h[:, None] * np.eye(n)[j] for j in range(n)])
        ends = _endpoints(christoffel, xs, vs).reshape(n + 1, k, n)
        F = ends[0] - q[active]
        r = np.abs(F).max(axis=1)
        finite = np.all(np.isfinite(ends), axis=(0, 2))
        worse = ~finite | ~(r < res_ok[active])
        back = active[worse]
        v[back] = v_ok[back] + 0.5 * (v[back] - v_ok[back])
        good = ~worse
        acc = active[good]
        res[acc] = r[good]
        res_ok[acc] = r[good]
        v_ok[acc] = v[acc]
        todo = good & (r > tol)
        if np.any(todo):
            Jac = np.stack([(ends[j + 1] - ends[0]) / h[:, None] for j in range(n)], axis=-1)
            step = np.linalg.solve(Jac[todo], F[todo][..., None])[..., 0]
            # damp huge steps so the shot stays in a sane region
            scale = np.minimum(1.0, 5.0 / np.maximum(np.abs(step).max(axis=1), 1e-300))
            idx = active[todo]
            v[idx] = v[idx] - scale[:, None] * step
        active = active[todo | worse]
        if not len(active):
            break
    v[active] = v_ok[active]
    res[active] = res_ok[active]
    return v, it, res


def ch2_geodesic(p, q, n_samples=33):
    """Boundary-value geodesic between two CH2 points, by shooting."""
    pa, qa = _ch2_arr(p), _ch2_arr(q)
    t = np.linspace(0.0, 1.0, n_samples)
    if np.array_equal(pa, qa):
        pts = np.tile(pa, (n_samples, 1))
        return GeodesicCurve((p, q), t, pts, np.zeros_like(pts), 0.0)
    v0, sol, iters, res = shoot_geodesics(ch2_christoffel, ch2_metric, pa, qa, t_eval=t)
    traj = sol.y.reshape(1, 8, -1)[0]
    pts, vel = traj[:4].T, traj[4:].T
    length = float(np.sqrt(v0[0] @ ch2_metric(pa) @ v0[0]))
    return GeodesicCurve((p, q), t, pts, vel, length, float(res[0]), iters)


def ch2_distance(p, q):
    """Distance as the length of the shot geodesic."""
    return ch2_geodesic(p, q, n_samples=2).length


def geodesic_lengths(christoffel, metric, P, Q, chunk=1024):
    """Batched shooting distances, used as an ODE oracle.

    Pairs are solved in chunks so that one hard pair does not set the step
    size for all others.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    out = np.zeros(len(P))
    idx = np.flatnonzero(~np.all(P == Q, axis=1))
    for start in range(0, len(idx), chunk):
        k = idx[start:start + chunk]
        v0, *_ = shoot_geodesics(christoffel, metric, P[k], Q[k], t_eval=[0.0, 1.0])
        out[k] = np.sqrt(np.einsum("ka,kab,kb->k", v0, metric(P[k]), v0))
    return out


# ---------------------------------------------------------------------------
# curvature


def _metric_partials(metric_at, p, h):
    n = len(p)
    E = np.eye(n) * h
    d1 = np.array([(metric_at(p + E[a]) - metric_at(p - E[a])) / (2 * h) for a in range(n)])
    g0 = metric_at(p)
    d2 = np.empty((n, n) + g0.shape)
    for a in range(n):
        for b in range(n):
            if a == b:
                d2[a, a] = (metric_at(p + E[a]) - 2 * g0 + metric_at(p - E[a])) / h**2
            else:
                d2[a, b] = (metric_at(p + E[a] + E[b]) - metric_at(p + E[a] - E[b])
                            - metric_at(p - E[a] + E[b]) + metric_at(p - E[a] - E[b])) / (4 * h**2)
    return g0, d1, d2


def _sectional_at_step(metric_at, p, X, Y, h):
    g, d1, d2 = _metric_partials(metric_at, p, h)
    Gam = christoffel_from_metric(g, d1)
    # R_abcd = 1/2 (g_ad,bc + g_bc,ad - g_ac,bd - g_bd,ac) + g_ef (G^e_bc G^f_ad - G^e_bd G^f_ac)
    R = 0.5 * (np.einsum("bcad->abcd", d2) + np.einsum("adbc->abcd", d2)
               - np.einsum("bdac->abcd", d2) - np.einsum("acbd->abcd", d2))
    R += np.einsum("ef,ebc,fad->abcd", g, Gam, Gam) - np.einsum("ef,ebd,fac->abcd", g, Gam, Gam)
    num = np.einsum("abcd,a,b,c,d->", R, X, Y, X, Y)
    den = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    return num / den


def sectional_curvature(metric_at: Callable, p, span, h=CURVATURE_STEP):
    """Sectional curvature of the plane ``span`` at ``p`` from a metric sampler.

    Second derivatives of the metric come from central differences at step
    ``h`` and ``h / 2``, combined with one Richardson level.
    """
    p = np.asarray(p, dtype=float)
    X, Y = (np.asarray(s, dtype=float) for s in span)
    g = metric_at(p)
    den = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    if not den > 1e-14 * (X @ g @ X) * (Y @ g @ Y):
        raise DomainError("degenerate span for sectional curvature")
    k1 = _sectional_at_step(metric_at, p, X, Y, h)
    k2 = _sectional_at_step(metric_at, p, X, Y, h / 2)
    return float((4 * k2 - k1) / 3)


def kato_terms(metric_at, christoffel_at, curve, vector_field, s, h=1e-5):
    """Both sides of the Kato inequality along a curve at parameter ``s``.

    Returns ``(|d/ds |V||, |nabla_{c'} V|)``.
    """
    c = curve(s)
    cdot = (curve(s + h) - curve(s - h)) / (2 * h)
    V = vector_field(s)
    Vdot = (vector_field(s + h) - vector_field(s - h)) / (2 * h)

    def norm_at(t):
        W = vector_field(t)
        return np.sqrt(W @ metric_at(curve(t)) @ W)

    dnorm = (norm_at(s + h) - norm_at(s - h)) / (2 * h)
    Gam = np.asarray(christoffel_at(c)).reshape(len(c), len(c), len(c))
    cov = Vdot + np.einsum("abc,b,c->a", Gam, cdot, V)
    return abs(dnorm), float(np.sqrt(cov @ metric_at(c) @ cov))
