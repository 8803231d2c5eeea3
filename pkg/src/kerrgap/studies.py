"""Study drivers shared by the command line and the acceptance suite.

Each driver returns a header and rows; a ``pass`` column, when present,
carries the check for that row.
"""
from __future__ import annotations

import numpy as np

from . import energy
from .cutpaste import convergence_study, default_ladder, study_grid
from .errors import ConfigurationError, DomainError
from .fields_grid import (MapField, Region, bump_perturbation, build_grid, class_member_em,
                          class_member_vacuum, kerr_fields, kerr_newman_fields)
from .hyperbolic_targets import (ch2_metric, ch2_sinh2_field, geodesic_lengths, h2_distance,
                                 h2_log_christoffel, h2_log_metric, kato_terms, sectional_curvature)
from .kerr_maps import KerrNewmanParams, KerrParams
from .variation import (CONVEXITY_SLACK, FIRST_VARIATION_TOL, GeodesicFamily, convergence_order,
                        el_residual_kerr, first_variation, gap_check, second_variation_profile)

SUPPORT_ALPHA = "annulus:10:0.1"
SUPPORT_Y = "omega:10:0.1"


def background_fields(grid, kind="kerr", J=1.0, m=None, a=1.0, q=1.0, functional=None):
    """Extremal background and the functional it is paired with.

    ``kerr`` gives ``(x, Y)`` for ``M`` or ``(U, w)`` for ``I_vac``; ``kn``
    gives ``(U, v, chi, psi)`` for ``I_em``.
    """
    if kind == "kerr":
        fid = functional or "M"
        if fid not in ("M", "I_vac"):
            raise ConfigurationError(f"functional {fid!r} does not apply to a Kerr background")
        return kerr_fields(grid, KerrParams(float(J)), "xY" if fid == "M" else "Uw"), fid
    if kind == "kn":
        fid = functional or "I_em"
        if fid != "I_em":
            raise ConfigurationError(f"functional {fid!r} does not apply to a Kerr-Newman background")
        params = KerrNewmanParams.from_charge(float(a), float(q)) if m is None \
            else KerrNewmanParams(float(m), float(a), float(q))
        return kerr_newman_fields(grid, params), fid
    raise ConfigurationError(f"unknown background {kind!r}; expected kerr or kn")


def perturbed_map(background: MapField, functional_id, amplitude, seed,
                  support_alpha=SUPPORT_ALPHA, support_y=SUPPORT_Y):
    """Background plus compactly supported bumps fixed by ``seed``.

    The first component gets an annulus bump; the momentum-type components
    get bumps kept off the axis.
    """
    grid = background.grid
    ann, om = Region.parse(support_alpha), Region.parse(support_y)
    seed = int(seed)
    da = bump_perturbation(ann, amplitude, 3 * seed, "alpha", grid)
    if functional_id == "I_em":
        dv, dc, dp = bump_perturbation(om, amplitude, 3 * seed + 1, "em", grid)
        B = background
        return B.replace(U=B["U"] + da, v=B["v"] + dv, chi=B["chi"] + dc, psi=B["psi"] + dp)
    dy = bump_perturbation(om, amplitude, 3 * seed + 1, "y", grid)
    a, y = ("x", "Y") if functional_id == "M" else ("U", "w")
    return background.replace(**{a: background[a] + da, y: background[y] + dy})


# ---------------------------------------------------------------------------
# drivers


def el_check(J=1.0, refinements=3, n0=32, r_min=0.1, r_max=20.0, region="omega:10:0.2",
             min_order=1.8, max_relative=1e-3):
    """Euler-Lagrange residuals of extreme Kerr on refined ``2n x n`` grids."""
    if refinements < 2:
        raise ConfigurationError("el-check needs at least two refinements")
    reg = Region.parse(region)
    out = []
    for k in range(refinements):
        n = n0 * 2**k
        g = build_grid(r_min=r_min, r_max=r_max, n_r=2 * n, n_theta=n)
        res = el_residual_kerr(g, KerrParams(float(J)), reg)
        out.append((2 * n, n, 1.0 / n, res.norm, res.relative))
    order = convergence_order([o[2] for o in out], [o[4] for o in out])
    rows = []
    for i, (nr, nt, h, norm, rel) in enumerate(out):
        ok = order >= min_order and (i < len(out) - 1 or rel <= max_relative)
        rows.append([nr, nt, h, norm, rel, order, ok])
    return ["n_r", "n_theta", "h", "residual", "relative", "order", "pass"], rows


def boundary_identity_study(fields_list, region="omega:5:0.5"):
    """Relative defects of the boundary identity for maps on refined grids.

    ``fields_list`` holds one map per refinement, coarse to fine.
    """
    reg = Region.parse(region)
    out = []
    for f in fields_list:
        d, E = energy.boundary_identity_defect(f, reg)
        out.append((f.grid.n_r, f.grid.n_theta, 1.0 / f.grid.n_r, d, abs(d) / abs(E)))
    return out


def first_variation_rows(background, fid, seeds, amplitude, region=SUPPORT_ALPHA):
    reg = Region.parse(region)
    rows = []
    for seed in seeds:
        m1 = perturbed_map(background, fid, amplitude, seed)
        fam = GeodesicFamily(background, m1, fid)
        d = first_variation(fid, fam, reg)
        E0 = energy.evaluate(fid, background, reg).value
        gap = energy.evaluate(fid, m1, reg).value - E0
        tol = FIRST_VARIATION_TOL * (abs(E0) + abs(gap))
        rows.append([fid, seed, amplitude, d, E0, gap, tol, abs(d) <= tol])
    return ["functional", "seed", "amplitude", "derivative", "E0", "gap", "tolerance", "pass"], rows


def convexity_rows(background, fid, seeds, amplitude, region=SUPPORT_ALPHA):
    """Per-family summary rows and the concatenated profiles."""
    reg = Region.parse(region)
    rows, prof = [], []
    for seed in seeds:
        m1 = perturbed_map(background, fid, amplitude, seed)
        rep = second_variation_profile(fid, GeodesicFamily(background, m1, fid), region=reg)
        thr = rep.rhs_bound - CONVEXITY_SLACK * abs(rep.rhs_bound)
        margin = float(np.min(rep.second_diff - thr))
        bad = int(np.count_nonzero(~rep.passes))
        rows.append([fid, seed, amplitude, float(rep.second_diff.min()), rep.rhs_bound, margin, bad,
                     rep.convex])
        for t, e, s, p in zip(rep.t, rep.E, rep.second_diff, rep.passes):
            prof.append([f"{fid}:{seed}", t, e, s, rep.rhs_bound, bool(p)])
    head = ["functional", "seed", "amplitude", "min_second_diff", "rhs_bound", "margin",
            "violations", "pass"]
    return head, rows, ["family", "t", "E", "second_diff", "rhs_bound", "pass"], prof


def gap_rows(background, fid, seeds, amplitudes):
    rows = []
    for amp in amplitudes:
        for seed in seeds:
            m1 = perturbed_map(background, fid, amp, seed)
            res = gap_check(m1, fid, background)
            rows.append([seed, amp, res.gap, res.dirichlet, res.l6_term, res.ratio,
                         res.sobolev_ratio, res.passed])
    return ["seed", "amplitude", "gap", "dirichlet", "l6_term", "ratio", "sobolev_ratio", "pass"], rows


def cutpaste_rows(kind="kerr", J=1.0, a=1.0, q=1.0, lam=2.0, n_rungs=4, delta0=0.25,
                  exponent_tol=0.3, axis_factor=2.0):
    """Ladder study on a class member; returns the study table and its checks."""
    ladder = default_ladder(n_rungs, delta0)
    grid = study_grid(ladder)
    if kind == "kerr":
        B = kerr_fields(grid, KerrParams(float(J)), "Uw")
        dU, dw = class_member_vacuum(grid, lam)
        P = MapField(grid, "H2", {"U": dU, "w": dw})
        fields = B.replace(U=B["U"] + dU, w=B["w"] + dw)
    elif kind == "kn":
        B = kerr_newman_fields(grid, KerrNewmanParams.from_charge(float(a), float(q)))
        dU, dv, dc, dp = class_member_em(grid, B["psi"], lam)
        P = MapField(grid, "CH2", {"U": dU, "v": dv, "chi": dc, "psi": dp})
        fields = B.replace(U=B["U"] + dU, v=B["v"] + dv, chi=B["chi"] + dc, psi=B["psi"] + dp)
    else:
        raise ConfigurationError(f"unknown background {kind!r}")
    table = convergence_study(fields, B, ladder, perturbation=P)
    return table, cutpaste_checks(table, lam, exponent_tol, axis_factor)


def cutpaste_checks(table, lam=2.0, exponent_tol=0.3, axis_factor=2.0):
    """Monotone total, far exponent near ``2 lam - 3``, axis constants within a factor.

    The axis check is one-sided: ``C_k = |dI_axis| |ln eps_k|`` may fall but
    must not exceed ``axis_factor * C_1``.
    """
    tot = table.values("total")
    # |dI| must fall from rung 1 onwards
    drops = np.diff(tot)
    mono = bool(np.all(drops < 0))
    far = table.exponent("far")
    C = np.array(table.axis_constants)
    spread = float(C.max() / C[0]) if C[0] > 0 else np.inf
    return [
        ["total_monotone_after_rung1", float(drops.max()) if drops.size else 0.0, 0.0, mono],
        ["far_exponent", far, 2 * lam - 3, bool(abs(far - (2 * lam - 3)) <= exponent_tol)],
        ["axis_constant_ratio", spread, axis_factor, bool(spread <= axis_factor)],
    ]


def curvature_audit(n_pairs=1000, n_points=200, seed=0, n_ch2_pairs=16):
    """Geometry checks of both targets; rows ``check, measured, threshold, pass``."""
    rng = np.random.default_rng(seed)
    rows = []
    # H2 closed form vs the geodesic ODE in the (log X, Y) chart
    P = np.c_[rng.uniform(-2, 2, n_pairs), rng.uniform(-3, 3, n_pairs)]
    Q = np.c_[rng.uniform(-2, 2, n_pairs), rng.uniform(-3, 3, n_pairs)]
    ode = geodesic_lengths(h2_log_christoffel, h2_log_metric, P, Q)
    closed = np.array([h2_distance((np.exp(p[0]), p[1]), (np.exp(q[0]), q[1])) for p, q in zip(P, Q)])
    err = float(np.abs(ode - closed).max())
    rows.append(["h2_distance_vs_ode", err, 1e-8, err <= 1e-8])
    # CH2 closed form vs the ODE
    from .hyperbolic_targets import ch2_christoffel
    P4 = rng.uniform(-1, 1, (n_ch2_pairs, 4))
    Q4 = rng.uniform(-1, 1, (n_ch2_pairs, 4))
    ode4 = geodesic_lengths(ch2_christoffel, ch2_metric, P4, Q4)
    err4 = float(np.abs(ode4 - np.arcsinh(np.sqrt(ch2_sinh2_field(P4, Q4)))).max())
    rows.append(["ch2_distance_vs_ode", err4, 1e-8, err4 <= 1e-8])
    # sectional curvatures of CH2 at random points and planes
    worst, lo = -np.inf, np.inf
    for _ in range(n_points):
        p = rng.uniform(-1, 1, 4)
        X, Y = rng.normal(size=4), rng.normal(size=4)
        try:
            k = sectional_curvature(ch2_metric, p, (X, Y))
        except DomainError:
            continue
        worst, lo = max(worst, k), min(lo, k)
    rows.append(["ch2_max_sectional_curvature", worst, 1e-6, worst <= 1e-6])
    rows.append(["ch2_min_sectional_curvature", lo, -4.0 - 1e-4, lo >= -4.0 - 1e-4])
    # the (u, v) slice has curvature -4
    e_u, e_v = np.eye(4)[0], np.eye(4)[1]
    sl = max(abs(sectional_curvature(ch2_metric, rng.uniform(-1, 1, 4), (e_u, e_v)) + 4.0)
             for _ in range(10))
    rows.append(["ch2_slice_curvature_error", sl, 1e-4, sl <= 1e-4])
    # Kato inequality along random curves with random fields
    viol, gap_min = 0, np.inf
    from .hyperbolic_targets import ch2_christoffel as chr4
    for _ in range(n_pairs):
        c0, c1, c2 = rng.normal(size=(3, 4)) * 0.5
        A, B = rng.normal(size=(2, 4))

        def curve(s, c0=c0, c1=c1, c2=c2):
            return c0 + s * c1 + s * s * c2

        def field(s, A=A, B=B):
            return A + np.sin(s) * B

        s = rng.uniform(-0.5, 0.5)
        lhs, rhs = kato_terms(ch2_metric, lambda x: chr4(x)[0], curve, field, s)
        gap_min = min(gap_min, rhs - lhs)
        viol += bool(lhs > rhs * (1 + 1e-6) + 1e-9)
    rows.append(["kato_violations", viol, 0, viol == 0])
    rows.append(["kato_min_margin", gap_min, -1e-6, gap_min >= -1e-6])
    return ["check", "measured", "threshold", "pass"], rows
