import numpy as np
import pytest
from scipy.integrate import quad

from kerrgap import energy
from kerrgap.errors import DomainError, UsageError
from kerrgap.fields_grid import (MapField, Region, ScalarField, build_grid, kerr_fields,
                                 kerr_newman_fields)
from kerrgap.kerr_maps import KerrNewmanParams, KerrParams


def radial(grid, f, df):
    return ScalarField.from_sampler(grid, lambda r, t: (f(r) + 0 * t, df(r) + 0 * t, 0 * r * t))


class TestOracles:
    def test_radial_dirichlet(self):
        g = build_grid(r_min=0.1, r_max=4.0, n_r=512, n_theta=16)
        x = radial(g, lambda r: np.log(1 + r**2), lambda r: 2 * r / (1 + r**2))
        Y = ScalarField.constant(g, 0.0)
        reg = Region("annulus", (2.0, 0.5))
        ref = 4 * np.pi * quad(lambda r: (2 * r / (1 + r**2)) ** 2 * r**2, 0.5, 2.0)[0]
        val = energy.reduced_energy_M(x, Y, reg).value
        # cell-centre membership stairsteps the annulus; 512 cells keep that near 1e-2
        np.testing.assert_allclose(val, ref, rtol=1e-2)

    def test_vacuum_forms_agree(self, kerr_xY, kerr_Uw):
        reg = Region.parse("omega:10:0.2")
        M = energy.evaluate("M", kerr_xY, reg).value
        I = energy.evaluate("I_vac", kerr_Uw, reg).value
        np.testing.assert_allclose(I, M / 4, rtol=1e-12)

    def test_em_reduces_to_vacuum(self, grid):
        a = 1.0
        kn = kerr_newman_fields(grid, KerrNewmanParams(a, a, 0.0))
        k = kerr_fields(grid, KerrParams(a * a), "Uw")
        reg = Region.parse("omega:10:0.2")
        np.testing.assert_allclose(energy.evaluate("I_em", kn, reg).value,
                                   energy.evaluate("I_vac", k, reg).value, rtol=1e-10)

    def test_analytic_matches_fd(self, kerr_xY):
        reg = Region.parse("omega:10:0.2")
        a = energy.evaluate("M", kerr_xY, reg).value
        b = energy.evaluate("M", kerr_xY, reg, analytic=False).value
        np.testing.assert_allclose(a, b, rtol=2e-2)


class TestBoundaryIdentity:
    def test_kerr_defect_small(self):
        g = build_grid(r_min=0.4, r_max=6.0, n_r=128, n_theta=512)
        d, E = energy.boundary_identity_defect(kerr_fields(g, KerrParams(1.0)), Region.parse("omega:5:0.5"))
        assert abs(d) / abs(E) < 1e-4

    def test_em_defect_small(self):
        g = build_grid(r_min=0.4, r_max=6.0, n_r=128, n_theta=512)
        B = kerr_newman_fields(g, KerrNewmanParams.from_charge(1.0, 0.5))
        d, E = energy.boundary_identity_defect(B, Region.parse("omega:5:0.5"))
        assert abs(d) / abs(E) < 1e-4

    def test_axis_region_rejected(self, kerr_xY):
        with pytest.raises(DomainError):
            energy.boundary_identity_defect(kerr_xY, Region("annulus", (5, 0.5)))
        with pytest.raises(DomainError):
            energy.harmonic_energy_E(energy.X_from_x(kerr_xY["x"]), kerr_xY["Y"], Region("all"))


class TestReports:
    def test_tail_bound_finite_for_kerr(self, kerr_xY):
        rep = energy.evaluate("M", kerr_xY, Region("all"))
        assert np.isfinite(rep.tail_bound)
        assert rep.tail_bound < 0.05 * rep.value
        np.testing.assert_allclose(sum(rep.terms), rep.value)

    def test_tail_bound_infinite_when_growing(self, coarse_grid):
        x = radial(coarse_grid, lambda r: r**2, lambda r: 2 * r)
        rep = energy.reduced_energy_M(x, ScalarField.constant(coarse_grid, 0.0), Region("all"))
        assert rep.tail_bound == np.inf

    def test_csv(self, kerr_xY):
        text = energy.reports_to_csv([energy.evaluate("M", kerr_xY, Region.parse("ball:10"))])
        head, row = text.strip().split("\n")
        assert head.split(",") == energy.REPORT_HEADER
        assert row.startswith("M,ball:10.0,")

    def test_unknown_functional(self, kerr_xY):
        with pytest.raises(UsageError):
            energy.evaluate("Q", kerr_xY, Region("all"))

    def test_mass_bound(self):
        np.testing.assert_allclose(energy.mass_lower_bound(8 * np.pi), 1.0)
        with pytest.raises(DomainError):
            energy.mass_lower_bound(-1.0)
