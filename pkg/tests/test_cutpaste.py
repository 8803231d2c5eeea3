import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerrgap.cutpaste import (CutoffSpec, axis_defect, convergence_study, cut_paste_em,
                              cut_paste_vacuum, cutoff, default_ladder, paste, select_rung,
                              study_grid)
from kerrgap.errors import ClassError, ConfigurationError, UsageError
from kerrgap.fields_grid import (MapField, ScalarField, build_grid, class_member_em,
                                 class_member_vacuum, kerr_fields, kerr_newman_fields)
from kerrgap.kerr_maps import KerrNewmanParams, KerrParams

SPEC = CutoffSpec(0.25, 0.25**4)


@pytest.fixture(scope="module")
def sgrid():
    return study_grid(default_ladder(2), r_max=1e3)


@pytest.fixture(scope="module")
def vac(sgrid):
    B = kerr_fields(sgrid, KerrParams(1.0), "Uw")
    dU, dw = class_member_vacuum(sgrid)
    return B, dU, dw


@pytest.fixture(scope="module")
def em(sgrid):
    B = kerr_newman_fields(sgrid, KerrNewmanParams.from_charge(1.0, 1.0))
    D = dict(zip(("U", "v", "chi", "psi"), class_member_em(sgrid, B["psi"])))
    return B, MapField(sgrid, "CH2", D)


class TestCutoffs:
    @pytest.mark.parametrize("delta, eps", [(1e-4, 1e-8), (0.6, 0.1), (0.25, 0.1), (0.25, 0.0)])
    def test_spec_validation(self, delta, eps):
        with pytest.raises(ConfigurationError):
            CutoffSpec(delta, eps)

    def test_ladder(self):
        lad = default_ladder(4, 0.25)
        assert [s.delta for s in lad] == [0.25, 0.125, 0.0625, 0.03125]
        assert all(s.eps == s.delta**4 for s in lad)

    def test_plateaus(self):
        d = SPEC.delta
        r = np.array([0.5 / d, 1 / d, 2 / d, 3 / d])
        np.testing.assert_array_equal(cutoff("phi1_delta", r, SPEC), [1, 1, 0, 0])
        r = np.array([0.5 * d, d, 2 * d, 3 * d])
        np.testing.assert_array_equal(cutoff("phi_delta", r, SPEC), [0, 0, 1, 1])
        e = SPEC.eps
        rho = np.array([0.5 * e, e, np.sqrt(e), 2 * np.sqrt(e)])
        np.testing.assert_array_equal(cutoff("phi_eps", rho, SPEC), [0, 0, 1, 1])

    @pytest.mark.parametrize("kind, lo, hi", [("phi1_delta", 4.0, 8.0), ("phi_delta", 0.25, 0.5),
                                              ("phi_eps", 0.25**4, 0.25**2)])
    def test_derivative(self, kind, lo, hi):
        x = np.geomspace(lo * 1.01, hi * 0.99, 7)
        _, der = cutoff(kind, x, SPEC, derivative=True)
        h = 1e-7 * x
        fd = (cutoff(kind, x + h, SPEC) - cutoff(kind, x - h, SPEC)) / (2 * h)
        np.testing.assert_allclose(der, fd, rtol=1e-5)

    def test_log_profile_midpoint(self):
        np.testing.assert_allclose(cutoff("phi_eps", SPEC.eps ** 0.75, SPEC), 0.5, rtol=1e-12)

    def test_slope_bounds(self):
        r = np.geomspace(0.1, 20, 2001)
        assert np.abs(cutoff("phi1_delta", r, SPEC, True)[1]).max() <= 2 * SPEC.delta + 1e-12
        assert np.abs(cutoff("phi_delta", r, SPEC, True)[1]).max() <= 2 / SPEC.delta + 1e-12

    def test_unknown_kind(self):
        with pytest.raises(UsageError):
            cutoff("phi_x", 1.0, SPEC)

    def test_grid_too_small(self):
        g = build_grid(r_min=0.5, r_max=4.0, n_r=16, n_theta=16)
        with pytest.raises(ConfigurationError):
            SPEC.check_grid(g)


class TestPaste:
    @given(st.floats(0.0, 1.0))
    @settings(max_examples=10, deadline=None)
    def test_convex_combination(self, p):
        g = build_grid(r_min=0.5, r_max=4.0, n_r=8, n_theta=8)
        F = ScalarField(g, np.full(g.shape, 3.0), np.zeros(g.shape), np.zeros(g.shape))
        F0 = ScalarField(g, np.full(g.shape, 1.0), np.zeros(g.shape), np.zeros(g.shape))
        z = np.zeros(g.shape)
        out = paste(F, F0, (np.full(g.shape, p), z, z))
        np.testing.assert_allclose(out.values, 1.0 + 2.0 * p)

    def test_vacuum_stages(self, sgrid, vac):
        B, dU, dw = vac
        res = cut_paste_vacuum(B["U"] + dU, B["w"] + dw, SPEC, B["U"], B["w"], dU, dw)
        far = sgrid.R >= 2 / SPEC.delta
        near = sgrid.R <= SPEC.delta
        axis = sgrid.rho <= SPEC.eps
        fin = res.final
        np.testing.assert_array_equal(fin["U"].values[far], B["U"].values[far])
        np.testing.assert_array_equal(fin["w"].values[near | axis | far], B["w"].values[near | axis | far])
        # the origin cut leaves U untouched
        np.testing.assert_array_equal(res.stages["origin"]["U"].values, res.stages["far"]["U"].values)

    def test_em_axis_violation(self, sgrid, em):
        B, D = em
        bad = D.replace(chi=D["chi"] + ScalarField.constant(sgrid, 0.1))
        assert axis_defect(bad, None) > 0.05
        Psi = MapField(sgrid, "CH2", {k: B[k] + bad[k] for k in B.names})
        with pytest.raises(ClassError):
            cut_paste_em(Psi, SPEC, B, delta=bad)

    def test_em_keeps_axis(self, sgrid, em):
        B, D = em
        Psi = MapField(sgrid, "CH2", {k: B[k] + D[k] for k in B.names})
        res = cut_paste_em(Psi, SPEC, B, delta=D)
        axis = sgrid.rho <= SPEC.eps
        for k in ("v", "chi", "psi"):
            np.testing.assert_array_equal(res.final[k].values[axis], B[k].values[axis])


class TestStudy:
    def test_vacuum_energy_change_falls(self, sgrid, vac):
        B, dU, dw = vac
        P = MapField(sgrid, "H2", {"U": dU, "w": dw})
        F = B.replace(U=B["U"] + dU, w=B["w"] + dw)
        table = convergence_study(F, B, default_ladder(2), perturbation=P)
        tot = table.values("total")
        assert tot[1] < tot[0]
        assert len(table.rows) == 8 and len(table.axis_constants) == 2
        assert table.to_csv().startswith("delta,eps,stage,delta_I,fitted_exponent\n")
        assert select_rung(table, 1e9).delta == 0.25
        assert select_rung(table, 0.0) is None

    def test_ladder_order(self, sgrid, vac):
        B = vac[0]
        with pytest.raises(ConfigurationError):
            convergence_study(B, B, default_ladder(2)[::-1])
