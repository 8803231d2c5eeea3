import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerrgap.errors import ConfigurationError, DataError
from kerrgap.fields_grid import (MapField, ScalarField, build_grid, class_member_em,
                                 class_member_vacuum, kerr_fields, kerr_newman_fields)
from kerrgap.kerr_maps import KerrNewmanParams, KerrParams
from kerrgap.perturbation_classes import (CLASS_IDS, REPORT_HEADER, ClassSpec, Rate, _dominant,
                                          axis_values, derived_rates, hybrid_weight, rates_to_csv,
                                          validate)


@pytest.fixture(scope="module")
def wide():
    return build_grid(r_min=1e-3, r_max=1e3, n_r=128, n_theta=64, theta_min=1e-4)


def member(grid, class_id, lam=2.0):
    if class_id.startswith("em"):
        B = kerr_newman_fields(grid, KerrNewmanParams.from_charge(1.0, 1.0))
        D = dict(zip(("U", "v", "chi", "psi"), class_member_em(grid, B["psi"], lam)))
        return MapField(grid, "CH2", D), B
    dU, dw = class_member_vacuum(grid, lam)
    if class_id == "chrusciel":
        return MapField(grid, "H2", {"U": dU, "w": dw}), kerr_fields(grid, KerrParams(1.0), "Uw")
    return (MapField(grid, "H2", {"x": dU * -2.0, "Y": dw * 2.0}),
            kerr_fields(grid, KerrParams(1.0), "xY"))


class TestSpec:
    @pytest.mark.parametrize("kw", [dict(class_id="nope"), dict(class_id="em_eq59", lam=1.5),
                                    dict(class_id="em_eq59", lam=np.nan),
                                    dict(class_id="em_eq59", bound_constants={"x": -1.0})])
    def test_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            ClassSpec(**kw)

    def test_default_cap(self):
        assert ClassSpec("chrusciel").cap("anything") == np.inf


class TestValidate:
    @pytest.mark.parametrize("class_id", CLASS_IDS)
    def test_members_pass(self, wide, class_id):
        P, B = member(wide, class_id)
        rep = validate(P, ClassSpec(class_id), B)
        assert rep.passed, rep.failures()
        assert rep.sample_nodes == wide.R.size
        assert rep.to_csv().split("\n")[0].split(",") == REPORT_HEADER

    def test_full_map_input(self, wide):
        P, B = member(wide, "chrusciel")
        full = MapField(wide, "H2", {k: B[k] + P[k] for k in ("U", "w")})
        a = validate(P, ClassSpec("chrusciel"), B)
        b = validate(full, ClassSpec("chrusciel"), B, is_map=True)
        np.testing.assert_allclose(a.row("norm_dU_H1")[1], b.row("norm_dU_H1")[1], rtol=1e-10)

    def test_axis_counterexample(self, wide):
        P, B = member(wide, "em_asymptotic")
        bad = P.replace(psi=P["psi"] + ScalarField.constant(wide, 0.05))
        rep = validate(bad, ClassSpec("em_asymptotic"), B)
        assert not rep.passed
        assert "axis_value_psi" in [r[0] for r in rep.failures()]

    def test_caps_are_monotone(self, wide):
        P, B = member(wide, "em_eq59")
        val = validate(P, ClassSpec("em_eq59"), B).row("norm_dU_H1")[1]
        caps = [0.5 * val, 0.99 * val, 1.01 * val, 2 * val]
        ok = [validate(P, ClassSpec("em_eq59", bound_constants={"norm_dU_H1": c}), B)
              .row("norm_dU_H1")[3] for c in caps]
        assert ok == [False, False, True, True]

    def test_slow_decay_fails(self, wide):
        # lambda = 1.6 members do not meet the lambda = 2 rates
        P, B = member(wide, "chrusciel", lam=1.0 + 0.6)
        rep = validate(P, ClassSpec("chrusciel", 2.0), B)
        assert any(r[0].startswith("Dw") for r in rep.failures())

    def test_narrow_window(self):
        g = build_grid(r_min=0.1, r_max=10.0, n_r=32, n_theta=32)
        P, B = member(g, "chrusciel")
        with pytest.raises(DataError):
            validate(P, ClassSpec("chrusciel"), B)

    def test_missing_components(self, wide):
        P, B = member(wide, "chrusciel")
        with pytest.raises(DataError):
            validate(P, ClassSpec("em_eq59"), B)

    def test_axis_values_extrapolate(self, wide):
        f = ScalarField(wide, 2.0 + wide.rho**2)
        np.testing.assert_allclose(axis_values(f), 2.0, atol=1e-12)

    def test_hybrid_weight_is_min(self, wide):
        B = kerr_newman_fields(wide, KerrNewmanParams.from_charge(1.0, 1.0))
        a = np.exp(B["U"].values) / wide.rho
        np.testing.assert_allclose(hybrid_weight(B["U"]), np.minimum(a, a**2))


class TestDerivedRates:
    def test_frozen_lambda_two(self):
        table = {(q, reg): expr for q, reg, _, expr in derived_rates(ClassSpec("em_asymptotic", 2.0))}
        assert table[("Dv", "infinity")] == "rho*O(r^-1)"
        assert table[("Dv", "origin")] == "rho*O(r^-3)"
        assert table[("Dv", "axis")] == "O(rho)"
        assert table[("chi", "axis")] == "O(rho^2)"

    @given(st.floats(1.51, 6.0))
    @settings(max_examples=10, deadline=None)
    def test_dv_dominates_terms(self, lam):
        # every term of |Dv| <= |omega| + |chi Dpsi| + |psi Dchi| is bounded by the derived rate
        rates = {(q, reg): r for q, reg, r, _ in derived_rates(ClassSpec("em_asymptotic", lam))}
        base = {"infinity": (Rate(2, -lam), Rate(1, -lam)), "origin": (Rate(2, lam - 6), Rate(1, lam - 4))}
        for regime, r in (("infinity", 1e4), ("origin", 1e-4)):
            om, dchi = base[regime]
            dv = rates[("Dv", regime)]
            terms = [om, rates[("chi", regime)] * dchi, rates[("psi", regime)] * dchi]
            for rho in (r, 1e-2 * r):
                bound = rho**dv.rho_power * r**dv.r_exponent
                for t in terms:
                    assert rho**t.rho_power * r**t.r_exponent <= bound * (1 + 1e-9)

    def test_dominant_axis(self):
        assert _dominant([Rate(3, 1), Rate(1, 5)], "axis") == Rate(1, 0.0)

    def test_csv(self):
        text = rates_to_csv(derived_rates(ClassSpec("em_asymptotic", 2.5)))
        lines = text.strip().split("\n")
        assert lines[0] == "quantity,regime,rho_power,r_exponent,expression"
        assert len(lines) == 10
