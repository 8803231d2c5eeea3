import numpy as np
import pytest

from kerrgap import studies
from kerrgap.cutpaste import StudyRow, StudyTable
from kerrgap.errors import ConfigurationError


def table(totals, far, consts):
    rows = []
    for k, t in enumerate(totals):
        rows.append(StudyRow(0.25 / 2**k, 1e-3, "far", t, far))
        rows.append(StudyRow(0.25 / 2**k, 1e-3, "total", t, far))
    return StudyTable("I_vac", rows, consts)


class TestChecks:
    def test_all_pass(self):
        checks = studies.cutpaste_checks(table([-4, -2, -1, -0.5], 1.1, [1.0, 0.9, 1.5, 1.9]))
        assert [c[3] for c in checks] == [True, True, True]

    def test_non_monotone(self):
        checks = studies.cutpaste_checks(table([-4, -2, -3, -0.5], 1.0, [1, 1, 1, 1]))
        assert not checks[0][3]

    def test_exponent_and_axis_spread(self):
        checks = studies.cutpaste_checks(table([-4, -2, -1, -0.5], 1.4, [1.0, 2.5, 1, 1]))
        assert not checks[1][3] and not checks[2][3]


class TestDrivers:
    def test_background_errors(self, coarse_grid):
        with pytest.raises(ConfigurationError):
            studies.background_fields(coarse_grid, "kerr", functional="I_em")
        with pytest.raises(ConfigurationError):
            studies.background_fields(coarse_grid, "schwarzschild")

    def test_el_check_needs_refinements(self):
        with pytest.raises(ConfigurationError):
            studies.el_check(refinements=1)

    def test_perturbed_map_deterministic(self, kn):
        a = studies.perturbed_map(kn, "I_em", 0.2, 5)
        b = studies.perturbed_map(kn, "I_em", 0.2, 5)
        for k in kn.names:
            np.testing.assert_array_equal(a[k].values, b[k].values)
        assert not np.array_equal(a["chi"].values, kn["chi"].values)
