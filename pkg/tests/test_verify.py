"""Executable identity checks and their independent oracles."""
import json
import math

import numpy as np
import pytest
from numpy.polynomial import legendre as L

from mzr.basis import multi_index_set
from mzr.verify import (
    CheckReport,
    check_conservation,
    check_rate_identity,
    check_tensor,
    default_battery,
    gamma_by_quadrature,
    legendre_triple_exact,
)


def test_default_battery_passes():
    reports = default_battery(0)
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]
    assert len({r.name for r in reports}) == len(reports)


@pytest.mark.parametrize("p_r,p_f", [(1, 2), (3, 7), (5, 11)])
def test_rate_identity(p_r, p_f):
    rep = check_rate_identity(p_r, p_f, trials=100, seed=3)
    assert rep.passed and rep.max_rel <= 1e-11 and rep.trials == 100


def test_rate_identity_requires_ordered_orders():
    with pytest.raises(ValueError):
        check_rate_identity(3, 3)


def test_conservation_1d_and_2d():
    assert check_conservation(7, trials=100, seed=1).passed
    assert check_conservation(4, trials=20, seed=1, dim=2).passed


def test_gamma_example():
    # y1 = Phi_0, y2 = c Phi_1: Gamma_3 = c^2 e_112 on Phi_2, everything else zero
    basis = multi_index_set(1, 2, 1)
    c = 0.1 / math.sqrt(3)
    y = np.zeros((3, 3))
    y[0, 0], y[1, 1] = 1.0, c
    e112 = 2 / math.sqrt(5)
    np.testing.assert_allclose(gamma_by_quadrature(y, basis), [[0.0], [0.0], [c * c * e112]], atol=1e-17)
    assert -2 * float(np.sum(gamma_by_quadrature(y, basis) ** 2)) == pytest.approx(-1.77778e-5, rel=1e-5)


@pytest.mark.parametrize("a,b,c", [(0, 0, 0), (1, 1, 0), (1, 1, 2), (2, 3, 5), (4, 4, 4), (3, 5, 7), (1, 2, 4)])
def test_legendre_triple_against_numpy(a, b, c):
    x, w = L.leggauss(12)
    direct = 0.5 * np.sum(w * L.legval(x, [0] * a + [1]) * L.legval(x, [0] * b + [1]) * L.legval(x, [0] * c + [1]))
    assert float(legendre_triple_exact(a, b, c)) == pytest.approx(direct, abs=1e-15)


def test_legendre_triple_selection_rules():
    assert legendre_triple_exact(1, 1, 1) == 0
    assert legendre_triple_exact(1, 2, 5) == 0
    assert legendre_triple_exact(2, 2, 0) == pytest.approx(1 / 5)


@pytest.mark.parametrize("p_f,d", [(7, 1), (4, 2), (3, 3)])
def test_tensor_check(p_f, d):
    assert check_tensor(p_f, d).passed


def test_report_serialisation():
    rep = CheckReport("x", 1e-13, 2e-13, 1e-11, 5, True)
    assert rep.line().startswith("PASS x:")
    assert json.loads(rep.to_json())["trials"] == 5
    assert CheckReport("y", 1.0, 1.0, 1e-11, 1, False).line().startswith("FAIL y:")
