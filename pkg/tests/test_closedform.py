import math

import numpy as np
import pytest

from teleplan import closedform as cf
from teleplan import plansearch as ps
from teleplan import statekit as sk

from oracles import binary_entropy


def test_ghz_and_toast_formulas():
    assert [cf.p1_ghz(n) for n in range(2, 6)] == [1, 2, 3, 4]
    assert [cf.p1_toast(n) for n in range(3, 6)] == [4, 9, 16]
    assert [cf.ef_toast(n) for n in range(3, 6)] == [3, 6, 10]
    assert cf.toast_inefficiency(4) == pytest.approx(1.5)
    for n in range(2, 10):
        assert cf.toast_inefficiency(n) == pytest.approx(2 * (n - 1) / n)


def test_toast_cut_entropy():
    assert cf.toast_cut_entropy(5, 2) == 6
    with pytest.raises(ValueError):
        cf.toast_cut_entropy(4, 4)


def test_schmidt_entropy_sign_and_value():
    assert cf.schmidt_entropy([1 / math.sqrt(2)] * 2) == pytest.approx(1.0)
    assert cf.schmidt_entropy([math.sqrt(0.1), math.sqrt(0.9)]) == pytest.approx(binary_entropy(0.1))
    assert cf.schmidt_entropy([1.0, 0.0]) == 0.0
    assert cf.p1_schmidt(5, cf.DEFAULT_SCHMIDT) == pytest.approx(4 * binary_entropy(0.1))
    with pytest.raises(ValueError):
        cf.schmidt_entropy([0.5, 0.5])


def test_schmidt_entropy_agrees_with_entropy_core():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a = rng.random(3)
        a /= np.linalg.norm(a)
        s = sk.schmidt_state(3, a)
        assert cf.schmidt_entropy(a) == pytest.approx(sk.subset_entropy(s, [0]), abs=1e-12)


@pytest.mark.parametrize("n", [1, 0, -3])
def test_bad_n(n):
    with pytest.raises(ValueError):
        cf.p1_ghz(n)
    with pytest.raises(ValueError):
        cf.ef_bounds_ghz(n)


def test_ef_bounds_ghz3():
    rep = cf.ef_bounds_ghz(3)
    assert (rep.lower, rep.lower_open, rep.upper, rep.upper_open) == (1.5, True, 2.0, False)
    assert rep.interval() == "1.5 < E_F ≤ 2"
    assert "N/2" in rep.provenance and "N-1" in rep.provenance
    assert not rep.degenerate
    assert any("exact" in n for n in rep.notes)


def test_ef_bounds_ghz2_degenerate():
    rep = cf.ef_bounds_ghz(2)
    assert rep.degenerate
    assert rep.interval() == "1 ≤ E_F ≤ 1"


def test_bound_report_consistency():
    with pytest.raises(ValueError):
        cf.EfBoundReport(2, False, 1, False, "x")


@pytest.mark.parametrize("family", ["ghz", "schmidt", "toast", "bundle4", "etoast"])
def test_cross_validate_defaults_pass(family):
    rep = cf.cross_validate(family, config=ps.SearchConfig(prune=True))
    assert rep.checks
    assert rep.passed, [c for c in rep.checks if not c.passed]


def test_cross_validate_reports_failures():
    rep = cf.ValidationReport("x")
    rep.add("off", 1.0, 1.1)
    assert not rep.passed
    assert rep.checks[0].deviation == pytest.approx(0.1)


def test_cross_validate_unknown_family():
    with pytest.raises(ValueError):
        cf.cross_validate("wstate")
