import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pathfolio.errors import LevelError, PathfolioError
from pathfolio.paths import GridSpec, MultiPath, SampledPath, covariation, generate_geometric, quadratic_variation
from pathfolio.strategies import SimplexWeights, constant_rebalanced_value, log_gram_path
from pathfolio.verify import (
    MARGIN_TOL,
    ConvergenceReport,
    InequalityReport,
    check_all,
    check_geometric_mean_bound,
    check_growth_rate,
    check_variance_bound,
    check_volatility_bound,
    constant_fixture,
    convergence_suite,
    variance_crosscheck,
)

from conftest import geometric_assets

CHECKS = (check_geometric_mean_bound, check_growth_rate, check_variance_bound, check_volatility_bound)


# --- report types ---------------------------------------------------------


def test_inequality_report_pass_flag_uses_scale():
    t = np.array([0.0, 1.0])
    big = InequalityReport("x", t, np.array([1e6, 1e6]), np.array([1e6, 1e6 + 5e-5]), np.array([0.0, -5e-5]))
    assert big.scale == 1e6 + 5e-5 and big.passed
    small = InequalityReport("x", t, np.zeros(2), np.zeros(2), np.array([0.0, -2e-10]))
    assert small.scale == 1.0 and not small.passed
    assert json.loads(json.dumps(small.to_dict()))["pass"] is False


def test_convergence_report():
    assert ConvergenceReport("r", (8, 10), (1e-3, 1e-4)).monotone
    assert not ConvergenceReport("r", (8, 10), (1e-3, 1e-3)).monotone
    assert ConvergenceReport("r", (8, 10), (0.0, 0.0)).monotone
    with pytest.raises(PathfolioError):
        ConvergenceReport("r", (10, 8), (1.0, 0.5))


# --- inequality checks -----------------------------------------------------


@pytest.mark.parametrize("check", CHECKS)
@pytest.mark.parametrize("i", range(3))
def test_vertex_margins_vanish(geo3, check, i):
    report = check(SimplexWeights.vertex(3, i), geo3, 10)
    assert np.max(np.abs(report.margins)) <= 1e-12
    assert report.passed


def test_geometric_mean_margin_with_constant_asset(grid12):
    s1 = generate_geometric(grid12, 9, 0.4)
    s = MultiPath.of(s1, SampledPath(grid12, np.full(grid12.size(), 3.0)), positive=True)
    report = check_geometric_mean_bound(SimplexWeights.equal(2), s, 12)
    q = quadratic_variation(s1.apply(np.log), 12).values
    assert np.allclose(report.margins, q / 8, rtol=1e-12, atol=1e-18)
    assert report.min_margin >= 0


def test_geometric_mean_lhs_is_log_value(geo3):
    pi = SimplexWeights([0.3, 0.3, 0.4])
    report = check_geometric_mean_bound(pi, geo3, 11)
    log_v = np.log(constant_rebalanced_value(pi, geo3, 11).values)
    assert np.allclose(report.lhs, log_v, rtol=0, atol=1e-13)


def test_variance_margin_quadratic_form(grid12):
    s = geometric_assets(grid12, [0.3, 0.3], seeds=[1, 2])
    report = check_variance_bound(SimplexWeights.equal(2), s, 12)
    x1, x2 = (a.apply(np.log) for a in s.assets)
    c11, c22 = (quadratic_variation(x, 12).values for x in (x1, x2))
    c12 = covariation(x1, x2, 12).values
    assert np.allclose(report.margins, 0.25 * (c11 + c22 - 2 * c12), rtol=1e-12, atol=1e-16)


def test_volatility_collinear_equality(grid12):
    s1 = generate_geometric(grid12, 4, 0.3)
    s = MultiPath.of(s1, s1.apply(np.square), positive=True)
    rng = np.random.default_rng(0)
    for w in rng.dirichlet([1, 1], size=10):
        report = check_volatility_bound(SimplexWeights(w / w.sum()), s, 12)
        assert np.max(np.abs(report.margins)) <= 1e-12


def test_growth_rate_is_scaled_part_one(geo3):
    pi = SimplexWeights([0.2, 0.5, 0.3])
    one, two = check_geometric_mean_bound(pi, geo3, 10), check_growth_rate(pi, geo3, 10)
    assert np.array_equal(two.margins, one.margins[1:] / one.times[1:])
    assert two.times[0] > 0
    assert two.notes["asymptotic"] == "not evaluated"


def test_sweep_one_hundred_cases():
    g = GridSpec(1.0, 10)
    rng = np.random.default_rng(2024)
    worst = np.inf
    for case in range(100):
        seed = int(rng.integers(0, 1_000_000))
        s = geometric_assets(g, rng.uniform(0.1, 0.6, 3).tolist(), seeds=[seed, seed + 1, seed + 2])
        w = rng.dirichlet(np.ones(3))
        reports = check_all(SimplexWeights(w / w.sum()), s, 10)
        assert all(r.passed for r in reports), case
        worst = min(worst, min(r.min_margin / r.scale for r in reports))
    assert worst >= -MARGIN_TOL


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(0, 1), min_size=3, max_size=3).filter(lambda v: sum(v) > 1e-3))
def test_margins_nonnegative_property(seed, raw):
    g = GridSpec(1.0, 8)
    s = geometric_assets(g, [0.5, 0.1, 0.3], seeds=[seed, seed + 7, seed + 13])
    w = np.array(raw) / sum(raw)
    for report in check_all(SimplexWeights(w / w.sum()), s, 8):
        assert report.min_margin >= -MARGIN_TOL * report.scale


def test_shared_gram_matches_recomputation(geo3):
    pi = SimplexWeights([0.25, 0.25, 0.5])
    gram = log_gram_path(geo3, 9)
    for a, b in zip(check_all(pi, geo3, 9, gram), check_all(pi, geo3, 9)):
        assert np.array_equal(a.margins, b.margins)


def test_corruption_breaks_the_checks(geo3):
    reports = check_all(SimplexWeights.equal(3), geo3, 10, qv_corruption=0.5)
    assert not all(r.passed for r in reports)


def test_check_errors(geo3):
    with pytest.raises(PathfolioError):
        check_variance_bound(SimplexWeights.equal(2), geo3, 8)
    with pytest.raises(LevelError):
        check_variance_bound(SimplexWeights.equal(3), geo3, 13)


def test_variance_crosscheck_shrinks(geo3):
    pi = SimplexWeights([0.4, 0.4, 0.2])
    assert variance_crosscheck(pi, geo3, 12) < variance_crosscheck(pi, geo3, 8)


# --- convergence suite ----------------------------------------------------


def test_constant_fixture_all_zero():
    reports = convergence_suite("constant", [4, 8, 12])
    assert len(reports) == 5
    for r in reports:
        assert r.residuals == (0.0, 0.0, 0.0) and r.monotone


def test_geometric_fixture_monotone():
    reports = convergence_suite("geometric", [8, 10, 12])
    assert [r.name for r in reports] == [
        "ito_formula",
        "exponential_ode",
        "log_ito",
        "self_financing",
        "universal_consistency",
    ]
    for r in reports:
        assert r.monotone, (r.name, r.residuals)
        assert all(np.isfinite(r.residuals))
    # regression anchors
    anchors = {
        "ito_formula": (1.0922051405265476e-05, 6.153271441711183e-06, 3.010161911121134e-07),
        "self_financing": (2.046997364557601e-06, 4.42519366372629e-07, 6.716935363471066e-08),
        "universal_consistency": (5.047519535237865e-07, 1.1547331776293019e-07, 2.0348906644617635e-08),
    }
    for r in reports:
        if r.name in anchors:
            assert r.residuals == pytest.approx(anchors[r.name], rel=1e-6)


def test_suite_accepts_a_multipath():
    reports = convergence_suite(constant_fixture(8), [2, 5])
    assert all(r.levels == (2, 5) for r in reports)


@pytest.mark.parametrize("levels", [[12, 8], [8, 8], []])
def test_suite_rejects_bad_levels(levels):
    with pytest.raises(PathfolioError):
        convergence_suite("geometric", levels)


def test_suite_rejects_unknown_fixture():
    with pytest.raises(PathfolioError):
        convergence_suite("brownian", [8])
