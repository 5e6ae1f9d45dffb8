from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from htaa.kde import MIN_BANDWIDTH, fit_kde, kde_logpdf, kde_pdf, kde_sample, logpdf_encoded, sample_encoded
from htaa.space import Categorical, LogUniformFloat, SearchSpace, UniformFloat, UniformInt, validate


def one_d(domain):
    return SearchSpace([("x", domain)])


def test_empty_fit_raises():
    with pytest.raises(ValueError):
        fit_kde([], one_d(UniformFloat(0, 1)))


def test_single_point_bandwidth_is_floored():
    est = fit_kde([{"x": 0.3}], one_d(UniformFloat(0, 1)))
    assert est.bandwidths[0] == MIN_BANDWIDTH


def test_bandwidth_follows_normal_reference_rule():
    pts = [0.1, 0.2, 0.4, 0.8]
    est = fit_kde([{"x": p} for p in pts], one_d(UniformFloat(0, 1)))
    expected = 1.06 * np.std(pts, ddof=1) * 4 ** (-1 / 5)
    assert est.bandwidths[0] == pytest.approx(expected)


def test_categorical_weight_shrinks_with_data():
    space = one_d(Categorical(("a", "b", "c")))
    est = fit_kde([{"x": "a"}] * 4, space)
    assert est.bandwidths[0] == pytest.approx(2 / 6)
    probs = [kde_pdf(est, {"x": c}) for c in "abc"]
    assert probs == pytest.approx([1 - 2 / 6, 1 / 6, 1 / 6])


@pytest.mark.parametrize("domain", [UniformFloat(-2.0, 3.0), LogUniformFloat(1e-3, 10.0)])
def test_float_density_integrates_to_one(domain):
    rng = np.random.default_rng(0)
    space = one_d(domain)
    pts = [{"x": domain.sample(rng)} for _ in range(7)]
    est = fit_kde(pts, space)
    if isinstance(domain, LogUniformFloat):
        total, _ = quad(lambda t: kde_pdf(est, {"x": math.exp(t)}) * math.exp(t), math.log(domain.lo),
                        math.log(domain.hi), limit=200, points=[math.log(p["x"]) for p in pts])
    else:
        total, _ = quad(lambda v: kde_pdf(est, {"x": v}), domain.lo, domain.hi, limit=200,
                        points=[p["x"] for p in pts])
    assert total == pytest.approx(1.0, abs=1e-6)


def test_integer_masses_sum_to_one():
    space = one_d(UniformInt(0, 9))
    est = fit_kde([{"x": 2}, {"x": 3}, {"x": 9}], space)
    assert sum(kde_pdf(est, {"x": v}) for v in range(10)) == pytest.approx(1.0, abs=1e-12)


def test_invalid_config_rejected():
    est = fit_kde([{"x": 0.5}], one_d(UniformFloat(0, 1)))
    with pytest.raises(ValueError):
        kde_logpdf(est, {"x": 2.0})


def test_samples_are_valid_configurations():
    space = SearchSpace(
        [
            ("a", UniformFloat(0, 1)),
            ("b", LogUniformFloat(1e-4, 1)),
            ("n", UniformInt(1, 5)),
            ("c", Categorical(("p", "q", "r"))),
        ]
    )
    rng = np.random.default_rng(4)
    pts = [{"a": 0.0, "b": 1.0, "n": 5, "c": "q"}, {"a": 0.5, "b": 1e-4, "n": 1, "c": "p"}]
    est = fit_kde(pts, space)
    for _ in range(300):
        assert validate(kde_sample(est, rng, bandwidth_factor=3.0), space) == []


def test_encoded_samples_match_density_on_ints():
    space = one_d(UniformInt(0, 4))
    est = fit_kde([{"x": 1}, {"x": 4}], space)
    rng = np.random.default_rng(7)
    U = sample_encoded(est, rng, 40000)
    freq = np.bincount(np.floor(U[:, 0] * 5).astype(int), minlength=5) / U.shape[0]
    cells = (np.arange(5)[:, None] + 0.5) / 5
    prob = np.exp(logpdf_encoded(est, cells))
    assert np.abs(freq - prob).max() < 0.015


def test_zero_dimensional_space_has_zero_log_density():
    est = fit_kde(np.zeros((3, 0)), SearchSpace([]))
    assert np.all(logpdf_encoded(est, np.zeros((2, 0))) == 0.0)
