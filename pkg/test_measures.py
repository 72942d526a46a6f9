import math

import numpy as np
import pytest
from pydantic import ValidationError

from measures.core import (
    dirac,
    empirical_fit,
    entropy,
    from_csv_row,
    is_dirac,
    mix,
    new_measure,
    sample,
    to_csv_row,
    tv_distance,
    uniform,
)
from measures.schemas import DiscreteMeasure
from utils.errors import (
    IndexOutOfRangeError,
    NegativeWeightError,
    ParamOutOfRangeError,
    SupportMismatchError,
    ZeroMassError,
)


# ---------- new_measure ----------


def test_new_measure_normalizes():
    assert new_measure([2, 2]).weights == (0.5, 0.5)
    assert new_measure([1, 0, 0]).weights == (1.0, 0.0, 0.0)
    assert new_measure([0.7, 0.3]).weights == pytest.approx((0.7, 0.3))


def test_new_measure_errors():
    with pytest.raises(NegativeWeightError):
        new_measure([0.5, -0.1])
    with pytest.raises(ZeroMassError):
        new_measure([0, 0, 0])


def test_normalize_is_idempotent():
    mu = new_measure([3.0, 1.0, 7.0])
    assert new_measure(mu.weights).weights == pytest.approx(mu.weights)


def test_measure_model_rejects_bad_sum():
    with pytest.raises(ValidationError):
        DiscreteMeasure(support_size=2, weights=(0.5, 0.6))


# ---------- sample / empirical_fit ----------


def test_sample_dirac():
    assert sample(dirac(2, 4), 5, np.random.default_rng(1)).tolist() == [
        2
    ] * 5


def test_sample_fair_coin_frequency(rng):
    s = sample(uniform(2), 1_000_000, rng)
    assert abs(np.mean(s == 0) - 0.5) < 0.002


def test_sample_is_reproducible():
    mu = new_measure([0.7, 0.3])
    a = sample(mu, 4, np.random.default_rng(7))
    b = sample(mu, 4, np.random.default_rng(7))
    assert a.tolist() == b.tolist()


def test_sample_consumes_n_uniforms():
    mu = new_measure([0.2, 0.3, 0.5])
    g1 = np.random.default_rng(3)
    g2 = np.random.default_rng(3)
    sample(mu, 17, g1)
    g2.random(17)
    assert g1.random() == g2.random()


def test_sample_never_picks_zero_weight():
    mu = new_measure([0.5, 0.0, 0.5, 0.0])
    s = sample(mu, 10_000, np.random.default_rng(5))
    assert set(np.unique(s).tolist()) <= {0, 2}


def test_sample_rejects_n_zero(rng):
    with pytest.raises(ParamOutOfRangeError):
        sample(uniform(2), 0, rng)


def test_empirical_fit_counts():
    assert empirical_fit([0, 1, 1, 0, 1], 2).weights == pytest.approx(
        (0.4, 0.6)
    )
    assert empirical_fit([3, 3, 3], 4).weights == (0.0, 0.0, 0.0, 1.0)
    with pytest.raises(IndexOutOfRangeError):
        empirical_fit([0, 2], 2)


def test_empirical_fit_converges_in_tv(rng):
    mu = new_measure([0.1, 0.2, 0.3, 0.4])
    assert tv_distance(empirical_fit(sample(mu, 100_000, rng), 4), mu) < 0.01


def test_empirical_median_tv_decreases_with_n():
    mu = new_measure([0.1, 0.2, 0.3, 0.4])
    medians = []
    for n in (100, 1_000, 10_000, 100_000):
        tvs = [
            tv_distance(
                empirical_fit(sample(mu, n, np.random.default_rng(s)), 4), mu
            )
            for s in range(50)
        ]
        medians.append(np.median(tvs))
    assert all(b < a for a, b in zip(medians, medians[1:]))


def test_empirical_fit_is_unbiased(rng):
    mu = new_measure([0.2, 0.5, 0.3])
    n, reps = 20, 10_000
    idx = sample(mu, n * reps, rng).reshape(reps, n)
    fits = np.stack([np.bincount(r, minlength=3) / n for r in idx])
    sigma = np.sqrt(mu.array * (1 - mu.array) / (n * reps))
    assert np.all(np.abs(fits.mean(axis=0) - mu.array) < 3 * sigma + 1e-12)


# ---------- mix / tv / entropy ----------


def test_mix_endpoints_are_exact():
    mu0 = new_measure([0.3, 0.3, 0.4])
    mu = new_measure([0.1, 0.6, 0.3])
    assert mix(mu0, mu, 0.0) == mu
    assert mix(mu0, mu, 1.0) == mu0


def test_mix_arithmetic_and_errors():
    out = mix(dirac(0, 2), dirac(1, 2), 0.25)
    assert out.weights == (0.25, 0.75)
    with pytest.raises(SupportMismatchError):
        mix(uniform(2), uniform(3), 0.5)
    with pytest.raises(ParamOutOfRangeError):
        mix(uniform(2), uniform(2), 1.5)


def test_tv_distance_values():
    assert tv_distance(uniform(3), uniform(3)) == 0.0
    assert tv_distance(dirac(0, 2), dirac(1, 2)) == 1.0
    assert tv_distance(
        new_measure([0.7, 0.3]), uniform(2)
    ) == pytest.approx(0.2)


def test_tv_triangle_inequality(rng):
    for _ in range(200):
        a, b, c = (new_measure(rng.random(5)) for _ in range(3))
        assert tv_distance(a, c) <= tv_distance(a, b) + tv_distance(
            b, c
        ) + 1e-15
        assert tv_distance(a, b) == pytest.approx(tv_distance(b, a))


def test_entropy_and_dirac_detection():
    assert entropy(dirac(1, 3)) == 0.0
    assert is_dirac(dirac(1, 3), 1e-9) == 1
    assert entropy(uniform(5)) == pytest.approx(math.log(5))
    assert is_dirac(new_measure([0.999, 0.001]), 0.01) == 0
    assert is_dirac(uniform(2), 0.01) is None
    with pytest.raises(ParamOutOfRangeError):
        is_dirac(uniform(2), 0.5)


def test_csv_row_format():
    mu = new_measure([0.25, 0.75])
    assert to_csv_row(mu) == [2, 0.25, 0.75]
    assert from_csv_row(["2", "0.25", "0.75"]) == mu
    with pytest.raises(SupportMismatchError):
        from_csv_row(["3", "0.5", "0.5"])
