import numpy as np
import pytest
from scipy import stats

from coinfdr.calibration import (
    RngStream,
    build_pseudo_calibration,
    draw_calibration,
    id_key,
    sample_calibration,
)
from coinfdr.data import SummaryData
from coinfdr.densities import DiscretePrior, null_conditional_log_density

from oracles import tabulated_cdf


def test_rngstream_reproducible():
    a = RngStream(5, 2).generator().random(4)
    b = RngStream(5, 2).generator().random(4)
    c = RngStream(5, 3).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(5).child(1) == RngStream(5).child(1)
    assert RngStream(5).child(1) != RngStream(5).child(2)
    with pytest.raises(ValueError):
        RngStream(-1)


def test_id_key_stable():
    assert id_key(7) == 7
    assert id_key("gene_a") == id_key("gene_a")
    assert id_key("gene_a") != id_key("gene_b")


def test_point_mass_is_standard_normal():
    prior = DiscretePrior.point_mass(1.0)
    for s2 in (0.01, 3.0):
        draws = sample_calibration(s2, prior, 9, np.random.default_rng(1), size=20000)
        assert stats.kstest(draws, "norm").pvalue > 0.01


def test_point_mass_four_variance():
    draws = sample_calibration(0.5, DiscretePrior.point_mass(4.0), 18, RngStream(3), size=100_000)
    assert 3.8 <= draws.var() <= 4.2


def test_tiny_s2_concentrates_on_small_atom():
    prior = DiscretePrior(np.array([1.0, 10.0]), np.array([0.7, 0.3]))
    draws = sample_calibration(0.01, prior, 18, RngStream(4), size=100_000)
    assert draws.var() == pytest.approx(1.0, abs=0.03)


def test_scalar_draw():
    v = sample_calibration(1.0, DiscretePrior.point_mass(1.0), 3, RngStream(0))
    assert isinstance(v, float)


def test_pseudo_calibration_records():
    data = SummaryData(np.zeros(3), np.array([0.5, 1.0, 2.0]), 10, np.array(["a", "b", "c"]))
    recs = build_pseudo_calibration(data, DiscretePrior.point_mass(1.0), 10, RngStream(9))
    assert [r.index for r in recs] == ["a", "b", "c"]
    assert [r.s2 for r in recs] == [0.5, 1.0, 2.0]
    again = build_pseudo_calibration(data, DiscretePrior.point_mass(1.0), 10, RngStream(9))
    assert recs == again


def test_pseudo_calibration_empty():
    empty = SummaryData(np.empty(0), np.empty(0), 4)
    assert build_pseudo_calibration(empty, DiscretePrior.point_mass(1.0), 4, RngStream(0)) == []


def test_draws_follow_ids_not_positions():
    prior = DiscretePrior(np.array([0.5, 2.0]), np.array([0.5, 0.5]))
    ids = np.arange(50)
    s2 = np.linspace(0.2, 3, 50)
    a = draw_calibration(ids, s2, prior, 8, RngStream(1))
    perm = np.random.default_rng(0).permutation(50)
    b = draw_calibration(ids[perm], s2[perm], prior, 8, RngStream(1))
    assert np.array_equal(a[perm], b)


def test_large_sample_ks_point_mass():
    m = 100_000
    data = SummaryData(np.zeros(m), np.full(m, 0.7), 18)
    recs = build_pseudo_calibration(data, DiscretePrior.point_mass(1.0), 18, RngStream(12))
    xt = np.array([r.x_tilde for r in recs])
    assert stats.kstest(xt, "norm").statistic < 0.006


def test_ks_against_integrated_density():
    prior = DiscretePrior(np.array([0.3, 1.0, 6.0]), np.array([0.2, 0.5, 0.3]))
    s2, nu = 1.5, 6
    cdf = tabulated_cdf(lambda t: null_conditional_log_density(t, s2, prior, nu, form="lemma1"), -20, 20)
    draws = sample_calibration(s2, prior, nu, RngStream(21), size=20_000)
    assert stats.kstest(draws, cdf).pvalue > 0.01
