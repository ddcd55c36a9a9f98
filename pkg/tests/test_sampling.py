import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from numphase import representation as rep
from numphase import sampling as smp
from numphase.sampling import SignedDistribution, WeightedEnsemble
from numphase.streams import block_bounds, block_generator, map_blocks

THREE = SignedDistribution([1.0, 2.0, 3.0], [0.8, -0.2, 0.4])


def test_ensemble_validation():
    with pytest.raises(ValueError):
        WeightedEnsemble(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        WeightedEnsemble(np.arange(2), np.array([1.0, np.inf]))
    with pytest.raises(ValueError):
        WeightedEnsemble(np.arange(3), np.ones(2))


def test_zero_total_weight():
    ens = WeightedEnsemble(np.arange(2.0), np.array([1.0, -1.0]))
    with pytest.raises(smp.ZeroWeightError):
        smp.weighted_mean(ens, lambda x: x)


def test_mean_examples():
    x = np.array([1.0, 4.0, 7.0])
    assert smp.weighted_mean(WeightedEnsemble(x, np.ones(3)), lambda v: v) == 4.0
    signed = WeightedEnsemble(np.array([1.0, 2.0, 3.0]), 3 * np.array([0.8, -0.2, 0.4]))
    assert abs(smp.weighted_mean(signed, lambda v: v) - 1.6) < 1e-15
    assert abs(smp.weighted_mean(signed, np.full(3, 2.5)) - 2.5) < 1e-15


def test_stderr_equal_weights_is_standard_error(rng):
    x = rng.standard_normal(1000)
    got = smp.weighted_stderr(WeightedEnsemble(x, np.ones(x.size)), x)
    assert abs(got - x.std() / math.sqrt(x.size)) < 1e-12


def test_stderr_constant_is_zero():
    ens = WeightedEnsemble(np.zeros(10), np.full(10, 0.3))
    assert smp.weighted_stderr(ens, np.full(10, 4.0)) == 0


def test_stderr_zero_mean_observable_finite(rng):
    # E[w f] = 0 exactly: the estimator stays finite and positive
    x = np.array([-1.0, 1.0] * 50)
    se = smp.weighted_stderr(WeightedEnsemble(x, np.ones(x.size)), x)
    assert se == pytest.approx(0.1)


def test_stderr_scales_inverse_sqrt():
    ses = []
    for n in (20_000, 80_000):
        ens = smp.sample_split(THREE, n, seed=3)
        ses.append(smp.weighted_stderr(ens, lambda x: x))
    assert ses[0] / ses[1] == pytest.approx(2.0, rel=0.05)


def test_efficiency_examples():
    assert smp.efficiency(WeightedEnsemble(np.zeros(4), np.ones(4))) == 1
    assert smp.efficiency(WeightedEnsemble(np.zeros(4), np.array([2.0, 0.0, 2.0, 0.0]))) == 2


def test_distribution_normalisation():
    with pytest.raises(ValueError, match="normalised"):
        SignedDistribution([0, 1], [0.5, 0.6])


@pytest.mark.parametrize(
    "cp,cm,lp,lm,wp,wm",
    [(1.0, 0.0, 1.0, 0.0, 1.0, 0.0), (1.2, -0.2, 6 / 7, 1 / 7, 1.4, -1.4), (1.5, -0.5, 0.75, 0.25, 2.0, -2.0)],
)
def test_optimal_split_values(cp, cm, lp, lm, wp, wm):
    r = smp.optimal_split(c_plus=cp, c_minus=cm)
    assert (r.lam_plus, r.lam_minus, r.w_plus, r.w_minus) == pytest.approx((lp, lm, wp, wm))
    assert r.efficiency == pytest.approx((cp - cm) ** 2)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 10.0))
def test_split_unbiased_in_expectation(cp):
    cm = 1.0 - cp
    r = smp.optimal_split(c_plus=cp, c_minus=cm)
    # E[w] = lam+ w+ + lam- w- = C+ + C- = 1 and E[w^2]/E[w]^2 = (C+ - C-)^2
    assert r.lam_plus * r.w_plus + r.lam_minus * r.w_minus == pytest.approx(1.0)
    assert r.lam_plus * r.w_plus**2 + r.lam_minus * r.w_minus**2 == pytest.approx((cp - cm) ** 2)


def test_positive_distribution_is_classical():
    d = SignedDistribution(np.arange(4.0), [0.1, 0.2, 0.3, 0.4])
    ens = smp.sample_split(d, 5000, seed=1)
    assert np.all(ens.weights == 1.0)


def test_split_three_point_mean():
    ens = smp.sample_split(THREE, 1_000_000, seed=11)
    mean = smp.weighted_mean(ens, lambda x: x)
    se = smp.weighted_stderr(ens, lambda x: x)
    assert abs(mean - 1.6) <= 3 * se
    assert smp.efficiency(ens) == pytest.approx(1.96, rel=0.05)


def test_split_is_worker_independent():
    a = smp.sample_split(THREE, 30_000, seed=5, workers=1)
    b = smp.sample_split(THREE, 30_000, seed=5, workers=4)
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.weights, b.weights)


def test_split_with_jitter_stays_in_cell():
    d = SignedDistribution(np.array([[0.0], [1.0]]), [1.25, -0.25], widths=np.array([0.5]))
    ens = smp.sample_split(d, 2000, seed=2)
    assert np.all(np.abs(ens.points - np.round(ens.points)) <= 0.25)


def test_grid_uniform_weights_one():
    d = SignedDistribution(np.arange(5.0), np.full(5, 0.2))
    assert np.allclose(smp.sample_grid(d).weights, 1.0)


def test_grid_three_point_exact():
    assert smp.weighted_mean(smp.sample_grid(THREE), lambda x: x) == pytest.approx(1.6, abs=1e-15)


def test_grid_coherent_moments():
    alpha = 1.3 * np.exp(0.5j)
    w = rep.coherent_closed_form(alpha, 40)
    m = 4 * w.two_n_max + 4
    phis = rep.phi_grid(m)
    vals = np.real(rep.w_grid(w, phis)).ravel()
    two_n = np.repeat(np.arange(w.two_n_max + 1), m)
    phi = np.tile(phis, w.two_n_max + 1)
    dist = SignedDistribution(np.column_stack([two_n / 2, phi]), vals, cell=2 * np.pi / m)
    ens = smp.sample_grid(dist)
    n, p = ens.points[:, 0], ens.points[:, 1]
    a_est = rep.antinormal_estimator(0, 1, n, p)
    nn_est = np.where(n >= 0, n, 0.0)
    assert abs(smp.weighted_mean(ens, a_est) - alpha) < 1e-10
    # E[a a^+] = |alpha|^2 + 1 and the number estimator averages to |alpha|^2
    assert abs(smp.weighted_mean(ens, rep.antinormal_estimator(1, 1, n, p)) - (abs(alpha) ** 2 + 1)) < 1e-10
    assert abs(smp.weighted_mean(ens, nn_est) - abs(alpha) ** 2) < 1e-10


def test_block_bounds():
    assert block_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert block_bounds(0, 4) == []


def test_block_generator_reproducible():
    a = block_generator(7, 1, 3).random(5)
    b = block_generator(7, 1, 3).random(5)
    c = block_generator(7, 1, 4).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_map_blocks_order_and_workers():
    fn = lambda lo, hi, g: (lo, hi, g.random())
    one = map_blocks(fn, 50, 9, 2, workers=1, block_size=7)
    many = map_blocks(fn, 50, 9, 2, workers=3, block_size=7)
    assert one == many
    assert [r[0] for r in one] == list(range(0, 50, 7))
