import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from temperlevy import ModelSpec, StableParams, TweedieExp, UserRadial
from temperlevy import rng as rngmod
from temperlevy.charfn import tempered_exponent
from temperlevy.errors import DivergentEta, RatioAboveOne
from temperlevy.sampler import (AcceptanceRatio, JumpSampler, SampleBatch, cms,
                                compound_poisson_batch, compound_poisson_sample,
                                inversion_sample, make_ratio, optimal_split, parallel_rejection,
                                rejection_decisions, rejection_sample_tempered, sample_path,
                                sample_stable, sample_tempered_at_time, tweedie_rejection)


def test_optimal_split_reference_case():
    plan = optimal_split(10.0, 1.0)
    assert plan.n_splits == 10
    assert plan.dt == 1.0
    assert plan.expected_iterations == pytest.approx(10 * math.e)


@given(st.floats(0.05, 200.0), st.floats(0.01, 5.0))
def test_optimal_split_is_optimal(t, eta):
    plan = optimal_split(t, eta)
    log_cost = math.log(plan.n_splits) + t * eta / plan.n_splits
    for n in range(1, int(t * eta) + 3):
        assert log_cost <= math.log(n) + t * eta / n + 1e-12


def test_optimal_split_edge_cases():
    assert optimal_split(3.0, 0.0).n_splits == 1
    assert optimal_split(0.2, 1.0).n_splits == 1
    with pytest.raises(ValueError):
        optimal_split(0.0, 1.0)


def test_cms_levy_case(gen):
    # alpha = 1/2, beta = 1 in S1 form with unit scale is Levy with scale 1
    x = cms(0.5, 1.0, gen.uniform(-math.pi / 2, math.pi / 2, 20000), gen.standard_exponential(20000))
    d = stats.kstest(x, stats.levy(scale=1.0).cdf).statistic
    assert d < 1.63 / math.sqrt(x.size)


def test_cms_cauchy_case(gen):
    x = cms(1.0, 0.0, gen.uniform(-math.pi / 2, math.pi / 2, 20000), gen.standard_exponential(20000))
    assert stats.kstest(x, stats.cauchy.cdf).statistic < 1.63 / math.sqrt(x.size)


def test_sample_stable_against_scipy(gen):
    params = StableParams(0.7, 1.0, 0.3, 0.2)
    from temperlevy.charfn import cms_bridge

    a, b, g, d = cms_bridge(params, 1.0)
    x = sample_stable(params, 1.0, 5000, gen).values
    probe = np.quantile(x, [0.1, 0.3, 0.5, 0.7, 0.9])
    emp = np.array([np.mean(x <= q) for q in probe])
    theo = stats.levy_stable.cdf(probe, a, b, loc=d, scale=g)
    assert np.max(np.abs(emp - theo)) < 1.63 / math.sqrt(x.size)


def test_one_sided_proposals_respect_support(gen):
    x = sample_stable(StableParams(0.5, 1.0, 0.0, 0.3), 2.0, 5000, gen).values
    assert x.min() >= 0.6


def test_reproducible_streams(ref_model, ref_grids):
    a = rejection_sample_tempered(ref_model, 1.0, 500, 42, ref_grids)
    b = rejection_sample_tempered(ref_model, 1.0, 500, 42, ref_grids)
    c = rejection_sample_tempered(ref_model, 1.0, 500, 43, ref_grids)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.proposals_used == b.proposals_used
    assert not np.array_equal(a.values, c.values)
    assert a.seed == 42


def test_substreams_independent_of_order():
    s1 = rngmod.substreams(5, 3)
    s2 = rngmod.substreams(5, 3)
    x = [g.random(4) for g in s1]
    y = [g.random(4) for g in reversed(s2)][::-1]
    for u, v in zip(x, y):
        np.testing.assert_array_equal(u, v)
    assert not np.array_equal(x[0], x[1])


def test_parallel_rejection_thread_invariance(ref_model, ref_grids):
    a = parallel_rejection(ref_model, 1.0, 400, 9, n_streams=4, threads=1, grids=ref_grids)
    b = parallel_rejection(ref_model, 1.0, 400, 9, n_streams=4, threads=3, grids=ref_grids)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.proposals_used == b.proposals_used


def test_sample_batch_consistency():
    with pytest.raises(ValueError):
        SampleBatch(0, np.zeros(3), 2, 3)
    with pytest.raises(ValueError):
        SampleBatch(0, np.zeros(3), 5, 2)


def test_acceptance_fraction(ref_model, ref_grids, gen):
    m = 100_000
    _, _, A = rejection_decisions(ref_model, 1.0, m, gen, make_ratio(ref_model, 1.0, ref_grids))
    p = math.exp(-1.0)
    assert abs(A.sum() - m * p) <= 3 * math.sqrt(m * p * (1 - p))


def test_ratio_bounded_by_one(ref_model, ref_grids, gen):
    ratio = AcceptanceRatio(ref_model, 1.0, ref_grids)
    y = np.concatenate([gen.standard_cauchy(20000) * 10.0 ** gen.uniform(-3, 4, 20000),
                        [0.0, 1e-300, 1e8, -1e8]])
    r = ratio(y)
    assert np.all((r >= 0) & (r <= 1 + 1e-6))


def test_ratio_grid_vs_point_queries(ref_model, ref_grids):
    y = np.array([-30.0, -1.0, 0.0, 0.4, 5.0])
    np.testing.assert_allclose(AcceptanceRatio(ref_model, 1.0, ref_grids)(y),
                               AcceptanceRatio(ref_model, 1.0)(y), rtol=1e-6, atol=1e-9)


def test_ratio_outside_grid_asymptotics(ref_model, ref_grids):
    # beyond the grid the ratio follows the tempering function q
    ratio = AcceptanceRatio(ref_model, 1.0, ref_grids)
    hi = ref_grids[0].x_range[1]
    y = np.array([2 * hi, 10 * hi])
    r = ratio(y)
    q = ref_model.tempering.q(y, 1) / ref_model.tempering.q(np.array([hi]), 1)
    np.testing.assert_allclose(r / ratio(np.array([hi])), q, rtol=1e-3)


def test_ratio_above_one_detected(ref_model, ref_grids):
    broken = replace(ref_model, eta=0.1)
    with pytest.raises(RatioAboveOne):
        AcceptanceRatio(broken, 1.0, ref_grids)(np.array([0.0]))


def test_tweedie_fast_path_matches_generic(tweedie, grids_tweedie):
    gen_a, gen_b = rngmod.make_rng(3), rngmod.make_rng(3)
    Y1, U1, A1 = rejection_decisions(tweedie, 1.0, 10_000, gen_a,
                                     make_ratio(tweedie, 1.0, grids_tweedie))
    fast = tweedie_rejection(tweedie, 1.0, 10, 0)
    assert fast.accepted == 10
    from temperlevy.sampler import tweedie_ratio

    Y2, U2, A2 = rejection_decisions(tweedie, 1.0, 10_000, gen_b, tweedie_ratio(tweedie, 1.0))
    np.testing.assert_array_equal(Y1, Y2)
    np.testing.assert_array_equal(A1, A2)


def test_tweedie_requires_tweedie_model(ref_model):
    with pytest.raises(ValueError):
        tweedie_rejection(ref_model, 1.0, 5, 0)


def test_tweedie_small_c_accepts_everything():
    spec = ModelSpec.build(TweedieExp(1.0, 1e-12, 0.5))
    batch = tweedie_rejection(spec, 1.0, 1000, 1)
    assert batch.proposals_used == 1000


def test_tweedie_mean(tweedie):
    # mean of the tilted law: a Gamma(1 - alpha) c^(alpha - 1) t
    x = tweedie_rejection(tweedie, 1.0, 20000, 11).values
    sd = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - special.gamma(0.5)) < 4 * sd


def test_untempered_model_accepts_everything():
    spec = ModelSpec.build(UserRadial.from_expression("1", 0.5, 1.0, 1.0))
    batch = rejection_sample_tempered(spec, 1.0, 300, 0)
    assert batch.proposals_used == 300


def test_divergent_model_refused():
    from temperlevy import PowerLawRosinski

    spec = ModelSpec.build(PowerLawRosinski(1.2, 1.0, 1.0))
    with pytest.raises(DivergentEta):
        rejection_sample_tempered(spec, 1.0, 10, 0)


def test_split_sampler_counts(ref_model, ref_grids):
    batch = sample_tempered_at_time(ref_model, 3.0, 200, 5, ref_grids)
    assert batch.accepted == 200
    assert batch.values.shape == (200,)
    assert batch.proposals_used >= 600


def test_sample_path(ref_model, ref_grids):
    path, batch = sample_path(ref_model, 1.0, 50, 4, ref_grids, return_batch=True)
    np.testing.assert_allclose(path, np.cumsum(batch.values))
    assert sample_path(ref_model, 1.0, 0, 4).size == 0


def test_inversion_sample_distribution(ref_grids, ref_model, gen):
    x = inversion_sample(tempered_exponent(ref_model), 1.0, 10000, gen, ref_grids[1]).values
    d = stats.kstest(x, ref_grids[1].cdf).statistic
    assert d < 1.63 / math.sqrt(x.size)


def test_jump_sampler_tweedie(tweedie, gen):
    # big jumps of Tweedie(a = c = 1, alpha = 1/2): density r^(-3/2)(1 - e^-r) / eta
    eta = tweedie.eta

    def big_cdf(r):
        return integrate.quad(lambda s: s**-1.5 * -math.expm1(-s), 0, r)[0] / eta

    x = JumpSampler(tweedie).sample(5000, gen)
    assert np.all(x > 0)
    probe = np.quantile(x, [0.1, 0.25, 0.5, 0.75, 0.9])
    emp = np.array([np.mean(x <= q) for q in probe])
    theo = np.array([big_cdf(q) for q in probe])
    assert np.max(np.abs(emp - theo)) < 1.63 / math.sqrt(x.size)


def test_jump_sampler_symmetric(ref_model, gen):
    x = JumpSampler(ref_model).sample(20000, gen)
    p = np.mean(x > 0)
    assert abs(p - 0.5) < 4 * math.sqrt(0.25 / x.size)


def test_compound_poisson(ref_model, gen):
    draw = compound_poisson_sample(ref_model, 3.0, gen)
    n, jumps = draw
    assert n == jumps.size == draw.times.size
    assert np.all((draw.times >= 0) & (draw.times <= 3.0))
    counts, totals = compound_poisson_batch(ref_model, 0.5, 20000, gen)
    assert abs(counts.mean() - 0.5) < 4 * math.sqrt(0.5 / 20000)
    assert np.all(totals[counts == 0] == 0.0)
