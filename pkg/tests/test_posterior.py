import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import brute_force_posteriors, t_from_posteriors
from conftest import make_trellis
from isiwtc.channel import transmit
from isiwtc.errors import NumericalError
from isiwtc.estimator import t_statistics
from isiwtc.posterior import BOB, EVE, gaussian_log_metrics, smooth, smooth_log_metrics
from isiwtc.source import from_transitions, iud, sample_sequence
from isiwtc.trellis import IsiWtcSpec


def random_dist(tr, rng):
    rows = rng.uniform(0.05, 1.0, size=(tr.n_states, tr.q))
    rows /= rows.sum(axis=1, keepdims=True)
    return from_transitions(tr, rows.ravel())


@settings(max_examples=30, deadline=None)
@given(nu=st.integers(1, 2), n=st.integers(1, 8), seed=st.integers(0, 2 ** 32 - 1),
       var=st.sampled_from([0.05, 0.5, 2.0]))
def test_matches_path_enumeration(nu, n, seed, var):
    rng = np.random.default_rng(seed)
    tr = make_trellis(gB=(1.0, -0.8)[: nu + 1], gE=(0.6, 0.3, -0.2)[: nu + 1], nu=nu)
    d = random_dist(tr, rng)
    y = rng.normal(0, 1.5, size=n)
    post = smooth(tr, d, y, var, BOB)
    single, pairwise = brute_force_posteriors(tr, d.mu, d.p, gaussian_log_metrics(tr, y, var, BOB))
    np.testing.assert_allclose(post.single, single, rtol=0, atol=1e-10)
    np.testing.assert_allclose(post.pairwise, pairwise, rtol=0, atol=1e-10)
    np.testing.assert_allclose(t_statistics(d, post),
                               t_from_posteriors(d.Q, d.mu, tr.edge_from, single, pairwise),
                               rtol=0, atol=1e-10)


def test_dicode_n6_enumeration():
    tr = make_trellis(gB=(1.0, -1.0), nu=1)
    d = iud(tr)
    s = sample_sequence(d, 6, 1)
    y = transmit(s, IsiWtcSpec(tr.spec.gB, tr.spec.gE, 0.5, 0.5), tr, (2, 3)).y
    post = smooth(tr, d, y, 0.5)
    single, pairwise = brute_force_posteriors(tr, d.mu, d.p, gaussian_log_metrics(tr, y, 0.5))
    np.testing.assert_allclose(post.pairwise, pairwise, atol=1e-10)
    np.testing.assert_allclose(post.single, single, atol=1e-10)


def test_row_sums_and_marginals(example2):
    d = random_dist(example2, np.random.default_rng(0))
    s = sample_sequence(d, 2000, 0)
    obs = transmit(s, example2.spec, example2, (1, 2))
    for which, o, v in ((BOB, obs.y, example2.spec.sigmaB2), (EVE, obs.z, example2.spec.sigmaE2)):
        post = smooth(example2, d, o, v, which)
        np.testing.assert_allclose(post.single.sum(axis=1), 1, atol=1e-9)
        np.testing.assert_allclose(post.pairwise.sum(axis=1), 1, atol=1e-9)
        marg = post.pairwise.reshape(post.n, example2.n_states, example2.q).sum(axis=2)
        np.testing.assert_allclose(marg, post.single, atol=1e-8)


def test_scale_invariance(example2, rng):
    d = random_dist(example2, rng)
    lm = gaussian_log_metrics(example2, rng.normal(size=50), 0.7)
    base = smooth_log_metrics(d, lm)
    lm2 = lm.copy()
    lm2[17] += 123.25
    lm2[3] -= 40.0
    shifted = smooth_log_metrics(d, lm2)
    np.testing.assert_allclose(shifted.log_single, base.log_single, atol=1e-12)
    np.testing.assert_allclose(shifted.log_pairwise, base.log_pairwise, atol=1e-12)
    assert shifted.loglik - base.loglik == pytest.approx(83.25, abs=1e-9)


def test_time_reversal():
    # nu=1 binary chains are reversible and g = (1, 1) gives symmetric edge outputs
    tr = make_trellis(gB=(1.0, 1.0), nu=1)
    d = from_transitions(tr, [0.7, 0.3, 0.45, 0.55])
    Qm = tr.transition_matrix(d.Q)
    np.testing.assert_allclose(Qm, Qm.T, atol=1e-15)
    y = np.random.default_rng(4).normal(0, 1.2, size=40)
    fwd = smooth(tr, d, y, 0.6)
    rev = smooth(tr, d, y[::-1], 0.6)
    # single[t] is the law of S_t for t < n; the reversed run sees S_{n-k}
    np.testing.assert_allclose(fwd.single[1:], rev.single[1:][::-1], atol=1e-12)


def test_uninformative_limit(example2):
    d = random_dist(example2, np.random.default_rng(5))
    s = sample_sequence(d, 3000, 5)
    var = 1e6
    spec = IsiWtcSpec(example2.spec.gB, example2.spec.gE, var, var)
    obs = transmit(s, spec, example2, (1, 2))
    post = smooth(example2, d, obs.y, var)
    # one observation still moves the posterior by about |u| |y| / var ~ 1e-3
    assert np.mean(np.abs(post.single - d.mu)) < 1e-3
    assert np.mean(np.abs(post.pairwise - d.Q)) < 1e-3
    far = smooth(example2, d, transmit(s, IsiWtcSpec(spec.gB, spec.gE, 1e8, 1e8), example2, (1, 2)).y, 1e8)
    assert np.max(np.abs(far.single - d.mu)) < 1e-3
    assert np.max(np.abs(far.pairwise - d.Q)) < 1e-3
    t = t_statistics(d, post)
    np.testing.assert_allclose(t, np.log(d.p), atol=1e-3)
    assert float(d.Q @ t) == pytest.approx(-d.entropy_rate(), abs=1e-3)


def _cycle(tr):
    p = np.zeros(tr.n_edges)
    for i, j in [(0, 1), (1, 3), (3, 2), (2, 0)]:
        p[tr.edge_index(i, j)] = 1.0
    return from_transitions(tr, p)


def test_noiseless_cycle_is_certain():
    tr = make_trellis(gB=(1.0, 0.5, 0.25), nu=2)
    d = _cycle(tr)
    s = sample_sequence(d, 60, 2)
    y = tr.uB[s.edges]
    post = smooth(tr, d, y, 1e-3)
    np.testing.assert_allclose(post.pairwise[np.arange(s.n), s.edges], 1.0, atol=1e-12)
    t = t_statistics(d, post)
    visited = d.Q > 0
    np.testing.assert_allclose(t[visited], 0.0, atol=1e-10)
    assert np.all(np.isnan(t[~visited]))


def test_input_checks(example2):
    d = iud(example2)
    with pytest.raises(ValueError):
        smooth(example2, d, np.ones(5), 0.0)
    with pytest.raises(ValueError):
        smooth(example2, d, np.array([1.0, np.nan]), 1.0)
    with pytest.raises(ValueError):
        smooth(example2, d, np.ones(5), 1.0, which="mallory")
    with pytest.raises(ValueError):
        smooth(make_trellis(nu=1), d, np.ones(5), 1.0)


def test_impossible_observation_raises():
    tr = make_trellis(gB=(1.0, 0.5, 0.25), nu=2)
    d = _cycle(tr)
    lm = np.full((4, tr.n_edges), -np.inf)  # no edge explains the data
    with pytest.raises(NumericalError, match="underflow"):
        smooth_log_metrics(d, lm)


def test_long_sequence_runtime(example2):
    import time
    d = iud(example2)
    lm = gaussian_log_metrics(example2, np.random.default_rng(0).normal(size=1_000_000), 0.3)
    smooth_log_metrics(d, lm[:10])  # compile outside the timer
    t0 = time.perf_counter()
    post = smooth_log_metrics(d, lm)
    assert time.perf_counter() - t0 < 10.0
    assert np.isfinite(post.loglik)
