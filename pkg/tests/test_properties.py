"""Randomized-configuration invariants.

Each property bumps ``CASES`` once per generated example so the acceptance
suite can confirm how many cases actually ran.
"""
import math
from collections import Counter

from hypothesis import HealthCheck, given, settings, strategies as st

from gwage.analytics import HomogeneousParams, avg_age_approx, avg_age_exact, l_moments
from gwage.model import AgeState, SystemModel, apply_poll, apply_send
from gwage.policies import PolicyConfig
from gwage.simulator import SimConfig, run
from gwage.stochastic import (Deterministic, Exponential, RngStream, TruncatedGaussian, Uniform,
                              fit_hyperexponential, moments, parse_dist, sample_many, with_moments)

CASES = Counter()

pos = st.floats(min_value=0.05, max_value=20, allow_nan=False, allow_infinity=False)


@st.composite
def dists(draw):
    kind = draw(st.sampled_from(["det", "unif", "exp", "tnorm", "hyperexp"]))
    m = draw(pos)
    if kind == "det":
        return Deterministic(m)
    if kind == "unif":
        lo = draw(st.floats(min_value=0, max_value=10))
        return Uniform(lo, lo + draw(pos))
    if kind == "exp":
        return Exponential(m)
    if kind == "tnorm":
        sigma = draw(pos)
        # keep mu/sigma well inside the sampleable region
        return TruncatedGaussian(sigma * draw(st.floats(min_value=-3, max_value=20)), sigma)
    return fit_hyperexponential(m, m * m * draw(st.floats(min_value=1.01, max_value=50)))


@st.composite
def sim_setups(draw):
    n = draw(st.integers(1, 6))
    iid = draw(st.booleans())
    sensors = [draw(dists())] * n if iid else [draw(dists()) for _ in range(n)]
    model = SystemModel(tuple(sensors), draw(dists()))
    s = draw(st.integers(1, n))
    rule = draw(st.sampled_from(["maf", "mca", "rr", "random", "minage"]))
    seed = draw(st.integers(0, 2**64 - 1))
    return model, PolicyConfig(s, rule), seed


FAST = settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@FAST
@given(sim_setups())
def test_trace_invariants(setup):
    CASES["trace"] += 1
    model, policy, seed = setup
    cfg = SimConfig(deliveries=15, warmup=0.0, seed=seed, trace=True)
    res = run(model, policy, cfg)
    st_ = AgeState.initial(model.n)
    clock = 0.0
    polls = 0
    for ev in res.trace:
        assert ev.duration > 0 and math.isfinite(ev.duration)
        assert ev.t_start == clock
        if ev.kind == "poll":
            st_ = apply_poll(st_, ev.sensor, ev.duration)
            polls += 1
            assert polls <= policy.s
        else:
            assert polls == policy.s
            st_ = apply_send(st_, ev.duration)
            polls = 0
            assert st_.age_mon == st_.age_gw
        clock = st_.t
        assert ev.t_end == clock
        assert all(m >= g >= 0 for g, m in zip(st_.age_gw, st_.age_mon))
    assert st_ == res.final_state
    assert math.isclose(math.fsum(ev.duration for ev in res.trace), clock, rel_tol=1e-9)
    assert all(math.isfinite(a) and a >= 0 for a in res.avg_age_per_sensor)
    assert math.isclose(res.aoi, sum(res.avg_age_per_sensor) / model.n, rel_tol=1e-12)
    assert sum(res.polls_per_sensor) == res.sends * policy.s


@FAST
@given(sim_setups())
def test_runs_deterministic_and_paths_agree(setup):
    CASES["determinism"] += 1
    model, policy, seed = setup
    cfg = SimConfig(deliveries=40, seed=seed)
    fast = run(model, policy, cfg)
    assert fast == run(model, policy, cfg)
    assert fast == run(model, policy, cfg, reference=True)


@FAST
@given(dists(), st.integers(0, 2**64 - 1))
def test_moment_and_text_round_trips(spec, seed):
    CASES["moments"] += 1
    mean, var = moments(spec)
    assert mean > 0 and var >= 0
    assert parse_dist(str(spec)) == spec
    if var > mean * mean * 1.0001:
        m2, v2 = moments(fit_hyperexponential(mean, var))
        assert math.isclose(m2, mean, rel_tol=1e-9) and math.isclose(v2, var, rel_tol=1e-9)
    if not isinstance(spec, TruncatedGaussian):
        back = with_moments(spec, mean, var)
        assert all(math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)
                   for a, b in zip(moments(back), (mean, var)))
    a = sample_many(spec, RngStream(seed), 50)
    assert (a > 0).all() and (a == sample_many(spec, RngStream(seed), 50)).all()


@FAST
@given(st.lists(st.floats(min_value=0, max_value=100), min_size=2, max_size=8), st.data())
def test_poll_preserves_order(ages, data):
    CASES["poll"] += 1
    n = len(ages)
    i = data.draw(st.integers(0, n - 1))
    x = data.draw(pos)
    st0 = AgeState(0.0, tuple(ages), tuple(a + 1 for a in ages))
    out = apply_poll(st0, i, x)
    assert out.age_gw[i] == x
    others = [k for k in range(n) if k != i]
    for a in others:
        for b in others:
            if ages[a] < ages[b]:
                assert out.age_gw[a] <= out.age_gw[b]
    if all(out.age_gw[k] > x for k in others):
        assert min(range(n), key=out.age_gw.__getitem__) == i
    assert out.age_mon == tuple(m + x for m in st0.age_mon)


@FAST
@given(st.integers(1, 200), st.data(), pos, st.floats(0, 10), pos, st.floats(0, 10))
def test_analytic_invariants(n, data, ex, varx, ex0, varx0):
    CASES["analytics"] += 1
    s = data.draw(st.integers(1, n))
    lm = l_moments(n, s)
    assert lm.e_l >= 1 and lm.e_lr >= 0 and lm.e_l2 >= lm.e_l ** 2 * (1 - 1e-12)
    p = HomogeneousParams(n, s, ex, varx, ex0, varx0)
    assert avg_age_exact(p) > 0
    one = p.with_s(1)
    assert math.isclose(avg_age_exact(one), avg_age_approx(one), rel_tol=1e-12)
