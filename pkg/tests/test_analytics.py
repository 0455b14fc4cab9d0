import math

import pytest

from gwage.analytics import (HomogeneousParams, approx_minimizer, aoi_curve, avg_age_approx,
                             avg_age_exact, l_moments, s_hat, s_star)
from gwage.model import SystemModel
from gwage.policies import PolicyConfig
from gwage.simulator import SimConfig, deliveries_for_polls, replicate
from gwage.stochastic import Exponential, Uniform, fit_hyperexponential


def schedule_oracle(n, s, ex, varx, ex0, varx0):
    """Expected AoI of the cyclic MAF schedule by direct cycle enumeration.

    Sensors are polled 0, 1, ..., n-1, 0, ... with a send after every s
    polls.  Each inter-reset interval Y and the delivered age T are sums of
    known numbers of independent poll and send times, so E[YT] and E[Y^2]
    follow from their counts.
    """
    period = n * s // math.gcd(n, s)
    events = []
    for p in range(3 * period):
        events.append(p % n)
        if p % s == s - 1:
            events.append(None)
    total = 0.0
    for i in range(n):
        resets, pending, last_poll = [], False, 0
        for j, e in enumerate(events):
            if e == i:
                pending, last_poll = True, j
            elif e is None and pending:
                resets.append((last_poll, j))
                pending = False

        def mean_len(lo, hi):
            polls = sum(1 for e in events[lo:hi] if e is not None)
            sends = hi - lo - polls
            return polls, sends

        num = den = 0.0
        for (a0, a1), (_, b1) in zip(resets, resets[1:]):
            # the middle third of the event list is exactly one period
            if not len(events) // 3 <= a1 < 2 * len(events) // 3:
                continue
            tp, ts = mean_len(a0, a1 + 1)
            yp, ys = mean_len(a1 + 1, b1 + 1)
            et, ey = tp * ex + ts * ex0, yp * ex + ys * ex0
            ey2 = yp * varx + ys * varx0 + ey * ey
            num += ey * et + ey2 / 2
            den += ey
        total += num / den
    return total / n


def test_l_moments():
    lm = l_moments(10, 1)
    assert (lm.e_l, lm.e_l2, lm.e_lr) == (10, 100, 0)
    lm = l_moments(10, 10)
    assert (lm.e_l, lm.e_l2, lm.e_lr) == pytest.approx((1, 1, 4.5))
    lm = l_moments(10, 3)
    assert (lm.e_l, lm.e_l2, lm.e_lr) == pytest.approx((10 / 3, 34 / 3, 3))


def test_l_moment_invariants():
    for n in range(1, 30):
        for s in range(1, n + 1):
            lm = l_moments(n, s)
            assert lm.e_l >= 1 and lm.e_lr >= 0
            assert lm.e_l2 >= lm.e_l ** 2 - 1e-12


def test_exact_values():
    assert avg_age_exact(HomogeneousParams(4, 2, 1, 0, 1, 0)) == 5.5
    # 0.5 + (34/20)*4 + 0.9 + 2
    assert avg_age_exact(HomogeneousParams(10, 3, 1, 1, 1, 1)) == pytest.approx(10.2, abs=1e-12)


def test_single_sensor_matches_renewal():
    # Y = T = X + X0 for det laws, so the average is T + Y/2 = 3
    assert avg_age_exact(HomogeneousParams(1, 1, 1, 0, 1, 0)) == pytest.approx(3.0)


@pytest.mark.parametrize("n, s", [(4, 2), (10, 1), (10, 2), (10, 5), (10, 10), (12, 4), (6, 3)])
def test_exact_matches_schedule_when_s_divides_n(n, s):
    for ex, varx, ex0, varx0 in [(1, 0, 1, 0), (1, 1, 1, 1), (2, 0.5, 3, 9)]:
        p = HomogeneousParams(n, s, ex, varx, ex0, varx0)
        assert avg_age_exact(p) == pytest.approx(schedule_oracle(n, s, ex, varx, ex0, varx0), rel=1e-12)


def test_exact_close_to_schedule_otherwise():
    for s in (3, 4, 6, 7, 8, 9):
        p = HomogeneousParams(10, s, 1, 1, 1, 1)
        assert avg_age_exact(p) == pytest.approx(schedule_oracle(10, s, 1, 1, 1, 1), rel=0.01)


def test_approx_values():
    assert avg_age_approx(HomogeneousParams(4, 2, 1, 0, 1, 0)) == pytest.approx(5.5)
    assert avg_age_approx(HomogeneousParams(10, 3, 1, 1, 1, 1)) == pytest.approx(10.1666666667)
    for n in (3, 10, 17):
        p = HomogeneousParams(n, 1, 1.5, 0.3, 2, 1)
        assert avg_age_approx(p) == pytest.approx(avg_age_exact(p))


def test_approx_stationary_at_sqrt_eta1_n():
    n, eta1 = 20, 1.8
    s0 = approx_minimizer(n, eta1)

    def f(s):  # approximation with continuous s, Var[X] = 0
        return (n / (2 * s) * (s + eta1) + (s - 1) / 2 + eta1 + 1)

    h = 1e-5
    assert (f(s0 + h) - f(s0 - h)) / (2 * h) == pytest.approx(0, abs=1e-6)


def test_s_star_examples():
    assert s_star(16, 1, 0, 1, 0) == 4
    assert s_star(10, 1, 0, 1e-6, 0) == 1
    curve = aoi_curve(10, 1, 1, 4, 16)
    assert s_star(10, 1, 1, 4, 16) == 1 + min(range(10), key=curve.__getitem__)


def test_s_star_prefers_smallest_on_plateau():
    # n=8, eta1=4, det laws: s=4 and s=8 give exactly the same AoI
    curve = aoi_curve(8, 1, 0, 4, 0)
    assert curve[3] == pytest.approx(curve[7], rel=1e-14)
    assert s_star(8, 1, 0, 4, 0) == 4


def test_s_hat_examples():
    assert s_hat(16, 1) == 4
    assert s_hat(10, 1) == 3
    assert s_hat(2, 100) == 2
    assert s_hat(1, 0.01) == 1
    assert s_hat(2, 1.125) == 2  # sqrt(2.25) = 1.5 rounds up
    with pytest.raises(ValueError):
        s_hat(4, 0)


def test_param_validation():
    with pytest.raises(ValueError):
        HomogeneousParams(4, 5, 1, 0, 1, 0)
    with pytest.raises(ValueError):
        HomogeneousParams(4, 2, 0, 0, 1, 0)
    p = HomogeneousParams.from_specs(4, 2, Exponential(2), Exponential(4))
    assert (p.eta1, p.eta2) == (2, 4)
    assert math.isnan(HomogeneousParams(4, 2, 1, 0, 1, 0).eta2)
    assert HomogeneousParams(4, 2, 1, 0, 1, 1).eta2 == math.inf


@pytest.mark.parametrize("n", [5, 10])
@pytest.mark.parametrize("sensor", [Exponential(1), Uniform(0, 2)], ids=["exp", "unif"])
def test_exact_matches_simulation(n, sensor):
    model = SystemModel.homogeneous(n, sensor, sensor)
    p = HomogeneousParams.from_specs(n, 1, sensor, sensor)
    for s in range(1, n + 1):
        cfg = SimConfig(deliveries=deliveries_for_polls(50_000, s), seed=s)
        sim = replicate(model, PolicyConfig(s), cfg, 10)
        assert sim.mean == pytest.approx(avg_age_exact(p.with_s(s)), rel=0.02)


def test_hyperexp_exact_matches_simulation():
    sensor = fit_hyperexponential(1, 5)
    model = SystemModel.homogeneous(6, sensor, sensor)
    cfg = SimConfig(deliveries=deliveries_for_polls(200_000, 2), seed=4)
    sim = replicate(model, PolicyConfig(2), cfg, 10)
    p = HomogeneousParams.from_specs(6, 2, sensor, sensor)
    assert sim.mean == pytest.approx(avg_age_exact(p), rel=0.02)
