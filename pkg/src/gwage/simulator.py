"""Event-driven simulation of a poll-``s``-then-send policy.

Each sensor's monitor age is a sawtooth that only drops at send
completions, so it is integrated exactly per send segment: a segment of
length ``d`` starting at age ``a`` contributes ``a*d + d*d/2``.

The measurement window opens at the first send completion at or after the
warmup and closes at a send completion (the ``deliveries``-th measured one,
or the last one not beyond ``horizon``), so both edges sit on reset
boundaries.

Two interchangeable execution paths exist.  The reference path steps
:class:`~gwage.model.AgeState` through :func:`~gwage.model.apply_poll` /
:func:`~gwage.model.apply_send` and asks :func:`~gwage.policies.decide` for
every decision; it also records traces.  The default path is a compiled
kernel performing the same arithmetic, used for long runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

import numpy as np

from . import _kernels
from .model import AgeState, Poll, SystemModel, apply_poll, apply_send
from .policies import PolicyConfig, decide
from .stochastic import RngStream, check_sampleable, derive_seed, draw_scalar, moments

# stream indices under a run seed
TX_STREAM, POLICY_STREAM = 0, 1


class InsufficientHorizonError(ValueError):
    """The horizon ended before one measured send interval."""


@dataclass(frozen=True)
class SimConfig:
    """Run controls.  Exactly one of ``horizon`` (time) or ``deliveries``."""

    horizon: Optional[float] = None
    deliveries: Optional[int] = None
    warmup: Optional[float] = None
    seed: int = 0
    trace: bool = False

    def __post_init__(self):
        if (self.horizon is None) == (self.deliveries is None):
            raise ValueError("give exactly one of horizon (time) or deliveries")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if self.deliveries is not None and self.deliveries < 1:
            raise ValueError(f"deliveries must be >= 1, got {self.deliveries}")
        if self.warmup is not None:
            if self.warmup < 0:
                raise ValueError(f"warmup must be >= 0, got {self.warmup}")
            if self.horizon is not None and self.warmup >= self.horizon:
                raise ValueError(f"warmup {self.warmup} must be shorter than horizon {self.horizon}")

    def resolved_warmup(self, model: SystemModel) -> float:
        if self.warmup is not None:
            return float(self.warmup)
        return default_warmup(model)


def default_warmup(model: SystemModel) -> float:
    """Ten rounds of polling every sensor at the slowest sensor's pace."""
    worst = max(model.sensor_means())
    return 10.0 * model.n * (worst + moments(model.monitor_dist)[0])


def deliveries_for_polls(polls: int, s: int) -> int:
    return max(1, math.ceil(polls / s))


@dataclass(frozen=True)
class EventRecord:
    t_start: float
    t_end: float
    kind: str  # "poll" or "send"
    sensor: int  # -1 for sends
    duration: float


@dataclass(frozen=True)
class ResetRecord:
    t: float
    sensor: int
    new_age: float


@dataclass(frozen=True)
class SimResult:
    avg_age_per_sensor: tuple
    aoi: float
    polls_per_sensor: tuple
    sends: int
    measured_time: float
    per_sensor_reset_count: tuple
    # renewal-cycle estimates; nan for sensors without a complete cycle
    mean_Y_per_sensor: tuple
    mean_T_per_sensor: tuple
    mean_Y2_per_sensor: tuple
    mean_YT_per_sensor: tuple
    window: tuple
    final_state: AgeState
    trace: Optional[tuple] = None
    resets: Optional[tuple] = None

    def renewal_estimate(self, sensor: int) -> float:
        """``(E[YT] + E[Y^2]/2) / E[Y]`` from the run's own cycle samples."""
        ey = self.mean_Y_per_sensor[sensor]
        return (self.mean_YT_per_sensor[sensor] + self.mean_Y2_per_sensor[sensor] / 2) / ey


def _streams(seed: int) -> tuple[RngStream, RngStream]:
    return RngStream(derive_seed(seed, TX_STREAM)), RngStream(derive_seed(seed, POLICY_STREAM))


def _finish(n, area, polls_win, resets, cycles, sum_y, sum_y2, sum_yt, sum_t,
            sends, t_open, t_close, final_state, trace=None, reset_log=None) -> SimResult:
    if sends < 1:
        raise InsufficientHorizonError(
            "horizon too short: no measured send interval after warmup")
    span = t_close - t_open
    avg = tuple(float(a) / span for a in area)

    def ratio(num, den):
        return tuple(float(x) / int(c) if c else math.nan for x, c in zip(num, den))

    return SimResult(
        avg_age_per_sensor=avg,
        aoi=sum(avg) / n,
        polls_per_sensor=tuple(int(p) for p in polls_win),
        sends=int(sends),
        measured_time=span,
        per_sensor_reset_count=tuple(int(r) for r in resets),
        mean_Y_per_sensor=ratio(sum_y, cycles),
        mean_T_per_sensor=ratio(sum_t, resets),
        mean_Y2_per_sensor=ratio(sum_y2, cycles),
        mean_YT_per_sensor=ratio(sum_yt, cycles),
        window=(float(t_open), float(t_close)),
        final_state=final_state,
        trace=trace,
        resets=reset_log,
    )


def run(model: SystemModel, policy: PolicyConfig, cfg: SimConfig,
        draws: Iterable[float] | None = None, reference: bool = False) -> SimResult:
    """Simulate ``policy`` on ``model``; a deterministic function of the inputs.

    ``draws`` replaces sampling with a fixed sequence of transmission times
    (one per decision, in decision order) and implies the reference path, as
    does ``cfg.trace``.
    """
    policy.validate_for(model)
    for d in (*model.sensor_dists, model.monitor_dist):
        check_sampleable(d)
    if reference or cfg.trace or draws is not None:
        return _run_reference(model, policy, cfg, draws)
    return _run_kernel(model, policy, cfg)


def _run_kernel(model: SystemModel, policy: PolicyConfig, cfg: SimConfig) -> SimResult:
    n = model.n
    tx, pol = _streams(cfg.seed)
    kinds = np.array([d.kind for d in model.sensor_dists], dtype=np.int64)
    params = np.array([d.params() for d in model.sensor_dists], dtype=np.float64)
    means = np.array(model.sensor_means(), dtype=np.float64)
    rule = policy.rule.fresh()
    time_mode = cfg.horizon is not None
    out = _kernels.simulate(
        int(policy.s), rule.code, means, kinds, params,
        model.monitor_dist.kind, np.array(model.monitor_dist.params(), dtype=np.float64),
        tx.generator, pol.generator,
        time_mode, float(cfg.horizon) if time_mode else 0.0,
        0 if time_mode else int(cfg.deliveries),
        cfg.resolved_warmup(model),
        int(getattr(rule, "next", 0)),
    )
    (area, polls_win, resets, cycles, sum_y, sum_y2, sum_yt, sum_t,
     sends, t_open, t_close, gw, mon, t, _rr) = out
    # every run stops right after a send completes, so monitor == gateway
    gw_t = tuple(gw.tolist())
    state = AgeState(float(t), gw_t, gw_t, 0)
    return _finish(n, area, polls_win, resets, cycles, sum_y, sum_y2, sum_yt, sum_t,
                   sends, t_open, t_close, state)


def _run_reference(model: SystemModel, policy: PolicyConfig, cfg: SimConfig,
                   draws: Iterable[float] | None = None) -> SimResult:
    n = model.n
    tx, pol = _streams(cfg.seed)
    draw_iter = iter(draws) if draws is not None else None
    policy = PolicyConfig(policy.s, policy.rule.fresh())
    warmup = cfg.resolved_warmup(model)
    time_mode = cfg.horizon is not None
    sensor_params = [(d.kind, *d.params()) for d in model.sensor_dists]
    monitor_params = (model.monitor_dist.kind, *model.monitor_dist.params())

    def next_draw(kind, a, b, c):
        if draw_iter is None:
            return draw_scalar(kind, a, b, c, tx.generator)
        try:
            return float(next(draw_iter))
        except StopIteration:
            raise InsufficientHorizonError("supplied draw sequence exhausted") from None

    area = [0.0] * n
    polls_win = [0] * n
    resets = [0] * n
    cycles = [0] * n
    sum_y, sum_y2, sum_yt, sum_t = [0.0] * n, [0.0] * n, [0.0] * n, [0.0] * n
    last_reset = [-1.0] * n
    last_t = [0.0] * n
    pending = [0] * n
    trace = [] if cfg.trace else None
    reset_log = [] if cfg.trace else None

    state = AgeState.initial(n)
    mon_at_send = state.age_mon
    t_prev = 0.0
    t_open = 0.0
    is_open = False
    sends = 0
    while True:
        decision = decide(policy, state, model, pol)
        if isinstance(decision, Poll):
            i = decision.sensor
            x = next_draw(*sensor_params[i])
            t0 = state.t
            state = apply_poll(state, i, x)
            pending[i] += 1
            if trace is not None:
                trace.append(EventRecord(t0, state.t, "poll", i, x))
            continue
        x0 = next_draw(*monitor_params)
        t0 = state.t
        state = apply_send(state, x0)
        t = state.t
        if trace is not None:
            trace.append(EventRecord(t0, t, "send", -1, x0))
        if time_mode and t > cfg.horizon:
            break
        d = t - t_prev
        if is_open:
            for k in range(n):
                area[k] += mon_at_send[k] * d + d * d / 2.0
                polls_win[k] += pending[k]
            sends += 1
        elif t >= warmup:
            is_open = True
            t_open = t
        gw = state.age_gw
        for k in range(n):
            if pending[k] > 0:
                if reset_log is not None:
                    reset_log.append(ResetRecord(t, k, gw[k]))
                if is_open:
                    if last_reset[k] >= 0.0:
                        y = t - last_reset[k]
                        sum_y[k] += y
                        sum_y2[k] += y * y
                        sum_yt[k] += y * last_t[k]
                        cycles[k] += 1
                    last_t[k] = gw[k]
                    sum_t[k] += gw[k]
                    resets[k] += 1
                    last_reset[k] = t
            pending[k] = 0
        mon_at_send = state.age_mon
        t_prev = t
        if not time_mode and sends >= cfg.deliveries:
            break
    return _finish(n, area, polls_win, resets, cycles, sum_y, sum_y2, sum_yt, sum_t,
                   sends, t_open, t_prev, state,
                   tuple(trace) if trace is not None else None,
                   tuple(reset_log) if reset_log is not None else None)


def write_trace(result: SimResult, fh: TextIO) -> None:
    """Tab-separated event log, reset lines interleaved after their send."""
    if result.trace is None:
        raise ValueError("result has no trace; run with SimConfig(trace=True)")
    resets = list(result.resets or ())
    r = 0
    for ev in result.trace:
        sensor = ev.sensor if ev.kind == "poll" else "-"
        fh.write(f"{ev.t_start!r}\t{ev.t_end!r}\t{ev.kind.upper()}\t{sensor}\t{ev.duration!r}\n")
        if ev.kind == "send":
            while r < len(resets) and resets[r].t == ev.t_end:
                rec = resets[r]
                fh.write(f"{rec.t!r}\tRESET\t{rec.sensor}\t{rec.new_age!r}\n")
                r += 1


# -- replication ------------------------------------------------------------

@dataclass(frozen=True)
class ReplicateSummary:
    mean: float
    std: float
    ci_lo: float
    ci_hi: float
    replicates: int
    aois: tuple
    seed: int

    @property
    def half_width(self) -> float:
        return (self.ci_hi - self.ci_lo) / 2


def summarize(aois, seed: int = 0) -> ReplicateSummary:
    """Mean, sample std and normal 95% CI of per-replicate AoI values."""
    vals = [float(a) for a in aois]
    r = len(vals)
    if r < 1:
        raise ValueError("need at least one replicate")
    # fsum is exactly rounded, so the result does not depend on replicate order
    mean = math.fsum(vals) / r
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (r - 1)) if r > 1 else 0.0
    half = 1.96 * std / math.sqrt(r)
    return ReplicateSummary(mean, std, mean - half, mean + half, r, tuple(vals), seed)


def replicate(model: SystemModel, policy: PolicyConfig, cfg: SimConfig,
              replicates: int) -> ReplicateSummary:
    """``replicates`` independent runs; replicate ``r`` uses ``derive_seed(cfg.seed, r)``."""
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    aois = []
    for r in range(replicates):
        rcfg = SimConfig(cfg.horizon, cfg.deliveries, cfg.warmup, derive_seed(cfg.seed, r), False)
        aois.append(run(model, policy, rcfg).aoi)
    return summarize(aois, cfg.seed)
