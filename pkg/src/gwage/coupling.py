"""Sample-path comparison of MAF against other rules on shared draws.

With iid sensors and a fixed ``s`` both policies poll and send in the same
slots, so the ``j``-th decision of either policy can consume the same
pre-drawn transmission time.  On such coupled paths MAF's descending-sorted
gateway age vector should never exceed the alternative's, element by
element, and neither should its monitor age vector at send completions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np

from . import _kernels
from .model import AgeState, Poll, SystemModel, apply_poll, apply_send
from .policies import MaxAgeFirst, PolicyConfig, SelectionRule, decide, parse_rule
from .simulator import ReplicateSummary, SimConfig, replicate
from .stochastic import RngStream, check_sampleable, derive_seed, draw_jit, draw_scalar


class CouplingNotApplicableError(ValueError):
    """Coupling needs iid sensor transmission times."""


@dataclass(frozen=True)
class CoupledRun:
    model: SystemModel
    s: int
    alt_rule: SelectionRule
    decisions: int
    seed: int = 0
    # the rule expected to dominate; only tests of the checker change it
    base_rule: SelectionRule = MaxAgeFirst()

    def __post_init__(self):
        for name in ("alt_rule", "base_rule"):
            if isinstance(getattr(self, name), str):
                object.__setattr__(self, name, parse_rule(getattr(self, name)))
        if not self.model.is_iid:
            raise CouplingNotApplicableError("coupling requires identically distributed sensors")
        if not 1 <= self.s <= self.model.n:
            raise ValueError(f"s must satisfy 1 <= s <= n={self.model.n}, got {self.s}")
        if self.decisions < 1:
            raise ValueError(f"decisions must be >= 1, got {self.decisions}")


@dataclass(frozen=True)
class Violation:
    decision: int
    rank: int  # position in the descending-sorted vector
    maf_value: float
    alt_value: float
    at_monitor: bool


@dataclass(frozen=True)
class DominanceReport:
    holds: bool
    first_violation: Optional[Violation]
    decisions_checked: int
    reproducer: str = ""


def reproducer(run: CoupledRun) -> str:
    """Config snippet that replays ``run`` through the CLI."""
    m = run.model
    return "\n".join([
        "[experiment]",
        "kind = verify-coupling",
        "[model]",
        f"n = {m.n}",
        f"sensor = {m.sensor_dists[0]}",
        f"monitor = {m.monitor_dist}",
        "[policy]",
        f"s = {run.s}",
        f"rules = {run.alt_rule.name}",
        *([f"base = {run.base_rule.name}"] if run.base_rule.code != MaxAgeFirst.code else []),
        "[run]",
        f"decisions = {run.decisions}",
        f"seed = {run.seed}",
        "seeds = 1",
    ])


@numba.njit(cache=True)
def _shared_draws_jit(s, m, skind, sp, mkind, mp, gen):
    out = np.empty(m)
    for j in range(m):
        if j % (s + 1) < s:
            out[j] = draw_jit(skind, sp[0], sp[1], sp[2], gen)
        else:
            out[j] = draw_jit(mkind, mp[0], mp[1], mp[2], gen)
    return out


def shared_draws(run: CoupledRun) -> np.ndarray:
    """Transmission time of every decision slot (``s`` polls, then a send)."""
    sensor, monitor = run.model.sensor_dists[0], run.model.monitor_dist
    check_sampleable(sensor)
    check_sampleable(monitor)
    gen = RngStream(derive_seed(run.seed, 0)).generator
    return _shared_draws_jit(run.s, run.decisions, sensor.kind, np.array(sensor.params()),
                             monitor.kind, np.array(monitor.params()), gen)


def shared_draws_reference(run: CoupledRun) -> list[float]:
    sensor, monitor = run.model.sensor_dists[0], run.model.monitor_dist
    gen = RngStream(derive_seed(run.seed, 0)).generator
    return [draw_scalar(sensor.kind, *sensor.params(), gen) if j % (run.s + 1) < run.s
            else draw_scalar(monitor.kind, *monitor.params(), gen)
            for j in range(run.decisions)]


def _policy_stream(run: CoupledRun) -> RngStream:
    return RngStream(derive_seed(run.seed, 1))


def iter_coupled(run: CoupledRun, draws: Sequence[float]):
    """Yield ``(j, decision, base_state, alt_state)`` after every decision."""
    model = run.model
    maf = PolicyConfig(run.s, run.base_rule.fresh())
    alt = PolicyConfig(run.s, run.alt_rule.fresh())
    rng = _policy_stream(run)
    a = b = AgeState.initial(model.n)
    for j, z in enumerate(draws):
        da = decide(maf, a, model, rng)
        db = decide(alt, b, model, rng)
        if isinstance(da, Poll) != isinstance(db, Poll):
            raise AssertionError(f"slot patterns diverged at decision {j}")
        if isinstance(da, Poll):
            a = apply_poll(a, da.sensor, z)
            b = apply_poll(b, db.sensor, z)
        else:
            a = apply_send(a, z)
            b = apply_send(b, z)
        yield j, da, a, b


def _first_excess(xs, ys):
    sx, sy = sorted(xs, reverse=True), sorted(ys, reverse=True)
    for r, (u, v) in enumerate(zip(sx, sy)):
        if u > v:
            return r, u, v
    return None


def _verify_reference(run: CoupledRun) -> DominanceReport:
    draws = shared_draws_reference(run)
    for j, decision, a, b in iter_coupled(run, draws):
        hit = _first_excess(a.age_gw, b.age_gw)
        at_monitor = False
        if hit is None and not isinstance(decision, Poll):
            hit = _first_excess(a.age_mon, b.age_mon)
            at_monitor = True
        if hit is not None:
            v = Violation(j, hit[0], hit[1], hit[2], at_monitor)
            return DominanceReport(False, v, j + 1, reproducer(run))
    return DominanceReport(True, None, run.decisions)


def verify_dominance(run: CoupledRun, reference: bool = False) -> DominanceReport:
    """Check sorted-age dominance of MAF over ``run.alt_rule`` on shared draws."""
    if reference:
        return _verify_reference(run)
    draws = shared_draws(run)
    means = np.array(run.model.sensor_means())
    j, r, va, vb, at_mon, _a, _b = _kernels.coupled_dominance(
        run.s, run.base_rule.code, run.alt_rule.code, draws, means,
        _policy_stream(run).generator, run.model.n)
    if j < 0:
        return DominanceReport(True, None, run.decisions)
    v = Violation(int(j), int(r), float(va), float(vb), bool(at_mon))
    return DominanceReport(False, v, int(j) + 1, reproducer(run))


def coupled_final_ages(run: CoupledRun) -> tuple[tuple, tuple]:
    """Gateway age vectors of MAF and the alternative after the last decision."""
    draws = shared_draws(run)
    means = np.array(run.model.sensor_means())
    *_, a, b = _kernels.coupled_dominance(
        run.s, run.base_rule.code, run.alt_rule.code, draws, means,
        _policy_stream(run).generator, run.model.n)
    return tuple(a.tolist()), tuple(b.tolist())


def aoi_dominance_summary(model: SystemModel, s: int, rules: Sequence[SelectionRule | str],
                          replicates: int, cfg: SimConfig) -> list[tuple[str, ReplicateSummary]]:
    """Uncoupled long-run AoI with 95% CIs for each rule at the same ``s``."""
    out = []
    for rule in rules:
        rule = parse_rule(rule) if isinstance(rule, str) else rule
        out.append((rule.name, replicate(model, PolicyConfig(s, rule), cfg, replicates)))
    return out


def ci_separated(better: ReplicateSummary, worse: ReplicateSummary) -> bool:
    """True when ``better``'s CI lies strictly below ``worse``'s."""
    return better.ci_hi < worse.ci_lo
