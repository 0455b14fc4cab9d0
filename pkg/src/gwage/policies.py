"""Poll-``s``-then-send policies and their sensor-selection rules.

Ties are broken by the lowest sensor index everywhere.  With continuous
transmission times ties have probability zero, but the all-zero start and
deterministic laws produce them routinely.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import SEND, AgeState, Decision, Poll, SystemModel
from .stochastic import RngStream

# rule codes used by the compiled kernels
MAF, MCA, RR, RANDOM, MINAGE = 0, 1, 2, 3, 4


class SelectionRule:
    code: int = -1
    name: str = ""

    def choose(self, age_gw, model: SystemModel, rng: RngStream | None) -> int:
        raise NotImplementedError

    def fresh(self) -> "SelectionRule":
        """Copy with per-run state reset."""
        return self

    def __str__(self):
        return self.name


def _argmax(values) -> int:
    best, arg = values[0], 0
    for i in range(1, len(values)):
        if values[i] > best:
            best, arg = values[i], i
    return arg


def _argmin(values) -> int:
    best, arg = values[0], 0
    for i in range(1, len(values)):
        if values[i] < best:
            best, arg = values[i], i
    return arg


@dataclass(frozen=True)
class MaxAgeFirst(SelectionRule):
    """Poll the sensor whose update at the gateway is oldest."""

    code = MAF
    name = "maf"

    def choose(self, age_gw, model, rng):
        return _argmax(age_gw)


@dataclass(frozen=True)
class MinChangeInAge(SelectionRule):
    """Poll the sensor minimizing ``E[X_i] - age_gw[i] / n``."""

    code = MCA
    name = "mca"

    def choose(self, age_gw, model, rng):
        n = len(age_gw)
        means = model.sensor_means()
        return _argmin([means[i] - age_gw[i] / n for i in range(n)])


@dataclass
class RoundRobin(SelectionRule):
    next: int = 0
    code = RR
    name = "rr"

    def choose(self, age_gw, model, rng):
        n = len(age_gw)
        if not 0 <= self.next < n:
            raise IndexError(f"round-robin cursor {self.next} out of range for n={n}")
        i = self.next
        self.next = (i + 1) % n
        return i

    def fresh(self):
        return RoundRobin(self.next)


@dataclass(frozen=True)
class RandomUniform(SelectionRule):
    """Uniform choice; exactly one ``rng.random()`` per poll."""

    code = RANDOM
    name = "random"

    def choose(self, age_gw, model, rng):
        n = len(age_gw)
        return min(int(rng.random() * n), n - 1)


@dataclass(frozen=True)
class MinAgeFirst(SelectionRule):
    """Poll the freshest sensor; a deliberately bad baseline."""

    code = MINAGE
    name = "minage"

    def choose(self, age_gw, model, rng):
        return _argmin(age_gw)


RULES = {
    "maf": MaxAgeFirst,
    "mca": MinChangeInAge,
    "rr": RoundRobin,
    "random": RandomUniform,
    "minage": MinAgeFirst,
}


def parse_rule(name: str) -> SelectionRule:
    try:
        return RULES[name.strip().lower()]()
    except KeyError:
        raise ValueError(f"unknown rule {name!r}; expected one of {', '.join(RULES)}") from None


@dataclass(frozen=True)
class PolicyConfig:
    """Poll ``s`` sensors (selected by ``rule``), then send to the monitor."""

    s: int
    rule: SelectionRule = field(default_factory=MaxAgeFirst)

    def __post_init__(self):
        if isinstance(self.rule, str):
            object.__setattr__(self, "rule", parse_rule(self.rule))
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"s must be a positive integer, got {self.s}")

    def validate_for(self, model: SystemModel) -> None:
        if self.s > model.n:
            raise ValueError(f"s={self.s} exceeds the number of sensors n={model.n}")

    def label(self) -> str:
        return f"s={self.s},{self.rule.name}"


def decide(cfg: PolicyConfig, state: AgeState, model: SystemModel,
           rng: RngStream | None = None) -> Decision:
    """Send once ``s`` polls have accumulated, else poll per ``cfg.rule``.

    Stateful rules (round robin) advance their cursor in place, so callers
    running a simulation should pass a policy whose rule came from
    ``rule.fresh()``.
    """
    if state.n != model.n:
        raise ValueError(f"state has {state.n} sensors, model has {model.n}")
    if state.polls_since_send >= cfg.s:
        return SEND
    return Poll(cfg.rule.choose(state.age_gw, model, rng))

