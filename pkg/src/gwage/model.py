"""System description and the age dynamics at the gateway and the monitor."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .stochastic import DistributionSpec, moments


@dataclass(frozen=True)
class SystemModel:
    """``n`` sensors with their transmission laws, plus the monitor link law."""

    sensor_dists: tuple[DistributionSpec, ...]
    monitor_dist: DistributionSpec

    def __post_init__(self):
        object.__setattr__(self, "sensor_dists", tuple(self.sensor_dists))
        if len(self.sensor_dists) < 1:
            raise ValueError("need at least one sensor")
        for d in (*self.sensor_dists, self.monitor_dist):
            if not isinstance(d, DistributionSpec):
                raise TypeError(f"not a distribution spec: {d!r}")

    @classmethod
    def homogeneous(cls, n: int, sensor: DistributionSpec, monitor: DistributionSpec) -> "SystemModel":
        return cls((sensor,) * int(n), monitor)

    @property
    def n(self) -> int:
        return len(self.sensor_dists)

    @property
    def is_iid(self) -> bool:
        first = self.sensor_dists[0]
        return all(d == first for d in self.sensor_dists)

    def sensor_means(self) -> list[float]:
        return [moments(d)[0] for d in self.sensor_dists]


@dataclass(frozen=True)
class AgeState:
    """Ages at the gateway and the monitor at clock ``t``."""

    t: float
    age_gw: tuple[float, ...]
    age_mon: tuple[float, ...]
    polls_since_send: int = 0

    @classmethod
    def initial(cls, n: int) -> "AgeState":
        zeros = (0.0,) * n
        return cls(0.0, zeros, zeros, 0)

    @property
    def n(self) -> int:
        return len(self.age_gw)


@dataclass(frozen=True)
class Poll:
    sensor: int


@dataclass(frozen=True)
class SendToMonitor:
    pass


Decision = Union[Poll, SendToMonitor]
SEND = SendToMonitor()


def apply_poll(state: AgeState, sensor: int, x: float) -> AgeState:
    """Sensor ``sensor`` transmits a fresh update taking ``x``.

    The update is stamped at the poll instant, so the polled sensor's gateway
    age is exactly ``x`` on completion; every other age grows by ``x``.
    """
    if not x > 0:
        raise ValueError(f"transmission time must be > 0, got {x}")
    if not 0 <= sensor < state.n:
        raise IndexError(f"sensor {sensor} out of range for n={state.n}")
    gw = [a + x for a in state.age_gw]
    gw[sensor] = x
    return AgeState(
        state.t + x,
        tuple(gw),
        tuple(a + x for a in state.age_mon),
        state.polls_since_send + 1,
    )


def apply_send(state: AgeState, x0: float) -> AgeState:
    """Gateway transmission of duration ``x0``; monitor ages reset to gateway ages."""
    if not x0 > 0:
        raise ValueError(f"transmission time must be > 0, got {x0}")
    gw = tuple(a + x0 for a in state.age_gw)
    return AgeState(state.t + x0, gw, gw, 0)


def apply(state: AgeState, decision: Decision, x: float) -> AgeState:
    if isinstance(decision, Poll):
        return apply_poll(state, decision.sensor, x)
    return apply_send(state, x)


def check_state(state: AgeState) -> None:
    """Raise if the monitor is fresher than the gateway or an age is negative."""
    for i, (g, m) in enumerate(zip(state.age_gw, state.age_mon)):
        if g < 0 or m < g:
            raise AssertionError(f"sensor {i}: gateway age {g}, monitor age {m} at t={state.t}")
