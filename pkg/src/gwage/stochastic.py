"""Transmission-time laws, their exact moments, and seeded sampling.

Every law is reduced to a numeric code plus three parameters so the same
scalar sampler (:func:`draw_scalar`) serves the pure-Python reference path
and the compiled kernels.  Samplers only ever consume ``Generator.random()``
doubles, which keeps the draw sequence identical between the two paths.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numba
import numpy as np

# kind codes shared with the compiled kernels
DET, UNIF, EXP, TNORM, HYPEREXP = 0, 1, 2, 3, 4

# acceptance probability 1e-6 for Gaussian rejection
MIN_TNORM_RATIO = -4.75

_MASK64 = (1 << 64) - 1


class ParameterError(ValueError):
    """Invalid distribution parameters."""


class InfeasibleFitError(ParameterError):
    """Requested moments cannot be matched by the family."""


class RejectedConfigurationError(ParameterError):
    """Sampling would loop (almost) forever."""


class DistributionSpec:
    """Base for the transmission-time laws."""

    kind: int = -1

    def params(self) -> tuple[float, float, float]:
        raise NotImplementedError

    def to_string(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_string()


@dataclass(frozen=True)
class Deterministic(DistributionSpec):
    value: float
    kind = DET

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value > 0):
            raise ParameterError(f"det value must be > 0, got {self.value}")

    def params(self):
        return (float(self.value), 0.0, 0.0)

    def to_string(self):
        return f"det({self.value!r})"


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    lo: float
    hi: float
    kind = UNIF

    def __post_init__(self):
        if not (self.lo >= 0 and self.hi > self.lo and math.isfinite(self.hi)):
            raise ParameterError(f"uniform needs 0 <= lo < hi, got lo={self.lo}, hi={self.hi}")

    def params(self):
        return (float(self.lo), float(self.hi), 0.0)

    def to_string(self):
        return f"unif(lo={self.lo!r}, hi={self.hi!r})"


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    mean: float
    kind = EXP

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise ParameterError(f"exponential mean must be > 0, got {self.mean}")

    def params(self):
        return (float(self.mean), 0.0, 0.0)

    def to_string(self):
        return f"exp(mean={self.mean!r})"


@dataclass(frozen=True)
class TruncatedGaussian(DistributionSpec):
    """Gaussian(mu, sigma) conditioned on (0, inf)."""

    mu: float
    sigma: float
    kind = TNORM

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma > 0):
            raise ParameterError(f"tnorm needs finite mu and sigma > 0, got mu={self.mu}, sigma={self.sigma}")

    def params(self):
        return (float(self.mu), float(self.sigma), 0.0)

    def to_string(self):
        return f"tnorm(mu={self.mu!r}, sigma={self.sigma!r})"


@dataclass(frozen=True)
class Hyperexponential(DistributionSpec):
    """Two-phase exponential mixture: phase 1 with probability ``p``."""

    p: float
    mean1: float
    mean2: float
    kind = HYPEREXP

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ParameterError(f"hyperexp p must lie in (0, 1), got {self.p}")
        if not (self.mean1 > 0 and self.mean2 > 0 and math.isfinite(self.mean1) and math.isfinite(self.mean2)):
            raise ParameterError(f"hyperexp phase means must be > 0, got {self.mean1}, {self.mean2}")

    def params(self):
        return (float(self.p), float(self.mean1), float(self.mean2))

    def to_string(self):
        return f"hyperexp(p={self.p!r}, mean1={self.mean1!r}, mean2={self.mean2!r})"


def _std_normal_pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def moments(spec: DistributionSpec) -> tuple[float, float]:
    """Exact ``(mean, variance)`` of a transmission-time law."""
    if isinstance(spec, Deterministic):
        return float(spec.value), 0.0
    if isinstance(spec, Uniform):
        w = spec.hi - spec.lo
        return (spec.lo + spec.hi) / 2, w * w / 12
    if isinstance(spec, Exponential):
        return float(spec.mean), float(spec.mean) ** 2
    if isinstance(spec, TruncatedGaussian):
        # lower truncation at zero, alpha in standardized units
        alpha = -spec.mu / spec.sigma
        z = 0.5 * math.erfc(alpha / math.sqrt(2))
        if z <= 0:
            raise ParameterError(f"{spec} has no mass on (0, inf)")
        lam = _std_normal_pdf(alpha) / z
        mean = spec.mu + spec.sigma * lam
        var = spec.sigma ** 2 * (1 + alpha * lam - lam * lam)
        return mean, max(var, 0.0)
    if isinstance(spec, Hyperexponential):
        p, m1, m2 = spec.p, spec.mean1, spec.mean2
        mean = p * m1 + (1 - p) * m2
        second = 2 * (p * m1 * m1 + (1 - p) * m2 * m2)
        return mean, second - mean * mean
    raise TypeError(f"not a distribution spec: {spec!r}")


def fit_hyperexponential(mean: float, variance: float) -> Hyperexponential:
    """Balanced-means two-phase hyperexponential with the given moments.

    Each phase carries half of the mean (``p * mean1 == (1 - p) * mean2``),
    which pins down the otherwise free third parameter.
    """
    if not (mean > 0 and variance >= 0):
        raise ParameterError(f"need mean > 0 and variance >= 0, got {mean}, {variance}")
    scv = variance / (mean * mean)
    if scv <= 1:
        raise InfeasibleFitError(
            f"hyperexponential needs squared coefficient of variation > 1, got {scv:g}")
    p = 0.5 * (1 + math.sqrt((scv - 1) / (scv + 1)))
    return Hyperexponential(p=p, mean1=mean / (2 * p), mean2=mean / (2 * (1 - p)))


def with_moments(template: DistributionSpec, mean: float, variance: float | None = None) -> DistributionSpec:
    """A law of the same family as ``template`` with the requested moments.

    Families with a single free parameter (det, exp) ignore ``variance`` only
    when it matches what the family forces; otherwise the fit is infeasible.
    For tnorm the moments are taken as pre-truncation parameters.
    """
    if isinstance(template, Deterministic):
        if variance not in (None, 0, 0.0):
            raise InfeasibleFitError("deterministic law cannot have positive variance")
        return Deterministic(mean)
    if isinstance(template, Exponential):
        if variance is not None and not math.isclose(variance, mean * mean, rel_tol=1e-9):
            raise InfeasibleFitError(
                f"exponential with mean {mean:g} has variance {mean * mean:g}, not {variance:g}")
        return Exponential(mean)
    if variance is None:
        raise ParameterError(f"{type(template).__name__} needs a variance")
    if isinstance(template, Uniform):
        half = math.sqrt(3 * variance)
        if -1e-12 * mean <= mean - half < 0:
            half = mean  # lo == 0 up to rounding
        if mean - half < 0:
            raise InfeasibleFitError(f"uniform with mean {mean:g}, variance {variance:g} needs lo < 0")
        return Uniform(mean - half, mean + half)
    if isinstance(template, TruncatedGaussian):
        return TruncatedGaussian(mean, math.sqrt(variance))
    if isinstance(template, Hyperexponential):
        return fit_hyperexponential(mean, variance)
    raise TypeError(f"not a distribution spec: {template!r}")


# -- random streams ---------------------------------------------------------

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base_seed: int, index: int) -> int:
    """64-bit seed of replicate ``index`` under ``base_seed``.

    ``splitmix64(base ^ splitmix64(index))``; distinct indices give distinct
    seeds because both steps are bijections of the 64-bit words.
    """
    return splitmix64((base_seed & _MASK64) ^ splitmix64(index & _MASK64))


class RngStream:
    """Single-owner PCG64 stream identified by a 64-bit seed."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= _MASK64:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def random(self) -> float:
        return self.generator.random()

    def derive(self, index: int) -> "RngStream":
        return RngStream(derive_seed(self.seed, index))

    def __repr__(self):
        return f"RngStream(seed={self.seed})"


# -- sampling ---------------------------------------------------------------

def draw_scalar(kind, a, b, c, gen):
    """One strictly positive draw; non-positive candidates are redrawn."""
    while True:
        if kind == DET:
            return a
        elif kind == UNIF:
            x = a + (b - a) * gen.random()
        elif kind == EXP:
            x = -a * math.log(1.0 - gen.random())
        elif kind == TNORM:
            u1 = gen.random()
            u2 = gen.random()
            x = a + b * math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
        else:
            m = b if gen.random() < a else c
            x = -m * math.log(1.0 - gen.random())
        if x > 0.0:
            return x


draw_jit = numba.njit(cache=True)(draw_scalar)


@numba.njit(cache=True)
def _draw_many(kind, a, b, c, gen, out):
    for j in range(out.shape[0]):
        out[j] = draw_jit(kind, a, b, c, gen)


def check_sampleable(spec: DistributionSpec) -> None:
    if isinstance(spec, TruncatedGaussian) and spec.mu / spec.sigma <= MIN_TNORM_RATIO:
        raise RejectedConfigurationError(
            f"{spec}: acceptance probability below 1e-6 (mu/sigma <= {MIN_TNORM_RATIO})")


def sample(spec: DistributionSpec, rng: RngStream) -> float:
    """One draw; advances ``rng``."""
    check_sampleable(spec)
    return draw_scalar(spec.kind, *spec.params(), rng.generator)


def sample_many(spec: DistributionSpec, rng: RngStream, size: int) -> np.ndarray:
    """``size`` draws, identical to ``size`` successive :func:`sample` calls."""
    check_sampleable(spec)
    out = np.empty(int(size), dtype=np.float64)
    _draw_many(spec.kind, *spec.params(), rng.generator, out)
    return out


# -- textual form -----------------------------------------------------------

_CALL = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$")

_ALIASES = {
    "det": "det", "deterministic": "det",
    "unif": "unif", "uniform": "unif",
    "exp": "exp", "exponential": "exp",
    "tnorm": "tnorm", "truncnorm": "tnorm",
    "hyperexp": "hyperexp",
}

_POSITIONAL = {
    "det": ("value",),
    "unif": ("lo", "hi"),
    "exp": ("mean",),
    "tnorm": ("mu", "sigma"),
    "hyperexp": ("mean", "var"),
}


def parse_dist(text: str) -> DistributionSpec:
    """Parse ``exp(mean=1)``, ``hyperexp(mean=20, var=1300)``, ``det(1)`` ...

    ``tnorm`` accepts ``var`` in place of ``sigma``; ``hyperexp`` accepts
    either ``(mean, var)`` (balanced-means fit) or ``(p, mean1, mean2)``.
    """
    m = _CALL.match(text)
    if not m:
        raise ParameterError(f"cannot parse distribution {text!r}")
    fam = _ALIASES.get(m.group(1).lower())
    if fam is None:
        raise ParameterError(f"unknown distribution family {m.group(1)!r}")
    args: dict[str, float] = {}
    body = m.group(2).strip()
    if body:
        for pos, item in enumerate(body.split(",")):
            item = item.strip()
            if "=" in item:
                key, val = (part.strip() for part in item.split("=", 1))
            else:
                names = _POSITIONAL[fam]
                if pos >= len(names):
                    raise ParameterError(f"too many arguments in {text!r}")
                key, val = names[pos], item
            try:
                args[key.lower()] = float(val)
            except ValueError:
                raise ParameterError(f"bad number {val!r} in {text!r}") from None

    def need(*keys):
        missing = [k for k in keys if k not in args]
        if missing:
            raise ParameterError(f"{text!r} is missing {', '.join(missing)}")
        extra = set(args) - set(keys)
        if extra:
            raise ParameterError(f"{text!r} has unexpected {', '.join(sorted(extra))}")
        return [args[k] for k in keys]

    if fam == "det":
        return Deterministic(*need("value"))
    if fam == "unif":
        return Uniform(*need("lo", "hi"))
    if fam == "exp":
        return Exponential(*need("mean"))
    if fam == "tnorm":
        if "var" in args:
            mu, var = need("mu", "var")
            if var <= 0:
                raise ParameterError(f"tnorm variance must be > 0 in {text!r}")
            return TruncatedGaussian(mu, math.sqrt(var))
        return TruncatedGaussian(*need("mu", "sigma"))
    if "p" in args:
        return Hyperexponential(*need("p", "mean1", "mean2"))
    return fit_hyperexponential(*need("mean", "var"))
