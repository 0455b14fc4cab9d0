"""Experiment kinds behind the CLI; each returns self-describing CSV rows.

Every row carries the full parameter tuple (laws written in the parseable
textual form, seeds, horizons), so a row can be re-run on its own.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import __version__
from .analytics import HomogeneousParams, avg_age_approx, avg_age_exact, s_hat, s_star
from .config import Config, ConfigError, split_list
from .coupling import CoupledRun, verify_dominance
from .model import SystemModel
from .policies import PolicyConfig, parse_rule
from .simulator import SimConfig, deliveries_for_polls, replicate, run, write_trace
from .stochastic import (DistributionSpec, Exponential, ParameterError, RngStream,
                         derive_seed, fit_hyperexponential, moments, parse_dist, sample,
                         with_moments)

KINDS = ("simulate", "analyze", "sweep-s", "sweep-n", "compare-policies", "verify-coupling")

# stream index (under the base seed) for drawing heterogeneous sensor means
MEANS_STREAM = 0x6D65616E

DEFAULT_POLLS = 100_000
DEFAULT_REPLICATES = 30
DEFAULT_SEED = 1
DEFAULT_DECISIONS = 100_000
DEFAULT_SEEDS = 10

SWEEP_S_COLUMNS = ["n", "s", "rule", "eta1", "eta2", "analytic_aoi", "sim_aoi", "ci_lo", "ci_hi",
                   "replicates", "seed", "sensor", "monitor", "deliveries", "horizon", "warmup"]


@dataclass
class ExperimentResult:
    kind: str
    columns: list
    rows: list
    metadata: list = field(default_factory=list)
    violations: list = field(default_factory=list)  # coupling reproducers


# -- parsing helpers --------------------------------------------------------

def _int(cfg: Config, section, key, default=None, minimum=None) -> int:
    raw = cfg.get(section, key)
    if raw is None:
        if default is None:
            raise cfg.error(section, key, "required")
        return default
    try:
        val = int(float(raw)) if float(raw).is_integer() else None
    except ValueError:
        val = None
    if val is None:
        raise cfg.error(section, key, f"expected an integer, got {raw!r}")
    if minimum is not None and val < minimum:
        raise cfg.error(section, key, f"must be >= {minimum}, got {val}")
    return val


def _float(cfg: Config, section, key, default=None):
    raw = cfg.get(section, key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise cfg.error(section, key, f"expected a number, got {raw!r}") from None


def _dist(cfg: Config, section, key, text=None) -> DistributionSpec:
    try:
        return parse_dist(text if text is not None else cfg.get(section, key))
    except ParameterError as exc:
        raise cfg.error(section, key, str(exc)) from None


def format_sensors(model: SystemModel) -> str:
    if model.is_iid:
        return str(model.sensor_dists[0])
    return "; ".join(str(d) for d in model.sensor_dists)


def eta_ratios(model: SystemModel) -> tuple[float, float]:
    """Monitor-to-sensor ratios of the mean and variance (sensor moments averaged)."""
    sm = [moments(d) for d in model.sensor_dists]
    ex = sum(m for m, _ in sm) / len(sm)
    varx = sum(v for _, v in sm) / len(sm)
    ex0, varx0 = moments(model.monitor_dist)
    if varx == 0:
        eta2 = math.nan if varx0 == 0 else math.inf
    else:
        eta2 = varx0 / varx
    return ex0 / ex, eta2


# -- model construction -----------------------------------------------------

def _scaled_monitor(cfg: Config, template: DistributionSpec, ex: float, varx: float,
                    eta1: float, eta2: float | None) -> DistributionSpec:
    """Monitor law of the sensor family with mean ``eta1*ex``.

    Without ``eta2``, one-parameter families keep their forced variance and
    the others are scaled as a whole (variance times ``eta1**2``).
    """
    if not eta1 > 0:
        raise cfg.error("model", "eta1", f"must be > 0, got {eta1}")
    mean0 = eta1 * ex
    if eta2 is None:
        var0 = None if isinstance(template, Exponential) or varx == 0 else eta1 ** 2 * varx
    else:
        var0 = eta2 * varx
    try:
        return with_moments(template, mean0, var0)
    except ParameterError as exc:
        raise cfg.error("model", "eta2" if eta2 is not None else "eta1",
                        f"infeasible monitor law: {exc}") from None


def build_model(cfg: Config, seed: int, n: int | None = None,
                eta1: float | None = None, eta2: float | None = None) -> SystemModel:
    n = _int(cfg, "model", "n", minimum=1) if n is None else n
    scv = None
    if cfg.has("model", "sensor_means"):
        means_law = _dist(cfg, "model", "sensor_means")
        family = (cfg.get("model", "family") or "exp").strip().lower()
        rng = RngStream(derive_seed(seed, MEANS_STREAM))
        means = [sample(means_law, rng) for _ in range(n)]
        if family == "exp":
            sensors = [Exponential(m) for m in means]
        elif family == "hyperexp":
            scv = _float(cfg, "model", "scv")
            if scv is None or scv <= 1:
                raise cfg.error("model", "scv", "hyperexp family needs scv > 1")
            sensors = [fit_hyperexponential(m, scv * m * m) for m in means]
        else:
            raise cfg.error("model", "family", f"expected exp or hyperexp, got {family!r}")
    elif cfg.has("model", "sensor"):
        parts = [p for p in cfg.get("model", "sensor").split(";") if p.strip()]
        sensors = [_dist(cfg, "model", "sensor", p) for p in parts]
        if len(sensors) == 1:
            sensors = sensors * n
        elif len(sensors) != n:
            raise cfg.error("model", "sensor", f"lists {len(sensors)} laws for n={n} sensors")
    else:
        raise cfg.error("model", "sensor", "give sensor or sensor_means")

    eta1 = _float(cfg, "model", "eta1") if eta1 is None else eta1
    eta2 = _float(cfg, "model", "eta2") if eta2 is None else eta2
    if eta1 is None:
        if not cfg.has("model", "monitor"):
            raise cfg.error("model", "monitor", "give monitor or eta1")
        monitor = _dist(cfg, "model", "monitor")
    else:
        sm = [moments(d) for d in sensors]
        ex = sum(m for m, _ in sm) / n
        varx = sum(v for _, v in sm) / n
        if eta2 is None and scv is not None:
            # heterogeneous hyperexp: the monitor keeps the sensors' squared CV
            mean0 = eta1 * ex
            monitor = fit_hyperexponential(mean0, scv * mean0 * mean0)
        else:
            monitor = _scaled_monitor(cfg, sensors[0], ex, varx, eta1, eta2)
    return SystemModel(tuple(sensors), monitor)


def resolve_s(cfg: Config, spec: str, model: SystemModel, key: str = "s") -> int:
    spec = spec.strip().lower()
    n = model.n
    if spec == "auto":
        return s_hat(n, eta_ratios(model)[0])
    if spec == "opt":
        if not model.is_iid:
            raise cfg.error("policy", key, "s = opt needs identically distributed sensors")
        ex, varx = moments(model.sensor_dists[0])
        ex0, varx0 = moments(model.monitor_dist)
        return s_star(n, ex, varx, ex0, varx0)
    if spec == "n":
        return n
    try:
        s = int(spec)
    except ValueError:
        raise cfg.error("policy", key, f"expected an integer, auto, opt or n; got {spec!r}") from None
    if not 1 <= s <= n:
        raise cfg.error("policy", key, f"s={s} outside 1..{n}")
    return s


def sim_config(cfg: Config, model: SystemModel, s: int, seed: int) -> SimConfig:
    warmup = _float(cfg, "run", "warmup")
    horizon = _float(cfg, "run", "horizon")
    try:
        if horizon is not None:
            return SimConfig(horizon=horizon, warmup=warmup, seed=seed)
        if cfg.has("run", "deliveries"):
            k = _int(cfg, "run", "deliveries", minimum=1)
        else:
            k = deliveries_for_polls(_int(cfg, "run", "polls", DEFAULT_POLLS, minimum=1), s)
        return SimConfig(deliveries=k, warmup=warmup, seed=seed)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), source=cfg.source) from None


def analytic_or_blank(model: SystemModel, s: int, rule_name: str):
    if not model.is_iid or rule_name not in ("maf", "mca"):
        return ""
    p = HomogeneousParams.from_specs(model.n, s, model.sensor_dists[0], model.monitor_dist)
    return avg_age_exact(p)


def _num(x):
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return x


def _sim_row(model, s, rule_name, cfg_sim, summary):
    eta1, eta2 = eta_ratios(model)
    return {
        "n": model.n, "s": s, "rule": rule_name, "eta1": eta1, "eta2": _num(eta2),
        "analytic_aoi": analytic_or_blank(model, s, rule_name),
        "sim_aoi": summary.mean, "ci_lo": summary.ci_lo, "ci_hi": summary.ci_hi,
        "replicates": summary.replicates, "seed": cfg_sim.seed,
        "sensor": format_sensors(model), "monitor": str(model.monitor_dist),
        "deliveries": cfg_sim.deliveries if cfg_sim.deliveries is not None else "",
        "horizon": cfg_sim.horizon if cfg_sim.horizon is not None else "",
        "warmup": cfg_sim.resolved_warmup(model),
    }


def _eta_grid(cfg: Config):
    eta1s = [float(v) for v in split_list(cfg.get("sweep", "eta1_values", ""))] or [None]
    eta2s = [float(v) for v in split_list(cfg.get("sweep", "eta2_values", ""))]
    if eta2s and len(eta2s) != len(eta1s):
        raise cfg.error("sweep", "eta2_values", "must pair one-to-one with eta1_values")
    return list(zip(eta1s, eta2s or [None] * len(eta1s)))


# -- experiment kinds -------------------------------------------------------

def _simulate(cfg, seed, replicates):
    model = build_model(cfg, seed)
    rule = parse_rule(cfg.get("policy", "rule", "maf"))
    s = resolve_s(cfg, cfg.get("policy", "s", "auto"), model)
    scfg = sim_config(cfg, model, s, seed)
    policy = PolicyConfig(s, rule)
    summary = replicate(model, policy, scfg, replicates)
    row = _sim_row(model, s, rule.name, scfg, summary)
    row["std"] = summary.std
    trace_path = cfg.get("run", "trace")
    if trace_path:
        first = SimConfig(scfg.horizon, scfg.deliveries, scfg.warmup, derive_seed(seed, 0), True)
        with open(trace_path, "w") as fh:
            write_trace(run(model, policy, first), fh)
    return [row], SWEEP_S_COLUMNS[:9] + ["std"] + SWEEP_S_COLUMNS[9:]


def _analyze(cfg, seed, replicates):
    rows = []
    for eta1, eta2 in _eta_grid(cfg):
        model = build_model(cfg, seed, eta1=eta1, eta2=eta2)
        if not model.is_iid:
            raise cfg.error("model", "sensor", "analyze needs identically distributed sensors")
        ex, varx = moments(model.sensor_dists[0])
        ex0, varx0 = moments(model.monitor_dist)
        best = s_star(model.n, ex, varx, ex0, varx0)
        heur = s_hat(model.n, ex0 / ex)
        e1, e2 = eta_ratios(model)
        for s in range(1, model.n + 1):
            p = HomogeneousParams(model.n, s, ex, varx, ex0, varx0)
            rows.append({
                "n": model.n, "s": s, "eta1": e1, "eta2": _num(e2),
                "analytic_aoi": avg_age_exact(p), "approx_aoi": avg_age_approx(p),
                "is_s_star": int(s == best), "is_s_hat": int(s == heur),
                "sensor": format_sensors(model), "monitor": str(model.monitor_dist),
            })
    return rows, ["n", "s", "eta1", "eta2", "analytic_aoi", "approx_aoi", "is_s_star",
                  "is_s_hat", "sensor", "monitor"]


def _sweep_s(cfg, seed, replicates):
    rule = parse_rule(cfg.get("policy", "rule", "maf"))
    rows = []
    for eta1, eta2 in _eta_grid(cfg):
        model = build_model(cfg, seed, eta1=eta1, eta2=eta2)
        for s in range(1, model.n + 1):
            scfg = sim_config(cfg, model, s, seed)
            summary = replicate(model, PolicyConfig(s, rule), scfg, replicates)
            rows.append(_sim_row(model, s, rule.name, scfg, summary))
    return rows, SWEEP_S_COLUMNS


def _sweep_n(cfg, seed, replicates):
    n_values = [int(v) for v in split_list(cfg.get("sweep", "n_values", "4..64"))]
    if not n_values or min(n_values) < 1:
        raise cfg.error("sweep", "n_values", "need positive sensor counts")
    rows = []
    for eta1, eta2 in _eta_grid(cfg):
        for n in n_values:
            model = build_model(cfg, seed, n=n, eta1=eta1, eta2=eta2)
            if not model.is_iid:
                raise cfg.error("model", "sensor", "sweep-n needs identically distributed sensors")
            ex, varx = moments(model.sensor_dists[0])
            ex0, varx0 = moments(model.monitor_dist)
            best = s_star(n, ex, varx, ex0, varx0)
            heur = s_hat(n, ex0 / ex)
            e1, e2 = eta_ratios(model)
            rows.append({
                "n": n, "eta1": e1, "eta2": _num(e2), "s_star": best, "s_hat": heur,
                "sqrt_eta1_n": math.sqrt(e1 * n),
                "aoi_s_star": avg_age_exact(HomogeneousParams(n, best, ex, varx, ex0, varx0)),
                "aoi_s_hat": avg_age_exact(HomogeneousParams(n, heur, ex, varx, ex0, varx0)),
                "sensor": str(model.sensor_dists[0]), "monitor": str(model.monitor_dist),
            })
    return rows, ["n", "eta1", "eta2", "s_star", "s_hat", "sqrt_eta1_n", "aoi_s_star",
                  "aoi_s_hat", "sensor", "monitor"]


def _compare(cfg, seed, replicates):
    rule_names = split_list(cfg.get("policy", "rules", cfg.get("policy", "rule", "maf")))
    s_specs = split_list(cfg.get("policy", "s_values", cfg.get("policy", "s", "auto")))
    rows = []
    for eta1, eta2 in _eta_grid(cfg):
        model = build_model(cfg, seed, eta1=eta1, eta2=eta2)
        for spec in s_specs:
            s = resolve_s(cfg, spec, model, "s_values")
            for name in rule_names:
                try:
                    rule = parse_rule(name)
                except ValueError as exc:
                    raise cfg.error("policy", "rules", str(exc)) from None
                scfg = sim_config(cfg, model, s, seed)
                summary = replicate(model, PolicyConfig(s, rule), scfg, replicates)
                row = _sim_row(model, s, rule.name, scfg, summary)
                row["s_spec"] = spec
                row["std"] = summary.std
                rows.append(row)
    cols = SWEEP_S_COLUMNS[:2] + ["s_spec"] + SWEEP_S_COLUMNS[2:9] + ["std"] + SWEEP_S_COLUMNS[9:]
    return rows, cols


def _verify_coupling(cfg, seed, replicates):
    model = build_model(cfg, seed)
    rule_names = split_list(cfg.get("policy", "rules", "minage, random, rr"))
    s_specs = split_list(cfg.get("policy", "s_values", cfg.get("policy", "s", "1, 2, n")))
    decisions = _int(cfg, "run", "decisions", DEFAULT_DECISIONS, minimum=1)
    n_seeds = _int(cfg, "run", "seeds", DEFAULT_SEEDS, minimum=1)
    base = cfg.get("policy", "base", "maf")
    rows, violations = [], []
    for spec in s_specs:
        s = resolve_s(cfg, spec, model, "s_values")
        for name in rule_names:
            for k in range(n_seeds):
                run_seed = seed if n_seeds == 1 else derive_seed(seed, k)
                try:
                    crun = CoupledRun(model, s, name, decisions, run_seed, base_rule=base)
                except ValueError as exc:
                    raise ConfigError(str(exc), source=cfg.source) from None
                rep = verify_dominance(crun)
                v = rep.first_violation
                rows.append({
                    "n": model.n, "s": s, "rule": crun.alt_rule.name, "seed": run_seed,
                    "sensor": str(model.sensor_dists[0]), "monitor": str(model.monitor_dist),
                    "decisions": decisions, "holds": int(rep.holds),
                    "decisions_checked": rep.decisions_checked,
                    "violation_decision": v.decision if v else "",
                    "violation_rank": v.rank if v else "",
                    "maf_value": v.maf_value if v else "",
                    "alt_value": v.alt_value if v else "",
                    "at_monitor": int(v.at_monitor) if v else "",
                })
                if not rep.holds:
                    violations.append(rep.reproducer)
    cols = ["n", "s", "rule", "seed", "sensor", "monitor", "decisions", "holds",
            "decisions_checked", "violation_decision", "violation_rank", "maf_value",
            "alt_value", "at_monitor"]
    return rows, cols, violations


def run_experiment(kind: str, cfg: Config, timestamp: str | None = None) -> ExperimentResult:
    """Execute experiment ``kind``; rows come out in sorted-parameter order."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}", source=cfg.source)
    seed = _int(cfg, "run", "seed", DEFAULT_SEED, minimum=0)
    replicates = _int(cfg, "run", "replicates", DEFAULT_REPLICATES, minimum=1)
    violations = []
    if kind == "simulate":
        rows, cols = _simulate(cfg, seed, replicates)
    elif kind == "analyze":
        rows, cols = _analyze(cfg, seed, replicates)
    elif kind == "sweep-s":
        rows, cols = _sweep_s(cfg, seed, replicates)
    elif kind == "sweep-n":
        rows, cols = _sweep_n(cfg, seed, replicates)
    elif kind == "compare-policies":
        rows, cols = _compare(cfg, seed, replicates)
    else:
        rows, cols, violations = _verify_coupling(cfg, seed, replicates)
    meta = [f"gwage {__version__}", f"experiment: {kind}"]
    if timestamp is not None:
        meta.append(f"generated: {timestamp}")
    meta += [
        f"base_seed: {seed}",
        "rng: PCG64 per stream; replicate r seed = splitmix64(base ^ splitmix64(r)); "
        "run streams 0 = transmissions, 1 = policy",
        "hyperexp_fit: balanced means (p*mean1 == (1-p)*mean2)",
        "tnorm_params: pre-truncation mu, sigma",
        f"defaults: polls={DEFAULT_POLLS} replicates={DEFAULT_REPLICATES} "
        f"decisions={DEFAULT_DECISIONS} seeds={DEFAULT_SEEDS}",
    ]
    meta += [f"config: {line}" for line in cfg.echo()]
    return ExperimentResult(kind, cols, rows, meta, violations)


__all__ = ["run_experiment", "build_model", "ExperimentResult", "KINDS"]
