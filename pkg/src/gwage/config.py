"""Line-oriented experiment configs: ``[section]`` headers and ``key = value`` lines.

``#`` starts a comment anywhere on a line.  Example::

    [model]
    n = 10
    sensor = exp(mean=1)
    eta1 = 1          # monitor law = sensor family scaled to these ratios

    [policy]
    rule = maf
    s = auto          # an integer, auto (rounded sqrt(eta1 n)) or opt

    [run]
    polls = 100000
    replicates = 30
    seed = 1
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

SECTIONS = {
    "experiment": {"kind"},
    "model": {"n", "sensor", "monitor", "eta1", "eta2", "sensor_means", "family", "scv"},
    "policy": {"rule", "rules", "s", "s_values", "base"},
    "run": {"horizon", "deliveries", "polls", "warmup", "replicates", "seed",
            "decisions", "seeds", "trace"},
    "sweep": {"n_values", "eta1_values", "eta2_values"},
}

_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass
class Config:
    values: dict = field(default_factory=dict)  # (section, key) -> str
    lines: dict = field(default_factory=dict)  # (section, key) -> line number
    source: str = "<config>"

    def get(self, section: str, key: str, default=None):
        return self.values.get((section, key), default)

    def has(self, section: str, key: str) -> bool:
        return (section, key) in self.values

    def set(self, section: str, key: str, value) -> None:
        _check_key(section, key, None, self.source)
        self.values[(section, key)] = str(value)
        self.lines.pop((section, key), None)

    def error(self, section: str, key: str, message: str) -> ConfigError:
        return ConfigError(f"[{section}] {key}: {message}", self.lines.get((section, key)), self.source)

    def items(self):
        return sorted(self.values.items())

    def echo(self) -> list[str]:
        """Canonical ``[section] key = value`` lines, sorted."""
        return [f"[{s}] {k} = {v}" for (s, k), v in self.items()]


def _check_key(section, key, line, source):
    if section not in SECTIONS:
        raise ConfigError(f"unknown section [{section}]", line, source)
    if key not in SECTIONS[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]", line, source)


def parse_config(text: str, source: str = "<config>") -> Config:
    cfg = Config(source=source)
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno, source)
            continue
        m = _ENTRY.match(line)
        if not m:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        if section is None:
            raise ConfigError("entry before any [section] header", lineno, source)
        key = m.group(1).lower()
        _check_key(section, key, lineno, source)
        if (section, key) in cfg.values:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno, source)
        cfg.values[(section, key)] = m.group(2).strip()
        cfg.lines[(section, key)] = lineno
    return cfg


def apply_override(cfg: Config, assignment: str) -> None:
    """``section.key=value`` from the command line."""
    m = re.match(r"^\s*([A-Za-z_]+)\.([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$", assignment)
    if not m:
        raise ConfigError(f"override must look like section.key=value, got {assignment!r}",
                          source="--set")
    section, key = m.group(1).lower(), m.group(2).lower()
    _check_key(section, key, None, "--set")
    cfg.values[(section, key)] = m.group(3).strip()
    cfg.lines.pop((section, key), None)


def split_list(text: str) -> list[str]:
    """Comma-separated items; ``a..b`` expands an integer range."""
    out = []
    for item in (p.strip() for p in text.split(",")):
        if not item:
            continue
        m = re.match(r"^(-?\d+)\s*\.\.\s*(-?\d+)$", item)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            out.extend(str(v) for v in range(lo, hi + 1))
        else:
            out.append(item)
    return out
