"""Flat ``key = value`` experiment configuration.

One assignment per line; ``#`` starts a comment; blank lines are ignored.
Lists are comma separated. Unset keys take the defaults below (system keys
default to :class:`cfisac.sysmodel.SystemConfig`). See ``docs/config.md``
for the key reference.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .sysmodel import SystemConfig

KINDS = ("design", "rates_cdf", "median_vs_tau", "median_vs_K", "ber_sweep",
         "ber_vs_ratio", "acf_profile", "range_profile")
PILOT_SCHEMES = ("proposed", "tabu", "greedy", "random")
DETECTOR_SCHEMES = ("MR", "LMMSE", "EP", "GaBP")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    kind: str = "rates_cdf"
    system: SystemConfig = field(default_factory=SystemConfig)
    trials: int = 1
    master_seed: int = 0
    schemes: tuple = ()
    out: str = "out.csv"
    workers: int = 1
    # sweeps
    tau_grid: tuple = (5, 10, 15, 20)
    K_grid: tuple = (10, 20, 30, 40)
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    ratio_snr_db: float = 20.0
    csi: str = "estimated"
    symbols_per_drop: int = 100
    # pilot design
    n_starts: int = 3
    snr_schedule: tuple = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
    stage_eps: float = 1e-14
    stage_i_max: int = 3000
    step_rule: str = "adaptive"
    tabu_max_iter: int = 0  # 0 -> 100 K
    # detectors
    gabp_i_max: int = 20
    gabp_damping: float = 0.5
    ep_t_max: int = 10
    ep_damping: float = 0.7
    # sensing
    n_sequences: int = 200
    acf_mode: str = "aperiodic"
    targets_m: tuple = (8.0, 19.0)
    range_snr_db: float = 20.0

    def __post_init__(self):
        self.validate()

    def default_schemes(self) -> tuple:
        if self.kind in ("ber_sweep", "ber_vs_ratio"):
            return DETECTOR_SCHEMES
        if self.kind in ("acf_profile", "range_profile"):
            return ("proposed", "random")
        if self.kind == "design":
            return ("proposed",)
        return PILOT_SCHEMES

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name in ("tau_grid", "K_grid", "snr_db", "snr_schedule", "targets_m"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must be non-empty")
        allowed = DETECTOR_SCHEMES if self.kind in ("ber_sweep", "ber_vs_ratio") else PILOT_SCHEMES
        for s in self.schemes:
            if s not in allowed:
                raise ConfigError(f"scheme {s!r} is not available for {self.kind}; choose from {allowed}")
        if self.kind == "median_vs_tau" and max(self.tau_grid) > self.system.T:
            raise ConfigError("tau_grid exceeds the coherence interval T")
        if self.csi not in ("estimated", "perfect"):
            raise ConfigError("csi must be 'estimated' or 'perfect'")
        if self.acf_mode not in ("aperiodic", "periodic"):
            raise ConfigError("acf_mode must be 'aperiodic' or 'periodic'")

    @property
    def active_schemes(self) -> tuple:
        return tuple(self.schemes) or self.default_schemes()


_SPEC_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentSpec) if f.name != "system"}
_SYS_FIELDS = {f.name: f for f in dataclasses.fields(SystemConfig)}


def _parse_value(key: str, text: str, default):
    text = text.strip()
    if key in ("eta", "pathloss_const_dB") and text.lower() in ("", "none"):
        return None
    if key == "eta":
        return tuple(float(v) for v in text.split(","))
    if isinstance(default, bool):
        low = text.lower()
        if low not in ("true", "false"):
            raise ValueError(f"expected true/false, got {text!r}")
        return low == "true"
    if isinstance(default, tuple):
        items = [v.strip() for v in text.split(",") if v.strip()]
        if key == "schemes":
            return tuple(items)
        kind = int if key in ("tau_grid", "K_grid") else float
        return tuple(kind(v) for v in items)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or default is None:
        return float(text)
    return text


def _default(f):
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def parse_config(text: str, source: str = "<string>") -> ExperimentSpec:
    spec_kw, sys_kw = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in _SPEC_FIELDS:
            target, f = spec_kw, _SPEC_FIELDS[key]
        elif key in _SYS_FIELDS:
            target, f = sys_kw, _SYS_FIELDS[key]
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in target:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        default = _default(f)
        if f.name == "pathloss_const_dB":
            default = 0.0
        try:
            target[key] = _parse_value(key, value, default)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    try:
        system = SystemConfig(**sys_kw)
        return ExperimentSpec(system=system, **spec_kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentSpec:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(spec: ExperimentSpec) -> str:
    """Serialize every key so that ``parse_config(emit_config(s)) == s``."""
    lines = [f"{name} = {_format(getattr(spec, name))}" for name in _SPEC_FIELDS]
    lines += [f"{name} = {_format(getattr(spec.system, name))}" for name in _SYS_FIELDS]
    return "\n".join(lines) + "\n"
