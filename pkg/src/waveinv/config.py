"""Flat JSON run configuration shared by every CLI command."""
from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .fields import D_BALLS, D_GAUSSIAN, Ball, NoiseSpec, default_balls, gaussian1, gaussian3

PHANTOMS = ("balls", "gaussian1", "gaussian3", "uniform")
ALPHA_RULES = ("armijo", "fixed")


@dataclass
class RunConfig:
    # geometry
    domain_lo: list = field(default_factory=lambda: [-3.4, -0.8, -0.8])
    domain_hi: list = field(default_factory=lambda: [3.4, 0.8, 0.8])
    inner_lo: list = field(default_factory=lambda: [-3.2, -0.6, -0.6])
    inner_hi: list = field(default_factory=lambda: [3.2, 0.6, 0.6])
    h: float = 0.1
    # time and source
    tau: float = 0.006
    T: float = 3.0
    omega: float = 40.0
    ic: str = "gaussian_bump"
    # phantom and data
    phantom: str = "gaussian1"
    ball_case: str = "i"
    balls: list | None = None  # rows of [x1, x2, x3, radius, value]
    phantom_value: float = 1.0
    d: float | None = None  # admissible upper bound; None picks it from the phantom
    sigma: float = 3.0
    seed: int = 1
    noise_mode: str = "random"
    refine: int = 2
    # functional
    gamma: float = 0.01
    gamma_nu: float | None = None  # if set, gamma = (sigma/100)^(2 nu)
    c0: float = 1.0
    cutoff_w: float | None = None  # None means 10 tau
    # optimizer
    theta: float = 1e-6
    max_iter: int = 25
    alpha_rule: str = "armijo"
    alpha: float | None = None
    alpha0: float | None = None
    alpha0_scale: float = 1.0
    alpha0_floor: float = 1.0
    # error bound diagnostic
    bound_nu: float = 0.2
    bound_xi: float = 1.0
    # output
    P: float = 0.7
    output_dir: str = "run"
    threads: int | None = None

    def __post_init__(self):
        self.validate()

    # ---------------------------------------------------------- derived

    @property
    def upper(self) -> float:
        if self.d is not None:
            return float(self.d)
        return D_BALLS if self.phantom == "balls" else D_GAUSSIAN

    @property
    def window(self) -> float:
        return 10.0 * self.tau if self.cutoff_w is None else float(self.cutoff_w)

    @property
    def gamma_value(self) -> float:
        if self.gamma_nu is None:
            return float(self.gamma)
        delta = self.sigma / 100.0
        if delta <= 0:
            raise ConfigError("gamma_nu needs sigma > 0")
        return delta ** (2.0 * self.gamma_nu)

    def ball_list(self) -> list[Ball]:
        if self.balls is None:
            return default_balls(self.ball_case)
        return [Ball(tuple(map(float, b[:3])), float(b[3]), float(b[4])) for b in self.balls]

    def phantom_peak(self) -> float:
        """Nominal maximum of the exact coefficient."""
        if self.phantom == "uniform":
            return float(self.phantom_value)
        if self.phantom == "balls":
            return max(b.value for b in self.ball_list())
        if self.phantom == "gaussian1":
            return float(gaussian1([0.0, 0.0, 0.0]))
        return max(float(gaussian3([s, 0.0, 0.0])) for s in (-2.0, 0.0, 2.0))

    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.sigma, self.seed, self.noise_mode)

    # ---------------------------------------------------------- checks

    def validate(self) -> None:
        for name in ("domain_lo", "domain_hi", "inner_lo", "inner_hi"):
            v = getattr(self, name)
            if not isinstance(v, (list, tuple)) or len(v) != 3:
                raise ConfigError(f"{name} must be a list of three numbers")
        for name in ("h", "tau", "T", "omega"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.phantom not in PHANTOMS:
            raise ConfigError(f"phantom must be one of {PHANTOMS}")
        if self.ic not in ("zero", "gaussian_bump"):
            raise ConfigError("ic must be 'zero' or 'gaussian_bump'")
        if self.alpha_rule not in ALPHA_RULES:
            raise ConfigError(f"alpha_rule must be one of {ALPHA_RULES}")
        if self.alpha_rule == "fixed" and not (self.alpha or 0) > 0:
            raise ConfigError("alpha_rule 'fixed' needs a positive alpha")
        if self.refine not in (1, 2):
            raise ConfigError("refine must be 1 or 2")
        if not self.theta > 0:
            raise ConfigError("theta must be positive")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be non-negative")
        if not 0 < self.P < 1:
            raise ConfigError("P must lie in (0, 1)")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.noise_mode not in ("random", "literal"):
            raise ConfigError("noise_mode must be 'random' or 'literal'")
        if self.gamma_nu is not None and not 0 < self.gamma_nu < 0.25:
            raise ConfigError("gamma_nu must lie in (0, 1/4)")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be at least 1")
        d = self.upper
        if d < 1:
            raise ConfigError("d must be at least 1")
        if not 1 <= self.c0 <= d:
            raise ConfigError(f"c0={self.c0} outside [1, d={d}]")
        peak = self.phantom_peak()
        if peak > d:
            raise ConfigError(f"phantom value {peak:g} exceeds d={d:g}")
        bound = self.h / (math.sqrt(d) * math.sqrt(3.0))
        if self.tau > bound * (1 + 1e-12):
            raise ConfigError(f"tau={self.tau:g} exceeds the CFL bound {bound:.6g} for d={d:g}")
        ratio = self.T / self.tau
        if abs(ratio - round(ratio)) > 1e-9 * max(ratio, 1.0):
            raise ConfigError("T must be an integer multiple of tau")
        if not 0 < self.window < self.T:
            raise ConfigError("cutoff_w must lie in (0, T)")

    # ---------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def with_overrides(self, pairs: list[str]) -> "RunConfig":
        data = self.to_dict()
        data.update(parse_overrides(pairs))
        return RunConfig.from_dict(data)


def parse_overrides(pairs: list[str]) -> dict:
    """``key=value`` strings; values are read as JSON, falling back to plain strings."""
    out = {}
    for item in pairs or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not key=value")
        try:
            out[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            out[key.strip()] = raw
    return out


# small scale setup that runs in seconds
DESK = dict(
    domain_lo=[-1.7, -0.4, -0.4],
    domain_hi=[1.7, 0.4, 0.4],
    inner_lo=[-1.5, -0.2, -0.2],
    inner_hi=[1.5, 0.2, 0.2],
    h=0.1,
    tau=0.015,
    T=1.5,
    omega=10.0,
    ic="zero",
    gamma=1e-4,
    alpha0_floor=0.0,
)

PRESETS = {"full": {}, "desk": DESK}


def load_config(path: str | None = None, preset: str | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Preset defaults, then the file's keys, then ``--set`` overrides."""
    data = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        data.update(PRESETS[preset])
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            given = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(given, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        data.update(given)
    data.update(parse_overrides(overrides))
    return RunConfig.from_dict(data)


def thread_count(cfg: RunConfig) -> int:
    env = os.environ.get("WAVEINV_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"WAVEINV_THREADS={env!r} is not an integer") from exc
        if n < 1:
            raise ConfigError("WAVEINV_THREADS must be at least 1")
        return n
    if cfg.threads is not None:
        return cfg.threads
    return os.cpu_count() or 1
