"""Flat ``key = value`` experiment configuration files."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .noise import Regime, RegimeParams

KEYS = (
    "regime", "alpha", "beta", "gamma", "c1h", "c2h", "cv", "rho", "eta", "n", "n_list", "lambda",
    "theta", "delta", "kappa", "vartheta", "dt", "T", "K_max", "M", "base_seed", "record_every", "epsilon",
)

_INT_KEYS = {"n", "lambda", "K_max", "M", "base_seed", "record_every"}
_REGIME_DEFAULT_EXPONENTS = {
    Regime.ISOTROPIC: (3.0, 3.0, 3.0),
    Regime.PERTURBED_2D: (2.0, 4.0, 5.0),
    Regime.HELICAL: (2.0, 4.0, 5.0),
}


class ConfigError(ValueError):
    """Malformed or inadmissible configuration (CLI exit status 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration; unset cutoffs are chosen per experiment."""

    regime: Regime
    alpha: float
    beta: float
    gamma: float
    c1h: float
    c2h: float
    cv: float
    rho: float = 0.0
    eta: float = 1.0
    n: int = 1
    n_list: tuple = ()
    lam: int = 1
    theta: float = 1.0
    delta: float = 0.25
    kappa: float = 1.0
    vartheta: float = 1.5
    dt: float = 1e-3
    T: float = 0.5
    K_max: int | None = None
    M: int = 100
    base_seed: int = 0
    record_every: int = 10
    epsilon: float = 0.1
    source: dict = field(default_factory=dict, compare=False)

    @property
    def params(self) -> RegimeParams:
        return RegimeParams(self.regime, self.alpha, self.beta, self.gamma, self.c1h, self.c2h, self.cv, self.rho, self.eta)

    @property
    def scales(self) -> tuple:
        return self.n_list if self.n_list else (self.n,)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def check_exponents(self, use_vartheta: bool = False) -> None:
        """Raise :class:`ConfigError` if the Sobolev and moment exponents are out of range."""
        if not 0 < self.theta < 2:
            raise ConfigError(f"theta = {self.theta} must lie in (0, 2)")
        if not 0 < self.delta < self.theta:
            raise ConfigError(f"delta = {self.delta} must lie in (0, theta)")
        if not 1 <= self.kappa < 2:
            raise ConfigError(f"kappa = {self.kappa} must lie in [1, 2)")
        if use_vartheta and not self.theta < self.vartheta <= 1.5:
            raise ConfigError(f"vartheta = {self.vartheta} must lie in (theta, 3/2]")

    def describe(self) -> str:
        """One-line ``key=value`` rendering of the resolved configuration."""
        parts = []
        for f in fields(self):
            if f.name == "source":
                continue
            v = getattr(self, f.name)
            name = "lambda" if f.name == "lam" else f.name
            if isinstance(v, Regime):
                v = v.value
            elif isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            parts.append(f"{name}={v}")
        return " ".join(parts)


def _convert(key: str, raw: str):
    if key == "regime":
        try:
            return Regime.parse(raw)
        except ValueError as e:
            raise ConfigError(str(e)) from None
    if key == "n_list":
        try:
            vals = tuple(int(x) for x in raw.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"n_list must be a list of integers, got {raw!r}") from None
        if not vals:
            raise ConfigError("n_list must not be empty")
        return vals
    if key in _INT_KEYS:
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from None
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return v


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text. Blank lines and ``#`` comments are ignored."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        values[key] = _convert(key, raw)

    if "regime" not in values:
        raise ConfigError("missing required key 'regime'")
    regime = values["regime"]
    a0, b0, g0 = _REGIME_DEFAULT_EXPONENTS[regime]
    if regime is Regime.ISOTROPIC:
        amp = values.get("cv", values.get("c1h", values.get("c2h", 1.0)))
        c1h = values.get("c1h", amp)
        c2h = values.get("c2h", amp)
        cv = values.get("cv", amp)
    else:
        c1h = values.get("c1h", 1.0)
        c2h = values.get("c2h", 1.0)
        cv = values.get("cv", 1.0)

    kw = dict(
        regime=regime,
        alpha=values.get("alpha", a0),
        beta=values.get("beta", b0),
        gamma=values.get("gamma", g0),
        c1h=c1h,
        c2h=c2h,
        cv=cv,
        source=dict(values),
    )
    renames = {"lambda": "lam"}
    for key in ("rho", "eta", "n", "n_list", "lambda", "theta", "delta", "kappa", "vartheta", "dt", "T",
                "K_max", "M", "base_seed", "record_every", "epsilon"):
        if key in values:
            kw[renames.get(key, key)] = values[key]
    cfg = ExperimentConfig(**kw)
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: ExperimentConfig) -> None:
    if cfg.n < 1 or any(x < 1 for x in cfg.n_list):
        raise ConfigError("scale indices must be >= 1")
    if cfg.n_list and list(cfg.n_list) != sorted(set(cfg.n_list)):
        raise ConfigError("n_list must be strictly ascending")
    if cfg.lam == 0:
        raise ConfigError("lambda must be non-zero")
    if cfg.dt <= 0 or cfg.T < cfg.dt:
        raise ConfigError("need dt > 0 and T >= dt")
    if cfg.K_max is not None and cfg.K_max < 1:
        raise ConfigError("K_max must be >= 1")
    if cfg.M < 1:
        raise ConfigError("M must be >= 1")
    if not 0 <= cfg.base_seed < 2**64:
        raise ConfigError("base_seed must be an unsigned 64-bit integer")
    if cfg.record_every < 1:
        raise ConfigError("record_every must be >= 1")
    if not 0 <= cfg.epsilon < 1:
        raise ConfigError("epsilon must lie in [0, 1)")
    if not -1 <= cfg.rho <= 1:
        raise ConfigError("rho must lie in [-1, 1]")


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text)
