"""JSON run configuration.

Example::

    {
      "horizon": 8.0,
      "offspring": {"1": 0.5, "3": 0.5},
      "checkpoints": [2.0],
      "cutoff": -2.0,
      "prune": {"L": 8.0, "alpha": 0.0},
      "replicas": 100,
      "seed": 7,
      "q": 0.25,
      "thin": {"r_d": 3.0},
      "decorate": {"r": 2.0, "max_attempts": 100000}
    }

``offspring`` is either a mapping ``k -> p_k`` or a vector ``[p_1, p_2, ...]``
(the first entry is ``p_1``). Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace

from .bbm_core import BbmConfig, PruneBarrier
from .gw_tree import DEFAULT_CAP, OffspringDistribution


class ConfigError(ValueError):
    pass


_TOP = {"horizon", "offspring", "checkpoints", "cutoff", "prune", "replicas", "seed", "q",
        "cap", "thin", "decorate"}


@dataclass(frozen=True)
class RunConfig:
    horizon: float = 6.0
    offspring: dict = field(default_factory=lambda: {2: 1.0})
    checkpoints: tuple = ()
    cutoff: float = -2.0
    prune: dict | None = None
    replicas: int = 10
    seed: int = 0
    q: float | None = None
    cap: int = DEFAULT_CAP
    thin: dict = field(default_factory=lambda: {"r_d": 3.0})
    decorate: dict = field(default_factory=lambda: {"r": None, "max_attempts": 100_000})

    def bbm(self) -> BbmConfig:
        prune = PruneBarrier(**self.prune) if self.prune is not None else None
        return BbmConfig(self.horizon, OffspringDistribution(self.offspring), self.checkpoints,
                         self.cutoff, prune, self.cap)

    def canonical(self) -> dict:
        d = asdict(self)
        d["offspring"] = {str(k): v for k, v in sorted(self.offspring.items())}
        d["checkpoints"] = list(self.checkpoints)
        return d

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return validate(replace(self, **kw)) if kw else self


def _offspring(raw) -> dict:
    if isinstance(raw, list):
        items = {k + 1: p for k, p in enumerate(raw)}
    elif isinstance(raw, dict):
        try:
            items = {int(k): p for k, p in raw.items()}
        except ValueError as exc:
            raise ConfigError(f"offspring: keys must be integers ({exc})") from None
    else:
        raise ConfigError("offspring: expected a mapping k -> p_k or a list [p_1, p_2, ...]")
    for k, p in items.items():
        if not isinstance(p, (int, float)) or isinstance(p, bool):
            raise ConfigError(f"offspring: p_{k} must be a number")
    items = {k: float(p) for k, p in items.items() if p != 0}
    try:
        OffspringDistribution(items)
    except ValueError as exc:
        raise ConfigError(f"offspring: {exc}") from None
    return items


def _number(d, key, cls=float, positive=False):
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if cls is int and v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    v = cls(v)
    if cls is float and not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite")
    if positive and v <= 0:
        raise ConfigError(f"{key}: must be positive, got {v!r}")
    return v


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.replicas < 0:
        raise ConfigError(f"replicas: must be >= 0, got {cfg.replicas}")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {cfg.seed}")
    if cfg.q is not None and not 0 < cfg.q < 1:
        raise ConfigError(f"q: must lie in (0, 1), got {cfg.q}")
    r_d = cfg.thin.get("r_d", 3.0)
    if not r_d > 0:
        raise ConfigError(f"thin.r_d: must be positive, got {r_d}")
    r = cfg.decorate.get("r")
    if r is not None and not 0 <= r <= cfg.horizon:
        raise ConfigError(f"decorate.r: need 0 <= r <= horizon, got {r}")
    try:
        cfg.bbm()
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - _TOP
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    kw = {}
    if "horizon" in d:
        kw["horizon"] = _number(d, "horizon", positive=True)
    if "offspring" in d:
        kw["offspring"] = _offspring(d["offspring"])
    if "checkpoints" in d:
        if not isinstance(d["checkpoints"], list):
            raise ConfigError("checkpoints: expected a list of times")
        kw["checkpoints"] = tuple(float(c) for c in d["checkpoints"])
    if "cutoff" in d:
        kw["cutoff"] = _number(d, "cutoff")
    if "prune" in d and d["prune"] is not None:
        p = d["prune"]
        if not isinstance(p, dict) or set(p) - {"L", "alpha"}:
            raise ConfigError("prune: expected {\"L\": float, \"alpha\": float} or null")
        kw["prune"] = {"L": float(p.get("L", 8.0)), "alpha": float(p.get("alpha", 0.0))}
    for key in ("replicas", "seed", "cap"):
        if key in d:
            kw[key] = _number(d, key, int)
    if d.get("q") is not None:
        kw["q"] = _number(d, "q")
    for key, allowed in (("thin", {"r_d"}), ("decorate", {"r", "max_attempts"})):
        if key in d:
            sub = d[key]
            if not isinstance(sub, dict) or set(sub) - allowed:
                raise ConfigError(f"{key}: allowed fields are {sorted(allowed)}")
            kw[key] = {**getattr(RunConfig(), key), **sub}
    return validate(RunConfig(**kw))


def load(path) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return from_dict(raw)
