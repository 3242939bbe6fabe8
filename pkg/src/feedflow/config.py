"""Flat key-value configuration files with environment overrides.

Format: one `key = value` per line, `#` starts a comment. Keys use dots for
grouping (delay_bin.0.mu1). Environment variables with the FEEDFLOW_ prefix
override file values; dots map to double underscores and the key is
uppercased (delay_bin.0.mu1 -> FEEDFLOW_DELAY_BIN__0__MU1).
"""

from __future__ import annotations

import math
import os
from typing import Optional

from .simulate import BetaCurve, DelayBin, DelayModel

ENV_PREFIX = "FEEDFLOW_"


class ConfigError(ValueError):
    pass


def parse_config(text: str, environ: Optional[dict] = None) -> dict[str, str]:
    cfg: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {line_no}: empty key")
        cfg[key] = value
    env = os.environ if environ is None else environ
    for env_key, value in env.items():
        if not env_key.startswith(ENV_PREFIX):
            continue
        key = env_key[len(ENV_PREFIX):].lower().replace("__", ".")
        cfg[key] = value
    return cfg


def get_float(cfg: dict[str, str], key: str, default: Optional[float] = None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing config key {key!r}")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"config key {key!r}: not a number: {cfg[key]!r}")


def get_int(cfg: dict[str, str], key: str, default: Optional[int] = None) -> int:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing config key {key!r}")
        return default
    try:
        return int(cfg[key])
    except ValueError:
        raise ConfigError(f"config key {key!r}: not an integer: {cfg[key]!r}")


def beta_curve_from(cfg: dict[str, str]) -> BetaCurve:
    return BetaCurve(
        lambda_c=get_float(cfg, "lambda_c"),
        beta0=get_float(cfg, "beta0"),
        gamma=get_float(cfg, "gamma"),
    )


def delay_model_from(cfg: dict[str, str]) -> DelayModel:
    """Collect delay_bin.<i>.{lo,hi,mu1,sigma1,mu2,sigma2}; hi may be 'inf'."""
    indices = sorted(
        {
            int(k.split(".")[1])
            for k in cfg
            if k.startswith("delay_bin.") and k.split(".")[1].isdigit()
        }
    )
    if not indices:
        raise ConfigError("no delay_bin.<i>.* keys in config")
    bins = []
    for i in indices:
        p = f"delay_bin.{i}."
        hi_raw = cfg.get(p + "hi", "inf")
        hi = math.inf if hi_raw in ("inf", "Inf", "INF") else float(hi_raw)
        bins.append(
            DelayBin(
                lo=get_float(cfg, p + "lo"),
                hi=hi,
                mu1=get_float(cfg, p + "mu1"),
                sigma1=get_float(cfg, p + "sigma1"),
                mu2=get_float(cfg, p + "mu2"),
                sigma2=get_float(cfg, p + "sigma2"),
            )
        )
    return DelayModel(bins=tuple(bins))


def initiator_from(cfg: dict[str, str]) -> tuple[tuple[float, float], tuple[float, float]]:
    raw = cfg.get("initiator")
    if raw is None:
        raise ConfigError("missing config key 'initiator' (four comma-separated values)")
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 4:
        raise ConfigError(f"initiator needs 4 comma-separated values, got {len(parts)}")
    try:
        a, b, c, d = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"initiator: non-numeric entry in {raw!r}")
    return ((a, b), (c, d))
