"""Flat ``key = value`` configuration files.

Grammar: one ``key = value`` per line; ``#`` starts a comment; blank lines
are ignored; keys are case-sensitive and repeated keys take the last value.
Lists are comma-separated, ratios may be written ``p/q``, booleans as
``true/false/yes/no/1/0``, and matrices as nine comma-separated numbers in
row-major order. The recognised keys are listed in ``KEYS``.
"""
from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError

KEYS = {
    # scenario
    "name": str, "source": str, "preset": int, "presets": "ints", "ratio": "ratio",
    "ratios": "ratios", "method": str, "methods": "strs", "seed": int, "seeds": "ints",
    "repeats": int, "hardware": str,
    # synthetic / warp sources
    "width": int, "height": int, "n_inliers": int, "n_outliers": int, "noise_sigma": float,
    "outlier_rate": float, "scene_seed": int, "homography": "matrix",
    # image pairs
    "image_a": str, "image_b": str, "reference_h": "matrix",
    # ransac
    "kernel": str, "inlier_threshold": float, "confidence_p": float, "max_iterations": int,
    "group_ratio": "ratio", "phase1_budget": int,
    # gms
    "grid_cols": int, "grid_rows": int, "alpha": float, "shifts_enabled": "bool",
    "gms_filter": "bool",
    # features
    "base_threshold": int, "low_threshold": int, "nms_radius": int,
    # output
    "format": str, "out": str, "single_worker": "bool", "workers": int,
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_ratio(text) -> float:
    try:
        r = float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad ratio {text!r}") from None
    if not 0 < r <= 1:
        raise ConfigError(f"ratio {text!r} outside (0, 1]")
    return r


def format_ratio(r: float) -> str:
    f = Fraction(r).limit_denominator(1000)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def _convert(key: str, raw: str):
    kind = KEYS[key]
    raw = raw.strip()
    try:
        if kind == "ints":
            return [int(v) for v in raw.split(",") if v.strip()]
        if kind == "strs":
            return [v.strip() for v in raw.split(",") if v.strip()]
        if kind == "ratio":
            return parse_ratio(raw)
        if kind == "ratios":
            return [parse_ratio(v) for v in raw.split(",") if v.strip()]
        if kind == "bool":
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind == "matrix":
            vals = [float(v) for v in raw.split(",")]
            if len(vals) != 9:
                raise ValueError("need 9 entries")
            return np.array(vals).reshape(3, 3)
        return kind(raw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None


def parse_config(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def override(cfg: dict, pairs: dict) -> dict:
    """Apply string-valued overrides (e.g. from CLI flags) on top of ``cfg``."""
    out = dict(cfg)
    for key, raw in pairs.items():
        if raw is None:
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        out[key] = raw if not isinstance(raw, str) else _convert(key, raw)
    return out
