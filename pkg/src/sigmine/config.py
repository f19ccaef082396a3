"""Pipeline configuration: a flat key = value file plus CLI overrides.

Every key has a default, a type and a validity range; unknown keys,
duplicate keys and out-of-range values are reported together in one error
so a bad config fails fast and completely before any stage runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Mapping

from .dataset import ATTACK_CATEGORIES


class ConfigError(ValueError):
    """One or more configuration problems; the message lists them all."""


def _parse_int(lo: int | None = None) -> Callable[[str], int]:
    def parse(text: str) -> int:
        try:
            v = int(text)
        except ValueError:
            raise ValueError(f"expected an integer, got {text!r}") from None
        if lo is not None and v < lo:
            raise ValueError(f"must be >= {lo}, got {v}")
        return v

    return parse


def _parse_float(lo: float, hi: float, open_lo: bool = False, open_hi: bool = False):
    def parse(text: str) -> float:
        try:
            v = float(text)
        except ValueError:
            raise ValueError(f"expected a number, got {text!r}") from None
        if math.isnan(v):
            raise ValueError("must not be NaN")
        if v < lo or (open_lo and v == lo) or v > hi or (open_hi and v == hi):
            left = "(" if open_lo else "["
            right = ")" if open_hi else "]"
            raise ValueError(f"must be in {left}{lo}, {hi}{right}, got {v}")
        return v

    return parse


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _parse_enum(*allowed: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}; got {text!r}")
        return text

    return parse


def _parse_str(text: str) -> str:
    if not text:
        raise ValueError("must not be empty")
    return text


def _parse_int_or_none(lo: int) -> Callable[[str], int | None]:
    inner = _parse_int(lo)

    def parse(text: str) -> int | None:
        if text.strip().lower() == "none":
            return None
        return inner(text)

    return parse


def _parse_support(text: str):
    """min_sup: an absolute count (integer >= 1) or a fraction in (0, 1)."""
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"expected a count or fraction, got {text!r}") from None
    if 0.0 < v < 1.0:
        return v
    if v >= 1.0 and v == int(v):
        return int(v)
    raise ValueError(f"must be a fraction in (0, 1) or an integer >= 1, got {text!r}")


# key -> (parser, default text)
CONFIG_KEYS: dict[str, tuple[Callable[[str], object], str]] = {
    "kdd_path": (_parse_str, "synth"),
    "taxonomy_path": (_parse_str, "bundled"),
    "out_dir": (_parse_str, "sigmine_out"),
    "seed": (_parse_int(0), "7"),
    "train_fraction": (_parse_float(0.0, 1.0, open_lo=True, open_hi=True), "0.7"),
    "bins": (_parse_int(1), "4"),
    "label_granularity": (_parse_enum("attack", "category"), "attack"),
    "write_transactions": (_parse_bool, "false"),
    "unknown_label": (_parse_enum("error", *ATTACK_CATEGORIES), "error"),
    "boost_rounds": (_parse_int(1), "10"),
    "weak_max_depth": (_parse_int(1), "2"),
    "weak_min_samples": (_parse_int(1), "1"),
    "weak_min_gain": (_parse_float(0.0, math.inf), "0"),
    "category_max_depth": (_parse_int_or_none(1), "none"),
    "min_sup": (_parse_support, "0.02"),
    "min_conf": (_parse_float(0.0, 1.0, open_lo=True), "0.8"),
    "max_len": (_parse_int_or_none(1), "2"),
    "consequent_filter": (_parse_bool, "true"),
    "mine_source": (_parse_enum("flagged", "all_attacks"), "flagged"),
    "base_sid": (_parse_int(1), "1000001"),
    "evade_max_features": (_parse_int(0), "2"),
    "evade_numeric_step": (_parse_float(0.0, math.inf), "1.0"),
    "evade_categorical_swaps": (_parse_bool, "true"),
    "evade_seed": (_parse_int(0), "99"),
    "ablate_fraction": (_parse_float(0.0, 1.0), "0.0"),
    "workers": (_parse_int(1), "1"),
    "synth_seed": (_parse_int(0), "20240613"),
}


@dataclass(frozen=True)
class PipelineConfig:
    kdd_path: str
    taxonomy_path: str
    out_dir: str
    seed: int
    train_fraction: float
    bins: int
    label_granularity: str
    write_transactions: bool
    unknown_label: str
    boost_rounds: int
    weak_max_depth: int
    weak_min_samples: int
    weak_min_gain: float
    category_max_depth: int | None
    min_sup: float | int
    min_conf: float
    max_len: int | None
    consequent_filter: bool
    mine_source: str
    base_sid: int
    evade_max_features: int
    evade_numeric_step: float
    evade_categorical_swaps: bool
    evade_seed: int
    ablate_fraction: float
    workers: int
    synth_seed: int


assert set(CONFIG_KEYS) == {f.name for f in fields(PipelineConfig)}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Raw key/value pairs from a config file.

    Lines are `key = value`; blank lines and `#` comments are skipped.
    Duplicate or unparseable lines are config errors.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    raw: dict[str, str] = {}
    problems: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            problems.append(f"line {lineno}: expected key = value")
            continue
        key, value = stripped.split("=", 1)
        key, value = key.strip(), value.strip()
        if key in raw:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        raw[key] = value
    if problems:
        raise ConfigError("; ".join(problems))
    return raw


def build_config(
    raw: Mapping[str, str] | None = None,
    overrides: Mapping[str, str] | None = None,
) -> PipelineConfig:
    """Typed config from defaults, file values and CLI overrides, in that
    precedence order. All problems are reported in a single error."""
    merged = {key: default for key, (_, default) in CONFIG_KEYS.items()}
    problems: list[str] = []
    for source in (raw or {}), (overrides or {}):
        for key, value in source.items():
            if key not in CONFIG_KEYS:
                problems.append(f"unknown key {key!r}")
            else:
                merged[key] = value
    values: dict[str, object] = {}
    for key, (parser, _) in CONFIG_KEYS.items():
        try:
            values[key] = parser(merged[key])
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError("; ".join(sorted(problems)))
    return PipelineConfig(**values)  # type: ignore[arg-type]


def resolve_min_sup(min_sup: float | int, db_size: int) -> int:
    """Fractional min_sup becomes an absolute count (at least 1)."""
    if isinstance(min_sup, int):
        return min_sup
    return max(1, math.ceil(min_sup * db_size))


def config_text(config: PipelineConfig) -> str:
    """The config rendered back as a parseable file."""
    lines = []
    for key in CONFIG_KEYS:
        v = getattr(config, key)
        if isinstance(v, bool):
            text = "true" if v else "false"
        elif v is None:
            text = "none"
        else:
            text = str(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
