"""Resolved run configuration: defaults, config file, flag overrides.

Config files are UTF-8 `key = value` lines with `#` comments. Unknown
keys are hard errors. Every run writes its fully resolved configuration
into the output directory so results stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from tashkeel.corpus import parse_chunk_size
from tashkeel.errors import InputError


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise InputError(f"expected a boolean, got {value!r}")


@dataclass
class RunConfig:
    """Union of all pipeline knobs; subcommands use the slice they need."""

    seed: int = 0
    profile: str = "desk"
    precision: str = "64"
    chunk_size: int | str = 5
    extended_marks: bool = False
    selector: str | None = None
    embed_dim: int = 64
    hidden_dim: int = 128
    dropout: float | None = None
    input_feed: bool = True
    max_decode_factor: float = 3.0
    steps: int = 2000
    batch_size: int = 64
    learning_rate: float | None = None
    validate_every: int = 200
    checkpoint_every: int = 500
    valid_decode_limit: int = 200
    beam_width: int | None = None
    sizes: str = "1,3,5,sentence"

    def resolved_dropout(self) -> float:
        if self.dropout is not None:
            return self.dropout
        return 0.3 if self.profile == "paper" else 0.0

    def write(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for f in sorted(fields(self), key=lambda f: f.name):
                fh.write(f"{f.name} = {getattr(self, f.name)}\n")


_PARSERS = {
    "seed": int,
    "profile": str,
    "precision": str,
    "chunk_size": parse_chunk_size,
    "extended_marks": _parse_bool,
    "selector": str,
    "embed_dim": int,
    "hidden_dim": int,
    "dropout": float,
    "input_feed": _parse_bool,
    "max_decode_factor": float,
    "steps": int,
    "batch_size": int,
    "learning_rate": float,
    "validate_every": int,
    "checkpoint_every": int,
    "valid_decode_limit": int,
    "beam_width": int,
    "sizes": str,
}


def parse_config_file(path: Path) -> dict[str, object]:
    """Parse a `key = value` file into typed values; unknown keys fail."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    values: dict[str, object] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{ln}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise InputError(f"{path}:{ln}: unknown configuration key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except (ValueError, InputError) as exc:
            raise InputError(f"{path}:{ln}: bad value for {key}: {exc}") from exc
    return values


def resolve(config_path: Path | None, overrides: dict[str, object]) -> RunConfig:
    """Defaults, then config file, then explicit flag overrides."""
    merged: dict[str, object] = {}
    if config_path is not None:
        merged.update(parse_config_file(config_path))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    config = RunConfig()
    for key, value in merged.items():
        if not hasattr(config, key):
            raise InputError(f"unknown configuration key {key!r}")
        setattr(config, key, value)
    if config.profile not in ("desk", "paper"):
        raise InputError(f"profile must be desk or paper, got {config.profile!r}")
    if config.precision not in ("32", "64"):
        raise InputError(f"precision must be 32 or 64, got {config.precision!r}")
    config.chunk_size = parse_chunk_size(config.chunk_size)
    return config


def parse_sizes(spec: str) -> list[int | str]:
    sizes: list[int | str] = []
    for part in spec.split(","):
        part = part.strip()
        if part:
            sizes.append(parse_chunk_size(part))
    if not sizes:
        raise InputError(f"no chunk sizes in {spec!r}")
    return sizes
