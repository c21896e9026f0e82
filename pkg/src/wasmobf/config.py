"""Obfuscation configuration and named presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Optional

from .data_obf import DEFAULT_ALLOWLIST

COLLATZ_MODES = ("none", "o1", "o2")
OPAQUE_MODES = ("const", "simple")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ObfConfig:
    name: bool = False
    exports: bool = False
    memory: bool = False
    flatten: Optional[int] = None        # number of blocks per flattened function
    alias: Optional[float] = None        # percentage of call sites to rewrite
    collatz: str = "none"
    opaque: str = "const"                # index form for non-Collatz alias sites
    seed: int = 0
    key_seed: int = 0
    key_length: int = 8
    allowlist: tuple[str, ...] = tuple(sorted(DEFAULT_ALLOWLIST))
    rename_imports: bool = False

    def validate(self) -> "ObfConfig":
        if self.flatten is not None and self.flatten < 2:
            raise ConfigError("--flatten needs at least 2 blocks")
        if self.alias is not None and not 0 <= self.alias <= 100:
            raise ConfigError("--alias must be a percentage in 0..100")
        if self.collatz not in COLLATZ_MODES:
            raise ConfigError(f"collatz mode must be one of {COLLATZ_MODES}")
        if self.collatz != "none" and self.flatten is None and self.alias is None:
            raise ConfigError("Collatz predicates need --flatten or --alias")
        if self.opaque not in OPAQUE_MODES:
            raise ConfigError(f"opaque mode must be one of {OPAQUE_MODES}")
        if self.key_length not in (1, 2, 4, 8):
            raise ConfigError("keystream length must be 1, 2, 4 or 8")
        if not 0 <= self.seed < 2 ** 64 or not 0 <= self.key_seed < 2 ** 64:
            raise ConfigError("seeds are 64-bit unsigned values")
        return self

    @property
    def any_pass(self) -> bool:
        return (self.name or self.exports or self.memory
                or self.flatten is not None or self.alias is not None)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["allowlist"] = list(self.allowlist)
        return d


def _matrix() -> dict[str, ObfConfig]:
    out = {"name": ObfConfig(name=True), "memory": ObfConfig(memory=True)}
    for n in (5, 10, 20):
        out[f"flatten{n}"] = ObfConfig(flatten=n)
        out[f"flatten{n}+collatz"] = ObfConfig(flatten=n, collatz="o1")
    for p in (25, 50, 100):
        out[f"alias{p}"] = ObfConfig(alias=p)
        out[f"alias{p}+collatz"] = ObfConfig(alias=p, collatz="o1")
    return out


# the fourteen single-option variants used for whole-corpus evaluation
MATRIX: dict[str, ObfConfig] = _matrix()

PRESETS: dict[str, ObfConfig] = {
    **MATRIX,
    "o1": ObfConfig(name=True, exports=True, memory=True, flatten=5, alias=50, collatz="o1"),
    "o2": ObfConfig(name=True, exports=True, memory=True, flatten=10, alias=100, collatz="o2"),
}


def with_seed(cfg: ObfConfig, seed: int) -> ObfConfig:
    return replace(cfg, seed=seed, key_seed=seed ^ 0x5DEECE66D)
