"""Typed configuration for forests and transfer pipelines, loadable from TOML documents.

Every config is a frozen dataclass with documented defaults. `from_mapping` builds any of them (recursively) from a
parsed TOML table, rejecting unknown keys and wrong value types with `ConfigError`.
"""
from __future__ import annotations

__all__ = [
    "CenteredConfig",
    "CartConfig",
    "StageConfig",
    "TransferConfig",
    "load_toml",
    "from_mapping",
    "transfer_config_from_toml",
]

import dataclasses
import enum
import math
import tomllib
import types
import typing as tp
from pathlib import Path

from dcovforest.exceptions import ConfigError
from dcovforest.kinds import DCovKind

CONFIG_T = tp.TypeVar("CONFIG_T")


@dataclasses.dataclass(slots=True, frozen=True)
class CenteredConfig:
    """Centered forest settings. Depth is fixed by `depth`, else by leaf count `leaves` (depth = ceil(log2 leaves)),
    else chosen by `folds`-fold cross-validation."""

    n_trees: int = 100
    depth: int | None = None
    leaves: int | None = None
    folds: int = 5

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"`n_trees` must be at least 1, not: {self.n_trees}")
        if self.depth is not None and self.depth < 0:
            raise ConfigError(f"`depth` must be non-negative, not: {self.depth}")
        if self.leaves is not None and self.leaves < 1:
            raise ConfigError(f"`leaves` must be at least 1, not: {self.leaves}")
        if self.folds < 2:
            raise ConfigError(f"`folds` must be at least 2, not: {self.folds}")

    def fixed_depth(self) -> int | None:
        """Configured depth, or `None` if it should be cross-validated."""
        if self.depth is not None:
            return self.depth
        if self.leaves is not None:
            return math.ceil(math.log2(self.leaves))
        return None


@dataclasses.dataclass(slots=True, frozen=True)
class CartConfig:
    """Weighted CART forest settings.

    `mtry` defaults to `floor(sqrt(d))`. The bootstrap size is `n_boot` if given, else `boot_fraction * n`, else `n`.
    `max_depth` defaults to `ceil(log2(n_boot))`; `unlimited_depth` grows every tree until no split remains.
    """

    n_trees: int = 100
    mtry: int | None = None
    n_boot: int | None = None
    boot_fraction: float | None = None
    max_depth: int | None = None
    unlimited_depth: bool = False
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"`n_trees` must be at least 1, not: {self.n_trees}")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError(f"`mtry` must be at least 1, not: {self.mtry}")
        if self.n_boot is not None and self.n_boot < 1:
            raise ConfigError(f"`n_boot` must be at least 1, not: {self.n_boot}")
        if self.boot_fraction is not None and not 0.0 < self.boot_fraction <= 1.0:
            raise ConfigError(f"`boot_fraction` must be in (0, 1], not: {self.boot_fraction}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError(f"`max_depth` must be non-negative, not: {self.max_depth}")

    def resolve_mtry(self, d: int) -> int:
        if self.mtry is not None:
            return self.mtry
        return max(1, math.isqrt(d))

    def resolve_n_boot(self, n: int) -> int:
        if self.n_boot is not None:
            return self.n_boot
        if self.boot_fraction is not None:
            return max(1, round(self.boot_fraction * n))
        return n

    def resolve_max_depth(self, n_boot: int) -> int | None:
        if self.unlimited_depth:
            return None
        if self.max_depth is not None:
            return self.max_depth
        return max(1, math.ceil(math.log2(n_boot))) if n_boot > 1 else 1


@dataclasses.dataclass(slots=True, frozen=True)
class StageConfig:
    """Forest settings for one pipeline stage; the stage's method decides which of the two is used."""

    centered: CenteredConfig = dataclasses.field(default_factory=CenteredConfig)
    cart: CartConfig = dataclasses.field(default_factory=CartConfig)


@dataclasses.dataclass(slots=True, frozen=True)
class TransferConfig:
    """Settings for every method: `source` and `residual` stages of the transfer pipelines, and the `target` stage
    used by target-only baselines."""

    source: StageConfig = dataclasses.field(default_factory=StageConfig)
    residual: StageConfig = dataclasses.field(default_factory=StageConfig)
    target: StageConfig = dataclasses.field(default_factory=StageConfig)
    dcov_kind: DCovKind = DCovKind.FastU
    split_fraction: float = 0.5  # share of target rows that train the residual forest
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError(f"`split_fraction` must be in (0, 1), not: {self.split_fraction}")
        if self.seed < 0:
            raise ConfigError(f"`seed` must be non-negative, not: {self.seed}")
        if self.n_jobs == 0:
            raise ConfigError("`n_jobs` cannot be 0.")

    def replace(self, **changes) -> tp.Self:
        return dataclasses.replace(self, **changes)

    def with_mtry(self, mtry: int) -> tp.Self:
        """Same config with `mtry` fixed for every CART stage."""
        stages = {
            name: dataclasses.replace(stage, cart=dataclasses.replace(stage.cart, mtry=mtry))
            for name, stage in (("source", self.source), ("residual", self.residual), ("target", self.target))
        }
        return dataclasses.replace(self, **stages)


def load_toml(path: str | Path) -> dict[str, tp.Any]:
    path = Path(path)
    try:
        with path.open("rb") as f:
            return tomllib.load(f)
    except OSError as ex:
        raise ConfigError(f"Could not read config file `{path}`: {ex}") from ex
    except tomllib.TOMLDecodeError as ex:
        raise ConfigError(f"Invalid TOML in `{path}`: {ex}") from ex


def _strip_optional(hint: tp.Any) -> tp.Any:
    if isinstance(hint, types.UnionType) or tp.get_origin(hint) is tp.Union:
        args = tuple(arg for arg in tp.get_args(hint) if arg is not type(None))
        if len(args) == 1:
            return args[0]
    return hint


def _convert(hint: tp.Any, value: tp.Any, where: str) -> tp.Any:
    hint = _strip_optional(hint)
    if dataclasses.is_dataclass(hint):
        return from_mapping(hint, value, where)
    if isinstance(hint, type) and issubclass(hint, enum.Enum):
        try:
            if hasattr(hint, "from_name"):
                return hint.from_name(value)
            return hint(value)
        except ValueError as ex:
            raise ConfigError(f"`{where}`: {ex}") from ex
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"`{where}` must be a number, not: {value!r}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"`{where}` must be an integer, not: {value!r}")
        return value
    if hint in (bool, str):
        if not isinstance(value, hint):
            raise ConfigError(f"`{where}` must be a {hint.__name__}, not: {value!r}")
        return value
    if tp.get_origin(hint) in (tuple, list):
        if not isinstance(value, list):
            raise ConfigError(f"`{where}` must be an array, not: {value!r}")
        element_hint = tp.get_args(hint)[0] if tp.get_args(hint) else tp.Any
        return tuple(_convert(element_hint, v, f"{where}[{i}]") for i, v in enumerate(value))
    return value


def from_mapping(cls: type[CONFIG_T], mapping: tp.Any, where: str = "") -> CONFIG_T:
    """Build dataclass `cls` from a parsed TOML table. Missing keys keep their defaults."""
    label = where or cls.__name__
    if not isinstance(mapping, dict):
        raise ConfigError(f"`{label}` must be a table, not: {mapping!r}")
    hints = tp.get_type_hints(cls)
    init_fields = {field.name for field in dataclasses.fields(cls) if field.init}
    unknown = sorted(set(mapping) - init_fields)
    if unknown:
        raise ConfigError(f"Unknown keys in `{label}`: {unknown}")
    kwargs = {
        name: _convert(hints[name], value, f"{where}.{name}" if where else name)
        for name, value in mapping.items()
    }
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as ex:
        raise ConfigError(f"Invalid `{label}`: {ex}") from ex


def transfer_config_from_toml(path: str | Path, table: str | None = None) -> TransferConfig:
    """Read a `TransferConfig` from the whole document, or from its `table` (e.g. `"model"`) if given."""
    document = load_toml(path)
    if table is not None:
        document = document.get(table, {})
    return from_mapping(TransferConfig, document, table or "")
