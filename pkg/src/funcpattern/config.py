"""Run configuration shared by every subcommand.

A `RunConfig` starts from its defaults, takes values from an optional JSON or TOML file, and finally takes
command-line flags. The effective configuration is written next to the artifacts so a run can be repeated.
"""

import json
import logging
import tomllib
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional, Union

from funcpattern.analysis import AnalysisSettings
from funcpattern.exceptions import ConfigError, IngestionError
from funcpattern.simulate import SD_LEVELS, SimulationConfig

logger = logging.getLogger(__name__)

CONFIG_SUFFIXES = (".json", ".toml")


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of every subcommand.

    The analysis fields mirror `AnalysisSettings`. ``simulation`` holds `SimulationConfig` overrides for the
    ``simulate`` subcommand, whose sweep is shaped by ``sd_levels``, ``n_reps``, ``sweep_methods``, ``k_levels``
    and ``holdout``.

    Example:
        >>> config = RunConfig().with_overrides(alpha=0.05, n_perm=None)
        >>> config.alpha, config.n_perm
        (0.05, 1000)
        >>> config.analysis_settings().alpha
        0.05
    """

    seed: int = 0
    out: str = "out"
    method: str = "permutation"
    alpha: float = 0.1
    n_perm: int = 1000
    f_mode: str = "sup"
    raw_f: bool = False
    min_zone_points: int = 1
    basis_q: int = 20
    order: int = 4
    knots: str = "uniform"
    ridge: float = 1e-6
    penalty: str = "l2"
    n_jobs: int = 1
    weight_mode: str = "interval"
    interval_mode: str = "contrast"
    lam: float = 0.01
    epochs: int = 500
    weight_epochs: int = 300
    test_fraction: float = 0.3
    neutral: Optional[str] = None
    n_bins: Optional[int] = None
    sd_levels: tuple[float, ...] = SD_LEVELS
    n_reps: int = 20
    sweep_methods: tuple[str, ...] = ("classic", "permutation")
    k_levels: Optional[tuple[int, ...]] = None
    holdout: bool = False
    grid_points: Optional[int] = None
    control_group: Optional[str] = None
    simulation: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # JSON and TOML arrays arrive as lists.
        object.__setattr__(self, "sd_levels", tuple(float(sd) for sd in self.sd_levels))
        object.__setattr__(self, "sweep_methods", tuple(str(method) for method in self.sweep_methods))
        if self.k_levels is not None:
            object.__setattr__(self, "k_levels", tuple(int(k) for k in self.k_levels))
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must lie in [0, 1), got {self.test_fraction!r}")
        if self.n_reps < 1:
            raise ConfigError(f"n_reps must be at least 1, got {self.n_reps!r}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        """Build a config from a mapping; unknown keys are rejected.

        Raises:
            ConfigError: If a key is unknown or a value is invalid.
        """
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"Unknown configuration keys {unknown}")
        try:
            return cls(**dict(data))
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        """Read a ``.json`` or ``.toml`` config file.

        Raises:
            IngestionError: If the file does not exist or cannot be parsed.
            ConfigError: If the suffix is not supported or the content is invalid.
        """
        source = Path(path)
        if source.suffix not in CONFIG_SUFFIXES:
            raise ConfigError(f"Config file must end in one of {CONFIG_SUFFIXES}, got {source.name!r}")
        if not source.is_file():
            raise IngestionError(str(source), "config file not found")
        try:
            with source.open("rb") as handle:
                data = tomllib.load(handle) if source.suffix == ".toml" else json.load(handle)
        except (tomllib.TOMLDecodeError, json.JSONDecodeError, UnicodeDecodeError) as e:
            raise IngestionError(str(source), str(e)) from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config file {source} must hold a table of settings")
        logger.debug("Loaded configuration from %s", source)
        return cls.from_dict(data)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Return a copy with every non-None override applied."""
        names = {f.name for f in fields(self)}
        unknown = sorted(set(overrides) - names)
        if unknown:
            raise ConfigError(f"Unknown configuration keys {unknown}")
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["sd_levels"] = list(self.sd_levels)
        data["sweep_methods"] = list(self.sweep_methods)
        data["k_levels"] = None if self.k_levels is None else list(self.k_levels)
        return data

    def analysis_settings(self) -> AnalysisSettings:
        """Analysis tunables of this run."""
        names = {f.name for f in fields(AnalysisSettings)}
        return AnalysisSettings(**{key: value for key, value in asdict(self).items() if key in names})

    def simulation_config(self) -> SimulationConfig:
        """Simulation parameters: the ``simulation`` table, with the run seed and basis unless it sets its own."""
        data = {"seed": self.seed, "basis_q": self.basis_q, "order": self.order, **self.simulation}
        return SimulationConfig.from_dict(data)
