"""
Runtime Settings

Typed view over config/config.yaml. Every section has defaults so a missing or
partial config file still yields a complete Settings object.
"""

import copy
import logging
from dataclasses import dataclass, field, asdict, fields, is_dataclass
from typing import Any, Dict, Optional

from .common_utils import load_config, parse_scalar
from .env_loader import default_config_path

logger = logging.getLogger('hybrid-indexer')

# Short names accepted by `--set`
OVERRIDE_ALIASES = {
    "W": "pipeline.policy.window",
    "H": "pipeline.policy.halt_duration",
    "K": "pipeline.policy.persistence",
    "P": "pipeline.advertise_period",
    "base_port": "bench.base_port",
    "gatherers": "pipeline.teams.gatherers",
    "translators": "pipeline.teams.translators",
    "indexers": "pipeline.teams.indexers",
    "batch": "pipeline.batch_size",
    "manager": "pipeline.manager_enabled",
}


@dataclass
class LoggingSettings:
    level: str = "INFO"
    file: Optional[str] = None


@dataclass
class ContainerSettings:
    async_queue_size: int = 64


@dataclass
class BackchannelSettings:
    host: str = "127.0.0.1"
    connect_timeout: float = 5.0
    pull_timeout: float = 10.0


@dataclass
class AgentSettings:
    cycle_interval: float = 0.02


@dataclass
class PolicySettings:
    window: int = 10
    halt_duration: float = 5.0
    persistence: int = 3
    growth_threshold: float = 0.2
    starvation_halt: float = 1.0


@dataclass
class TeamSettings:
    gatherers: int = 2
    translators: int = 2
    indexers: int = 2


@dataclass
class PipelineSettings:
    batch_size: int = 10
    pull_max_items: int = 1
    advertise_period: float = 1.0
    worker_idle_sleep: float = 0.01
    fetch_timeout: float = 5.0
    index_stores: int = 2
    manager_enabled: bool = True
    teams: TeamSettings = field(default_factory=TeamSettings)
    policy: PolicySettings = field(default_factory=PolicySettings)


@dataclass
class BenchSettings:
    base_port: int = 7400
    repeats: int = 3
    run_ceiling: float = 600.0
    poll_interval: float = 0.2
    output_dir: str = "./results"


@dataclass
class Settings:
    logging: LoggingSettings = field(default_factory=LoggingSettings)
    container: ContainerSettings = field(default_factory=ContainerSettings)
    backchannel: BackchannelSettings = field(default_factory=BackchannelSettings)
    agents: AgentSettings = field(default_factory=AgentSettings)
    pipeline: PipelineSettings = field(default_factory=PipelineSettings)
    bench: BenchSettings = field(default_factory=BenchSettings)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def copy(self) -> "Settings":
        return copy.deepcopy(self)

    def apply_override(self, key: str, value: Any) -> None:
        """
        Set one value by dotted path or alias, e.g. ('W', 12)

        Raises:
            KeyError: If the path does not name a setting
        """
        path = OVERRIDE_ALIASES.get(key, key).split(".")
        target: Any = self
        for part in path[:-1]:
            if not is_dataclass(target) or not hasattr(target, part):
                raise KeyError(f"Unknown setting: {key}")
            target = getattr(target, part)
        leaf = path[-1]
        if not is_dataclass(target) or leaf not in {f.name for f in fields(target)}:
            raise KeyError(f"Unknown setting: {key}")
        current = getattr(target, leaf)
        if isinstance(value, str):
            value = parse_scalar(value)
        if isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        setattr(target, leaf, value)


def _fill(cls, raw: Optional[Dict[str, Any]]):
    instance = cls()
    for f in fields(cls):
        if not raw or f.name not in raw:
            continue
        value = raw[f.name]
        current = getattr(instance, f.name)
        if is_dataclass(current):
            setattr(instance, f.name, _fill(type(current), value))
        else:
            setattr(instance, f.name, value)
    return instance


def settings_from_dict(raw: Optional[Dict[str, Any]]) -> Settings:
    """Build Settings from a (possibly partial) config dictionary"""
    return _fill(Settings, raw or {})


def load_settings(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> Settings:
    """
    Load settings from YAML and apply overrides

    Args:
        config_path (str, optional): Config file; defaults to HYBRID_CONFIG or config/config.yaml
        overrides (dict, optional): key/alias -> value pairs applied last

    Returns:
        Settings: The resolved settings
    """
    settings = settings_from_dict(load_config(config_path or default_config_path()))
    for key, value in (overrides or {}).items():
        settings.apply_override(key, value)
        logger.info(f"Setting override {key}={value}")
    return settings
