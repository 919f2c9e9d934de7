from .config import ConfigError, ExperimentConfig
from .manifest import derive_replica_seeds, splitmix64

__all__ = ["ConfigError", "ExperimentConfig", "derive_replica_seeds", "splitmix64"]
