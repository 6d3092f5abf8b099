"""Experiment configuration with a versioned JSON schema."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass, field

from .recommender import RecommenderConfig

SCHEMA_VERSION = 1

PARAMETER_MODES = ("table1", "table4")  # per-edge draws vs even split of a total
GRAPH_KINDS = ("homophily", "edge_list")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GraphSource:
    kind: str = "homophily"
    delta: float = 9.0        # homophily connectivity parameter
    path: str = ""            # edge-list file (edge_list kind)
    n_communities: int = 34   # spectral communities for opinion seeding
    sigma: float = 0.15       # community noise standard deviation

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise ConfigError(f"graph kind must be one of {GRAPH_KINDS}")
        if self.kind == "homophily" and self.delta <= 0:
            raise ConfigError("homophily delta must be positive")
        if self.kind == "edge_list":
            if not self.path:
                raise ConfigError("edge_list graph source needs a path")
            if self.n_communities < 1:
                raise ConfigError("community count must be positive")
            if self.sigma < 0:
                raise ConfigError("sigma must be nonnegative")


@dataclass(frozen=True)
class ExperimentConfig:
    n_users: int = 600
    n_creators: int = 50
    n_topics: int = 2
    horizon: int = 50
    rs: RecommenderConfig = field(default_factory=RecommenderConfig)
    graph_source: GraphSource = field(default_factory=GraphSource)
    parameter_mode: str = "table1"
    seed: int = 0
    metrics_every: int = 1
    snapshot_times: tuple = ()

    def __post_init__(self):
        for name in ("n_users", "n_creators", "n_topics"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.parameter_mode not in PARAMETER_MODES:
            raise ConfigError(f"parameter_mode must be one of {PARAMETER_MODES}")
        if self.metrics_every < 1:
            raise ConfigError("metrics_every must be at least 1")
        object.__setattr__(self, "snapshot_times", tuple(int(t) for t in self.snapshot_times))
        if any(t < 0 or t > self.horizon for t in self.snapshot_times):
            raise ConfigError("snapshot times must lie within [0, horizon]")

    @property
    def sampling_mode(self):
        return "per_edge" if self.parameter_mode == "table1" else "even_total"

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)

    def to_dict(self):
        rs = asdict(self.rs)
        rs["strategy"] = self.rs.strategy
        return {
            "schema": SCHEMA_VERSION,
            "n_users": self.n_users,
            "n_creators": self.n_creators,
            "n_topics": self.n_topics,
            "horizon": self.horizon,
            "rs": rs,
            "graph_source": asdict(self.graph_source),
            "parameter_mode": self.parameter_mode,
            "seed": self.seed,
            "metrics_every": self.metrics_every,
            "snapshot_times": list(self.snapshot_times),
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        schema = data.pop("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {schema}")
        rs_data = dict(data.pop("rs", {}))
        rs_data.pop("strategy", None)  # derived field
        graph_data = data.pop("graph_source", {})
        known = {
            "n_users", "n_creators", "n_topics", "horizon", "parameter_mode",
            "seed", "metrics_every", "snapshot_times",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(
            rs=RecommenderConfig(**rs_data),
            graph_source=GraphSource(**graph_data),
            **data,
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(fh.read())
