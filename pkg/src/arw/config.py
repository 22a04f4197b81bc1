"""Experiment configuration with a lossless JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

NEG_INF_TOKEN = "-inf"


def parse_beta(value) -> float:
    """Accept a number or the token "-inf" (infinite repulsion)."""
    if isinstance(value, str):
        token = value.strip().lower()
        if token in (NEG_INF_TOKEN, "-infinity"):
            return -math.inf
        value = float(token)
    beta = float(value)
    if math.isnan(beta) or beta == math.inf:
        raise ValueError(f"unsupported beta {value!r}")
    return beta


def format_beta(beta: float):
    return NEG_INF_TOKEN if beta == -math.inf else float(beta)


@dataclass
class ExperimentConfig:
    command: str
    graph: str | None = None
    n: int | None = None
    beta: float | None = None
    lazy: bool = False
    seed: int = 0
    out: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.beta is not None:
            self.beta = parse_beta(self.beta)
        if self.n is not None:
            self.n = int(self.n)
            if self.n < 1:
                raise ValueError("n must be >= 1")
        self.seed = int(self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.beta is not None:
            d["beta"] = format_beta(self.beta)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"command", "graph", "n", "beta", "lazy", "seed", "out", "params"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        if "command" not in d:
            raise ValueError("config needs a command")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())
