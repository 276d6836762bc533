"""Task configuration and participant datasets for a joint embedding."""

from __future__ import annotations

import dataclasses
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..ahe import DEFAULT_SCALE_BITS
from ..embedding import TsneConfig

MODE_SCATTERPLOT = "scatterplot"
MODE_DENSITY = "density"


class ConfigError(ValueError):
    """Task configuration fails validation; message carries field names."""


@dataclass
class Dataset:
    """One participant's private points: rows are points, columns dimensions."""

    points: np.ndarray
    owner_id: str
    labels: list[str] | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ConfigError("points: need a non-empty N x m matrix")
        if not np.all(np.isfinite(self.points)):
            raise ConfigError("points: all values must be finite")
        if self.labels is not None and len(self.labels) != self.points.shape[0]:
            raise ConfigError("labels: length must match point count")

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dimensions(self) -> int:
        return self.points.shape[1]


@dataclass
class ParticipantSpec:
    participant_id: str
    point_count: int


@dataclass
class TaskConfig:
    participants: list[ParticipantSpec]
    dimensions: int
    perplexity: float = 30.0
    tsne: TsneConfig = field(default_factory=TsneConfig)
    key_bits: int = 2048
    scale_bits: int = DEFAULT_SCALE_BITS
    sigma_range: float | None = None  # entry noise drawn uniform from (-s, s)
    eta_range: float | None = None    # row noise drawn uniform from (0, e)
    max_abs_value: float = 100.0      # agreed bound on |x| after any normalization
    seed: int | None = None           # deterministic noises/permutation (test mode)
    visualization_mode: str = MODE_SCATTERPLOT
    normalize: bool = False
    workers: int = 1                  # row-parallel fanout for bulk ciphertext steps
    task_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    def __post_init__(self):
        self.tsne.perplexity = self.perplexity
        if self.sigma_range is None:
            # any magnitude cancels exactly; ten times the data bound hides it well
            self.sigma_range = 10.0 * self.max_abs_value
        if self.eta_range is None:
            self.eta_range = 10.0 * self.max_squared_distance()

    @property
    def total_points(self) -> int:
        return sum(p.point_count for p in self.participants)

    def max_squared_distance(self) -> float:
        return self.dimensions * (2.0 * self.max_abs_value) ** 2

    def validate(self) -> None:
        problems = []
        if not self.participants:
            problems.append("participants: at least one required")
        if len({p.participant_id for p in self.participants}) != len(self.participants):
            problems.append("participants: ids must be unique")
        if self.dimensions < 1:
            problems.append("dimensions: must be >= 1")
        if self.total_points < 3 * self.perplexity:
            problems.append(
                f"perplexity: total points {self.total_points} must be >= 3x perplexity"
            )
        if self.key_bits < 512:
            problems.append("key_bits: must be >= 512")
        if not (self.sigma_range > 0 and self.eta_range > 0):
            problems.append("noise ranges: must be strictly positive")
        if self.visualization_mode not in (MODE_SCATTERPLOT, MODE_DENSITY):
            problems.append(f"visualization_mode: unknown mode {self.visualization_mode!r}")
        if not self.overflow_budget_ok():
            problems.append("scale_bits/key_bits: overflow budget exceeded")
        if problems:
            raise ConfigError("; ".join(problems))

    def overflow_budget_ok(self) -> bool:
        """Largest level-2 magnitude the protocol transports must fit in n/2.

        The worst value is a noised squared distance: m * (2*(|x| + sigma))^2
        scaled by F^2, plus the row noise.
        """
        scale_sq = (1 << self.scale_bits) ** 2
        worst = self.dimensions * (2.0 * (self.max_abs_value + self.sigma_range)) ** 2
        budget = 2 * scale_sq * (worst + self.eta_range)
        return budget < 2 ** (self.key_bits - 1) / 2

    def participant_index(self, participant_id: str) -> int:
        for i, spec in enumerate(self.participants):
            if spec.participant_id == participant_id:
                return i
        raise ConfigError(f"participants: unknown id {participant_id!r}")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "participants": [
                {"participant_id": p.participant_id, "point_count": p.point_count}
                for p in self.participants
            ],
            "dimensions": self.dimensions,
            "perplexity": self.perplexity,
            "tsne": dataclasses.asdict(self.tsne),
            "key_bits": self.key_bits,
            "scale_bits": self.scale_bits,
            "sigma_range": self.sigma_range,
            "eta_range": self.eta_range,
            "max_abs_value": self.max_abs_value,
            "seed": self.seed,
            "visualization_mode": self.visualization_mode,
            "normalize": self.normalize,
            "workers": self.workers,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TaskConfig":
        fields = dict(obj)
        fields["participants"] = [ParticipantSpec(**p) for p in obj["participants"]]
        if obj.get("tsne"):
            fields["tsne"] = TsneConfig(**obj["tsne"])
        else:
            fields.pop("tsne", None)
        return cls(**fields)
