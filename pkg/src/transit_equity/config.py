"""Run configuration shared by every command."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import InvalidInputError

# keys that change how fast results are produced, never what they are
EXECUTION_ONLY = frozenset({"threads"})


@dataclass
class RunConfig:
    gtfs_dir: str | None = None
    population_csv: str | None = None
    bbox: tuple[float, float, float, float] | None = None  # south, west, north, east
    side_m: float = 1000.0
    min_density: float = 100.0
    depart_s: float = 28_800.0
    horizon_s: float = 3_600.0
    walk_speed_mps: float = 1.39
    walk_detour: float = 1.3
    max_access_s: float = 1_200.0
    footpath_radius_m: float = 500.0
    min_transfer_s: float = 60.0
    percentile: float = 0.65
    percentile_weighting: str = "hexagons"
    line_grouping: str = "route_id"
    service_date: str | None = None  # YYYY-MM-DD; default: first Wednesday with service
    walk_matrix_csv: str | None = None
    threads: int = 1
    seed: int = 0

    def validate(self) -> None:
        if self.side_m <= 0:
            raise InvalidInputError("side_m must be positive")
        if self.min_density < 0:
            raise InvalidInputError("min_density must be >= 0")
        if self.horizon_s <= 0:
            raise InvalidInputError("horizon_s must be positive")
        if self.walk_speed_mps <= 0 or self.walk_detour < 1 or self.max_access_s < 0:
            raise InvalidInputError("invalid walk parameters")
        if self.footpath_radius_m <= 0 or self.min_transfer_s < 0:
            raise InvalidInputError("invalid footpath parameters")
        if not 0 < self.percentile <= 1:
            raise InvalidInputError("percentile must lie in (0, 1]")
        if self.percentile_weighting not in ("hexagons", "population"):
            raise InvalidInputError("percentile_weighting must be 'hexagons' or 'population'")
        if self.line_grouping not in ("route_id", "route_short_name"):
            raise InvalidInputError("line_grouping must be 'route_id' or 'route_short_name'")
        if self.threads < 1:
            raise InvalidInputError("threads must be >= 1")
        if self.bbox is not None:
            s, w, n, e = self.bbox
            if not (n > s and e > w):
                raise InvalidInputError("bbox must be south,west,north,east with non-zero area")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        data = {k: v for k, v in data.items()}
        if data.get("bbox") is not None:
            if len(data["bbox"]) != 4:
                raise InvalidInputError("bbox needs four numbers")
            data["bbox"] = tuple(float(v) for v in data["bbox"])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InvalidInputError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidInputError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["bbox"] is not None:
            d["bbox"] = list(d["bbox"])
        return d

    def with_overrides(self, overrides: dict) -> "RunConfig":
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(d)

    def hash(self) -> str:
        """Short digest of every result-affecting key."""
        d = {k: v for k, v in self.to_dict().items() if k not in EXECUTION_ONLY}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]
