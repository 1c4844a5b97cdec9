"""Pipeline configuration.

Every tunable hyperparameter of the system lives here as one flat dataclass.
Configs round-trip through a flat JSON file; unknown keys are rejected so a
typo in a config file fails loudly instead of silently running defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass


class ConfigError(ValueError):
    """Raised for malformed config files or out-of-range values."""


@dataclass(frozen=True)
class Config:
    # image preprocessing
    max_dim: int = 1000
    blur_half_width: int = 50

    # notehead detection
    notehead_se_radius: int = 5
    blob_min_area: float = 50.0
    blob_max_area: float = 1000.0
    blob_num_thresholds: int = 10
    blob_min_dist: float = 10.0
    crop_size: int = 41
    cand_height_lo: float = 0.5
    cand_height_hi: float = 1.5
    cand_width_lo: float = 0.5
    cand_width_hi: float = 1.5
    cand_aspect_lo: float = 0.5
    cand_aspect_hi: float = 2.0
    cand_area_lo: float = 0.5
    cand_area_hi: float = 2.0
    chord_area_min: float = 1.8

    # staff line features
    horiz_se_width: int = 41
    beam_thickness_thresh: int = 5
    comb_spacing_min: int = 10
    comb_spacing_max: int = 30
    comb_spacing_step: int = 1
    impulse_height: int = 2

    # bar line detection
    vert_se_height: int = 41
    barline_max_width: int = 12

    # bootleg projection
    context_half_width: int = 60
    simultaneity_tol: float = 1.0

    # MIDI ingestion
    onset_cluster_tol: float = 0.05

    # alignment
    dtw_weight_match: float = 1.0
    dtw_weight_skip_ref: float = 1.0
    dtw_weight_double_query: float = 2.0
    extend_to_next_onset: bool = True

    # evaluation
    baseline_n_measures: int = 6
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        c = self
        checks = [
            (c.max_dim >= 1, "max_dim must be >= 1"),
            (c.blur_half_width >= 1, "blur_half_width must be >= 1"),
            (c.notehead_se_radius >= 1, "notehead_se_radius must be >= 1"),
            (0 < c.blob_min_area < c.blob_max_area,
             "blob areas must satisfy 0 < min < max"),
            (c.blob_num_thresholds >= 1, "blob_num_thresholds must be >= 1"),
            (c.blob_min_dist > 0, "blob_min_dist must be positive"),
            (c.crop_size >= 3 and c.crop_size % 2 == 1,
             "crop_size must be an odd integer >= 3"),
            (0 < c.cand_height_lo <= c.cand_height_hi, "bad height tolerance"),
            (0 < c.cand_width_lo <= c.cand_width_hi, "bad width tolerance"),
            (0 < c.cand_aspect_lo <= c.cand_aspect_hi, "bad aspect tolerance"),
            (0 < c.cand_area_lo <= c.cand_area_hi, "bad area tolerance"),
            (c.chord_area_min > 1.0, "chord_area_min must exceed 1.0"),
            (c.horiz_se_width >= 1, "horiz_se_width must be >= 1"),
            (c.beam_thickness_thresh >= 1, "beam_thickness_thresh must be >= 1"),
            (2 <= c.comb_spacing_min <= c.comb_spacing_max,
             "comb spacings must satisfy 2 <= min <= max"),
            (c.comb_spacing_step >= 1, "comb_spacing_step must be >= 1"),
            (c.impulse_height >= 1, "impulse_height must be >= 1"),
            (c.vert_se_height >= 1, "vert_se_height must be >= 1"),
            (c.barline_max_width >= 1, "barline_max_width must be >= 1"),
            (c.context_half_width >= 1, "context_half_width must be >= 1"),
            (c.simultaneity_tol > 0, "simultaneity_tol must be positive"),
            (c.onset_cluster_tol > 0, "onset_cluster_tol must be positive"),
            (c.dtw_weight_match > 0 and c.dtw_weight_skip_ref > 0
             and c.dtw_weight_double_query > 0, "DTW weights must be positive"),
            (c.baseline_n_measures >= 1, "baseline_n_measures must be >= 1"),
            (c.seed >= 0, "seed must be non-negative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def comb_spacings(self) -> tuple[int, ...]:
        """Ascending staff-line spacings covered by the comb filter bank."""
        return tuple(range(self.comb_spacing_min, self.comb_spacing_max + 1,
                           self.comb_spacing_step))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def dump_json(self) -> str:
        """Canonical JSON form; byte-stable across dump/load/dump."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load_json(cls, text: str) -> "Config":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)

    def replace(self, **overrides) -> "Config":
        known = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return dataclasses.replace(self, **overrides)

    @property
    def config_hash(self) -> str:
        """Hash of the effective config, embedded in outputs for provenance."""
        return hashlib.sha256(self.dump_json().encode()).hexdigest()
