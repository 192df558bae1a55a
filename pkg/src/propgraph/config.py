"""Pipeline configuration.

One frozen dataclass carries every knob: graph construction threshold,
pooling sizes, residual mixing, normalization mode, attention flags, the
seed, and the eigensolver budget. JSON configs mirror the field names
(``lambda_`` is spelled ``lambda`` on disk).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .errors import InputError

NORM_MODES = ("moment_match", "literal")


@dataclass(frozen=True)
class PipelineConfig:
    iou_thr: float = 0.3
    min_size: int = 3
    stop_ncut: float = 0.5
    min_part: int = 1
    lambda_: float = 1.0
    epsilon: float = 1e-8
    head_count: int = 1
    norm_mode: str = "moment_match"
    dense_attention: bool = False
    iou_bias: bool = False
    per_channel: bool = False
    seed: int = 0
    eig_tol: float = 1e-10
    eig_max_sweeps: int = 100

    def __post_init__(self) -> None:
        if not 0.0 <= self.iou_thr < 1.0:
            raise InputError(f"iou_thr must lie in [0, 1), got {self.iou_thr}")
        if self.min_size < 1:
            raise InputError(f"min_size must be >= 1, got {self.min_size}")
        if not math.isfinite(self.stop_ncut) or self.stop_ncut < 0.0:
            raise InputError(f"stop_ncut must be finite and >= 0, got {self.stop_ncut}")
        if self.min_part < 1:
            raise InputError(f"min_part must be >= 1, got {self.min_part}")
        if not math.isfinite(self.lambda_) or self.lambda_ < 0.0:
            raise InputError(f"lambda must be finite and >= 0, got {self.lambda_}")
        if not math.isfinite(self.epsilon) or self.epsilon <= 0.0:
            raise InputError(f"epsilon must be finite and > 0, got {self.epsilon}")
        if self.head_count < 1:
            raise InputError(f"head_count must be >= 1, got {self.head_count}")
        if self.norm_mode not in NORM_MODES:
            raise InputError(f"norm_mode must be one of {NORM_MODES}, got {self.norm_mode!r}")
        if self.eig_tol <= 0.0 or self.eig_max_sweeps < 1:
            raise InputError("eigensolver tolerance must be > 0 and sweep budget >= 1")

    def to_dict(self) -> dict:
        return {
            ("lambda" if key == "lambda_" else key): value
            for key, value in asdict(self).items()
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = "lambda_" if key == "lambda" else key
            if name not in known:
                raise InputError(f"unknown config field {key!r}")
            kwargs[name] = value
        return cls(**kwargs)
