"""The LanczosSequence container and its JSON schema."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ValidationError


def fmt_float(x: float) -> str:
    """Round-trip safe decimal form (17 significant digits)."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class LanczosSequence:
    """Coefficients b_1..b_N plus the seed norm ||A||^2.

    ``b[k]`` holds b_{k+1}. ``b_text`` optionally keeps a higher-precision
    decimal rendering of each coefficient (written to JSON instead of the
    float values when present).
    """

    b: np.ndarray
    norm2: float = 1.0
    meta: Mapping[str, Any] = field(default_factory=dict)
    b_text: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        b = np.asarray(self.b, dtype=float).copy()
        b.setflags(write=False)
        object.__setattr__(self, "b", b)
        if b.ndim != 1:
            raise ValidationError("b must be one-dimensional")
        if not np.all(np.isfinite(b)) or np.any(b <= 0):
            raise ValidationError("all Lanczos coefficients must be positive and finite")
        if not (self.norm2 > 0 and np.isfinite(self.norm2)):
            raise ValidationError("norm2 must be positive")
        if self.b_text is not None and len(self.b_text) != len(b):
            raise ValidationError("b_text length mismatch")

    def __len__(self) -> int:
        return len(self.b)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm2))

    def truncated(self, n: int) -> "LanczosSequence":
        if not 1 <= n <= len(self.b):
            raise ValidationError(f"cannot truncate {len(self.b)} coefficients to {n}")
        text = None if self.b_text is None else self.b_text[:n]
        return LanczosSequence(self.b[:n], self.norm2, dict(self.meta), text)

    def scaled(self, lam: float) -> "LanczosSequence":
        """All b_n multiplied by ``lam`` (frequency rescaling)."""
        return LanczosSequence(self.b * lam, self.norm2, dict(self.meta))

    def to_json_dict(self) -> dict[str, Any]:
        b = list(self.b_text) if self.b_text is not None else [fmt_float(v) for v in self.b]
        return {"b": b, "norm2": fmt_float(self.norm2), "meta": dict(self.meta)}

    @classmethod
    def from_json_dict(cls, d: Mapping[str, Any]) -> "LanczosSequence":
        try:
            raw = [str(v) for v in d["b"]]
            norm2 = float(d.get("norm2", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed coefficient file: {exc}") from exc
        return cls(np.array([float(v) for v in raw]), norm2, dict(d.get("meta", {})), tuple(raw))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "LanczosSequence":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read {path}: {exc}") from exc
        return cls.from_json_dict(d)


def as_sequence(b: Sequence[float] | np.ndarray | LanczosSequence, norm2: float = 1.0) -> LanczosSequence:
    if isinstance(b, LanczosSequence):
        return b
    return LanczosSequence(np.asarray(b, dtype=float), norm2)
