"""Hyper-parameter search spaces and scaled-to-physical transforms.

Optimizers always work on the scaled space; the affine transform of each
dimension maps a scaled value to the physical quantity the detector
consumes (pixels, aspect ratio, relative scale).  Lower bounds are open,
upper bounds closed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "HyperParam",
    "HyperParamSpace",
    "builtin_space",
    "default_vector",
    "space_from_dict",
    "space_to_dict",
    "load_space_file",
    "resolve_space",
    "FRCNN_BASE_SIZE",
    "FRCNN_DEFAULT_VECTOR",
    "SSD_DEFAULT_VECTOR",
]

# Base anchor size of the two-stage detector; fixed, not a tunable dimension.
FRCNN_BASE_SIZE = 16

# Operational default / initial vectors for the two builtin spaces.
FRCNN_DEFAULT_VECTOR = (0.6, 0.25, 0.5, 1.0, 0.25, 0.5, 1.0)
SSD_DEFAULT_VECTOR = (0.1, 0.2, 0.37, 0.54, 0.71, 0.88, 1.05)

# Relative width of the epsilon clamp that keeps values off the open lower bound.
_CLIP_EPS = 1e-6


@dataclass(frozen=True)
class HyperParam:
    """One continuous dimension with range (lo, hi] and an affine transform.

    ``transform(x) = mul * x + add``; identity is ``mul=1, add=0``.
    """

    name: str
    lo: float
    hi: float
    mul: float = 1.0
    add: float = 0.0
    unit: str = ""

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"{self.name}: lo must be < hi, got ({self.lo}, {self.hi}]")
        if self.mul <= 0:
            raise ValueError(f"{self.name}: transform multiplier must be positive")
        if self.mul * self.lo + self.add < 0:
            raise ValueError(f"{self.name}: transform is not positive over ({self.lo}, {self.hi}]")

    def transform_value(self, x: float) -> float:
        return self.mul * x + self.add


@dataclass(frozen=True)
class HyperParamSpace:
    """Ordered collection of dimensions; the order defines vector layout."""

    params: tuple[HyperParam, ...]
    kind: str = "custom"

    def __post_init__(self) -> None:
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        if not self.params:
            raise ValueError("space must have at least one dimension")

    @property
    def n(self) -> int:
        return len(self.params)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def lo(self) -> np.ndarray:
        return np.array([p.lo for p in self.params])

    @property
    def hi(self) -> np.ndarray:
        return np.array([p.hi for p in self.params])

    def _check_dim(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"expected vector of dimension {self.n}, got shape {v.shape}")
        return v

    def transform(self, v: np.ndarray) -> dict[str, float]:
        """Map a scaled vector to named physical values."""
        v = self._check_dim(v)
        return {p.name: float(p.transform_value(x)) for p, x in zip(self.params, v)}

    def clip(self, v: np.ndarray) -> np.ndarray:
        """Clamp a raw vector into [lo + eps, hi]; idempotent."""
        v = self._check_dim(v)
        lo, hi = self.lo, self.hi
        eps = _CLIP_EPS * (hi - lo)
        return np.clip(v, lo + eps, hi)

    def sample_uniform(self, rng: np.random.Generator | int | None = None) -> np.ndarray:
        """Draw one vector uniformly from (lo, hi]."""
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        lo, hi = self.lo, self.hi
        # uniform(0, r) lies in [0, r), so hi - u lies in (lo, hi]
        return hi - rng.uniform(0.0, hi - lo)


def builtin_space(kind: str) -> HyperParamSpace:
    """Return one of the two builtin detector spaces.

    ``faster_rcnn``: input image size plus three anchor ratios and three
    anchor scales, each with its pixel/ratio transform.  ``ssd``: seven
    per-layer relative scales, identity transform.
    """
    if kind == "faster_rcnn":
        scale_mul = 32.0 * FRCNN_BASE_SIZE
        params = (
            HyperParam("input_size", 0.3, 0.7, mul=1000.0, unit="pixels"),
            HyperParam("ratio_1", 0.0, 1.0, mul=2.0, unit="aspect ratio"),
            HyperParam("ratio_2", 0.0, 1.0, mul=2.0, unit="aspect ratio"),
            HyperParam("ratio_3", 0.0, 1.0, mul=2.0, unit="aspect ratio"),
            HyperParam("scale_1", 0.0, 1.0, mul=scale_mul, unit="pixels"),
            HyperParam("scale_2", 0.0, 1.0, mul=scale_mul, unit="pixels"),
            HyperParam("scale_3", 0.0, 1.0, mul=scale_mul, unit="pixels"),
        )
        return HyperParamSpace(params, kind="faster_rcnn")
    if kind == "ssd":
        params = tuple(
            HyperParam(f"scale_{i}", 0.0, 1.06, unit="relative scale") for i in range(7)
        )
        return HyperParamSpace(params, kind="ssd")
    raise ValueError(f"unknown builtin space {kind!r} (expected 'faster_rcnn' or 'ssd')")


def default_vector(space: HyperParamSpace) -> np.ndarray:
    """Operational default scaled vector for a builtin space."""
    if space.kind == "faster_rcnn":
        return np.array(FRCNN_DEFAULT_VECTOR)
    if space.kind == "ssd":
        return np.array(SSD_DEFAULT_VECTOR)
    raise ValueError(f"no default vector for space kind {space.kind!r}")


def space_to_dict(space: HyperParamSpace) -> dict:
    return {
        "kind": space.kind,
        "params": [
            {
                "name": p.name,
                "lo": p.lo,
                "hi": p.hi,
                "transform": {"mul": p.mul, "add": p.add},
                "unit": p.unit,
            }
            for p in space.params
        ],
    }


def space_from_dict(data: dict) -> HyperParamSpace:
    params = tuple(
        HyperParam(
            name=d["name"],
            lo=float(d["lo"]),
            hi=float(d["hi"]),
            mul=float(d.get("transform", {}).get("mul", 1.0)),
            add=float(d.get("transform", {}).get("add", 0.0)),
            unit=d.get("unit", ""),
        )
        for d in data["params"]
    )
    return HyperParamSpace(params, kind=data.get("kind", "custom"))


def load_space_file(path: str | Path) -> HyperParamSpace:
    """Load a space definition from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        return space_from_dict(json.load(fh))


def resolve_space(name_or_path: str) -> HyperParamSpace:
    """Resolve a builtin space name or a JSON file path."""
    if name_or_path in ("faster_rcnn", "ssd"):
        return builtin_space(name_or_path)
    path = Path(name_or_path)
    if path.exists():
        return load_space_file(path)
    raise ValueError(f"{name_or_path!r} is neither a builtin space nor an existing file")
