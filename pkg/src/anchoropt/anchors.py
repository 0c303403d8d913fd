"""Anchor / prior box geometry for one-stage and two-stage detectors.

Boxes are center-format ``(cx, cy, w, h)``; a ``(scale, ratio)`` pair maps
to extents ``w = s * sqrt(r)``, ``h = s / sqrt(r)`` so the area is exactly
``s**2`` for every ratio.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "SsdAnchorConfig",
    "FrcnnAnchorConfig",
    "ssd_scale_schedule",
    "ssd_default_config",
    "anchor_wh",
    "constant_box_scale",
    "ssd_layer_boxes",
    "ssd_anchor_shapes",
    "frcnn_anchor_set",
    "frcnn_grid",
    "iou",
    "corner_box",
    "anchor_table_csv",
]

# Canonical six-feature-map layout of the 300x300 one-stage detector.
SSD_LAYER_NAMES = ("conv4_3", "conv7", "conv8_2", "conv9_2", "conv10_2", "conv11_2")
FULL_RATIOS = (1.0, 2.0, 3.0, 0.5, 1.0 / 3.0)
REDUCED_RATIOS = (1.0, 2.0, 0.5)
# Layers that skip the {3, 1/3} ratios: first and last two.
REDUCED_RATIO_LAYERS = (0, 4, 5)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, center format.  Extents must be positive."""

    cx: float
    cy: float
    w: float
    h: float
    unit: str = "relative"

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> tuple[float, float, float, float]:
        return (
            self.cx - self.w / 2,
            self.cy - self.h / 2,
            self.cx + self.w / 2,
            self.cy + self.h / 2,
        )


def corner_box(x1: float, y1: float, x2: float, y2: float, unit: str = "relative") -> Box:
    """Build a Box from corner coordinates (ingestion helper)."""
    return Box((x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1, unit=unit)


@dataclass(frozen=True)
class SsdAnchorConfig:
    """Per-layer scales and ratio sets for the one-stage detector.

    ``scales`` has one entry per feature map plus a terminal entry used
    only by the constant box of the last layer.
    """

    scales: tuple[float, ...]
    ratios_per_layer: tuple[tuple[float, ...], ...]
    include_constant_box: tuple[bool, ...]
    layer_names: tuple[str, ...] = SSD_LAYER_NAMES

    def __post_init__(self) -> None:
        for s in self.scales:
            if not 0 < s <= 1.06:
                raise ValueError(f"scale {s} outside (0, 1.06]")
        for ratios in self.ratios_per_layer:
            if 1.0 not in ratios:
                raise ValueError("every ratio set must contain 1")
        n_layers = len(self.ratios_per_layer)
        if len(self.include_constant_box) != n_layers:
            raise ValueError("include_constant_box must match the layer count")

    @property
    def n_layers(self) -> int:
        return len(self.ratios_per_layer)


def ssd_scale_schedule(s_min: float, s_max: float, m: int) -> list[float]:
    """Evenly spaced scales over m feature maps, endpoints forced."""
    if not 0 < s_min <= s_max:
        raise ValueError("need 0 < s_min <= s_max")
    if m < 2:
        raise ValueError("need at least 2 feature maps")
    step = (s_max - s_min) / (m - 1)
    return [s_min + step * k for k in range(m)]


def ssd_default_config(scales: tuple[float, ...] | None = None) -> SsdAnchorConfig:
    """Operational default configuration: fixed 0.1 first scale followed by
    the six-layer schedule, reduced ratio sets on the first and last two
    layers, constant box on every layer."""
    if scales is None:
        scales = (0.1, 0.2, 0.37, 0.54, 0.71, 0.88, 1.05)
    scales = tuple(float(s) for s in scales)
    n_layers = len(scales) - 1
    ratios = tuple(
        REDUCED_RATIOS if i in REDUCED_RATIO_LAYERS else FULL_RATIOS for i in range(n_layers)
    )
    return SsdAnchorConfig(
        scales=scales,
        ratios_per_layer=ratios,
        include_constant_box=(True,) * n_layers,
        layer_names=SSD_LAYER_NAMES[:n_layers],
    )


def anchor_wh(s: float, a_r: float) -> tuple[float, float]:
    """Extents of an anchor of scale s and aspect ratio a_r; area is s**2."""
    if s <= 0 or a_r <= 0:
        raise ValueError("scale and ratio must be positive")
    root = math.sqrt(a_r)
    return s * root, s / root


def constant_box_scale(s_k: float, s_k_plus_1: float) -> float:
    """Geometric mean of two adjacent layer scales."""
    if s_k <= 0 or s_k_plus_1 <= 0:
        raise ValueError("scales must be positive")
    return math.sqrt(s_k * s_k_plus_1)


def ssd_layer_boxes(config: SsdAnchorConfig, layer_index: int) -> list[tuple[float, float]]:
    """All (w, h) shapes of one feature map: one per ratio, constant box last."""
    if not 0 <= layer_index < config.n_layers:
        raise ValueError(f"layer index {layer_index} out of range")
    s = config.scales[layer_index]
    boxes = [anchor_wh(s, r) for r in config.ratios_per_layer[layer_index]]
    if config.include_constant_box[layer_index]:
        if layer_index + 1 >= len(config.scales):
            raise ValueError("constant box needs a next-layer scale")
        s_prime = constant_box_scale(s, config.scales[layer_index + 1])
        boxes.append((s_prime, s_prime))
    return boxes


def ssd_anchor_shapes(config: SsdAnchorConfig) -> np.ndarray:
    """Union of all layer shapes as an (A, 2) array of (w, h)."""
    shapes = []
    for i in range(config.n_layers):
        shapes.extend(ssd_layer_boxes(config, i))
    return np.array(shapes)


@dataclass(frozen=True)
class FrcnnAnchorConfig:
    """Anchor set and grid parameters of the two-stage detector."""

    input_size: float = 600.0
    scales: tuple[float, ...] = (128.0, 256.0, 512.0)
    ratios: tuple[float, ...] = (0.5, 1.0, 2.0)
    base_size: int = 16
    feat_w: int = 38
    feat_h: int = 38
    stride: float = 16.0

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.scales):
            raise ValueError("scales must be strictly positive")

    @property
    def k(self) -> int:
        return len(self.scales) * len(self.ratios)


def frcnn_anchor_set(config: FrcnnAnchorConfig) -> list[tuple[float, float]]:
    """Cross product of scales and ratios, area-preserving, in pixels."""
    return [anchor_wh(s, r) for s in config.scales for r in config.ratios]


def frcnn_grid(config: FrcnnAnchorConfig) -> list[Box]:
    """Tile the anchor set at every stride-spaced feature map center."""
    shapes = frcnn_anchor_set(config)
    grid = []
    for iy in range(config.feat_h):
        cy = (iy + 0.5) * config.stride
        for ix in range(config.feat_w):
            cx = (ix + 0.5) * config.stride
            grid.extend(Box(cx, cy, w, h, unit="pixels") for w, h in shapes)
    return grid


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes in the same unit."""
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def anchor_table_csv(kind: str, config: SsdAnchorConfig | FrcnnAnchorConfig) -> str:
    """Full anchor table (layer, scale, ratio, w, h) as CSV text."""
    out = io.StringIO()
    out.write("layer,scale,ratio,w,h\n")
    if kind == "ssd":
        assert isinstance(config, SsdAnchorConfig)
        for i in range(config.n_layers):
            name = config.layer_names[i] if i < len(config.layer_names) else f"layer_{i}"
            s = config.scales[i]
            for r in config.ratios_per_layer[i]:
                w, h = anchor_wh(s, r)
                out.write(f"{name},{s:.6g},{r:.6g},{w:.6g},{h:.6g}\n")
            if config.include_constant_box[i]:
                s_prime = constant_box_scale(s, config.scales[i + 1])
                out.write(f"{name},{s_prime:.6g},1,{s_prime:.6g},{s_prime:.6g}\n")
    elif kind == "frcnn":
        assert isinstance(config, FrcnnAnchorConfig)
        for s in config.scales:
            for r in config.ratios:
                w, h = anchor_wh(s, r)
                out.write(f"rpn,{s:.6g},{r:.6g},{w:.6g},{h:.6g}\n")
    else:
        raise ValueError(f"unknown anchor table kind {kind!r}")
    return out.getvalue()
