"""Shared test helpers: synthetic annotation sets and shape generators."""

from __future__ import annotations

import json

import numpy as np
import pytest


def write_annotations(path, n_images=30, boxes_per_image=3, seed=5,
                      clusters=((0.05, 0.05), (0.16, 0.28), (0.62, 0.45)),
                      size=300):
    """Synthetic JSONL annotations whose box shapes cluster around the given
    relative extents; returns the path."""
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(n_images):
            boxes = []
            for j in range(boxes_per_image):
                cw, ch = clusters[(i + j) % len(clusters)]
                w = max(2.0, min(size - 1.0, cw * size * rng.uniform(0.9, 1.1)))
                h = max(2.0, min(size - 1.0, ch * size * rng.uniform(0.9, 1.1)))
                x = rng.uniform(0, size - w)
                y = rng.uniform(0, size - h)
                boxes.append([float(x), float(y), float(w), float(h)])
            fh.write(json.dumps({
                "image_id": f"img{i:03d}",
                "width": size,
                "height": size,
                "boxes": boxes,
                "classes": [0] * boxes_per_image,
            }) + "\n")
    return path


def clustered_shapes(rng, n_lo=4, n_hi=9, min_separation=0.8):
    """Random two-mode shape instance, the representative input for anchor
    clustering (box extents concentrate around modal shapes)."""
    n = int(rng.integers(n_lo, n_hi))
    centers = rng.uniform(0.15, 0.9, (2, 2))
    while np.abs(np.log(centers[0] / centers[1])).sum() < min_separation:
        centers = rng.uniform(0.15, 0.9, (2, 2))
    return np.array([centers[i % 2] * rng.uniform(0.85, 1.15, 2) for i in range(n)])


@pytest.fixture
def annotations_file(tmp_path):
    return write_annotations(tmp_path / "annotations.jsonl")
