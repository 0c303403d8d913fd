"""Fitness providers: annotation ingestion, the anchor-coverage proxy
objective, and the external-evaluator wire protocol.

The proxy matches anchors to ground-truth shapes co-centered (shape-only
IoU), so it scores how well a set of anchor extents covers the dataset's
box extents.  The external path shells out to an evaluator command, one
process per request, speaking single-line JSON on stdin/stdout.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import anchors as anchor_geom
from .space import HyperParamSpace

__all__ = [
    "ImageAnnotations",
    "AnnotationSet",
    "FitnessRequest",
    "FitnessResponse",
    "load_annotations",
    "shape_iou_matrix",
    "coverage_fitness",
    "recall_at_iou",
    "external_evaluate",
    "proxy_objective",
]


@dataclass(frozen=True)
class ImageAnnotations:
    image_id: str
    width: int
    height: int
    boxes: np.ndarray          # (B, 4) pixel (x, y, w, h), top-left origin
    classes: tuple[int, ...]


@dataclass
class AnnotationSet:
    """Ground-truth boxes for a dataset, ordered by (image_id, box index)."""

    images: list[ImageAnnotations] = field(default_factory=list)

    def __len__(self) -> int:
        return sum(len(img.boxes) for img in self.images)

    def normalized_shapes(self) -> np.ndarray:
        """All box extents normalized by their image size, as an (N, 2) array."""
        shapes = []
        for img in self.images:
            if len(img.boxes):
                shapes.append(img.boxes[:, 2:4] / np.array([img.width, img.height]))
        if not shapes:
            return np.zeros((0, 2))
        return np.vstack(shapes)


def load_annotations(path: str | Path) -> AnnotationSet:
    """Parse a JSONL annotations file, one image per line.

    Rejects duplicate image ids, zero-extent boxes, and boxes outside the
    image bounds; errors name the offending line.
    """
    images: dict[str, ImageAnnotations] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                image_id = str(rec["image_id"])
                width, height = int(rec["width"]), int(rec["height"])
                raw_boxes = rec["boxes"]
                classes = tuple(int(c) for c in rec.get("classes", [0] * len(raw_boxes)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed annotation record: {exc}") from exc
            if image_id in images:
                raise ValueError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            if width <= 0 or height <= 0:
                raise ValueError(f"{path}:{lineno}: nonpositive image size for {image_id!r}")
            boxes = np.array(raw_boxes, dtype=float).reshape(-1, 4)
            for b in boxes:
                x, y, w, h = b
                if w <= 0 or h <= 0:
                    raise ValueError(
                        f"{path}:{lineno}: zero-extent box in image {image_id!r}"
                    )
                if x < 0 or y < 0 or x + w > width or y + h > height:
                    raise ValueError(
                        f"{path}:{lineno}: box outside image bounds in {image_id!r}"
                    )
            images[image_id] = ImageAnnotations(image_id, width, height, boxes, classes)
    ordered = [images[k] for k in sorted(images)]
    return AnnotationSet(images=ordered)


# ---------------------------------------------------------------------------
# Coverage proxy
# ---------------------------------------------------------------------------


def shape_iou_matrix(shapes: np.ndarray, anchor_shapes: np.ndarray) -> np.ndarray:
    """Pairwise co-centered IoU between GT shapes (N, 2) and anchors (A, 2)."""
    shapes = np.atleast_2d(np.asarray(shapes, dtype=float))
    anchor_shapes = np.atleast_2d(np.asarray(anchor_shapes, dtype=float))
    inter = np.minimum(shapes[:, None, 0], anchor_shapes[None, :, 0]) * np.minimum(
        shapes[:, None, 1], anchor_shapes[None, :, 1]
    )
    area_s = (shapes[:, 0] * shapes[:, 1])[:, None]
    area_a = (anchor_shapes[:, 0] * anchor_shapes[:, 1])[None, :]
    return inter / (area_s + area_a - inter)


def _best_iou(anchor_shapes, ann: AnnotationSet | np.ndarray) -> np.ndarray:
    shapes = ann.normalized_shapes() if isinstance(ann, AnnotationSet) else np.asarray(ann)
    anchor_shapes = np.atleast_2d(np.asarray(anchor_shapes, dtype=float))
    if len(anchor_shapes) == 0 or len(shapes) == 0:
        raise ValueError("need at least one anchor and one ground-truth box")
    return shape_iou_matrix(shapes, anchor_shapes).max(axis=1)


def coverage_fitness(anchor_shapes, ann: AnnotationSet | np.ndarray) -> float:
    """Mean over ground-truth boxes of the best co-centered anchor IoU."""
    return float(_best_iou(anchor_shapes, ann).mean())


def recall_at_iou(anchor_shapes, ann: AnnotationSet | np.ndarray, threshold: float) -> float:
    """Fraction of ground-truth boxes whose best anchor IoU meets the threshold."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    return float((_best_iou(anchor_shapes, ann) >= threshold).mean())


def proxy_objective(space: HyperParamSpace, ann: AnnotationSet):
    """Coverage objective over a builtin space's scaled vectors.

    For the one-stage space the seven scales parameterize the default
    per-layer layout; for the two-stage space, anchors in pixels are
    normalized by the transformed input size.
    """
    shapes = ann.normalized_shapes()
    if len(shapes) == 0:
        raise ValueError("annotation set has no boxes")

    if space.kind == "ssd":

        def objective(v: np.ndarray) -> float:
            config = anchor_geom.ssd_default_config(scales=tuple(float(x) for x in v))
            return coverage_fitness(anchor_geom.ssd_anchor_shapes(config), shapes)

    elif space.kind == "faster_rcnn":

        def objective(v: np.ndarray) -> float:
            phys = space.transform(v)
            config = anchor_geom.FrcnnAnchorConfig(
                input_size=phys["input_size"],
                scales=(phys["scale_1"], phys["scale_2"], phys["scale_3"]),
                ratios=(phys["ratio_1"], phys["ratio_2"], phys["ratio_3"]),
            )
            px = np.array(anchor_geom.frcnn_anchor_set(config))
            return coverage_fitness(px / phys["input_size"], shapes)

    else:
        raise ValueError(f"proxy objective needs a builtin space, got kind {space.kind!r}")

    return objective


# ---------------------------------------------------------------------------
# External evaluator protocol
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitnessRequest:
    trial_id: int
    generation: int
    params: dict[str, float]

    def to_json_line(self) -> str:
        return json.dumps(
            {"trial_id": self.trial_id, "generation": self.generation, "params": self.params}
        )


@dataclass(frozen=True)
class FitnessResponse:
    trial_id: int
    fitness: float
    status: str
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok" and math.isfinite(self.fitness)


def _run_one(command: list[str], request: FitnessRequest, timeout: float | None) -> FitnessResponse:
    failed = lambda detail: FitnessResponse(request.trial_id, float("nan"), "failed", detail)
    try:
        proc = subprocess.run(
            command,
            input=request.to_json_line() + "\n",
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired:
        return failed(f"timeout after {timeout}s")
    except OSError as exc:
        return failed(f"failed to launch evaluator: {exc}")
    if proc.returncode != 0:
        return failed(f"evaluator exited {proc.returncode}: {proc.stderr.strip()[:200]}")
    line = next((ln for ln in proc.stdout.splitlines() if ln.strip()), "")
    if not line:
        return failed("no response line on stdout")
    try:
        rec = json.loads(line)
        trial_id = int(rec["trial_id"])
        status = str(rec["status"])
        fitness = float(rec["fitness"]) if rec.get("fitness") is not None else float("nan")
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        return failed(f"malformed response line: {exc}")
    if trial_id != request.trial_id:
        return failed(f"trial_id mismatch: sent {request.trial_id}, got {trial_id}")
    if status == "ok" and not math.isfinite(fitness):
        return failed("evaluator reported ok with non-finite fitness")
    return FitnessResponse(trial_id, fitness, status, str(rec.get("detail", "")))


def external_evaluate(
    batch: list[FitnessRequest],
    command: str | list[str],
    timeout: float | None = None,
    max_parallel: int = 1,
) -> list[FitnessResponse]:
    """Evaluate a batch with up to max_parallel one-shot evaluator processes.

    Each child receives one request line on stdin and must answer with one
    response line on stdout and exit 0.  Failures (timeout, nonzero exit,
    malformed or mismatched response) become status ``failed`` with NaN
    fitness; the batch order is preserved.
    """
    if isinstance(command, str):
        command = shlex.split(command)
    if not batch:
        return []
    workers = max(1, min(max_parallel, len(batch)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda req: _run_one(command, req, timeout), batch))
