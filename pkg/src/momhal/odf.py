"""Object detection features.

Each bounding box becomes a per-box vector: a one-hot over the joint
171-class label space (labels 1..91 from the COCO-style detector space,
92..171 from the AVA-style space at offset +91), the 1001-dim l1-normalized
ImageNet score vector, and Gaussian feature maps of six scalars
(confidence, four box coordinates, normalized frame position).  With the
default 7-pivot maps the vector has 171 + 1001 + 6*7 = 1214 entries; with
raw scalars instead of maps, 1178.  All boxes of a video, grouped by
frame, are summarized by the multi-moment descriptor.

Detections arrive as JSON Lines, one object per detection:
{"video": str, "detector": str, "frame": int, "tau": int, "class": int,
 "conf": float, "box": [f, f, f, f], "inet": [1001 floats]}.
"inet" may be replaced by "inet_sparse": [[index, value], ...] with
0-based indices into the 1001-vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kernel import INTERVAL_UNIT, FeatureMapConfig, feature_map
from .moments import FeatureBag, MultiMomentDescriptor, multi_moment

COCO_CLASSES = 91
AVA_CLASSES = 80
CLASS_SPACE_SIZE = COCO_CLASSES + AVA_CLASSES  # 171
IMAGENET_SIZE = 1001
SCORE_SUM_TOL = 1e-6

DETECTOR_SLOTS = ("det1", "det2", "det3", "det4")


@dataclass
class DetectionRecord:
    """One bounding-box detection within a video."""

    frame_index: int          # t in [1, tau]
    class_label: int          # y in [1, 171]
    confidence: float         # in [0, 1]
    box: tuple[float, float, float, float]  # (v1, v2, v3, v4) normalized, top-left <= bottom-right
    imagenet_scores: np.ndarray  # (1001,), nonnegative, sums to 1

    def __post_init__(self):
        self.imagenet_scores = np.asarray(self.imagenet_scores, dtype=np.float64)
        self.box = tuple(float(v) for v in self.box)

    def validate(self) -> None:
        if not 1 <= self.class_label <= CLASS_SPACE_SIZE:
            raise ValueError(f"class label {self.class_label} outside [1, {CLASS_SPACE_SIZE}]")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if len(self.box) != 4:
            raise ValueError("box must have 4 coordinates")
        v1, v2, v3, v4 = self.box
        if not all(0.0 <= v <= 1.0 for v in self.box):
            raise ValueError(f"box coordinates {self.box} outside [0, 1]")
        if v1 > v3 or v2 > v4:
            raise ValueError(f"box {self.box} violates top-left <= bottom-right")
        if self.imagenet_scores.shape != (IMAGENET_SIZE,):
            raise ValueError(f"imagenet_scores must have length {IMAGENET_SIZE}")
        if self.imagenet_scores.min() < 0.0:
            raise ValueError("imagenet_scores must be nonnegative")
        if abs(float(self.imagenet_scores.sum()) - 1.0) > SCORE_SUM_TOL:
            raise ValueError("imagenet_scores must sum to 1")

    def sanitized(self) -> "DetectionRecord":
        """Lenient copy: clamp ranges, reorder corners, renormalize scores.
        Structural problems (label space, vector length) still raise."""
        if not 1 <= self.class_label <= CLASS_SPACE_SIZE:
            raise ValueError(f"class label {self.class_label} outside [1, {CLASS_SPACE_SIZE}]")
        if self.imagenet_scores.shape != (IMAGENET_SIZE,):
            raise ValueError(f"imagenet_scores must have length {IMAGENET_SIZE}")
        v = np.clip(np.asarray(self.box, dtype=np.float64), 0.0, 1.0)
        box = (min(v[0], v[2]), min(v[1], v[3]), max(v[0], v[2]), max(v[1], v[3]))
        scores = np.clip(self.imagenet_scores, 0.0, None)
        total = float(scores.sum())
        scores = scores / total if total > 0 else np.full(IMAGENET_SIZE, 1.0 / IMAGENET_SIZE)
        return DetectionRecord(
            frame_index=self.frame_index,
            class_label=self.class_label,
            confidence=float(min(max(self.confidence, 0.0), 1.0)),
            box=box,
            imagenet_scores=scores,
        )


@dataclass(frozen=True)
class OdfConfig:
    use_rbf_embedding: bool = True
    scalar_map: FeatureMapConfig = field(
        default_factory=lambda: FeatureMapConfig(7, 0.5, INTERVAL_UNIT)
    )
    n_prime: int = 3
    class_space_size: int = CLASS_SPACE_SIZE
    imagenet_size: int = IMAGENET_SIZE

    @property
    def dim(self) -> int:
        per_scalar = self.scalar_map.pivot_count if self.use_rbf_embedding else 1
        return self.class_space_size + self.imagenet_size + 6 * per_scalar


def encode_box(rec: DetectionRecord, tau: int, cfg: OdfConfig) -> np.ndarray:
    """Per-box vector: [one-hot(label); imagenet; phi(conf); phi(v1..v4);
    phi(frame position)].  For a single-frame video the frame position is 0."""
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if not 1 <= rec.frame_index <= tau:
        raise ValueError(f"frame index {rec.frame_index} outside [1, {tau}]")
    rec.validate()

    one_hot = np.zeros(cfg.class_space_size)
    one_hot[rec.class_label - 1] = 1.0
    frame_pos = (rec.frame_index - 1) / (tau - 1) if tau > 1 else 0.0
    scalars = (rec.confidence, *rec.box, frame_pos)
    if cfg.use_rbf_embedding:
        embedded = [feature_map(v, cfg.scalar_map) for v in scalars]
    else:
        embedded = [np.array([v]) for v in scalars]
    return np.concatenate([one_hot, rec.imagenet_scores, *embedded])


class EmptyDetectorError(ValueError):
    """Raised when a per-detector descriptor is requested with no records."""


def detection_bag(records: list[DetectionRecord], tau: int, cfg: OdfConfig) -> FeatureBag:
    """Group encoded boxes by frame into a bag with J = tau groups; frames
    without detections stay empty but still count."""
    if not records:
        raise EmptyDetectorError("no detections for this video/detector")
    frames: list[list[np.ndarray]] = [[] for _ in range(tau)]
    for rec in records:
        encoded = encode_box(rec, tau, cfg)  # validates frame_index <= tau
        frames[rec.frame_index - 1].append(encoded)
    d = cfg.dim
    arrays = [
        np.array(group) if group else np.zeros((0, d))
        for group in frames
    ]
    return FeatureBag(dim=d, frames=arrays)


def odf_descriptor(records: list[DetectionRecord], tau: int, cfg: OdfConfig) -> MultiMomentDescriptor:
    bag = detection_bag(records, tau, cfg)
    return multi_moment(bag, cfg.n_prime)


def _scores_from_obj(obj: dict) -> np.ndarray:
    if "inet" in obj:
        return np.asarray(obj["inet"], dtype=np.float64)
    if "inet_sparse" in obj:
        scores = np.zeros(IMAGENET_SIZE)
        for idx, val in obj["inet_sparse"]:
            idx = int(idx)
            if not 0 <= idx < IMAGENET_SIZE:
                raise ValueError(f"inet_sparse index {idx} outside [0, {IMAGENET_SIZE - 1}]")
            scores[idx] += float(val)
        return scores
    raise ValueError("record needs 'inet' or 'inet_sparse'")


def parse_detection_line(line: str, strict: bool = True) -> tuple[str, str, int, DetectionRecord]:
    """Parse one JSONL record into (video, detector, tau, record)."""
    obj = json.loads(line)
    for key in ("video", "detector", "frame", "tau", "class", "conf", "box"):
        if key not in obj:
            raise ValueError(f"missing field {key!r}")
    rec = DetectionRecord(
        frame_index=int(obj["frame"]),
        class_label=int(obj["class"]),
        confidence=float(obj["conf"]),
        box=tuple(float(v) for v in obj["box"]),
        imagenet_scores=_scores_from_obj(obj),
    )
    tau = int(obj["tau"])
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if strict:
        rec.validate()
        if not 1 <= rec.frame_index <= tau:
            raise ValueError(f"frame index {rec.frame_index} outside [1, {tau}]")
    else:
        rec = rec.sanitized()
        rec.frame_index = min(max(rec.frame_index, 1), tau)
    if not math.isfinite(rec.confidence):
        raise ValueError("non-finite confidence")
    return str(obj["video"]), str(obj["detector"]), tau, rec


def read_detections(
    path, strict: bool = True
) -> dict[tuple[str, str], tuple[int, list[DetectionRecord]]]:
    """Read a JSONL file into {(video, detector): (tau, records)}.

    Malformed lines raise ValueError tagged with the 1-based line number.
    tau must be consistent across a video's records.
    """
    groups: dict[tuple[str, str], tuple[int, list[DetectionRecord]]] = {}
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                video, detector, tau, rec = parse_detection_line(line, strict=strict)
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from exc
            key = (video, detector)
            if key in groups:
                prev_tau, recs = groups[key]
                if prev_tau != tau:
                    raise ValueError(
                        f"{path}: line {lineno}: tau {tau} conflicts with earlier {prev_tau} for {key}"
                    )
                recs.append(rec)
            else:
                groups[key] = (tau, [rec])
    return groups
