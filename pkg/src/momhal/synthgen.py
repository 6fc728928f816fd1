"""Deterministic synthetic dataset: backbone features plus authentic
per-stream ground-truth descriptors.

Class identity drives the det1 detections (label, box anchor, confidence,
score indices) and the sal1 blob position, so those two streams carry the
class signal; det2..det4 and sal2 are class-free noise, and the four
auxiliary streams follow a class-free latent that is also mixed into the
backbone features.  Detection and saliency targets are produced by running
the real encoders over the generated records and frames, then power
normalizing and sketching them, so hallucination targets are genuine
descriptors rather than noise.

On disk a dataset directory holds: dataset.cfg (key-value metadata),
labels.csv, features.npy of shape (videos, backbone_dim, tau),
aux_<stream>.npy raw auxiliary targets, detections.jsonl, and
saliency/ PGM frames listed by manifest.txt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .halluc import AUX_STREAMS, DET_STREAMS, SAL_STREAMS, SyntheticVideo
from .odf import OdfConfig, odf_descriptor, read_detections
from .pn import PnConfig, sigme
from .sdf import SdfConfig, read_pgm, read_saliency_manifest, sdf_descriptor, write_pgm
from .sketch import derive_stream_seed, project, sketch_new

LATENT_DIM = 8


@dataclass(frozen=True)
class SynthConfig:
    n_videos: int = 512
    n_classes: int = 8
    seed: int = 0
    backbone_dim: int = 64
    tau: int = 7
    sal_width: int = 32
    sal_height: int = 24
    aux_dim: int = 96
    class_scale: float = 3.0
    latent_scale: float = 2.5
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.n_videos < 1 or self.n_classes < 2:
            raise ValueError("need at least 1 video and 2 classes")
        if self.tau < 2:
            raise ValueError("tau must be >= 2")


def _video_id(i: int) -> str:
    return f"v{i:04d}"


def _class_anchor(label: int, n_classes: int) -> tuple[float, float]:
    cols = max(2, int(np.ceil(np.sqrt(n_classes))))
    cx = 0.2 + 0.6 * (label % cols) / max(cols - 1, 1)
    cy = 0.25 + 0.5 * (label // cols) / max((n_classes - 1) // cols, 1)
    return cx, min(cy, 0.8)


def _noise_detection(rng: np.random.Generator, frame: int, tau: int, video: str, det: str) -> dict:
    p1 = rng.uniform(0.0, 0.75, size=2)
    p2 = p1 + rng.uniform(0.05, 0.25, size=2)
    idxs = rng.integers(0, 1001, size=3)
    vals = rng.uniform(0.1, 1.0, size=3)
    vals = vals / vals.sum()
    return {
        "video": video,
        "detector": det,
        "frame": frame,
        "tau": tau,
        "class": int(rng.integers(1, 172)),
        "conf": round(float(rng.uniform(0.05, 0.95)), 6),
        "box": [round(float(v), 6) for v in (p1[0], p1[1], min(p2[0], 1.0), min(p2[1], 1.0))],
        "inet_sparse": [[int(i), float(v)] for i, v in zip(idxs, vals)],
    }


def _signal_detection(
    rng: np.random.Generator,
    frame: int,
    cfg: SynthConfig,
    video: str,
    label: int,
    phase: int,
    variant: int,
) -> dict:
    """Class- and phase-determined detection; phase is the hidden +-1 sign
    of the video's class component in the backbone features.  Two variants
    per frame give the descriptor a within-frame spread that is itself
    class-determined rather than random."""
    cx, cy = _class_anchor(label, cfg.n_classes)
    if phase < 0:
        cy = 1.0 - cy
    if variant:
        cx = 1.0 - cx
    cx += float(rng.normal(0.0, 0.01))
    cy += float(rng.normal(0.0, 0.01))
    w = 0.18 + 0.04 * (label % 3)
    h = 0.14 + 0.03 * (label % 4)
    box = np.clip([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], 0.0, 1.0)
    box = [min(box[0], box[2]), min(box[1], box[3]), max(box[0], box[2]), max(box[1], box[3])]
    conf = float(np.clip(0.35 + 0.06 * label + 0.02 * rng.normal(), 0.0, 1.0))
    label_base = (10 if phase > 0 else 40) + 60 * variant
    inet_base = 100 + 5 * label + (40 if phase < 0 else 0) + 200 * variant
    jitter = rng.uniform(0.95, 1.05, size=3) * np.array([0.65, 0.25, 0.10])
    jitter = jitter / jitter.sum()
    return {
        "video": video,
        "detector": "det1",
        "frame": frame,
        "tau": cfg.tau,
        "class": label_base + label,
        "conf": round(conf, 6),
        "box": [round(float(v), 6) for v in box],
        "inet_sparse": [[inet_base + k, float(v)] for k, v in enumerate(jitter)],
    }


def _blob_anchor(label: int, phase: int, n_classes: int) -> tuple[float, float, float]:
    """Distinct saliency blob center and radius per (class, phase) pair."""
    idx = label + n_classes * (1 if phase < 0 else 0)
    cols = 4
    cx = 0.15 + 0.7 * (idx % cols) / (cols - 1)
    cy = 0.2 + 0.6 * ((idx // cols) % cols) / (cols - 1)
    return cx, cy, 2.0 + 0.3 * (idx % 5)


def _saliency_frame(
    rng: np.random.Generator,
    cfg: SynthConfig,
    center: tuple[float, float],
    radius: float,
    t: int,
    label: int,
) -> np.ndarray:
    h, w = cfg.sal_height, cfg.sal_width
    yy, xx = np.mgrid[0:h, 0:w]
    # class-determined temporal drift so the temporal cumulants carry the
    # class too, not just the mean
    px = center[0] * (w - 1) + 0.5 * t * np.cos(1.0 + label)
    py = center[1] * (h - 1) + 0.5 * t * np.sin(1.0 + label)
    blob = np.exp(-((xx - px) ** 2 + (yy - py) ** 2) / (2.0 * radius**2))
    vals = 0.15 + 0.72 * blob + 0.01 * rng.normal(size=(h, w))
    return np.clip(vals, 0.0, 1.0)


def generate_dataset(out_dir, cfg: SynthConfig) -> None:
    """Write a full synthetic dataset; byte-identical for identical configs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "saliency").mkdir(exist_ok=True)
    rng = np.random.default_rng(cfg.seed)

    labels = np.tile(np.arange(cfg.n_classes), (cfg.n_videos + cfg.n_classes - 1) // cfg.n_classes)
    labels = labels[: cfg.n_videos]
    labels = labels[rng.permutation(cfg.n_videos)]
    # Hidden per-video sign of the class component.  It zeroes the class
    # means in feature space, so a linear readout of the raw features sits
    # at chance; the detection and saliency targets expose the
    # (class, phase) pair, which is what the hallucination streams learn.
    phases = rng.integers(0, 2, size=cfg.n_videos) * 2 - 1

    latent = rng.normal(size=(cfg.n_videos, LATENT_DIM))
    m_cls = rng.normal(size=(cfg.backbone_dim, cfg.n_classes))
    m_cls /= np.linalg.norm(m_cls, axis=0, keepdims=True)
    m_lat = rng.normal(size=(cfg.backbone_dim, LATENT_DIM))
    m_lat /= np.linalg.norm(m_lat, axis=0, keepdims=True)

    feats = (
        cfg.class_scale * (phases[:, None] * m_cls[:, labels].T)[:, :, None]
        + cfg.latent_scale * (latent @ m_lat.T)[:, :, None]
        + cfg.noise_scale * rng.normal(size=(cfg.n_videos, cfg.backbone_dim, cfg.tau))
    )
    np.save(out / "features.npy", feats)

    aux_maps = {
        name: rng.normal(size=(cfg.aux_dim, LATENT_DIM)) / np.sqrt(LATENT_DIM)
        for name in AUX_STREAMS
    }
    for name in AUX_STREAMS:
        raw = latent @ aux_maps[name].T + 0.1 * rng.normal(size=(cfg.n_videos, cfg.aux_dim))
        np.save(out / f"aux_{name}.npy", raw)

    with open(out / "labels.csv", "w", encoding="utf-8") as fp:
        fp.write("video,label\n")
        for i in range(cfg.n_videos):
            fp.write(f"{_video_id(i)},{int(labels[i])}\n")

    manifest_lines: list[str] = []
    with open(out / "detections.jsonl", "w", encoding="utf-8") as fp:
        for i in range(cfg.n_videos):
            video = _video_id(i)
            label = int(labels[i])
            phase = int(phases[i])
            for t in range(1, cfg.tau + 1):
                fp.write(json.dumps(_signal_detection(rng, t, cfg, video, label, phase, 0)) + "\n")
                fp.write(json.dumps(_signal_detection(rng, t, cfg, video, label, phase, 1)) + "\n")
                for det in DET_STREAMS[1:]:
                    for _ in range(int(rng.integers(1, 3))):
                        fp.write(json.dumps(_noise_detection(rng, t, cfg.tau, video, det)) + "\n")

            ax, ay, radius = _blob_anchor(label, phase, cfg.n_classes)
            sal_blobs = {
                "sal1": (ax, ay, radius),
                "sal2": (float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.2, 0.8)), 2.5),
            }
            for source in SAL_STREAMS:
                cx, cy, rad = sal_blobs[source]
                for t in range(1, cfg.tau + 1):
                    frame = _saliency_frame(rng, cfg, (cx, cy), rad, t, label)
                    rel = f"saliency/{video}_{source}_f{t}.pgm"
                    write_pgm(out / rel, frame)
                    manifest_lines.append(f"{video} {source} {rel}")

    with open(out / "manifest.txt", "w", encoding="utf-8") as fp:
        fp.write("\n".join(manifest_lines) + "\n")

    with open(out / "dataset.cfg", "w", encoding="utf-8") as fp:
        for key in (
            "n_videos", "n_classes", "seed", "backbone_dim", "tau",
            "sal_width", "sal_height", "aux_dim",
            "class_scale", "latent_scale", "noise_scale",
        ):
            fp.write(f"{key} = {getattr(cfg, key)!r}\n")


def read_dataset_config(data_dir) -> SynthConfig:
    meta: dict[str, float] = {}
    with open(Path(data_dir) / "dataset.cfg", "r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            meta[key.strip()] = float(value.strip())
    ints = ("n_videos", "n_classes", "seed", "backbone_dim", "tau",
            "sal_width", "sal_height", "aux_dim")
    kwargs = {k: (int(v) if k in ints else v) for k, v in meta.items()}
    return SynthConfig(**kwargs)


def load_dataset(
    data_dir,
    sketch_dim: int,
    pn: PnConfig | None = None,
    streams: tuple[str, ...] | None = None,
    n_prime: int = 3,
) -> tuple[list[SyntheticVideo], int]:
    """Load a dataset directory into training samples.

    Ground-truth descriptor targets are built here: the real ODF/SDF
    encoders run over the stored records and frames, raw auxiliary vectors
    are taken as-is, and everything is SigmE-normalized then sketched to
    ``sketch_dim`` with per-modality sketches seeded from the dataset seed.
    """
    data_dir = Path(data_dir)
    meta = read_dataset_config(data_dir)
    pn = pn or PnConfig()
    wanted = streams if streams is not None else AUX_STREAMS + DET_STREAMS + SAL_STREAMS

    feats = np.load(data_dir / "features.npy")
    labels: dict[str, int] = {}
    with open(data_dir / "labels.csv", "r", encoding="utf-8") as fp:
        next(fp)
        for line in fp:
            video, _, label = line.strip().partition(",")
            labels[video] = int(label)

    aux_raw = {
        name: np.load(data_dir / f"aux_{name}.npy")
        for name in AUX_STREAMS
        if name in wanted
    }
    det_groups = (
        read_detections(data_dir / "detections.jsonl")
        if any(s in wanted for s in DET_STREAMS)
        else {}
    )
    sal_groups = (
        read_saliency_manifest(data_dir / "manifest.txt")
        if any(s in wanted for s in SAL_STREAMS)
        else {}
    )

    odf_cfg = OdfConfig(n_prime=n_prime)
    sdf_cfg = SdfConfig()
    sketches = {}
    for name in wanted:
        if name in AUX_STREAMS:
            raw_dim = meta.aux_dim
        elif name in DET_STREAMS:
            raw_dim = odf_cfg.dim * (4 + n_prime)
        else:
            raw_dim = sdf_cfg.dim * (4 + n_prime)
        sketches[name] = sketch_new(
            raw_dim, sketch_dim, derive_stream_seed(meta.seed, name, "gt")
        )

    videos: list[SyntheticVideo] = []
    for i in range(meta.n_videos):
        video = _video_id(i)
        gt: dict[str, np.ndarray] = {}
        for name in wanted:
            if name in AUX_STREAMS:
                psi = aux_raw[name][i]
            elif name in DET_STREAMS:
                tau, recs = det_groups[(video, name)]
                psi = odf_descriptor(recs, tau, odf_cfg).flat()
            else:
                frames = [read_pgm(p) for p in sal_groups[(video, name)]]
                psi = sdf_descriptor(frames, sdf_cfg, n_prime).flat()
            gt[name] = project(sketches[name], sigme(psi, pn))
        videos.append(SyntheticVideo(feats[i], gt, labels[video]))
    return videos, meta.n_classes
