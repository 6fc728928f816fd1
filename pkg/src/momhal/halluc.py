"""Hallucination streams, combined objective, and gradient-descent training.

Each stream unit maps temporally mean-pooled backbone features through an
affine layer, SigmE power normalization, and a fixed count sketch.  During
training every enabled stream is pulled toward its pre-sketched
ground-truth descriptor by an MSE term while the pooled combination of all
streams (plus the pass-through unit) feeds an affine prediction head
trained by cross-entropy.  At test time the ground truth is absent and the
streams' own outputs stand in for it.

All gradients are written by hand and checked against central finite
differences in the test suite.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from .fusion import (
    BETA_BRACKET,
    GROUP_DET,
    GROUP_SAL,
    GROUP_TOP,
    HAF_ID,
    WARMUP_EPOCHS,
    Bracket,
    FusionSpec,
    beta_schedule,
    effective_coefficients,
    golden_step,
    ridge_accuracy,
    spec_from_text,
    spec_to_text,
)
from .odf import DETECTOR_SLOTS
from .pn import PnConfig, sigme, sigme_grad
from .sdf import SALIENCY_SLOTS
from .sketch import (
    CountSketch,
    derive_stream_seed,
    project_rows,
    project_transpose_rows,
    sketch_from_bytes,
    sketch_new,
    sketch_to_bytes,
)

AUX_STREAMS = ("fv1", "fv2", "bow", "off")
DET_STREAMS = DETECTOR_SLOTS
SAL_STREAMS = SALIENCY_SLOTS
STREAM_ORDER = AUX_STREAMS + DET_STREAMS + SAL_STREAMS

CHECKPOINT_MAGIC = b"HAL1"


class TrainingDivergedError(RuntimeError):
    """Raised when the objective becomes non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 1.0               # MSE/classification trade-off
    learning_rate: float = 0.05
    epochs: int = 30
    seed: int = 0
    backbone_dim: int = 64
    pre_sketch_dim: int = 128
    sketch_dim: int = 128
    streams: tuple[str, ...] = STREAM_ORDER
    batch_size: int = 32
    val_fraction: float = 0.25
    rho: float = 0.1
    pn: PnConfig = field(default_factory=PnConfig)
    multi_label: bool = False
    tie_sketches: bool = False
    warmup_epochs: int = WARMUP_EPOCHS
    beta_bracket: tuple[float, float] = BETA_BRACKET
    ridge_l2: float = 1e-3
    init_scale: float = 0.2

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        unknown = [s for s in self.streams if s not in STREAM_ORDER]
        if unknown:
            raise ValueError(f"unknown streams {unknown}; valid: {STREAM_ORDER}")

    def ordered_streams(self) -> tuple[str, ...]:
        return tuple(s for s in STREAM_ORDER if s in self.streams)


@dataclass
class SyntheticVideo:
    """Training sample: fixed backbone features, pre-sketched per-stream
    ground-truth descriptors, class label."""

    backbone_features: np.ndarray          # (b, t)
    ground_truth: dict[str, np.ndarray]    # stream id -> (d',)
    label: int | np.ndarray                # class id, or multi-hot vector


@dataclass
class StreamUnit:
    stream_id: str
    weight: np.ndarray   # (m, b)
    bias: np.ndarray     # (m,)
    pn: PnConfig
    sketch: CountSketch  # m -> d'

    def __post_init__(self):
        if self.sketch.input_dim != self.weight.shape[0]:
            raise ValueError("sketch input dim must equal the unit's output dim")


@dataclass
class PredNet:
    weight: np.ndarray  # (classes, d')
    bias: np.ndarray    # (classes,)


@dataclass
class Model:
    config: TrainConfig
    units: dict[str, StreamUnit]   # hallucination streams, canonical order
    haf_unit: StreamUnit
    prednet: PredNet
    spec: FusionSpec
    n_classes: int
    # Fixed input gain for the prediction head: the pooling coefficients
    # carry nested 1/|group| factors, so the pooled vector is far smaller
    # than any single stream output.  Dividing by the total coefficient
    # mass (frozen at initialization) reparametrizes the same affine family
    # with O(1) inputs, keeping SGD conditioning independent of how many
    # streams are enabled.
    tot_scale: float = 1.0


def stream_forward(unit: StreamUnit, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-video forward pass: mean-pool time, affine, SigmE, sketch.
    Returns (pre-sketch activation, sketched output)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != unit.weight.shape[1]:
        raise ValueError(f"expected ({unit.weight.shape[1]}, t) features, got {x.shape}")
    z = x.mean(axis=1)
    a = unit.weight @ z + unit.bias
    pre = sigme(a, unit.pn)
    out = project_rows(unit.sketch, pre.reshape(1, -1))[0]
    return pre, out


def _pool_features(videos: list[SyntheticVideo], backbone_dim: int) -> np.ndarray:
    feats = np.stack([np.asarray(v.backbone_features, dtype=np.float64) for v in videos])
    if feats.shape[1] != backbone_dim:
        raise ValueError(f"backbone dim {feats.shape[1]} != configured {backbone_dim}")
    return feats.mean(axis=2)  # (B, b)


def _unit_forward_rows(unit: StreamUnit, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = z @ unit.weight.T + unit.bias
    pre = sigme(a, unit.pn)
    out = project_rows(unit.sketch, pre)
    return a, pre, out


def _label_matrix(videos: list[SyntheticVideo], n_classes: int, multi_label: bool) -> np.ndarray:
    y = np.zeros((len(videos), n_classes))
    for i, v in enumerate(videos):
        if multi_label:
            y[i] = np.asarray(v.label, dtype=np.float64)
        else:
            y[i, int(v.label)] = 1.0
    return y


def _class_loss_and_grad(
    scores: np.ndarray, y: np.ndarray, multi_label: bool
) -> tuple[float, np.ndarray]:
    """Mean classification loss over the batch and d(loss)/d(scores)."""
    b = scores.shape[0]
    if multi_label:
        # sigmoid BCE, mean over batch and classes
        m = np.maximum(scores, 0.0)
        loss = float((m - scores * y + np.log1p(np.exp(-np.abs(scores)))).mean())
        prob = 1.0 / (1.0 + np.exp(-scores))
        return loss, (prob - y) / y.size
    shifted = scores - scores.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    loss = float(-(logp * y).sum(axis=1).mean())
    prob = np.exp(logp)
    return loss, (prob - y) / b


def objective(
    batch: list[SyntheticVideo],
    units: dict[str, StreamUnit],
    haf_unit: StreamUnit,
    prednet: PredNet,
    spec: FusionSpec,
    cfg: TrainConfig,
    tot_scale: float = 1.0,
) -> tuple[float, dict[str, float], float]:
    """Combined loss on a batch.

    Returns (total loss, per-stream mean squared error, classification
    loss) with total = (alpha / |streams|) * sum of per-stream MSE plus the
    classification loss, exactly.
    """
    if not batch:
        raise ValueError("empty batch")
    z = _pool_features(batch, cfg.backbone_dim)
    outs: dict[str, np.ndarray] = {}
    per_stream_mse: dict[str, float] = {}
    for name, unit in units.items():
        _, _, out = _unit_forward_rows(unit, z)
        outs[name] = out
        targets = _targets_matrix(batch, name)
        per_stream_mse[name] = float(((out - targets) ** 2).sum(axis=1).mean())
    _, _, outs[HAF_ID] = _unit_forward_rows(haf_unit, z)

    coeffs = effective_coefficients(spec)
    tot = np.zeros((len(batch), haf_unit.sketch.output_dim))
    for name, c in coeffs.items():
        tot += c * outs[name]
    scores = (tot_scale * tot) @ prednet.weight.T + prednet.bias
    y = _label_matrix(batch, prednet.weight.shape[0], cfg.multi_label)
    class_loss, _ = _class_loss_and_grad(scores, y, cfg.multi_label)

    mse_term = (cfg.alpha / len(units)) * sum(per_stream_mse.values()) if units else 0.0
    return mse_term + class_loss, per_stream_mse, class_loss


def _targets_matrix(batch: list[SyntheticVideo], name: str) -> np.ndarray:
    rows = []
    for v in batch:
        if name not in v.ground_truth:
            raise ValueError(f"video lacks ground truth for enabled stream {name!r}")
        rows.append(np.asarray(v.ground_truth[name], dtype=np.float64))
    return np.stack(rows)


@dataclass
class _Grads:
    units: dict[str, tuple[np.ndarray, np.ndarray]]
    haf: tuple[np.ndarray, np.ndarray]
    prednet: tuple[np.ndarray, np.ndarray]


def _batch_grads(
    batch: list[SyntheticVideo], model: Model
) -> tuple[float, _Grads]:
    """Loss and hand-derived parameter gradients for one batch."""
    cfg = model.config
    b = len(batch)
    z = _pool_features(batch, cfg.backbone_dim)

    acts: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    for name, unit in model.units.items():
        acts[name] = _unit_forward_rows(unit, z)
    haf_a, haf_pre, haf_out = _unit_forward_rows(model.haf_unit, z)

    coeffs = effective_coefficients(model.spec)
    d_out_dim = model.haf_unit.sketch.output_dim
    tot = np.zeros((b, d_out_dim))
    for name, c in coeffs.items():
        tot += c * (haf_out if name == HAF_ID else acts[name][2])

    tot *= model.tot_scale
    scores = tot @ model.prednet.weight.T + model.prednet.bias
    y = _label_matrix(batch, model.n_classes, cfg.multi_label)
    class_loss, d_scores = _class_loss_and_grad(scores, y, cfg.multi_label)

    d_wp = d_scores.T @ tot
    d_tot = model.tot_scale * (d_scores @ model.prednet.weight)
    d_bp = d_scores.sum(axis=0)

    n_units = len(model.units)
    mse_total = 0.0
    unit_grads: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for name, unit in model.units.items():
        a, _, out = acts[name]
        targets = _targets_matrix(batch, name)
        resid = out - targets
        mse_total += float((resid**2).sum(axis=1).mean())
        d_out = coeffs[name] * d_tot + (cfg.alpha / n_units) * (2.0 / b) * resid
        d_pre = project_transpose_rows(unit.sketch, d_out)
        d_a = sigme_grad(a, d_pre, unit.pn)
        unit_grads[name] = (d_a.T @ z, d_a.sum(axis=0))

    d_out_haf = coeffs[HAF_ID] * d_tot
    d_pre_haf = project_transpose_rows(model.haf_unit.sketch, d_out_haf)
    d_a_haf = sigme_grad(haf_a, d_pre_haf, model.haf_unit.pn)
    haf_grads = (d_a_haf.T @ z, d_a_haf.sum(axis=0))

    loss = (cfg.alpha / n_units) * mse_total + class_loss if n_units else class_loss
    return loss, _Grads(unit_grads, haf_grads, (d_wp, d_bp))


def _apply_grads(model: Model, grads: _Grads, lr: float) -> None:
    for name, (dw, db) in grads.units.items():
        unit = model.units[name]
        unit.weight -= lr * dw
        unit.bias -= lr * db
    model.haf_unit.weight -= lr * grads.haf[0]
    model.haf_unit.bias -= lr * grads.haf[1]
    model.prednet.weight -= lr * grads.prednet[0]
    model.prednet.bias -= lr * grads.prednet[1]


def _new_unit(name: str, cfg: TrainConfig, rng: np.random.Generator) -> StreamUnit:
    w = rng.normal(0.0, cfg.init_scale / np.sqrt(cfg.backbone_dim),
                   size=(cfg.pre_sketch_dim, cfg.backbone_dim))
    bias = np.zeros(cfg.pre_sketch_dim)
    # tie_sketches reuses the ground-truth seed role, making the stream
    # sketch bit-identical to the target sketch when the dims and the
    # dataset/train seeds agree.
    role = "gt" if cfg.tie_sketches else "stream"
    sk = sketch_new(cfg.pre_sketch_dim, cfg.sketch_dim,
                    derive_stream_seed(cfg.seed, name, role))
    return StreamUnit(name, w, bias, cfg.pn, sk)


def init_model(cfg: TrainConfig, n_classes: int) -> Model:
    """Build a model at its deterministic initialization (no training)."""
    rng = np.random.default_rng((cfg.seed, 0xC0))
    units = {name: _new_unit(name, cfg, rng) for name in cfg.ordered_streams()}
    haf_unit = _new_unit(HAF_ID, cfg, rng)
    wp = rng.normal(0.0, cfg.init_scale / np.sqrt(cfg.sketch_dim),
                    size=(n_classes, cfg.sketch_dim))
    prednet = PredNet(wp, np.zeros(n_classes))
    spec = _default_spec(cfg)
    tot_scale = 1.0 / sum(effective_coefficients(spec).values())
    return Model(cfg, units, haf_unit, prednet, spec, n_classes, tot_scale)


def _default_spec(cfg: TrainConfig) -> FusionSpec:
    enabled = cfg.ordered_streams()
    det = [s for s in enabled if s in DET_STREAMS]
    sal = [s for s in enabled if s in SAL_STREAMS]
    aux = [s for s in enabled if s in AUX_STREAMS]
    top = aux + (["det"] if det else []) + (["sal"] if sal else []) + [HAF_ID]
    n_top = len(top) - 1
    raw = {s: 1.0 for s in enabled}
    raw.update({"det": 1.0} if det else {})
    raw.update({"sal": 1.0} if sal else {})
    return FusionSpec(
        groups={GROUP_DET: det, GROUP_SAL: sal, GROUP_TOP: top},
        raw_weights=raw,
        beta={GROUP_DET: 0.0, GROUP_SAL: 0.0, GROUP_TOP: 0.0},
        rho=cfg.rho,
        haf_weight=1.0 / (n_top + 1),
        ratio_weights=True,
    )


def _stream_outputs(model: Model, videos: list[SyntheticVideo]) -> dict[str, np.ndarray]:
    z = _pool_features(videos, model.config.backbone_dim)
    outs = {name: _unit_forward_rows(unit, z)[2] for name, unit in model.units.items()}
    outs[HAF_ID] = _unit_forward_rows(model.haf_unit, z)[2]
    return outs


def _pooled_rows(model: Model, outs: dict[str, np.ndarray], beta: float | None = None) -> np.ndarray:
    spec = model.spec
    if beta is not None:
        spec = replace(spec, beta={g: beta for g in spec.beta},
                       groups=dict(spec.groups), raw_weights=dict(spec.raw_weights))
    coeffs = effective_coefficients(spec)
    tot = None
    for name, c in coeffs.items():
        term = c * outs[name]
        tot = term if tot is None else tot + term
    return tot


def infer(model: Model, video_features: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Test-time pass on raw backbone features only: hallucinate every
    stream, pool, and score.  No ground-truth descriptors are consumed."""
    x = np.asarray(video_features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != model.config.backbone_dim:
        raise ValueError(f"expected ({model.config.backbone_dim}, t) features, got {x.shape}")
    z = x.mean(axis=1).reshape(1, -1)
    outs = {name: _unit_forward_rows(unit, z)[2] for name, unit in model.units.items()}
    outs[HAF_ID] = _unit_forward_rows(model.haf_unit, z)[2]
    tot = model.tot_scale * _pooled_rows(model, outs)
    scores = (tot @ model.prednet.weight.T + model.prednet.bias)[0]
    return scores, {name: out[0] for name, out in outs.items() if name != HAF_ID}


def predict_scores(model: Model, videos: list[SyntheticVideo]) -> np.ndarray:
    """Batched inference scores; reads only features, never ground truth."""
    outs = _stream_outputs(model, videos)
    tot = model.tot_scale * _pooled_rows(model, outs)
    return tot @ model.prednet.weight.T + model.prednet.bias


def evaluate(model: Model, videos: list[SyntheticVideo]) -> float:
    """Classification accuracy under the inference path (no ground truth)."""
    if not videos:
        return 0.0
    scores = predict_scores(model, videos)
    if model.config.multi_label:
        y = _label_matrix(videos, model.n_classes, True)
        return float(((scores > 0.0) == (y > 0.5)).mean())
    labels = np.array([int(v.label) for v in videos])
    return float((scores.argmax(axis=1) == labels).mean())


def _infer_class_count(dataset: list[SyntheticVideo], multi_label: bool) -> int:
    if multi_label:
        return int(np.asarray(dataset[0].label).shape[0])
    return int(max(int(v.label) for v in dataset)) + 1


def _initial_weights(
    model: Model,
    dataset: list[SyntheticVideo],
    train_idx: np.ndarray,
    val_idx: np.ndarray,
) -> None:
    """Set raw stream weights from the validation accuracy of a linear
    classifier trained on each stream's ground-truth descriptors."""
    cfg = model.config
    if model.config.multi_label or len(train_idx) == 0 or len(val_idx) == 0:
        return  # keep the uniform defaults
    y = np.array([int(dataset[i].label) for i in range(len(dataset))])
    accs: dict[str, float] = {}
    per_stream: dict[str, np.ndarray] = {}
    for name in model.units:
        gt = np.stack([np.asarray(dataset[i].ground_truth[name]) for i in range(len(dataset))])
        per_stream[name] = gt
        accs[name] = ridge_accuracy(
            gt[train_idx], y[train_idx], gt[val_idx], y[val_idx], model.n_classes, cfg.ridge_l2
        )
    for gid, slot in ((GROUP_DET, "det"), (GROUP_SAL, "sal")):
        members = model.spec.groups.get(gid, [])
        if not members:
            continue
        pooled_gt = np.mean([per_stream[m] for m in members], axis=0)
        accs[slot] = ridge_accuracy(
            pooled_gt[train_idx], y[train_idx], pooled_gt[val_idx], y[val_idx],
            model.n_classes, cfg.ridge_l2,
        )
    model.spec.raw_weights.update(accs)


def _beta_score(
    model: Model,
    outs: dict[str, np.ndarray],
    labels: np.ndarray,
    train_idx: np.ndarray,
    val_idx: np.ndarray,
):
    def f(beta: float) -> float:
        tot = model.tot_scale * _pooled_rows(model, outs, beta=beta)
        return ridge_accuracy(
            tot[train_idx], labels[train_idx], tot[val_idx], labels[val_idx],
            model.n_classes, model.config.ridge_l2,
        )

    return f


def train(dataset: list[SyntheticVideo], cfg: TrainConfig) -> tuple[Model, list[dict]]:
    """Gradient-descent training with the warmup-then-search exponent
    schedule.  Deterministic for a fixed seed (single-threaded numpy).

    Returns the trained model and one metrics row per epoch: loss,
    per-stream MSE, classification loss, validation accuracy, and the
    exponent bracket.
    """
    if not dataset:
        raise ValueError("empty dataset")
    n_classes = _infer_class_count(dataset, cfg.multi_label)
    model = init_model(cfg, n_classes)

    n = len(dataset)
    split_rng = np.random.default_rng((cfg.seed, 0x5E))
    perm = split_rng.permutation(n)
    n_val = int(round(cfg.val_fraction * n)) if n > 1 else 0
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    train_videos = [dataset[i] for i in train_idx]
    val_videos = [dataset[i] for i in val_idx]

    _initial_weights(model, dataset, train_idx, val_idx)
    labels = (
        np.array([int(v.label) for v in dataset]) if not cfg.multi_label else np.zeros(n)
    )

    metrics: list[dict] = []
    bracket: Bracket | None = None
    for epoch in range(1, cfg.epochs + 1):
        policy = beta_schedule(epoch, cfg.warmup_epochs, cfg.beta_bracket)
        if policy.mode == "fixed":
            model.spec.set_beta(policy.beta)
            beta_lo = beta_hi = policy.beta
        else:
            if bracket is None:
                lo, hi = cfg.beta_bracket
                bracket = Bracket(lo, hi - lo)
            if len(val_idx) and not cfg.multi_label:
                outs = _stream_outputs(model, dataset)
                bracket = golden_step(
                    _beta_score(model, outs, labels, train_idx, val_idx), bracket
                )
            else:
                bracket = golden_step(lambda _b: 0.0, bracket)
            model.spec.set_beta(bracket.mid)
            beta_lo, beta_hi = bracket.lo, bracket.hi

        order = np.random.default_rng((cfg.seed, epoch)).permutation(len(train_videos))
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_videos[i] for i in order[start : start + cfg.batch_size]]
            loss, grads = _batch_grads(batch, model)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch offset {start}"
                )
            _apply_grads(model, grads, cfg.learning_rate)

        loss, per_mse, class_loss = objective(
            train_videos, model.units, model.haf_unit, model.prednet, model.spec, cfg,
            tot_scale=model.tot_scale,
        )
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss after epoch {epoch}")
        val_acc = evaluate(model, val_videos)
        row = {"epoch": epoch, "loss": loss, "class_loss": class_loss}
        row.update({f"mse_{name}": per_mse[name] for name in model.units})
        row.update({"val_acc": val_acc, "beta_lo": beta_lo, "beta_hi": beta_hi})
        metrics.append(row)
    return model, metrics


def metrics_to_csv(metrics: list[dict], stream_names: tuple[str, ...]) -> str:
    """Render per-epoch metrics as CSV with a stable column order."""
    cols = ["epoch", "loss", "class_loss"]
    cols += [f"mse_{name}" for name in stream_names]
    cols += ["val_acc", "beta_lo", "beta_hi"]
    lines = [",".join(cols)]
    for row in metrics:
        lines.append(",".join(repr(row[c]) if c != "epoch" else str(row[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _write_array(buf: io.BytesIO, arr: np.ndarray) -> None:
    buf.write(arr.astype("<f4").tobytes())


def _read_array(buf: io.BytesIO, shape: tuple[int, ...]) -> np.ndarray:
    count = int(np.prod(shape))
    data = np.frombuffer(buf.read(4 * count), "<f4", count)
    return data.astype(np.float64).reshape(shape)


def save_checkpoint(model: Model, path) -> None:
    """Versioned binary checkpoint: all weights as little-endian f32 with
    the sketch tables and fusion spec embedded."""
    cfg = model.config
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(np.uint32(1).tobytes())
    buf.write(np.uint64(cfg.seed & ((1 << 64) - 1)).tobytes())
    for v in (cfg.backbone_dim, cfg.pre_sketch_dim, cfg.sketch_dim, model.n_classes):
        buf.write(np.uint32(v).tobytes())
    for v in (cfg.pn.eta, cfg.pn.epsilon, cfg.alpha, model.tot_scale):
        buf.write(np.float64(v).tobytes())
    buf.write(np.uint8(1 if cfg.multi_label else 0).tobytes())

    all_units = list(model.units.items()) + [(HAF_ID, model.haf_unit)]
    buf.write(np.uint32(len(all_units)).tobytes())
    for name, unit in all_units:
        raw = name.encode()
        buf.write(np.uint16(len(raw)).tobytes())
        buf.write(raw)
        _write_array(buf, unit.weight)
        _write_array(buf, unit.bias)
        sk = sketch_to_bytes(unit.sketch)
        buf.write(np.uint32(len(sk)).tobytes())
        buf.write(sk)
    _write_array(buf, model.prednet.weight)
    _write_array(buf, model.prednet.bias)

    raw = spec_to_text(model.spec).encode()
    buf.write(np.uint32(len(raw)).tobytes())
    buf.write(raw)
    with open(path, "wb") as fp:
        fp.write(buf.getvalue())


def load_checkpoint(path) -> Model:
    with open(path, "rb") as fp:
        buf = io.BytesIO(fp.read())
    if buf.read(4) != CHECKPOINT_MAGIC:
        raise ValueError("bad checkpoint magic")
    version = int(np.frombuffer(buf.read(4), "<u4")[0])
    if version != 1:
        raise ValueError(f"unsupported checkpoint version {version}")
    seed = int(np.frombuffer(buf.read(8), "<u8")[0])
    b, m, d_prime, n_classes = (int(v) for v in np.frombuffer(buf.read(16), "<u4"))
    eta, eps, alpha, tot_scale = (float(v) for v in np.frombuffer(buf.read(32), "<f8"))
    multi_label = bool(np.frombuffer(buf.read(1), "u1")[0])

    n_units = int(np.frombuffer(buf.read(4), "<u4")[0])
    pn_cfg = PnConfig(eta=eta, epsilon=eps)
    units: dict[str, StreamUnit] = {}
    haf_unit = None
    for _ in range(n_units):
        name_len = int(np.frombuffer(buf.read(2), "<u2")[0])
        name = buf.read(name_len).decode()
        w = _read_array(buf, (m, b))
        bias = _read_array(buf, (m,))
        sk_len = int(np.frombuffer(buf.read(4), "<u4")[0])
        sk = sketch_from_bytes(buf.read(sk_len))
        unit = StreamUnit(name, w, bias, pn_cfg, sk)
        if name == HAF_ID:
            haf_unit = unit
        else:
            units[name] = unit
    if haf_unit is None:
        raise ValueError("checkpoint lacks the pass-through unit")
    wp = _read_array(buf, (n_classes, d_prime))
    bp = _read_array(buf, (n_classes,))
    spec_len = int(np.frombuffer(buf.read(4), "<u4")[0])
    spec = spec_from_text(buf.read(spec_len).decode(), origin=str(path))

    cfg = TrainConfig(
        alpha=alpha,
        seed=seed,
        backbone_dim=b,
        pre_sketch_dim=m,
        sketch_dim=d_prime,
        streams=tuple(units.keys()),
        pn=pn_cfg,
        multi_label=multi_label,
    )
    return Model(cfg, units, haf_unit, PredNet(wp, bp), spec, n_classes, tot_scale)
