"""Command-line front end.

Exit codes: 0 success, 1 runtime error, 2 empty or invalid input.
Every command taking --seed is reproducible byte-for-byte in
single-threaded mode; --threads (or the MOMHAL_THREADS environment
variable) only parallelizes per-video encoding jobs, whose outputs are
written in a deterministic order either way.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .fusion import golden_section_max, ridge_accuracy
from .halluc import (
    TrainConfig,
    evaluate,
    load_checkpoint,
    metrics_to_csv,
    save_checkpoint,
    train,
    _pooled_rows,
    _stream_outputs,
)
from .moments import descriptor_to_bytes
from .odf import EmptyDetectorError, OdfConfig, odf_descriptor, read_detections
from .pn import PnConfig
from .sdf import SdfConfig, read_pgm, read_saliency_manifest, sdf_descriptor
from .synthgen import SynthConfig, generate_dataset, load_dataset
from .verify import run_suite

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2


def _default_threads() -> int:
    env = os.environ.get("MOMHAL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _read_config_doc(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _write_config_doc(path, values: dict) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for key in values:
            fp.write(f"{key} = {values[key]}\n")


def cmd_encode_odf(args) -> int:
    groups = read_detections(args.input, strict=not args.lenient)
    if not groups:
        print("no records", file=sys.stderr)
        return EXIT_EMPTY
    if args.tau_source != "records":
        taus = {}
        for line in Path(args.tau_source).read_text(encoding="utf-8").splitlines():
            if line.strip() and not line.startswith("#"):
                video, tau = line.split()
                taus[video] = int(tau)
        groups = {
            key: (taus.get(key[0], tau), recs) for key, (tau, recs) in groups.items()
        }
    cfg = OdfConfig(use_rbf_embedding=not args.no_rbf, n_prime=args.n_prime)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def job(key):
        (video, detector), (tau, recs) = key
        desc = odf_descriptor(recs, tau, cfg)
        return video, detector, tau, len(recs), desc

    keys = sorted(groups.items())
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        results = list(pool.map(job, keys))
    print(f"{'video':<12} {'detector':<10} {'boxes':>6} {'tau':>5} {'dim':>6} {'flat':>7}")
    for video, detector, tau, count, desc in results:
        path = out / f"{video}__{detector}.mmd"
        path.write_bytes(descriptor_to_bytes(desc))
        print(f"{video:<12} {detector:<10} {count:>6} {tau:>5} {desc.dim:>6} {desc.flat().size:>7}")
    print(f"wrote {len(results)} descriptors to {out}")
    return EXIT_OK


def cmd_encode_sdf(args) -> int:
    groups = read_saliency_manifest(args.manifest)
    if not groups:
        print("no frames", file=sys.stderr)
        return EXIT_EMPTY
    cfg = SdfConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def job(item):
        (video, source), paths = item
        frames = [read_pgm(p) for p in paths]
        desc = sdf_descriptor(frames, cfg, args.n_dagger)
        return video, source, len(frames), desc

    keys = sorted(groups.items())
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        results = list(pool.map(job, keys))
    print(f"{'video':<12} {'source':<8} {'frames':>6} {'dim':>6} {'flat':>7}")
    for video, source, count, desc in results:
        path = out / f"{video}__{source}.mmd"
        path.write_bytes(descriptor_to_bytes(desc))
        print(f"{video:<12} {source:<8} {count:>6} {desc.dim:>6} {desc.flat().size:>7}")
    print(f"wrote {len(results)} descriptors to {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_videos=args.videos,
        n_classes=args.classes,
        seed=args.seed,
        backbone_dim=args.backbone_dim,
        tau=args.tau,
    )
    generate_dataset(args.out, cfg)
    print(f"wrote {cfg.n_videos} videos / {cfg.n_classes} classes to {args.out}")
    return EXIT_OK


_TRAIN_KEYS = {
    "alpha": float, "learning_rate": float, "epochs": int, "seed": int,
    "backbone_dim": int, "pre_sketch_dim": int, "sketch_dim": int,
    "batch_size": int, "val_fraction": float, "rho": float,
    "warmup_epochs": int, "ridge_l2": float, "init_scale": float,
    "multi_label": lambda s: s.lower() in ("1", "true", "yes"),
    "tie_sketches": lambda s: s.lower() in ("1", "true", "yes"),
}


def _build_train_config(args) -> tuple[TrainConfig, str, str]:
    values: dict[str, str] = {}
    if args.config:
        values.update(_read_config_doc(args.config))
    for key in ("data_dir", "out_dir"):
        flag = getattr(args, key.replace("_dir", ""), None)
        if flag:
            values[key] = flag
    for key in ("epochs", "seed", "learning_rate"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = str(flag)
    if args.streams:
        values["streams"] = args.streams
    if "data_dir" not in values:
        raise ValueError("data_dir required (config key data_dir or --data)")
    out_dir = values.get("out_dir", "run")

    if "backbone_dim" not in values:
        from .synthgen import read_dataset_config

        values["backbone_dim"] = str(read_dataset_config(values["data_dir"]).backbone_dim)

    kwargs = {}
    for key, conv in _TRAIN_KEYS.items():
        if key in values:
            kwargs[key] = conv(values[key])
    if "streams" in values:
        streams = tuple(s for s in values["streams"].split(",") if s)
        kwargs["streams"] = streams
    pn_kwargs = {}
    if "pn_eta" in values:
        pn_kwargs["eta"] = float(values["pn_eta"])
    if "pn_epsilon" in values:
        pn_kwargs["epsilon"] = float(values["pn_epsilon"])
    if pn_kwargs:
        kwargs["pn"] = PnConfig(**pn_kwargs)
    return TrainConfig(**kwargs), values["data_dir"], out_dir


def _resolved_config_values(cfg: TrainConfig, data_dir: str, out_dir: str) -> dict:
    values = {
        "data_dir": data_dir,
        "out_dir": out_dir,
        "streams": ",".join(cfg.ordered_streams()),
    }
    for key in _TRAIN_KEYS:
        values[key] = getattr(cfg, key)
    values["pn_eta"] = cfg.pn.eta
    values["pn_epsilon"] = cfg.pn.epsilon
    return values


def cmd_train(args) -> int:
    cfg, data_dir, out_dir = _build_train_config(args)
    videos, _ = load_dataset(data_dir, cfg.sketch_dim, cfg.pn, cfg.ordered_streams())
    if not videos:
        print("empty dataset", file=sys.stderr)
        return EXIT_EMPTY
    model, metrics = train(videos, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "checkpoint.hal")
    (out / "metrics.csv").write_text(
        metrics_to_csv(metrics, cfg.ordered_streams()), encoding="utf-8"
    )
    _write_config_doc(out / "config.cfg", _resolved_config_values(cfg, data_dir, out_dir))
    final = metrics[-1]["val_acc"] if metrics else float("nan")
    print(f"trained {cfg.epochs} epochs; final val accuracy {final:.4f}")
    print(f"checkpoint: {out / 'checkpoint.hal'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_checkpoint(args.model)
    videos, _ = load_dataset(
        args.data, model.config.sketch_dim, model.config.pn,
        model.config.ordered_streams(),
    )
    acc = evaluate(model, videos)
    print(f"accuracy {acc:.4f} over {len(videos)} videos")
    return EXIT_OK


def cmd_search_beta(args) -> int:
    model = load_checkpoint(args.model)
    videos, n_classes = load_dataset(
        args.data, model.config.sketch_dim, model.config.pn,
        model.config.ordered_streams(),
    )
    labels = np.array([int(v.label) for v in videos])
    rng = np.random.default_rng(model.config.seed)
    perm = rng.permutation(len(videos))
    n_val = max(1, int(round(0.25 * len(videos))))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    outs = _stream_outputs(model, videos)

    def f(beta: float) -> float:
        tot = _pooled_rows(model, outs, beta=beta)
        return ridge_accuracy(tot[train_idx], labels[train_idx],
                              tot[val_idx], labels[val_idx], model.n_classes)

    result = golden_section_max(f, 0.0, 50.0, args.iters)
    for i, width in enumerate(result.widths):
        print(f"iter {i}: bracket width {width:.6f}")
    print(f"beta* = {result.beta_star:.6f}, val accuracy {result.f_star:.4f}, "
          f"bracket [{result.bracket[0]:.6f}, {result.bracket[1]:.6f}]")
    return EXIT_OK


def cmd_verify(args) -> int:
    ok = run_suite(args.suite)
    print("verification " + ("passed" if ok else "FAILED"))
    return EXIT_OK if ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momhal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode-odf", help="detections JSONL -> per-(video,detector) descriptors")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-rbf", action="store_true")
    p.add_argument("--n-prime", type=int, default=3)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--tau-source", default="records",
                   help="'records' or a file of 'video tau' lines")
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=cmd_encode_odf)

    p = sub.add_parser("encode-sdf", help="saliency manifest -> per-(video,source) descriptors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-dagger", type=int, default=3)
    p.add_argument("--threads", type=int, default=_default_threads())
    p.set_defaults(func=cmd_encode_sdf)

    p = sub.add_parser("synth", help="write a deterministic synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--videos", type=int, default=512)
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backbone-dim", type=int, default=64)
    p.add_argument("--tau", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the hallucination model")
    p.add_argument("--config", help="key-value config document; flags override")
    p.add_argument("--data", help="dataset directory")
    p.add_argument("--out", help="run directory")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--streams", help="comma-separated stream subset")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("search-beta", help="golden-section search over the pooling exponent")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--iters", type=int, default=20)
    p.set_defaults(func=cmd_search_beta)

    p = sub.add_parser("verify", help="run property suites")
    p.add_argument("--suite", default="all")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EmptyDetectorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
