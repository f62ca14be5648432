"""Command-line surface.

Subcommands: score, eval, train-head, compare-heads, macs, kfold.  Output is
a human-readable table by default and machine-parseable JSON under
``--json``; commands that accept ``--out DIR`` additionally write delimited
files with rendered figures beside them.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import colorspace as cs
from .complexity import HEADLINE, STRICT, count_model
from .data import extract_features, load_manifest
from .errors import BlindIQError, ModelConfigError, ShapeError
from .kan import KanStack
from .losses import LossConfig
from .metrics import EvalReport, evaluate
from .mlp import MlpStack, build_matched_mlp
from .model import load_weights
from .trainer import TrainConfig, kfold, train_head, write_loss_curve_csv
from .weights_io import read_tensors, write_tensors

METRIC_COLUMNS = ("PLCC", "SRCC", "KRCC", "RMSE", "MAE")


def _load_model(path: str):
    if not Path(path).exists():
        raise ModelConfigError(f"model file not found: {path}")
    return load_weights(path)


def _parse_spaces(text: str) -> list[str]:
    spaces = [s.strip().lower() for s in text.split(",") if s.strip()]
    for s in spaces:
        if s not in cs.SPACES:
            raise ShapeError(f"unknown color space {s!r}")
    return spaces


def _report_line(name: str, report: EvalReport) -> str:
    cells = "  ".join(f"{v:8.4f}" for v in report.row())
    return f"{name:<6} {cells}  (n={report.n})"


# --------------------------------------------------------------------------
# score
# --------------------------------------------------------------------------

def cmd_score(args) -> int:
    from .data import decode_image

    model = _load_model(args.model)
    img = decode_image(args.image)
    score = model.predict(img, args.space)
    if args.json:
        print(json.dumps({"image": args.image, "space": args.space, "score": score}))
    else:
        print(f"{args.image}\t{score!r}")
    return 0


# --------------------------------------------------------------------------
# eval
# --------------------------------------------------------------------------

def _predict_all(model, manifest, space: str, threads: int) -> np.ndarray:
    from concurrent.futures import ThreadPoolExecutor

    from .data import decode_image

    def one(entry):
        return model.predict(decode_image(entry.path), space)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(one, manifest.entries)), dtype=np.float64)
    return np.array([one(e) for e in manifest.entries], dtype=np.float64)


def cmd_eval(args) -> int:
    manifest = load_manifest(args.manifest).subset(args.split)
    if len(manifest) < 2:
        raise ShapeError(f"need at least 2 entries to evaluate, got {len(manifest)}")
    spaces = _parse_spaces(args.spaces)
    mos = manifest.mos_vector()
    if args.stub == "echo-mos":
        preds = {space: mos.copy() for space in spaces}
    else:
        if not args.model:
            raise ModelConfigError("eval needs --model (or --stub echo-mos)")
        model = _load_model(args.model)
        preds = {s: _predict_all(model, manifest, s, args.threads) for s in spaces}
    reports = {s: evaluate(preds[s], mos) for s in spaces}

    if args.json:
        print(json.dumps({
            "manifest": str(args.manifest),
            "split": args.split,
            "spaces": {s: r.as_dict() for s, r in reports.items()},
        }))
    else:
        header = "  ".join(f"{c:>8}" for c in METRIC_COLUMNS)
        print(f"{'space':<6} {header}")
        for s in spaces:
            print(_report_line(s, reports[s]))

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["space,plcc,srcc,krcc,rmse,mae,n"]
        for s in spaces:
            r = reports[s]
            lines.append(f"{s},{r.plcc!r},{r.srcc!r},{r.krcc!r},{r.rmse!r},{r.mae!r},{r.n}")
        (out / "eval.csv").write_text("\n".join(lines) + "\n")
        from .plots import save_pred_scatter, save_space_bars

        for s in spaces:
            save_pred_scatter(preds[s], mos, out / f"scatter_{s}.png",
                              title=f"{s.upper()} predictions")
        save_space_bars(reports, out / "space_metrics.png")
    return 0


# --------------------------------------------------------------------------
# train-head / compare-heads
# --------------------------------------------------------------------------

def _load_train_config(path: str | None) -> TrainConfig:
    if path is None:
        return TrainConfig()
    from .model import parse_config_text

    raw = parse_config_text(Path(path).read_text())
    loss = LossConfig(
        alpha=float(raw.get("alpha", 1.0)),
        beta=float(raw.get("beta", 1.0)),
        lambda_rob=float(raw.get("lambda_rob", 1.0)),
        color_spaces=tuple(_parse_spaces(raw["color_spaces"]))
        if "color_spaces" in raw else cs.SPACES,
    )
    return TrainConfig(
        epochs=int(raw.get("epochs", 100)),
        lr_max=float(raw.get("lr_max", 5e-5)),
        weight_decay=float(raw.get("weight_decay", 1e-4)),
        batch_size=int(raw.get("batch_size", 16)),
        warmup_fraction=float(raw.get("warmup_fraction", 0.05)),
        seed=int(raw.get("seed", 0)),
        loss=loss,
    )


def _load_features(path: str) -> tuple[np.ndarray, np.ndarray]:
    blob = read_tensors(path)
    if "features" not in blob or "mos" not in blob:
        raise ShapeError(f"{path}: feature container must hold 'features' and 'mos'")
    return blob["features"], blob["mos"]


def _build_head(kind: str, dims: list[int], seed: int):
    rng = np.random.default_rng(seed)
    if kind == "kan":
        return KanStack.build(dims, rng)
    if kind == "mlp":
        return MlpStack.build(dims, rng)
    if kind == "mlp-matched":
        return build_matched_mlp(dims[0], rng)
    raise ShapeError(f"unknown head kind {kind!r}")


def _head_tensors(head) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for i, layer_params in enumerate(head.parameters()):
        for key, arr in layer_params.items():
            out[f"layer{i}.{key}"] = arr
    return out


def cmd_train_head(args) -> int:
    features, mos = _load_features(args.features)
    cfg = _load_train_config(args.config)
    if args.normalize_mos:
        lo, hi = mos.min(), mos.max()
        if hi == lo:
            raise ShapeError("cannot normalize a constant mos column")
        mos = (mos - lo) / (hi - lo)
    dims = [int(d) for d in args.dims.split(",")]
    if dims[0] != features.shape[1]:
        raise ShapeError(
            f"--dims starts at {dims[0]} but features are {features.shape[1]}-wide"
        )
    head = _build_head(args.head, dims, cfg.seed)
    result = train_head(features, mos, head, cfg)
    if args.json:
        print(json.dumps({"head": args.head, "epochs": cfg.epochs,
                          "final_loss": result.final_loss(),
                          "loss_curve": result.loss_curve}))
    else:
        print(f"trained {args.head} head for {cfg.epochs} epochs; "
              f"final loss {result.final_loss():.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_tensors(out / "head.larw", _head_tensors(head))
        write_loss_curve_csv(out / "loss_curve.csv", {args.head: result.loss_curve})
        from .plots import save_loss_curves

        save_loss_curves({args.head: result.loss_curve}, out / "loss_curve.png")
    return 0


def cmd_compare_heads(args) -> int:
    from .complexity import count_head

    features, mos = _load_features(args.features)
    cfg = _load_train_config(args.config)
    dims = [int(d) for d in args.dims.split(",")] if args.dims else [features.shape[1], 128, 1]
    n = features.shape[0]
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_test = max(1, int(round(args.holdout * n)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    rows = []
    curves = {}
    for kind in ("kan", "mlp", "mlp-matched"):
        head = _build_head(kind, dims, cfg.seed)
        result = train_head(features[train_idx], mos[train_idx], head, cfg)
        pred = head(features[test_idx])[:, 0]
        err = pred - mos[test_idx]
        report = evaluate(pred, mos[test_idx])
        macs = sum(r.macs for r in count_head(head))
        rows.append({
            "head": kind, "macs": macs, "mse": float((err * err).mean()),
            **report.as_dict(),
        })
        curves[kind] = result.loss_curve

    if args.json:
        print(json.dumps({"holdout": args.holdout, "rows": rows}))
    else:
        print(f"{'head':<12} {'MACs':>10} {'MSE':>10}  "
              + "  ".join(f"{c:>8}" for c in METRIC_COLUMNS[:3]))
        for r in rows:
            print(f"{r['head']:<12} {r['macs']:>10,} {r['mse']:>10.5f}  "
                  f"{r['plcc']:>8.4f}  {r['srcc']:>8.4f}  {r['krcc']:>8.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["head,macs,mse,plcc,srcc,krcc,rmse,mae"]
        for r in rows:
            lines.append(",".join([
                r["head"], str(r["macs"]), repr(r["mse"]), repr(r["plcc"]),
                repr(r["srcc"]), repr(r["krcc"]), repr(r["rmse"]), repr(r["mae"]),
            ]))
        (out / "compare_heads.csv").write_text("\n".join(lines) + "\n")
        write_loss_curve_csv(out / "loss_curves.csv", curves)
        from .plots import save_loss_curves

        save_loss_curves(curves, out / "loss_curves.png", title="head training loss")
    return 0


def cmd_extract_features(args) -> int:
    model = _load_model(args.model)
    manifest = load_manifest(args.manifest).subset(args.split)
    if not len(manifest):
        raise ShapeError("no manifest entries selected")
    feats, mos = extract_features(model, manifest, branch=args.branch,
                                  space=args.space, threads=args.threads)
    write_tensors(args.out, {"features": feats, "mos": mos})
    if args.json:
        print(json.dumps({"out": args.out, "rows": int(feats.shape[0]),
                          "width": int(feats.shape[1])}))
    else:
        print(f"wrote {feats.shape[0]}x{feats.shape[1]} features to {args.out}")
    return 0


# --------------------------------------------------------------------------
# macs
# --------------------------------------------------------------------------

def cmd_macs(args) -> int:
    model = _load_model(args.model)
    mode = STRICT if args.strict else HEADLINE
    report = count_model(model, (args.auth_size, args.auth_size),
                         (args.synth_size, args.synth_size), mode)
    blocks = {"configured": report}
    if args.raw:
        w, h = (int(v) for v in args.raw.lower().split("x"))
        auth = model.authentic.resize_to or (args.auth_size, args.auth_size)
        # Worst case: the synthetic branch sees the raw frame uncropped.
        blocks["raw-worst-case"] = count_model(model, (auth[1], auth[0]), (h, w), mode)
    if args.json:
        print(json.dumps({
            name: {"total_macs": r.total_macs, "total_params": r.total_params,
                   "mode": r.mode}
            for name, r in blocks.items()
        }))
    else:
        for name, r in blocks.items():
            print(f"== {name} ==")
            print(r.to_text(), end="")
            print(f"total: {r.total_macs / 1e9:.3f} GMACs, "
                  f"{r.total_params / 1e6:.3f}M params")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        from .plots import save_macs_breakdown

        for name, r in blocks.items():
            (out / f"macs_{name}.csv").write_text(r.to_csv())
            save_macs_breakdown(r, out / f"macs_{name}.png")
    return 0


# --------------------------------------------------------------------------
# kfold
# --------------------------------------------------------------------------

def cmd_kfold(args) -> int:
    manifest = load_manifest(args.manifest)
    plan = kfold(len(manifest), args.k, args.seed)
    if args.json:
        print(json.dumps({
            "k": plan.k, "seed": plan.seed,
            "folds": [f.tolist() for f in plan.folds],
        }))
    else:
        print("fold,index,path")
        for fi, fold in enumerate(plan.folds):
            for idx in fold:
                print(f"{fi},{idx},{manifest.entries[idx].path}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blindiq",
        description="Lightweight dual-branch blind image quality engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--space", choices=cs.SPACES, default=cs.RGB)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("eval", help="evaluate a model over a manifest")
    p.add_argument("--model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--spaces", default="rgb")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--stub", choices=["echo-mos"], default=None,
                   help="testing hook: use mos as the prediction")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None, help="directory for CSV + figures")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("train-head", help="train a regression head on features")
    p.add_argument("--features", required=True, help="LARW file with features/mos")
    p.add_argument("--head", choices=["kan", "mlp", "mlp-matched"], required=True)
    p.add_argument("--dims", default="1000,128,1")
    p.add_argument("--config", default=None, help="key=value training config")
    p.add_argument("--normalize-mos", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_train_head)

    p = sub.add_parser("compare-heads", help="side-by-side head comparison")
    p.add_argument("--features", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--dims", default=None)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_compare_heads)

    p = sub.add_parser("extract-features",
                       help="embed a manifest into a features/mos container")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--branch", choices=["both", "authentic", "synthetic"],
                   default="both")
    p.add_argument("--space", choices=cs.SPACES, default=cs.RGB)
    p.add_argument("--split", default=None)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_extract_features)

    p = sub.add_parser("macs", help="complexity report for a model")
    p.add_argument("--model", required=True)
    p.add_argument("--auth-size", type=int, default=384)
    p.add_argument("--synth-size", type=int, default=1280)
    p.add_argument("--raw", default=None, metavar="WxH",
                   help="also report the uncropped worst case at this raw size")
    p.add_argument("--strict", action="store_true",
                   help="count squeeze-excitation and hard-activation multiplies")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_macs)

    p = sub.add_parser("kfold", help="deterministic cross-validation folds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_kfold)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except BlindIQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
