"""Command-line pipeline: synth, train, evaluate, predict, project.

Every command is deterministic under (inputs, seed) and persists the exact
configuration it ran with into its output directory.  Exit codes: 0 on
success, 1 for I/O and environment failures, 2 for domain or validation
errors (argparse uses 2 for bad usage as well).

Prediction output schema (predictions.json):

    {
      "recording_id": str,
      "window_s": number,
      "normalization": "none" | "mean" | "external",
      "frames": [{"time_s": number, "label": str, "score": number}, ...]
    }

A config file (--config) is JSON with keys mirroring PipelineConfig
(manifest, out_dir, seed, window_s, normalization, mode,
segment_duration_s, n_pca, gamma, c).  For experiment matrices it may also
carry "matrix": [{"normalization": ..., "window_s": ...}, ...]; train then
runs one cell per entry under out/cell_<norm>_w<window>/ and evaluate
aggregates all cells into one results table.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import Split, read_embeddings, read_manifest
from .errors import InvalidValue, IoError, VocalFatigueError
from .metrics import class_names, confusion_csv, format_table, score
from .pca import load_pca, save_pca, fit_pca, pca_transform
from .pipeline import (
    Normalization,
    PipelineConfig,
    build_dataset,
    load_config,
    preprocess_sequence,
    save_config,
    split_rows,
)
from .preprocess import LabelMode
from .svm import (
    MultiClassSvm,
    decision_function,
    grid_search_cv,
    load_svm,
    predict as svm_predict,
    predict_multiclass,
    save_svm,
    train_multiclass,
    train_svm,
)
from .synth import SynthConfig, write_corpus
from .tsne import TsneConfig, tsne_project

#: Boundary between the "first half" and "second half" flags in t-SNE CSVs.
HALF_BOUNDARY_S = 2400.0

CONFIG_NAME = "pipeline_config.json"
MATRIX_NAME = "matrix_cells.json"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path: Path, doc) -> None:
    _write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_recordings=args.n,
        duration_s=args.duration,
        dim=args.dim,
        drift_magnitude=args.drift,
        noise_sigma=args.noise_sigma,
        per_recording_offset_sigma=args.offset_sigma,
        seed=args.seed,
    )
    out = Path(args.out)
    manifest_path = write_corpus(cfg, out)
    _write_json(
        out / "synth_config.json",
        {
            "n_recordings": cfg.n_recordings,
            "duration_s": cfg.duration_s,
            "dim": cfg.dim,
            "drift_magnitude": cfg.drift_magnitude,
            "noise_sigma": cfg.noise_sigma,
            "per_recording_offset_sigma": cfg.per_recording_offset_sigma,
            "seed": cfg.seed,
        },
    )
    print(f"wrote {cfg.n_recordings} recordings ({cfg.n_train} train) to {manifest_path}")
    return 0


# ---------------------------------------------------------------------------
# train


def _pipeline_config(args) -> PipelineConfig:
    """Merge defaults, config file, and explicit CLI flags (flags win)."""
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise IoError(f"cannot read config {args.config}: {exc}") from exc
    if args.manifest is not None:
        doc["manifest"] = str(args.manifest)
    if args.out is not None:
        doc["out_dir"] = str(args.out)
    if args.seed is not None:
        doc["seed"] = args.seed
    if getattr(args, "window_s", None) is not None:
        doc["window_s"] = args.window_s
    if getattr(args, "normalize", None) is not None:
        doc["normalization"] = args.normalize
    if getattr(args, "mode", None) is not None:
        doc["mode"] = args.mode
    if "manifest" not in doc or "out_dir" not in doc:
        raise InvalidValue("both a manifest and an output directory are required")
    doc.pop("matrix", None)
    return PipelineConfig.from_json_dict(doc)


def _matrix_cells(args) -> list[dict] | None:
    if not args.config:
        return None
    doc = json.loads(Path(args.config).read_text())
    return doc.get("matrix")


def _train_one(cfg: PipelineConfig, out: Path) -> dict:
    rows = read_manifest(cfg.manifest)
    train_rows = split_rows(rows, Split.TRAIN)
    if not train_rows:
        raise InvalidValue("manifest has no Train recordings")
    data = build_dataset(train_rows, cfg)
    grid = cfg.grid_for_dim(data.features.shape[1])
    result = grid_search_cv(data, grid, cfg.seed)
    best = result.best

    # Refit on the full training set with the winning combination.
    features = data.features.astype(np.float64)
    pca_model = fit_pca(features, best.n_pca)
    z = pca_transform(pca_model, features)
    if cfg.mode is LabelMode.BINARY:
        model = train_svm(z, data.labels, best.c, best.gamma)
    else:
        model = train_multiclass(z, data.labels, best.c, best.gamma)

    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / CONFIG_NAME)
    save_pca(pca_model, out / "pca_model.emb", out / "pca_model.json")
    save_svm(model, out / "svm_model.bin")
    best_doc = {
        "n_pca": best.n_pca,
        "gamma": best.gamma,
        "c": best.c,
        "cv_accuracy": best.mean_accuracy,
        "ties": [[t.n_pca, t.gamma, t.c] for t in result.ties],
    }
    _write_json(out / "best_params.json", best_doc)
    _write_json(out / "cv_table.json", result.to_table())
    print(
        f"trained on {data.n_samples} samples: best n_pca={best.n_pca} "
        f"gamma={best.gamma} C={best.c} (CV accuracy {best.mean_accuracy:.4f})"
    )
    return best_doc


def cmd_train(args) -> int:
    cfg = _pipeline_config(args)
    out = Path(cfg.out_dir)
    cells = _matrix_cells(args)
    if not cells:
        _train_one(cfg, out)
        return 0
    cell_index = []
    for cell in cells:
        norm = Normalization(cell["normalization"])
        window = float(cell["window_s"])
        name = f"cell_{norm.value}_w{window:g}"
        cell_cfg = PipelineConfig(
            manifest=cfg.manifest,
            out_dir=str(out / name),
            seed=cfg.seed,
            window_s=window,
            normalization=norm,
            mode=cfg.mode,
            segment_duration_s=cfg.segment_duration_s,
            n_pca=cfg.n_pca,
            gamma=cfg.gamma,
            c=cfg.c,
        )
        best = _train_one(cell_cfg, out / name)
        cell_index.append({"name": name, "normalization": norm.value, "window_s": window, "best": best})
    _write_json(out / MATRIX_NAME, cell_index)
    save_config(cfg, out / CONFIG_NAME)
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _evaluate_one(model_dir: Path, manifest_path, out: Path) -> dict:
    cfg = load_config(model_dir / CONFIG_NAME)
    rows = read_manifest(manifest_path if manifest_path else cfg.manifest)
    test_rows = split_rows(rows, Split.TEST)
    if not test_rows:
        raise InvalidValue("manifest has no Test recordings")
    data = build_dataset(test_rows, cfg)
    pca_model = load_pca(model_dir / "pca_model.emb", model_dir / "pca_model.json")
    model = load_svm(model_dir / "svm_model.bin")
    z = pca_transform(pca_model, data.features.astype(np.float64))
    if isinstance(model, MultiClassSvm):
        pred = predict_multiclass(model, z)
    else:
        pred = svm_predict(model, z)
    report = score(data.labels, pred, n_classes=data.n_classes)

    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / CONFIG_NAME)
    _write_json(out / "metrics.json", report.to_json_dict())
    _write_text(out / "metrics.txt", format_table(report))
    _write_text(out / "confusion.csv", confusion_csv(report.confusion))
    print(format_table(report), end="")
    return report.to_json_dict()


def cmd_evaluate(args) -> int:
    model_dir = Path(args.model_dir)
    out = Path(args.out) if args.out else model_dir / "evaluation"
    matrix_path = model_dir / MATRIX_NAME
    if not matrix_path.exists():
        _evaluate_one(model_dir, args.manifest, out)
        return 0
    cells = json.loads(matrix_path.read_text())
    combined = []
    lines = []
    for cell in cells:
        name = cell["name"]
        result = _evaluate_one(model_dir / name, args.manifest, out / name)
        combined.append({**cell, "metrics": result})
        lines.append(
            f"{cell['normalization']:>8}  w={cell['window_s']:<5g} "
            f"acc={result['accuracy']:.4f}"
        )
    _write_json(out / "matrix_results.json", combined)
    _write_text(out / "matrix_results.txt", "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# predict


def cmd_predict(args) -> int:
    model_dir = Path(args.model_dir)
    cfg = load_config(model_dir / CONFIG_NAME)
    seq = read_embeddings(args.embedding)
    if cfg.normalization is Normalization.EXTERNAL and args.prototype is None:
        raise InvalidValue("model was trained with external normalization; pass --prototype")
    row = None
    if args.prototype is not None:
        from .core import RecordingManifest

        row = RecordingManifest(
            recording_id=seq.recording_id,
            split=Split.TEST,
            duration_s=max(seq.times_s[-1] + seq.frame_duration_s, 1.0),
            embedding_path=Path(args.embedding),
            prototype_path=Path(args.prototype),
        )
    seq = preprocess_sequence(seq, cfg, row)
    pca_model = load_pca(model_dir / "pca_model.emb", model_dir / "pca_model.json")
    model = load_svm(model_dir / "svm_model.bin")
    z = pca_transform(pca_model, seq.frames.astype(np.float64))

    if isinstance(model, MultiClassSvm):
        labels = predict_multiclass(model, z)
        names = class_names(len(model.classes))
        scores = np.zeros(z.shape[0])
        for sub in model.models:
            vals = decision_function(sub, z)
            for r in range(z.shape[0]):
                if labels[r] == sub.classes[1]:
                    scores[r] += vals[r]
                elif labels[r] == sub.classes[0]:
                    scores[r] -= vals[r]
    else:
        scores = decision_function(model, z)
        labels = svm_predict(model, z)
        names = class_names(len(model.classes))

    frames = [
        {
            "time_s": float(t),
            "label": names[int(lbl)],
            "score": round(float(s), 6),
        }
        for t, lbl, s in zip(seq.times_s, labels, scores)
    ]
    doc = {
        "recording_id": seq.recording_id,
        "window_s": cfg.window_s,
        "normalization": cfg.normalization.value,
        "frames": frames,
    }
    if args.out:
        _write_json(Path(args.out), doc)
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# project


def cmd_project(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    targets = []
    if args.manifest:
        rows = read_manifest(args.manifest)
        targets = [(row.embedding_path, row) for row in rows]
    for emb in args.embedding or []:
        targets.append((Path(emb), None))
    if not targets:
        raise InvalidValue("pass --manifest or at least one --embedding")

    norm = Normalization(args.normalize) if args.normalize else Normalization.NONE
    cfg = PipelineConfig(
        manifest=str(args.manifest) if args.manifest else "",
        out_dir=str(out),
        seed=args.seed or 0,
        window_s=args.window_s if args.window_s is not None else 0.0,
        normalization=norm,
    )
    save_config(cfg, out / CONFIG_NAME)
    tsne_cfg = TsneConfig(
        perplexity=args.perplexity, iterations=args.iterations, seed=cfg.seed
    )

    for emb_path, row in targets:
        seq = read_embeddings(emb_path)
        seq = preprocess_sequence(seq, cfg, row)
        coords = tsne_project(seq.frames.astype(np.float64), tsne_cfg)
        csv_path = out / f"{seq.recording_id}.tsne.csv"
        tmp = csv_path.with_name(csv_path.name + ".tmp")
        with open(tmp, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time_s", "x", "y", "half"])
            for t, (px, py) in zip(seq.times_s, coords):
                writer.writerow([f"{t:.3f}", f"{px:.6f}", f"{py:.6f}", int(t >= HALF_BOUNDARY_S)])
        os.replace(tmp, csv_path)
        print(f"projected {seq.recording_id}: {coords.shape[0]} points -> {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vocalfatigue",
        description="Vocal fatigue detection pipeline on neural speech embeddings.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic drifting corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=19)
    p.add_argument("--duration", type=float, default=3600.0)
    p.add_argument("--dim", type=int, default=192)
    p.add_argument("--drift", type=float, default=8.0)
    p.add_argument("--noise-sigma", type=float, default=1.0)
    p.add_argument("--offset-sigma", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=20240901)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="grid-search CV and final model training")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--normalize", choices=[n.value for n in Normalization])
    p.add_argument("--mode", choices=[m.value for m in LabelMode])
    p.add_argument("--config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model on the Test split")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--manifest", help="override the manifest recorded at train time")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="per-window labels and scores for one recording")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--embedding", required=True)
    p.add_argument("--prototype")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("project", help="t-SNE projection CSVs")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.add_argument("--embedding", action="append")
    p.add_argument("--seed", type=int)
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--normalize", choices=[n.value for n in Normalization])
    p.add_argument("--perplexity", type=float, default=30.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.set_defaults(func=cmd_project)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except VocalFatigueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
