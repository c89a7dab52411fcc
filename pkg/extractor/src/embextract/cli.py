"""embextract: turn lecture audio into EMB1 embedding files.

    embextract --model ecapa --out emb/ lecture1.wav lecture2.wav
    embextract --model w2v2 --layer 1 --emit-prototype --out emb/ talk.wav

Without --checkpoint the networks run with seeded random weights: correct
shapes and timing, no acoustic meaning.
"""

from __future__ import annotations

import argparse
import sys

from .audio import AudioError
from .extract import ExtractorConfig, extract_batch
from .models import ModelLoadError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embextract", description=__doc__.splitlines()[0])
    parser.add_argument("audio", nargs="+", help="WAV files to extract")
    parser.add_argument("--model", choices=["xvector", "ecapa", "w2v2"], default="ecapa")
    parser.add_argument("--layer", type=int, default=1, help="w2v2 transformer layer (1..12)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--emit-prototype", action="store_true")
    parser.add_argument("--checkpoint", help="trained weights (state_dict or HF dir)")
    parser.add_argument("--init-seed", type=int, default=0)
    parser.add_argument("--split", choices=["train", "test"], default="test")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExtractorConfig(
        model=args.model,
        layer=args.layer,
        out_dir=args.out,
        emit_prototype=args.emit_prototype,
        checkpoint=args.checkpoint,
        init_seed=args.init_seed,
        split=args.split,
    )
    if cfg.checkpoint is None:
        print("note: no --checkpoint given; using seeded random weights", file=sys.stderr)
    try:
        manifest = extract_batch(args.audio, cfg)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (AudioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
