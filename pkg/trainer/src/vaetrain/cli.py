"""Command-line entry points for training and parity export.

Exit codes: 0 ok, 2 usage error, 3 I/O error, 4 validation error. Every
failure prints one machine-parsable line to stderr:
vaetrain-error code=<N> kind=<usage|io|validation>: <message>
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import parity, train
from .errors import ValidationError

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_VALIDATION = 4


def cmd_train(args) -> int:
    spec = train.TrainSpec(
        corpus_dir=args.corpus,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        beta=args.beta,
        seed=args.seed,
    )
    model, curve = train.train(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train.save_weights(out / "encoder.qdvw", model)
    (out / "curve.csv").write_text(train.curve_to_csv(curve), encoding="utf-8")
    last = curve[-1]
    sys.stdout.write(
        f"trained {spec.epochs} epochs: total={last.total:.4f} "
        f"recon={last.recon:.4f} kl={last.kl:.4f}\n"
    )
    sys.stdout.write(f"weights: {out / 'encoder.qdvw'}\n")
    return 0


def cmd_export_parity(args) -> int:
    csv_path = parity.export_parity(args.weights, args.corpus, args.out)
    sys.stdout.write(f"parity pack: {csv_path.parent}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vaetrain")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the VAE and export encoder weights")
    p_train.add_argument("--corpus", required=True, help="directory of 64x64 PNGs")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--epochs", type=int, default=30)
    p_train.add_argument("--batch-size", type=int, default=128)
    p_train.add_argument("--learning-rate", type=float, default=1e-3)
    p_train.add_argument("--beta", type=float, default=1.0)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_pack = sub.add_parser(
        "export-parity", help="write reference images plus trainer latents"
    )
    p_pack.add_argument("--weights", required=True, help="QDVW weight file")
    p_pack.add_argument("--corpus", required=True, help="directory of 64x64 PNGs")
    p_pack.add_argument("--out", required=True, help="pack output directory")
    p_pack.set_defaults(func=cmd_export_parity)
    return parser


def _fail(code: int, kind: str, err: Exception) -> int:
    sys.stderr.write(f"vaetrain-error code={code} kind={kind}: {err}\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as err:
        return _fail(EXIT_VALIDATION, "validation", err)
    except OSError as err:
        return _fail(EXIT_IO, "io", err)


if __name__ == "__main__":
    sys.exit(main())
