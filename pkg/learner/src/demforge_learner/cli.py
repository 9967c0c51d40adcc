"""CLI: train the inpainting net on a dataset split, or run inference."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .losses import LossConfig
from .train import TrainConfig, train


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="demforge-learn")
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train the U-Net")
    tr.add_argument("--train", type=Path, required=True, help="train manifest")
    tr.add_argument("--val", type=Path, required=True, help="val manifest")
    tr.add_argument("--selfsup", action="store_true")
    tr.add_argument("--epochs", type=int, default=100)
    tr.add_argument("--patience", type=int, default=50)
    tr.add_argument("--batch-size", type=int, default=8)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--lr", type=float, default=1e-4)
    tr.add_argument("--bf16", action="store_true",
                    help="bfloat16 autocast for the network pass")
    tr.add_argument("--cosine-lr", action="store_true",
                    help="anneal lr to 0 with a cosine schedule")
    tr.add_argument("--flip-augment", action="store_true",
                    help="random dihedral flips of training batches")
    tr.add_argument("--out", type=Path, required=True)

    inf = sub.add_parser("infer", help="export reconstructions")
    inf.add_argument("--manifest", type=Path, required=True)
    inf.add_argument("--checkpoint", type=Path, required=True)
    inf.add_argument("--tta", action="store_true",
                     help="average over the 8 dihedral flips at inference")
    inf.add_argument("--out", type=Path, required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "train":
        cfg = TrainConfig(lr=args.lr, batch_size=args.batch_size,
                          max_epochs=args.epochs,
                          patience=min(args.patience, args.epochs),
                          bf16=args.bf16, cosine_lr=args.cosine_lr,
                          flip_augment=args.flip_augment)
        history = train(args.train, args.val, args.out, train_cfg=cfg,
                        loss_cfg=LossConfig(selfsup=args.selfsup),
                        seed=args.seed)
        print(f"best val occluded-MSE: {history['best_val_mse_occ']:.6g} "
              f"({len(history['epochs'])} epochs)")
        return 0
    if args.command == "infer":
        from .infer import infer_and_export
        ids = infer_and_export(args.manifest, args.checkpoint, args.out,
                               tta=args.tta)
        print(f"exported {len(ids)} reconstructions to {args.out}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
