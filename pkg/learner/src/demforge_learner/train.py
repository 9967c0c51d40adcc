"""Training loop with early stopping on validation occluded-MSE."""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import torch
from torch.utils.data import DataLoader

from .data import SelfsupDataset, SupervisedDataset, split_value_range
from .dgm import Manifest
from .losses import LossConfig, feature_terms_available, loss
from .model import UNet, UNetConfig, normalize_batch


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    weight_decay: float = 1e-3
    betas: tuple = (0.9, 0.999)
    batch_size: int = 8
    max_epochs: int = 100
    patience: int = 50
    num_workers: int = 0
    # bfloat16 autocast for the network forward/backward; weights and the
    # loss stay float32
    bf16: bool = False
    # anneal lr to 0 over max_epochs with a cosine schedule
    cosine_lr: bool = False
    # random dihedral flips of each training batch
    flip_augment: bool = False

    def __post_init__(self):
        if self.patience > self.max_epochs:
            raise ValueError("patience must be <= max_epochs")


def _compose(rec, occ, mask):
    return torch.where(mask > 0.5, rec, occ)


_GRID_KEYS = ("occ", "occ_nan", "mask", "target", "art_mask", "target_missing")


def _random_flip(batch, gen):
    """Apply one random dihedral transform to every grid tensor in the batch."""
    bits = torch.randint(0, 2, (3,), generator=gen)
    square = batch["occ"].shape[-1] == batch["occ"].shape[-2]
    out = dict(batch)
    for key in _GRID_KEYS:
        if key not in batch:
            continue
        t = batch[key]
        if bits[0]:
            t = t.flip(-1)
        if bits[1]:
            t = t.flip(-2)
        if bits[2] and square:
            t = t.transpose(-1, -2)
        out[key] = t.contiguous()
    return out


def _run_batch(model, batch, loss_cfg, value_range, bf16=False):
    occ = batch["occ"]
    mask = batch["mask"]
    target = batch["target"]
    rec = model_forward(model, occ, mask, bf16=bf16)
    comp = _compose(rec, occ, mask)
    kwargs = {}
    if loss_cfg.selfsup:
        kwargs = {"art_mask": batch["art_mask"],
                  "target_missing": batch["target_missing"]}
    return loss(rec, comp, target, mask, loss_cfg,
                value_range=value_range, **kwargs)


def model_forward(model, occ, mask, bf16=False):
    x, means = normalize_batch(torch.where(mask > 0.5,
                                           torch.full_like(occ, float("nan")),
                                           occ), mask)
    if bf16:
        with torch.autocast("cpu", dtype=torch.bfloat16):
            out = model(x.contiguous(memory_format=torch.channels_last))
        return out.float() + means
    return model(x) + means


def _atomic_save(payload: dict, path: Path) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)


def train(train_manifest_path, val_manifest_path, out_dir,
          train_cfg: TrainConfig = TrainConfig(),
          loss_cfg: LossConfig = LossConfig(),
          unet_cfg: UNetConfig = UNetConfig(),
          seed: int = 0, device: str = "cpu") -> dict:
    """Train the U-Net; returns the history dict. Writes best.pt (atomic) and
    history.json into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(seed)

    train_manifest = Manifest.read(train_manifest_path)
    val_manifest = Manifest.read(val_manifest_path)
    if not train_manifest.records or not val_manifest.records:
        raise ValueError("empty manifest")
    ds_cls = SelfsupDataset if loss_cfg.selfsup else SupervisedDataset
    train_ds = ds_cls(train_manifest)
    val_ds = ds_cls(val_manifest)
    value_range = split_value_range(train_manifest)

    train_dl = DataLoader(train_ds, batch_size=train_cfg.batch_size,
                          shuffle=True, num_workers=train_cfg.num_workers,
                          generator=torch.Generator().manual_seed(seed))
    val_dl = DataLoader(val_ds, batch_size=train_cfg.batch_size)

    model = UNet(unet_cfg).to(device)
    if train_cfg.bf16:
        model = model.to(memory_format=torch.channels_last)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.lr,
                           weight_decay=train_cfg.weight_decay,
                           betas=train_cfg.betas)
    flip_gen = torch.Generator().manual_seed(seed + 1)
    sched = None
    if train_cfg.cosine_lr:
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(
            opt, T_max=train_cfg.max_epochs)

    history = {
        "unet_config": unet_cfg.to_dict(),
        "selfsup": loss_cfg.selfsup,
        "feature_terms": feature_terms_available() and not loss_cfg.selfsup,
        "value_range": list(value_range),
        "bf16": train_cfg.bf16,
        "seed": seed,
        "epochs": [],
    }
    best_val = float("inf")
    best_record = []
    bad_epochs = 0
    ckpt = out_dir / "best.pt"

    for epoch in range(1, train_cfg.max_epochs + 1):
        model.train()
        t0 = time.perf_counter()
        train_total = 0.0
        n_batches = 0
        for batch in train_dl:
            if train_cfg.flip_augment:
                batch = _random_flip(batch, flip_gen)
            opt.zero_grad()
            total, _ = _run_batch(model, batch, loss_cfg, value_range,
                                  bf16=train_cfg.bf16)
            if not torch.isfinite(total):
                raise RuntimeError(f"non-finite loss at epoch {epoch}: {total}")
            total.backward()
            opt.step()
            train_total += float(total.detach())
            n_batches += 1
        if sched is not None:
            sched.step()

        model.eval()
        val_mse_occ = 0.0
        n_val = 0
        with torch.no_grad():
            for batch in val_dl:
                _, comps = _run_batch(model, batch, loss_cfg, value_range,
                                      bf16=train_cfg.bf16)
                val_mse_occ += comps["mse_occ"] * len(batch["id"])
                n_val += len(batch["id"])
        val_mse_occ /= max(n_val, 1)

        improved = val_mse_occ < best_val
        if improved:
            best_val = val_mse_occ
            bad_epochs = 0
            _atomic_save({"state_dict": model.state_dict(),
                          "unet_config": unet_cfg.to_dict(),
                          "epoch": epoch,
                          "val_mse_occ": val_mse_occ}, ckpt)
        else:
            bad_epochs += 1
        best_record.append(best_val)

        history["epochs"].append({
            "epoch": epoch,
            "train_loss": train_total / max(n_batches, 1),
            "val_mse_occ": val_mse_occ,
            "best_val_mse_occ": best_val,
            "seconds": time.perf_counter() - t0,
        })
        (out_dir / "history.json").write_text(json.dumps(history, indent=2))

        if bad_epochs >= train_cfg.patience:
            break

    history["best_val_mse_occ"] = best_val
    (out_dir / "history.json").write_text(json.dumps(history, indent=2))
    return history


def load_checkpoint(path, device: str = "cpu") -> UNet:
    payload = torch.load(path, map_location=device, weights_only=True)
    model = UNet(UNetConfig.from_dict(payload["unet_config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
