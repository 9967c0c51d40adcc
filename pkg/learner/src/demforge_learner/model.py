"""U-Net for elevation-map inpainting.

Input is two channels: the mean-normalized occluded grid with missing cells
set to 0.0 (the post-normalization mean), and the binary occlusion mask.
Three max-pool levels with 64/128/256 feature channels, bilinear x2
upsampling, skip connections at every level, no further bottleneck.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 2
    pool_levels: int = 3
    hidden_channels: tuple = (64, 128, 256)

    def to_dict(self) -> dict:
        return {"in_channels": self.in_channels,
                "pool_levels": self.pool_levels,
                "hidden_channels": list(self.hidden_channels)}

    @classmethod
    def from_dict(cls, d: dict) -> "UNetConfig":
        return cls(in_channels=d["in_channels"], pool_levels=d["pool_levels"],
                   hidden_channels=tuple(d["hidden_channels"]))


def _double_conv(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class UNet(nn.Module):
    def __init__(self, config: UNetConfig = UNetConfig()):
        super().__init__()
        self.config = config
        c1, c2, c3 = config.hidden_channels
        self.enc1 = _double_conv(config.in_channels, c1)
        self.enc2 = _double_conv(c1, c2)
        self.enc3 = _double_conv(c2, c3)
        self.bottom = _double_conv(c3, c3)
        self.pool = nn.MaxPool2d(2)
        self.up = nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False)
        self.dec3 = _double_conv(c3 + c3, c3)
        self.dec2 = _double_conv(c3 + c2, c2)
        self.dec1 = _double_conv(c2 + c1, c1)
        self.head = nn.Conv2d(c1, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        div = 2 ** self.config.pool_levels
        if h % div or w % div:
            raise ValueError(f"spatial size {h}x{w} must be divisible by {div}")
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        e3 = self.enc3(self.pool(e2))
        b = self.bottom(self.pool(e3))
        d3 = self.dec3(torch.cat([self.up(b), e3], dim=1))
        d2 = self.dec2(torch.cat([self.up(d3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up(d2), e1], dim=1))
        return self.head(d1)


def normalize_batch(occ: torch.Tensor, mask: torch.Tensor
                    ) -> tuple[torch.Tensor, torch.Tensor]:
    """Subtract each grid's mean over known cells; missing cells become 0.

    occ: (B, 1, H, W) with NaN at missing cells; mask: (B, 1, H, W) 1=missing.
    Returns (network input (B, 2, H, W), per-grid means (B, 1, 1, 1)).
    """
    known = mask < 0.5
    filled = torch.where(known, occ, torch.zeros_like(occ))
    counts = known.sum(dim=(2, 3), keepdim=True).clamp(min=1)
    means = filled.sum(dim=(2, 3), keepdim=True) / counts
    normalized = torch.where(known, occ - means, torch.zeros_like(occ))
    return torch.cat([normalized, mask], dim=1), means


def reconstruct(model: nn.Module, occ: torch.Tensor, mask: torch.Tensor,
                tta: bool = False) -> torch.Tensor:
    """Full forward pass: normalize, run the net, add the per-grid mean back.

    With tta=True the prediction is averaged over the eight dihedral
    transforms of the input (square grids only), which trades an 8x forward
    cost for a less noisy reconstruction."""
    if not tta:
        x, means = normalize_batch(occ, mask)
        return model(x) + means
    if occ.shape[-1] != occ.shape[-2]:
        raise ValueError("tta requires square grids")
    acc = None
    for k in range(8):
        rec = reconstruct(model, _dihedral(occ, k), _dihedral(mask, k))
        rec = _dihedral_inv(rec, k)
        acc = rec if acc is None else acc + rec
    return acc / 8


def _dihedral(t: torch.Tensor, k: int) -> torch.Tensor:
    if k & 1:
        t = t.flip(-1)
    if k & 2:
        t = t.flip(-2)
    if k & 4:
        t = t.transpose(-1, -2)
    return t.contiguous()


def _dihedral_inv(t: torch.Tensor, k: int) -> torch.Tensor:
    if k & 4:
        t = t.transpose(-1, -2)
    if k & 2:
        t = t.flip(-2)
    if k & 1:
        t = t.flip(-1)
    return t
