"""Composite inpainting loss: weighted pixel MSE, optional perceptual/style
terms on pretrained VGG-16 features, and a total-variation seam penalty."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class LossConfig:
    w_mse_nocc: float = 1.0
    w_mse_occ: float = 10.0
    w_perceptual: float = 0.05
    w_style: float = 120.0
    w_tv: float = 0.1
    selfsup: bool = False  # restrict pixel terms and drop feature terms


_vgg_features = None
_vgg_unavailable = False


def _get_vgg():
    """Pretrained VGG-16 slices up to pool1/pool2/pool3; None when the
    pretrained weights cannot be loaded (e.g. no download access)."""
    global _vgg_features, _vgg_unavailable
    if _vgg_features is not None or _vgg_unavailable:
        return _vgg_features
    try:
        from torchvision.models import VGG16_Weights, vgg16
        net = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features.eval()
        for p in net.parameters():
            p.requires_grad_(False)
        # feature maps right after the first three max-pools
        _vgg_features = (net[:5], net[5:10], net[10:17])
    except Exception:
        _vgg_unavailable = True
        _vgg_features = None
    return _vgg_features


def feature_terms_available() -> bool:
    return _get_vgg() is not None


def _masked_mse(pred, target, sel):
    n = sel.sum().clamp(min=1)
    diff = (pred - target) * sel
    return (diff * diff).sum() / n


def _dilate(mask):
    return F.max_pool2d(mask, 3, stride=1, padding=1)


def tv_term(comp: torch.Tensor, occ_mask: torch.Tensor) -> torch.Tensor:
    """Forward-difference total variation over the one-cell dilation of the
    occluded region, penalizing both the fill and its seam."""
    region = _dilate(occ_mask)
    dx = comp[..., 1:, :] - comp[..., :-1, :]
    dy = comp[..., :, 1:] - comp[..., :, :-1]
    rx = torch.maximum(region[..., 1:, :], region[..., :-1, :])
    ry = torch.maximum(region[..., :, 1:], region[..., :, :-1])
    n = (rx.sum() + ry.sum()).clamp(min=1)
    return ((dx.abs() * rx).sum() + (dy.abs() * ry).sum()) / n


def _gram(f):
    b, c, h, w = f.shape
    flat = f.reshape(b, c, h * w)
    return flat @ flat.transpose(1, 2) / (c * h * w)


def _feature_losses(rec, comp, target, lo, hi):
    vgg = _get_vgg()
    perceptual = rec.new_zeros(())
    style = rec.new_zeros(())
    scale = (hi - lo) if hi > lo else 1.0

    def prep(x):
        x = (x - lo) / scale
        return x.repeat(1, 3, 1, 1)

    feats_t = []
    x = prep(target)
    for sl in vgg:
        x = sl(x)
        feats_t.append(x)
    for candidate in (rec, comp):
        x = prep(candidate)
        for sl, ft in zip(vgg, feats_t):
            x = sl(x)
            perceptual = perceptual + F.l1_loss(x, ft)
            style = style + F.l1_loss(_gram(x), _gram(ft))
    return perceptual, style


def loss(rec: torch.Tensor, comp: torch.Tensor, target: torch.Tensor,
         occ_mask: torch.Tensor, cfg: LossConfig = LossConfig(),
         art_mask: torch.Tensor | None = None,
         target_missing: torch.Tensor | None = None,
         value_range: tuple[float, float] = (0.0, 1.0),
         ) -> tuple[torch.Tensor, dict]:
    """Weighted composite loss.

    rec/comp/target: (B, 1, H, W); occ_mask: 1 where the input grid is missing.
    Self-supervised mode needs art_mask (the artificially occluded cells) and
    target_missing (cells with no ground truth, excluded from every term).
    """
    if cfg.selfsup:
        if art_mask is None or target_missing is None:
            raise ValueError("selfsup mode requires art_mask and target_missing")
        known = 1.0 - target_missing
        occ_sel = art_mask * known
        nocc_sel = (1.0 - occ_mask) * known
        target = torch.where(target_missing > 0.5, torch.zeros_like(target), target)
    else:
        if torch.isnan(target).any():
            raise ValueError("supervised mode requires a complete target")
        occ_sel = occ_mask
        nocc_sel = 1.0 - occ_mask

    mse_occ = _masked_mse(rec, target, occ_sel)
    mse_nocc = _masked_mse(rec, target, nocc_sel)
    tv = tv_term(comp, occ_mask)

    total = (cfg.w_mse_occ * mse_occ + cfg.w_mse_nocc * mse_nocc
             + cfg.w_tv * tv)
    components = {"mse_occ": float(mse_occ.detach()),
                  "mse_nocc": float(mse_nocc.detach()),
                  "tv": float(tv.detach()), "perceptual": 0.0, "style": 0.0}

    use_features = (not cfg.selfsup
                    and (cfg.w_perceptual > 0 or cfg.w_style > 0)
                    and feature_terms_available())
    if use_features:
        perceptual, style = _feature_losses(rec, comp, target, *value_range)
        total = total + cfg.w_perceptual * perceptual + cfg.w_style * style
        components["perceptual"] = float(perceptual)
        components["style"] = float(style)
    return total, components
