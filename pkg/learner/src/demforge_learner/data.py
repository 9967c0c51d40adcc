"""Dataset adapters turning manifest records into training tensors."""

from __future__ import annotations

import numpy as np
import torch
from torch.utils.data import Dataset

from .dgm import Manifest


def _to_tensor(cells: np.ndarray) -> torch.Tensor:
    return torch.from_numpy(np.ascontiguousarray(cells, dtype=np.float32))[None]


class SupervisedDataset(Dataset):
    """(occluded input, complete ground truth) pairs from a synthetic split."""

    def __init__(self, manifest: Manifest):
        self.manifest = manifest

    def __len__(self):
        return len(self.manifest.records)

    def __getitem__(self, i):
        rec = self.manifest.records[i]
        gt = self.manifest.load_grid(rec, "gt")
        occ = self.manifest.load_grid(rec, "occ")
        occ_mask = occ.missing.astype(np.float32)
        occ_cells = np.nan_to_num(occ.cells, nan=0.0)
        return {
            "occ": _to_tensor(occ_cells),
            "occ_nan": _to_tensor(occ.cells),
            "mask": _to_tensor(occ_mask),
            "target": _to_tensor(gt.cells),
            "id": rec["id"],
        }


class SelfsupDataset(Dataset):
    """(artificially occluded input, partly missing target) pairs."""

    def __init__(self, manifest: Manifest):
        self.manifest = manifest

    def __len__(self):
        return len(self.manifest.records)

    def __getitem__(self, i):
        rec = self.manifest.records[i]
        target = self.manifest.load_grid(rec, "target")
        inp = self.manifest.load_grid(rec, "input")
        amask = self.manifest.load_grid(rec, "amask")
        occ_mask = inp.missing.astype(np.float32)
        target_missing = target.missing.astype(np.float32)
        return {
            "occ": _to_tensor(np.nan_to_num(inp.cells, nan=0.0)),
            "occ_nan": _to_tensor(inp.cells),
            "mask": _to_tensor(occ_mask),
            "target": _to_tensor(np.nan_to_num(target.cells, nan=0.0)),
            "art_mask": _to_tensor((amask.cells > 0.5).astype(np.float32)),
            "target_missing": _to_tensor(target_missing),
            "id": rec["id"],
        }


def split_value_range(manifest: Manifest, role: str = "gt") -> tuple[float, float]:
    lo = np.inf
    hi = -np.inf
    for rec in manifest.records:
        r = role if role in rec["grids"] else "target"
        g = manifest.load_grid(rec, r)
        valid = ~g.missing
        if valid.any():
            lo = min(lo, float(g.cells[valid].min()))
            hi = max(hi, float(g.cells[valid].max()))
    return lo, hi
