"""Inference: fill every grid in a manifest and export rec/comp DGM files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .dgm import Grid, Manifest, write_grid
from .model import reconstruct


def infer_and_export(manifest_path, checkpoint_path, out_dir,
                     batch_size: int = 8, device: str = "cpu",
                     tta: bool = False) -> list[str]:
    """Writes {id}_rec.dgm (dense reconstruction) and {id}_comp.dgm (input
    patched with the reconstruction at missing cells) for every record."""
    from .train import load_checkpoint

    manifest = Manifest.read(manifest_path)
    model = load_checkpoint(checkpoint_path, device=device)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    ids = []
    records = manifest.records
    for start in range(0, len(records), batch_size):
        chunk = records[start:start + batch_size]
        grids = []
        for rec in chunk:
            role = "input" if "input" in rec["grids"] else "occ"
            grids.append(manifest.load_grid(rec, role))
        occ = torch.from_numpy(np.stack([g.cells for g in grids]))[:, None]
        mask = torch.isnan(occ).float()
        with torch.no_grad():
            rec_batch = reconstruct(model, occ, mask, tta=tta)
        for rec, g, r in zip(chunk, grids, rec_batch):
            rec_cells = r[0].numpy().astype(np.float32)
            comp_cells = g.cells.copy()
            hole = np.isnan(comp_cells)
            comp_cells[hole] = rec_cells[hole]
            write_grid(Grid(g.rows, g.cols, g.resolution_x, g.resolution_y,
                            rec_cells), out_dir / f"{rec['id']}_rec.dgm")
            write_grid(Grid(g.rows, g.cols, g.resolution_x, g.resolution_y,
                            comp_cells), out_dir / f"{rec['id']}_comp.dgm")
            ids.append(rec["id"])
    return ids
