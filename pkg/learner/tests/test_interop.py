"""Round-trip checks against the dataset toolkit's own readers and CLI."""

import json

import torch

import demforge
from demforge_learner import UNet, UNetConfig, infer_and_export
from demforge_learner.train import _atomic_save

from conftest import run_toolkit


def untrained_checkpoint(tmp_path):
    torch.manual_seed(0)
    model = UNet()
    path = tmp_path / "ckpt.pt"
    _atomic_save({"state_dict": model.state_dict(),
                  "unet_config": UNetConfig().to_dict(),
                  "epoch": 0, "val_mse_occ": float("inf")}, path)
    return path


class TestExportInterop:
    def test_exports_readable_by_toolkit(self, small_split, tmp_path):
        ckpt = untrained_checkpoint(tmp_path)
        ids = infer_and_export(small_split / "manifest.jsonl", ckpt, tmp_path / "pred")
        assert len(ids) == 6
        for sid in ids:
            rec = demforge.read_grid(tmp_path / "pred" / f"{sid}_rec.dgm")
            comp = demforge.read_grid(tmp_path / "pred" / f"{sid}_comp.dgm")
            assert rec.is_complete()
            assert comp.is_complete()

    def test_composition_matches_toolkit_bitwise(self, small_split, tmp_path):
        ckpt = untrained_checkpoint(tmp_path)
        infer_and_export(small_split / "manifest.jsonl", ckpt, tmp_path / "pred")
        manifest = demforge.DatasetManifest.read(small_split / "manifest.jsonl")
        for rec in manifest.records:
            occ = manifest.load_grid(rec, "occ")
            net_rec = demforge.read_grid(tmp_path / "pred" / f"{rec['id']}_rec.dgm")
            expected = demforge.compose(occ, net_rec, demforge.mask_from_grid(occ))
            exported = demforge.read_grid(tmp_path / "pred" / f"{rec['id']}_comp.dgm")
            assert exported.cells.tobytes() == expected.cells.tobytes()

    def test_toolkit_eval_scores_exports(self, small_split, tmp_path):
        ckpt = untrained_checkpoint(tmp_path)
        infer_and_export(small_split / "manifest.jsonl", ckpt, tmp_path / "pred")
        proc = run_toolkit(["eval", "--pred", tmp_path / "pred",
                            "--manifest", small_split / "manifest.jsonl",
                            "--out", tmp_path / "report.json"])
        assert proc.returncode == 0, proc.stderr
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["n_samples"] + report["n_skipped_empty_mask"] == 6
        assert report["mse_occ"]["mean"] is not None
