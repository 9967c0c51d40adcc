import numpy as np
import torch

from demforge_learner import Manifest, SelfsupDataset, SupervisedDataset, split_value_range


class TestSupervisedDataset:
    def test_shapes_and_masks(self, small_split):
        ds = SupervisedDataset(Manifest.read(small_split / "manifest.jsonl"))
        assert len(ds) == 6
        item = ds[0]
        assert item["occ"].shape == (1, 64, 64)
        assert item["target"].shape == (1, 64, 64)
        # mask marks exactly the NaN cells of the raw occluded grid
        assert (item["mask"] == torch.isnan(item["occ_nan"]).float()).all()
        # fill value for missing cells is 0
        assert (item["occ"][item["mask"] > 0.5] == 0.0).all()
        assert torch.isfinite(item["target"]).all()


class TestSelfsupDataset:
    def test_roles(self, selfsup_split):
        ds = SelfsupDataset(Manifest.read(selfsup_split / "manifest.jsonl"))
        assert len(ds) >= 1
        item = ds[0]
        art = item["art_mask"]
        # artificial occlusion is part of the input's missing set and disjoint
        # from the originally missing target cells
        assert ((art > 0.5) & (item["mask"] < 0.5)).sum() == 0
        assert ((art > 0.5) & (item["target_missing"] > 0.5)).sum() == 0


class TestValueRange:
    def test_range_covers_all_grids(self, small_split):
        m = Manifest.read(small_split / "manifest.jsonl")
        lo, hi = split_value_range(m)
        assert np.isfinite(lo) and np.isfinite(hi) and hi >= lo
        for rec in m.records:
            g = m.load_grid(rec, "gt")
            assert g.cells[~g.missing].min() >= lo - 1e-6
            assert g.cells[~g.missing].max() <= hi + 1e-6
