"""demforge-learner: U-Net inpainting of occluded elevation-map datasets."""

from .data import SelfsupDataset, SupervisedDataset, split_value_range
from .dgm import Grid, Manifest, read_grid, write_grid
from .infer import infer_and_export
from .losses import LossConfig, loss, tv_term
from .model import UNet, UNetConfig, normalize_batch, reconstruct
from .train import TrainConfig, load_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "Grid", "Manifest", "read_grid", "write_grid",
    "UNet", "UNetConfig", "normalize_batch", "reconstruct",
    "LossConfig", "loss", "tv_term",
    "TrainConfig", "train", "load_checkpoint",
    "SupervisedDataset", "SelfsupDataset", "split_value_range",
    "infer_and_export",
]
