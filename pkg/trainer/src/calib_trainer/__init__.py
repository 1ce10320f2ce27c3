"""Toy-scale trainer consuming spherecal datasets through their file formats."""

from .data import BinLayout, CropDataset, load_bins, load_dataset, load_manifest
from .model import CalibNet
from .train import kl_head_loss, predict_values, train, write_metrics_csv

__version__ = "0.1.0"
