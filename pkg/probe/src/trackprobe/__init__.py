"""Frozen-backbone linear probe for best-tracker prediction.

Embeds the first frames of each labeled video with a (frozen) vision
backbone, trains a linear head on the best-tracker labels, and exports
predictions in the interchange format the evaluation toolkit consumes.
"""

from .backbones import backbone_checksum, build_backbone, set_frozen
from .data import frame_paths, load_window, read_label_file, sequence_ids
from .probe import (
    ProbeConfig,
    ProbeModel,
    embed_video,
    export_predictions,
    extract_window_embeddings,
    train_probe,
    write_interchange,
)
from .render import render_dataset, render_sequence

__version__ = "0.1.0"
