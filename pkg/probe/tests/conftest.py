import pytest

from trackselect.dataset_io import load_results, load_sequences
from trackselect.labels import build_label_set, write_labels
from trackselect.synth import generate_benchmark, separable_scenario

from trackprobe.render import render_dataset


class ToyTree:
    """Ten labeled videos with rendered frames, built from the primary toolkit."""

    def __init__(self, root):
        fixture = separable_scenario(n_sequences=10, n_trackers=3, seed=13)
        self.manifest, self.results_root = generate_benchmark(fixture, root / "data")
        self.sequences = load_sequences(self.manifest)
        self.results = load_results(self.manifest, self.results_root, self.sequences)
        labels = build_label_set(self.sequences, self.results)
        self.label_file = root / "labels.jsonl"
        write_labels(self.label_file, labels, self.manifest.trackers)
        self.labels = labels
        self.frames_root = root / "frames"
        extent = self.sequences[0].image_size
        self.frame_counts = render_dataset(
            root / "data", self.frames_root, size=64, image_extent=extent
        )


@pytest.fixture(scope="session")
def toy_tree(tmp_path_factory):
    return ToyTree(tmp_path_factory.mktemp("toy"))
