import pytest
from hypothesis import settings

from trackselect.dataset_io import load_results, load_sequences
from trackselect.synth import generate_benchmark, graded_scenario, separable_scenario

# property tests explore the same corpus on every run; failures stay
# reproducible and the suite stays stable in CI
settings.register_profile("ci", derandomize=True)
settings.load_profile("ci")


class Tree:
    """A materialized synthetic benchmark plus everything loaded from it."""

    def __init__(self, fixture, root):
        self.fixture = fixture
        self.manifest, self.results_root = generate_benchmark(fixture, root)
        self.sequences = load_sequences(self.manifest)
        self.results = load_results(self.manifest, self.results_root, self.sequences)
        self.pool = list(self.manifest.trackers)


@pytest.fixture(scope="session")
def small_tree(tmp_path_factory):
    fixture = separable_scenario(n_sequences=24, n_trackers=3, seed=5)
    return Tree(fixture, tmp_path_factory.mktemp("small"))


@pytest.fixture(scope="session")
def separable_tree(tmp_path_factory):
    fixture = separable_scenario(n_sequences=240, n_trackers=6, seed=7)
    return Tree(fixture, tmp_path_factory.mktemp("separable"))


@pytest.fixture(scope="session")
def graded_tree(tmp_path_factory):
    fixture = graded_scenario(n_sequences=60, n_trackers=17, seed=11)
    return Tree(fixture, tmp_path_factory.mktemp("graded"))
