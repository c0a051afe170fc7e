import numpy as np
import pytest

from birdedge.melspec import MelSpectrogram
from birdedge.nnrt import generate_fixture_model

from wavgen import make_fixture_recordings

FIXTURE_CLASSES = 31
FIXTURE_SEED = 7


@pytest.fixture(scope="session")
def fixture_model():
    """One shared fixture classifier; generation is deterministic."""
    return generate_fixture_model(FIXTURE_CLASSES, FIXTURE_SEED)


@pytest.fixture(scope="session")
def recordings_dir(tmp_path_factory):
    """Directory holding the synthesized three-recording fixture set."""
    directory = tmp_path_factory.mktemp("recordings")
    make_fixture_recordings(directory)
    return directory


def random_spec(seed: int, shape=(64, 249)) -> MelSpectrogram:
    """A well-formed random spectrogram: floored noise with max 0 dB."""
    rng = np.random.default_rng(seed)
    values = rng.uniform(-80.0, 0.0, size=shape).astype(np.float32)
    values.flat[int(rng.integers(values.size))] = 0.0
    return MelSpectrogram(values)
