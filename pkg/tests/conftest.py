import pytest

from restcal import harness, synth


@pytest.fixture(scope="session")
def synth_data():
    """Default 8-subject synthetic dataset, ``{sid: (recording, truth)}``."""
    return synth.generate_dataset(synth.SynthSpec(seed=0))


@pytest.fixture(scope="session")
def recordings(synth_data):
    return {sid: rec for sid, (rec, _) in synth_data.items()}


@pytest.fixture(scope="session")
def experiment(recordings):
    """Shared experiment so per-subject features are computed once per session."""
    return harness.Experiment(harness.ExperimentConfig(threads=4), recordings)
