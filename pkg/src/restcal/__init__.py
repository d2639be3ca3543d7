"""Subject-independent motor-imagery EEG classification with resting-state
feature calibration."""
from ._kernels import BACKEND
from .dataio import (ChannelLayout, ContinuousRecording, RestingSegments, TrialEpochSet,
                     extract_epochs, load_recording, segment_resting, truncate_segment,
                     write_recording)
from .features import FeatureMatrix, calibrate, resting_features, trial_features
from .harness import Condition, Experiment, ExperimentConfig, ResultsTable
from .synth import SynthSpec, generate_dataset

__version__ = "0.1.0"
