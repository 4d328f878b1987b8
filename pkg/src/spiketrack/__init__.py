"""Spiking Siamese tracking: ANN-to-SNN conversion, an integrate-and-fire
simulator, spike-train similarity estimators and a desk-scale tracking harness."""
from .ann import AnnModel, BatchNorm, Conv, MaxPool, ReLU, ActivationStats, forward_ann, record_lambdas
from .config import RunConfig, load_config
from .conversion import SnnModel, SpikeMaxPool, SpikingConv, convert, fold_batchnorm, normalize_layer
from .energy import EnergyModel, EnergyReport, estimate
from .engine import MembraneState, OpCounter, SimConfig, SimResult, SpikeTensor, firing_rate, run_network, spike_maxpool, step_layer
from .errors import DimensionError, ModelFormatError, UsageError, ValidationError
from .schedules import Burst, Constant, Phase, TwoStatus, make_schedule, threshold_at
from .similarity import HseConfig, ResponseMap, hse, pse, response, tse, wtse
from .tensor import ConvSpec, conv2d, maxpool2d, xcorr_valid
from .tracking import SequenceParams, TrackerConfig, compare_backends, generate_sequence, track

__version__ = "0.1.0"
