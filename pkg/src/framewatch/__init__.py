"""Unsupervised visual anomaly detection for mobile-robot camera streams.

Train an autoencoder and a coupling-layer normalizing flow on normal
frames only, score frames by latent negative log-likelihood, evaluate
with ROC/AUC per anomaly type, and drive a stop/backtrack deployment
monitor over a live score stream.
"""

from .autoencoder import (AutoencoderConfig, AutoencoderModel, TrainReport,
                          decode, encode, reconstruction_error,
                          train_autoencoder)
from .data_io import (AnomalyLabel, Frame, ScenarioDataset, decode_pgm,
                      encode_pgm, load_scenario, parse_labels, resize_bilinear)
from .evaluation import (EvalReport, RocPoint, auc, choose_threshold, evaluate,
                         roc_curve)
from .flow import (CouplingLayer, FlowConfig, FlowModel, ScoredSample,
                   coupling_forward, coupling_inverse, flow_log_prob,
                   train_flow)
from .monitor import (Action, MonitorConfig, MonitorState, Phase, monitor_step,
                      run_monitor)
from .nn import (Activation, AdamState, DenseLayer, adam_step, dense_backward,
                 dense_forward, finite_diff_grad)
from .pipeline import RunConfig, train_pipeline
from .rng import RngStream, gaussian_sample
from .scoring import ScoreConfig, anomaly_score
from .synth import SynthSpec, apply_anomaly, generate_normal, generate_scenario

__version__ = "0.1.0"
