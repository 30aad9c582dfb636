"""Dense autoencoder trained on normal frames only.

Encoder 4096 -> 512 -> 128 -> h (LeakyRelu throughout), decoder mirrored
with a final Sigmoid so reconstructions stay in [0, 1].  The latent
vector feeds the density model; reconstruction error is an auxiliary
score.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_io import FRAME_PIXELS, Frame
from .errors import ContractViolationError, ProtocolViolationError, TrainingError
from .nn import (Activation, AdamState, Mlp, adam_step, init_mlp)
from .rng import RngStream

ENCODER_HIDDEN = (512, 128)
DEFAULT_LATENT_DIM = 64


@dataclass
class AutoencoderConfig:
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    latent_dim: int = DEFAULT_LATENT_DIM
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass
class AutoencoderModel:
    encoder: Mlp
    decoder: Mlp
    latent_dim: int
    input_dim: int = FRAME_PIXELS

    def params(self):
        return self.encoder.params() + self.decoder.params()

    def set_params(self, params):
        n_enc = 2 * len(self.encoder.layers)
        self.encoder.set_params(params[:n_enc])
        self.decoder.set_params(params[n_enc:])


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    epochs_run: int = 0
    seed: int = 0
    warnings: list[str] = field(default_factory=list)


def init_autoencoder(rng: RngStream, latent_dim: int = DEFAULT_LATENT_DIM,
                     input_dim: int = FRAME_PIXELS,
                     hidden: tuple[int, ...] = ENCODER_HIDDEN) -> AutoencoderModel:
    enc_dims = (input_dim, *hidden, latent_dim)
    dec_dims = (latent_dim, *reversed(hidden), input_dim)
    enc_acts = [Activation.LEAKY_RELU] * (len(enc_dims) - 1)
    dec_acts = [Activation.LEAKY_RELU] * (len(dec_dims) - 2) + [Activation.SIGMOID]
    return AutoencoderModel(
        encoder=init_mlp(rng, enc_dims, enc_acts),
        decoder=init_mlp(rng, dec_dims, dec_acts),
        latent_dim=latent_dim,
        input_dim=input_dim,
    )


def _check_frame(model: AutoencoderModel, frame: Frame) -> np.ndarray:
    flat = frame.flat()
    if flat.shape != (model.input_dim,):
        raise ContractViolationError(
            f"frame has {flat.shape[0]} pixels, model expects {model.input_dim}")
    return flat


def encode(model: AutoencoderModel, frame: Frame) -> np.ndarray:
    """Latent embedding of a frame; deterministic and pure."""
    return model.encoder.forward(_check_frame(model, frame)[None, :])[0]


def encode_batch(model: AutoencoderModel, flats: np.ndarray) -> np.ndarray:
    return model.encoder.forward(flats)


def decode(model: AutoencoderModel, latent: np.ndarray) -> np.ndarray:
    """Reconstruction (flat pixel vector in [0, 1]) from a latent vector."""
    latent = np.asarray(latent, dtype=np.float64)
    if latent.shape != (model.latent_dim,):
        raise ContractViolationError(
            f"latent length {latent.shape}, expected ({model.latent_dim},)")
    return model.decoder.forward(latent[None, :])[0]


def reconstruction_error(model: AutoencoderModel, frame: Frame) -> float:
    """Mean squared error between the frame and its reconstruction."""
    flat = _check_frame(model, frame)
    recon = model.decoder.forward(model.encoder.forward(flat[None, :]))[0]
    diff = recon - flat
    return float(diff @ diff / model.input_dim)


def _mse_loss_and_grads(model: AutoencoderModel, batch: np.ndarray):
    """Mean-over-batch-and-pixels MSE loss and its parameter gradients."""
    latent, enc_cache = model.encoder.forward_cached(batch)
    recon, dec_cache = model.decoder.forward_cached(latent)
    diff = recon - batch
    loss = float(np.mean(diff * diff))
    grad_recon = 2.0 * diff / diff.size
    grad_latent, dec_grads = model.decoder.backward(dec_cache, grad_recon)
    _, enc_grads = model.encoder.backward(enc_cache, grad_latent)
    return loss, enc_grads + dec_grads


def _mean_mse(model: AutoencoderModel, flats: np.ndarray) -> float:
    recon = model.decoder.forward(model.encoder.forward(flats))
    return float(np.mean((recon - flats) ** 2))


def _require_normal_only(frames: list[Frame], split_name: str) -> None:
    if not frames:
        raise ProtocolViolationError(f"{split_name} split is empty")
    for frame in frames:
        if frame.is_anomalous:
            raise ProtocolViolationError(
                f"{split_name} split contains anomalous frame {frame.source_id!r}; "
                "training uses normal samples only")


def train_autoencoder(train_frames: list[Frame], val_frames: list[Frame],
                      config: AutoencoderConfig):
    """Train on normal frames only; deterministic given config.seed.

    Returns (model, report).  Raises ProtocolViolationError if any input
    frame carries an anomaly label.
    """
    _require_normal_only(train_frames, "train")
    _require_normal_only(val_frames, "val")
    if config.epochs < 1 or config.batch_size < 1:
        raise ContractViolationError("epochs and batch_size must be >= 1")

    rng = RngStream(config.seed)
    model = init_autoencoder(rng.derive(0), config.latent_dim)
    shuffle_rng = rng.derive(1)

    train_x = np.stack([f.flat() for f in train_frames])
    val_x = np.stack([f.flat() for f in val_frames])

    params = model.params()
    state = AdamState.zeros_like(params)
    report = TrainReport(seed=config.seed)
    n = train_x.shape[0]

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = train_x[order[start:start + config.batch_size]]
            loss, grads = _mse_loss_and_grads(model, batch)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"autoencoder loss non-finite at epoch {epoch}, "
                    f"batch {start // config.batch_size}")
            params, state = adam_step(params, grads, state, lr=config.lr,
                                      beta1=config.beta1, beta2=config.beta2,
                                      epsilon=config.epsilon)
            model.set_params(params)
            epoch_loss += loss * batch.shape[0]
        report.train_loss.append(epoch_loss / n)
        report.val_loss.append(_mean_mse(model, val_x))
    report.epochs_run = config.epochs
    if report.val_loss[-1] > report.val_loss[0]:
        report.warnings.append(
            "validation loss did not improve over training "
            f"({report.val_loss[0]:.6g} -> {report.val_loss[-1]:.6g})")
    return model, report
