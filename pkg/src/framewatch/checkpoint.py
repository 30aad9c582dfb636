"""JSON checkpoints for the autoencoder, the flow, and the full pipeline.

Parameters are stored as flat row-major lists of decimal numbers written
with full round-trip precision (Python's shortest-repr float
serialization), so a reloaded model reproduces scores bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .autoencoder import AutoencoderConfig, AutoencoderModel
from .errors import CheckpointError
from .flow import CouplingLayer, FlowConfig, FlowModel
from .nn import Activation, DenseLayer, Mlp
from .scoring import ScoreConfig, ScoreStandardization

FORMAT_VERSION = 1


def _mlp_to_dict(mlp: Mlp) -> dict:
    return {
        "layer_dims": [mlp.layers[0].in_dim] + [l.out_dim for l in mlp.layers],
        "activations": [l.activation.value for l in mlp.layers],
        "weights": [l.weights.reshape(-1).tolist() for l in mlp.layers],
        "biases": [l.bias.tolist() for l in mlp.layers],
    }


def _mlp_from_dict(data: dict) -> Mlp:
    dims = data["layer_dims"]
    layers = []
    for i, act in enumerate(data["activations"]):
        w = np.array(data["weights"][i], dtype=np.float64).reshape(
            dims[i + 1], dims[i])
        b = np.array(data["biases"][i], dtype=np.float64)
        layers.append(DenseLayer(w, b, Activation(act)))
    return Mlp(layers)


def autoencoder_to_dict(model: AutoencoderModel,
                        config: AutoencoderConfig | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": "autoencoder",
        "latent_dim": model.latent_dim,
        "input_dim": model.input_dim,
        "encoder": _mlp_to_dict(model.encoder),
        "decoder": _mlp_to_dict(model.decoder),
        "train_config": asdict(config) if config else None,
        "seed": config.seed if config else None,
    }


def autoencoder_from_dict(data: dict) -> AutoencoderModel:
    _check_kind(data, "autoencoder")
    return AutoencoderModel(
        encoder=_mlp_from_dict(data["encoder"]),
        decoder=_mlp_from_dict(data["decoder"]),
        latent_dim=data["latent_dim"],
        input_dim=data["input_dim"],
    )


def flow_to_dict(model: FlowModel, config: FlowConfig | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": "flow",
        "latent_dim": model.dim,
        "scale_clamp": model.layers[0].scale_clamp if model.layers else None,
        "masks": [layer.mask.tolist() for layer in model.layers],
        "scale_nets": [_mlp_to_dict(layer.scale_net) for layer in model.layers],
        "shift_nets": [_mlp_to_dict(layer.shift_net) for layer in model.layers],
        "whitening_mean": model.whitening_mean.tolist(),
        "whitening_std": model.whitening_std.tolist(),
        "train_config": asdict(config) if config else None,
        "seed": config.seed if config else None,
    }


def flow_from_dict(data: dict) -> FlowModel:
    _check_kind(data, "flow")
    layers = []
    for mask, snet, tnet in zip(data["masks"], data["scale_nets"],
                                data["shift_nets"]):
        layers.append(CouplingLayer(
            mask=np.array(mask, dtype=np.float64),
            scale_net=_mlp_from_dict(snet),
            shift_net=_mlp_from_dict(tnet),
            scale_clamp=data["scale_clamp"],
        ))
    return FlowModel(
        layers=layers,
        dim=data["latent_dim"],
        whitening_mean=np.array(data["whitening_mean"], dtype=np.float64),
        whitening_std=np.array(data["whitening_std"], dtype=np.float64),
    )


def _check_kind(data: dict, expected: str) -> None:
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {version!r}")
    kind = data.get("model_kind")
    if kind != expected:
        raise CheckpointError(f"expected model_kind {expected!r}, got {kind!r}")


def pipeline_to_dict(ae: AutoencoderModel, flow: FlowModel,
                     score_config: ScoreConfig, threshold: float,
                     threshold_quantile: float,
                     ae_config: AutoencoderConfig | None = None,
                     flow_config: FlowConfig | None = None,
                     seed: int | None = None) -> dict:
    std = score_config.standardization or ScoreStandardization()
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": "pipeline",
        "latent_dim": ae.latent_dim,
        "autoencoder": autoencoder_to_dict(ae, ae_config),
        "flow": flow_to_dict(flow, flow_config),
        "score_mode": score_config.mode,
        "score_alpha": score_config.alpha,
        "score_standardization": asdict(std),
        "threshold": threshold,
        "threshold_quantile": threshold_quantile,
        "seed": seed,
    }


def pipeline_from_dict(data: dict):
    """Returns (ae, flow, score_config, threshold)."""
    _check_kind(data, "pipeline")
    ae = autoencoder_from_dict(data["autoencoder"])
    flow = flow_from_dict(data["flow"])
    if ae.latent_dim != flow.dim:
        raise CheckpointError("pipeline checkpoint is inconsistent: autoencoder "
                              f"latent_dim {ae.latent_dim} vs flow dim {flow.dim}")
    score_config = ScoreConfig(
        mode=data["score_mode"],
        alpha=data["score_alpha"],
        standardization=ScoreStandardization(**data["score_standardization"]),
    )
    return ae, flow, score_config, data["threshold"]


def save_json(data: dict, path: Path | str) -> None:
    Path(path).write_text(
        json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_json(path: Path | str) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint file {path} does not exist")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(
            f"checkpoint {path} is not valid JSON: line {exc.lineno} "
            f"column {exc.colno}: {exc.msg}") from exc
