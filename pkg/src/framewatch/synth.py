"""Deterministic synthetic scenario generator.

Produces corridor-like normal frames (vertical luminance gradient plus a
sinusoidal wall texture, small horizontal shifts and pixel noise) and
three anomaly archetypes spanning the taxonomy quadrants:

    dim_light    sensory, non-hazard, non-geometric (global darkening)
    blob         semantic, hazard, geometric (unexpected object)
    sensor_noise sensory, non-hazard, non-geometric (salt-and-pepper)

Everything is a pure function of the SynthSpec: each frame gets its own
RNG stream derived from (seed, frame id), so a regenerated dataset is
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data_io import (FRAME_SIDE, AnomalyLabel, Frame, ScenarioDataset,
                      encode_pgm, load_scenario)
from .errors import ConfigError, IOFailure
from .rng import RngStream

ANOMALY_KINDS = ("dim_light", "blob", "sensor_noise")

ANOMALY_LABELS = {
    "dim_light": AnomalyLabel("dim_light", "sensory", "no", "no"),
    "blob": AnomalyLabel("blob", "semantic", "yes", "yes"),
    "sensor_noise": AnomalyLabel("sensor_noise", "sensory", "no", "no"),
}

GRADIENT_TOP = 0.2
GRADIENT_BOTTOM = 0.8
TEXTURE_AMPLITUDE = 0.05
TEXTURE_PERIOD = 16.0
NOISE_SIGMA = 0.02
MAX_SHIFT = 2


@dataclass
class SynthSpec:
    seed: int = 7
    n_train: int = 400
    n_val: int = 200
    n_test_normal: int = 50
    n_per_anomaly: dict[str, int] = field(
        default_factory=lambda: {k: 20 for k in ANOMALY_KINDS})
    brightness_delta: float = -0.4
    blob_width: int = 16
    blob_height: int = 16
    blob_intensity: float = 0.95
    noise_p: float = 0.05

    def __post_init__(self):
        counts = [self.n_train, self.n_val, self.n_test_normal,
                  *self.n_per_anomaly.values()]
        if any(c < 0 for c in counts):
            raise ConfigError("all sample counts must be >= 0")
        if not 0.0 <= self.noise_p <= 1.0:
            raise ConfigError("noise_p must lie in [0, 1]")
        for kind in self.n_per_anomaly:
            if kind not in ANOMALY_KINDS:
                raise ConfigError(f"unknown anomaly kind {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError("synth spec must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown synth spec keys: {sorted(unknown)}")
        return cls(**data)


def generate_normal(rng: RngStream, t: int) -> Frame:
    """One normal frame for index t, deterministic given the stream."""
    rows = np.linspace(GRADIENT_TOP, GRADIENT_BOTTOM, FRAME_SIDE)[:, None]
    shift = int(rng.integers(-MAX_SHIFT, MAX_SHIFT, 1)[0])
    cols = np.arange(FRAME_SIDE) + shift
    texture = TEXTURE_AMPLITUDE * np.sin(2.0 * np.pi * cols / TEXTURE_PERIOD)[None, :]
    noise = NOISE_SIGMA * rng.gaussian(FRAME_SIDE * FRAME_SIDE).reshape(
        FRAME_SIDE, FRAME_SIDE)
    pixels = np.clip(rows + texture + noise, 0.0, 1.0)
    return Frame(pixels, timestamp=t)


def apply_anomaly(frame: Frame, kind: str, spec: SynthSpec,
                  rng: RngStream) -> tuple[Frame, AnomalyLabel]:
    """Overlay one anomaly archetype on a normal frame."""
    pixels = frame.pixels.copy()
    if kind == "dim_light":
        pixels = np.clip(pixels + spec.brightness_delta, 0.0, 1.0)
    elif kind == "blob":
        top = int(rng.integers(0, FRAME_SIDE - spec.blob_height, 1)[0])
        left = int(rng.integers(0, FRAME_SIDE - spec.blob_width, 1)[0])
        pixels[top:top + spec.blob_height, left:left + spec.blob_width] = \
            spec.blob_intensity
    elif kind == "sensor_noise":
        u = rng.uniform(FRAME_SIDE * FRAME_SIDE).reshape(FRAME_SIDE, FRAME_SIDE)
        coin = rng.uniform(FRAME_SIDE * FRAME_SIDE).reshape(FRAME_SIDE, FRAME_SIDE)
        flip = u < spec.noise_p
        pixels = np.where(flip, np.where(coin < 0.5, 0.0, 1.0), pixels)
    else:
        raise ConfigError(f"unknown anomaly kind {kind!r}")
    label = ANOMALY_LABELS[kind]
    return Frame(pixels, source_id=frame.source_id, timestamp=frame.timestamp,
                 label=label), label


# Disjoint stream-id ranges per split so frame content is independent of
# generation order.
_SPLIT_BASE = {"train": 0, "val": 1_000_000, "test": 2_000_000}
_ANOMALY_BASE = 3_000_000


def generate_scenario(spec: SynthSpec, out_dir: Path | str) -> ScenarioDataset:
    """Write a full scenario in the data-io layout and reload it."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        root_rng = RngStream(spec.seed)

        label_rows = []
        for split, count in (("train", spec.n_train), ("val", spec.n_val)):
            split_dir = out_dir / split
            split_dir.mkdir(exist_ok=True)
            for t in range(count):
                frame = generate_normal(root_rng.derive(_SPLIT_BASE[split] + t), t)
                (split_dir / f"{split}_{t:05d}.pgm").write_bytes(
                    encode_pgm(frame.pixels))

        test_dir = out_dir / "test"
        test_dir.mkdir(exist_ok=True)
        t = 0
        for _ in range(spec.n_test_normal):
            frame = generate_normal(root_rng.derive(_SPLIT_BASE["test"] + t), t)
            name = f"test_{t:05d}.pgm"
            (test_dir / name).write_bytes(encode_pgm(frame.pixels))
            label_rows.append([name, "normal", "", "", "", "", ""])
            t += 1
        for kind in ANOMALY_KINDS:
            for _ in range(spec.n_per_anomaly.get(kind, 0)):
                base = generate_normal(root_rng.derive(_SPLIT_BASE["test"] + t), t)
                anomalous, label = apply_anomaly(
                    base, kind, spec, root_rng.derive(_ANOMALY_BASE + t))
                name = f"test_{t:05d}.pgm"
                (test_dir / name).write_bytes(encode_pgm(anomalous.pixels))
                label_rows.append([name, "anomalous", label.anomaly_type,
                                   label.level, label.hazard, label.geometric,
                                   label.mission_relevant])
                t += 1

        lines = ["filename,label,anomaly_type,level,hazard,geometric,mission_relevant"]
        lines += [",".join(row) for row in label_rows]
        (out_dir / "labels.csv").write_text("\n".join(lines) + "\n",
                                            encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write scenario to {out_dir}: {exc}") from exc
    return load_scenario(out_dir)


def generate_stream(spec: SynthSpec, out_dir: Path | str, n_normal: int,
                    anomaly_kind: str | None = None, n_anomalous: int = 0,
                    stream_seed: int | None = None) -> None:
    """Write a frame stream (for monitor simulation): normal frames,
    optionally followed by sustained anomalous frames."""
    out_dir = Path(out_dir)
    seed = spec.seed if stream_seed is None else stream_seed
    rng = RngStream(seed)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for t in range(n_normal + n_anomalous):
            frame = generate_normal(rng.derive(t), t)
            if t >= n_normal:
                frame, _ = apply_anomaly(frame, anomaly_kind or "blob", spec,
                                         rng.derive(_ANOMALY_BASE + t))
            (out_dir / f"frame_{t:06d}.pgm").write_bytes(encode_pgm(frame.pixels))
    except OSError as exc:
        raise IOFailure(f"cannot write stream to {out_dir}: {exc}") from exc
