"""Dataset loading: PGM decoding, bilinear resize, label parsing.

On-disk layout of a scenario:

    <scenario>/train/*.pgm     normal frames only
    <scenario>/val/*.pgm       normal frames only
    <scenario>/test/*.pgm      normal and anomalous frames
    <scenario>/labels.csv      one row per test file (may also cover
                               train/val files to assert their normality)

Train and validation splits must contain only normal samples; this is
enforced at load time, never assumed.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ContractViolationError, IOFailure, ParseError, ProtocolViolationError

FRAME_SIDE = 64
FRAME_PIXELS = FRAME_SIDE * FRAME_SIDE
FRAME_RATE = 30  # capture rate, frames per second

LEVELS = ("sensory", "semantic")
YES_NO = ("yes", "no")
MISSION = ("yes", "no", "unspecified")

LABELS_HEADER = ["filename", "label", "anomaly_type", "level", "hazard",
                 "geometric", "mission_relevant"]


@dataclass(frozen=True)
class AnomalyLabel:
    """Four-axis categorization of an anomalous sample."""

    anomaly_type: str
    level: str                     # sensory | semantic
    hazard: str                    # yes | no
    geometric: str                 # yes | no
    mission_relevant: str = "unspecified"  # yes | no | unspecified

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ContractViolationError(f"invalid level {self.level!r}")
        if self.hazard not in YES_NO:
            raise ContractViolationError(f"invalid hazard {self.hazard!r}")
        if self.geometric not in YES_NO:
            raise ContractViolationError(f"invalid geometric {self.geometric!r}")
        if self.mission_relevant not in MISSION:
            raise ContractViolationError(
                f"invalid mission_relevant {self.mission_relevant!r}")


@dataclass
class Frame:
    """One 64x64 grayscale image normalized to [0, 1]."""

    pixels: np.ndarray           # (64, 64) float64 in [0, 1]
    source_id: str = ""
    timestamp: int = 0           # frame number at 30 fps
    label: Optional[AnomalyLabel] = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.shape != (FRAME_SIDE, FRAME_SIDE):
            raise ContractViolationError(
                f"Frame: pixels shape {self.pixels.shape}, expected "
                f"({FRAME_SIDE}, {FRAME_SIDE})")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ContractViolationError("Frame: pixel values must lie in [0, 1]")

    @property
    def is_anomalous(self) -> bool:
        return self.label is not None

    def flat(self) -> np.ndarray:
        return self.pixels.reshape(FRAME_PIXELS)


@dataclass
class ScenarioDataset:
    name: str
    train: list[Frame]
    val: list[Frame]
    test: list[Frame]
    taxonomy: dict[str, AnomalyLabel] = field(default_factory=dict)

    def validate(self) -> None:
        for split_name, split in (("train", self.train), ("val", self.val)):
            for frame in split:
                if frame.is_anomalous:
                    raise ProtocolViolationError(
                        f"{split_name} split contains anomalous frame "
                        f"{frame.source_id!r}")
        if not any(not f.is_anomalous for f in self.test):
            raise ProtocolViolationError("test split has no normal frame")
        if not any(f.is_anomalous for f in self.test):
            raise ProtocolViolationError("test split has no anomalous frame")
        for frame in self.test:
            if frame.label is not None and frame.label.anomaly_type not in self.taxonomy:
                raise ProtocolViolationError(
                    f"anomaly type {frame.label.anomaly_type!r} of "
                    f"{frame.source_id!r} missing from taxonomy table")


# ---------------------------------------------------------------------------
# PGM (P5) codec.  Binary PGM with maxval 255 is the canonical on-disk
# format: it round-trips bit-exactly with no external decoder.

def decode_pgm(data: bytes):
    """Decode a binary PGM (P5, maxval 255) into a float image in [0, 1].

    Returns (pixels, width, height) with pixels shaped (height, width).
    """
    if data[:2] != b"P5":
        raise ParseError("not a binary PGM: missing 'P5' magic at byte 0")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if pos == start:
            raise ParseError(f"truncated PGM header at byte {pos}")
        token = data[start:pos]
        if not token.isdigit():
            raise ParseError(f"bad PGM header token {token!r} at byte {start}")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ParseError(f"bad PGM dimensions {width}x{height}")
    if maxval != 255:
        raise ParseError(f"unsupported PGM maxval {maxval} (expected 255)")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos:pos + width * height]
    if len(payload) != width * height:
        raise ParseError(
            f"truncated PGM payload at byte {pos + len(payload)}: expected "
            f"{width * height} pixel bytes, got {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return pixels.reshape(height, width), width, height


def encode_pgm(pixels: np.ndarray) -> bytes:
    """Encode a [0, 1] float image as binary PGM, rounding to 8 bits."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 2 or pixels.size == 0:
        raise ContractViolationError("encode_pgm: need a non-empty 2-D image")
    quantized = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    buf = io.BytesIO()
    buf.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
    buf.write(quantized.tobytes())
    return buf.getvalue()


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299 R + 0.587 G + 0.114 B) for color adapters."""
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ContractViolationError("rgb_to_gray: expected (h, w, 3) image")
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


# ---------------------------------------------------------------------------
# Bilinear resize with edge clamping.

def resize_bilinear(image: np.ndarray, out_h: int = FRAME_SIDE,
                    out_w: int = FRAME_SIDE) -> np.ndarray:
    """Resize with pixel-center alignment and edge clamping.

    Source coordinate of output pixel j is (j + 0.5) * in/out - 0.5,
    clamped into the valid range.  A same-size input is returned unchanged.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] < 1 or image.shape[1] < 1:
        raise ContractViolationError("resize_bilinear: need a non-empty 2-D image")
    in_h, in_w = image.shape
    if (in_h, in_w) == (out_h, out_w):
        return image.copy()

    def axis_coords(n_in: int, n_out: int):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(np.int64)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = src - lo
        return lo, hi, frac

    y0, y1, fy = axis_coords(in_h, out_h)
    x0, x1, fx = axis_coords(in_w, out_w)
    top = image[np.ix_(y0, x0)] * (1 - fx) + image[np.ix_(y0, x1)] * fx
    bot = image[np.ix_(y1, x0)] * (1 - fx) + image[np.ix_(y1, x1)] * fx
    return top * (1 - fy[:, None]) + bot * fy[:, None]


# ---------------------------------------------------------------------------
# Label CSV parsing.

def parse_labels(data: bytes) -> dict[str, Optional[AnomalyLabel]]:
    """Parse labels.csv; value None means the file is labeled normal."""
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"labels.csv is not valid UTF-8: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or rows[0] != LABELS_HEADER:
        raise ParseError(
            f"labels.csv header must be exactly {','.join(LABELS_HEADER)}")
    out: dict[str, Optional[AnomalyLabel]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(LABELS_HEADER):
            raise ParseError(f"labels.csv line {lineno}: expected "
                             f"{len(LABELS_HEADER)} columns, got {len(row)}")
        filename, label, atype, level, hazard, geometric, mission = row
        if filename in out:
            raise ParseError(f"labels.csv line {lineno}: duplicate filename "
                             f"{filename!r}")
        if label == "normal":
            if any((atype, level, hazard, geometric, mission)):
                raise ParseError(f"labels.csv line {lineno}: normal rows must "
                                 "leave axis columns empty")
            out[filename] = None
        elif label == "anomalous":
            mission = mission or "unspecified"
            for col, value, allowed in (("level", level, LEVELS),
                                        ("hazard", hazard, YES_NO),
                                        ("geometric", geometric, YES_NO),
                                        ("mission_relevant", mission, MISSION)):
                if value not in allowed:
                    raise ParseError(f"labels.csv line {lineno}: invalid "
                                     f"{col} value {value!r}")
            if not atype:
                raise ParseError(f"labels.csv line {lineno}: anomalous row "
                                 "missing anomaly_type")
            out[filename] = AnomalyLabel(atype, level, hazard, geometric, mission)
        else:
            raise ParseError(f"labels.csv line {lineno}: label must be "
                             f"'normal' or 'anomalous', got {label!r}")
    return out


# ---------------------------------------------------------------------------
# Scenario loading.

_TRAILING_INT = re.compile(r"(\d+)\D*$")


def _timestamp_of(filename: str) -> int:
    m = _TRAILING_INT.search(filename)
    return int(m.group(1)) if m else 0


def _load_split(split_dir: Path, labels: dict[str, Optional[AnomalyLabel]],
                split_name: str) -> list[Frame]:
    if not split_dir.is_dir():
        raise IOFailure(f"missing split directory {split_dir}")
    frames = []
    for path in sorted(split_dir.glob("*.pgm"), key=lambda p: (_timestamp_of(p.name), p.name)):
        pixels, width, height = decode_pgm(path.read_bytes())
        if (height, width) != (FRAME_SIDE, FRAME_SIDE):
            pixels = resize_bilinear(pixels)
        label = labels.get(path.name)
        if split_name in ("train", "val"):
            if label is not None:
                raise ProtocolViolationError(
                    f"{split_name}/{path.name} is labeled anomalous; train and "
                    "val must contain only normal samples")
        elif split_name == "test" and path.name not in labels:
            raise IOFailure(f"test file {path.name} has no labels.csv entry")
        frames.append(Frame(np.clip(pixels, 0.0, 1.0),
                            source_id=f"{split_name}/{path.name}",
                            timestamp=_timestamp_of(path.name),
                            label=label))
    return frames


def load_scenario(root: Path | str) -> ScenarioDataset:
    """Load a scenario directory and enforce the split protocol."""
    root = Path(root)
    if not root.is_dir():
        raise IOFailure(f"scenario directory {root} does not exist")
    labels_path = root / "labels.csv"
    if not labels_path.is_file():
        raise IOFailure(f"missing labels file {labels_path}")
    labels = parse_labels(labels_path.read_bytes())

    dataset = ScenarioDataset(
        name=root.name,
        train=_load_split(root / "train", labels, "train"),
        val=_load_split(root / "val", labels, "val"),
        test=_load_split(root / "test", labels, "test"),
    )
    for frame in dataset.test:
        if frame.label is not None:
            dataset.taxonomy.setdefault(frame.label.anomaly_type, frame.label)
    dataset.validate()
    return dataset
