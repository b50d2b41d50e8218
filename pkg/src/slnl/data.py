"""Synthetic skeleton actions, crop/resize preprocessing, and the SKDS file format.

Every joint coordinate follows ``base pose + sum of sinusoids + noise``. The
default four classes pair up so that two differ only in oscillation frequency
and two differ only in the relative phase of two distant joints.

SKDS layout (little-endian)::

    b"SKDS"  u32 version (=1)  u32 count
    count x [u32 label  u32 d  u32 T  u32 N  f64[d*T*N] row-major payload]
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MAGIC = b"SKDS"
VERSION = 1
EVAL_CROP = 0.95
TRAIN_CROP = (0.5, 1.0)


@dataclass
class SkeletonSequence:
    data: np.ndarray  # (d, T, N)
    label: int

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class Oscillator:
    joints: tuple[int, ...]
    coord: int
    frequency: float  # cycles over the raw sequence
    amplitude: float = 1.0
    phase: float = 0.0  # offset added to the sample's random phase


@dataclass(frozen=True)
class ClassSpec:
    name: str
    oscillators: tuple[Oscillator, ...] = ()


def default_classes(n_joints: int = 16) -> tuple[ClassSpec, ...]:
    far = n_joints - 1
    limb = tuple(range(1, min(5, n_joints)))
    return (
        ClassSpec("slow", (Oscillator(limb, 0, 2.0), Oscillator(limb, 1, 2.0, 0.5, 0.5))),
        ClassSpec("fast", (Oscillator(limb, 0, 5.0), Oscillator(limb, 1, 5.0, 0.5, 0.5))),
        ClassSpec("in_phase", (Oscillator((0,), 0, 3.0), Oscillator((far,), 0, 3.0))),
        ClassSpec("anti_phase", (Oscillator((0,), 0, 3.0), Oscillator((far,), 0, 3.0, 1.0, math.pi))),
    )


@dataclass(frozen=True)
class SyntheticSpec:
    classes: tuple[ClassSpec, ...] = field(default_factory=default_classes)
    t_raw: int = 80
    n_joints: int = 16
    d: int = 2
    samples_per_class: int = 200
    noise: float = 0.1
    amplitude_jitter: float = 0.2
    phase_jitter: float = 2 * math.pi
    pose_scale: float = 1.0
    pose_seed: int = 0
    seed: int = 42

    def base_pose(self) -> np.ndarray:
        return np.random.default_rng(self.pose_seed).normal(0.0, self.pose_scale, (self.d, self.n_joints))


def generate(spec: SyntheticSpec, stream: int = 0) -> list[SkeletonSequence]:
    """Samples ordered by class; sample i of class c draws from seed
    (spec.seed, stream, c, i)."""
    if not spec.classes:
        raise ValueError("a synthetic spec needs at least one class")
    pose = spec.base_pose()
    t = np.arange(spec.t_raw) / spec.t_raw
    out = []
    for label, cls in enumerate(spec.classes):
        for i in range(spec.samples_per_class):
            rng = np.random.default_rng([spec.seed, stream, label, i])
            shift = rng.uniform(0.0, spec.phase_jitter)
            scale = 1.0 + rng.uniform(-spec.amplitude_jitter, spec.amplitude_jitter)
            x = np.repeat(pose[:, None, :], spec.t_raw, axis=1)
            for osc in cls.oscillators:
                wave = osc.amplitude * scale * np.sin(2 * np.pi * osc.frequency * t + osc.phase + shift)
                for j in osc.joints:
                    x[osc.coord, :, j] += wave
            if spec.noise:
                x = x + rng.normal(0.0, spec.noise, x.shape)
            out.append(SkeletonSequence(x, label))
    return out


def default_splits(seed: int = 42, **overrides) -> tuple[list[SkeletonSequence], list[SkeletonSequence]]:
    """The default 4-class set: 200 train and 50 test samples per class."""
    test_n = overrides.pop("test_samples_per_class", 50)
    spec = SyntheticSpec(seed=seed, **overrides)
    return generate(spec, stream=0), generate(replace(spec, samples_per_class=test_n), stream=1)


def crop_window(t_raw: int, mode: str, rng=None, ratio: float | None = None) -> tuple[int, int]:
    """(start, length) of the temporal crop."""
    if mode == "train":
        rng = np.random.default_rng(rng)
        if ratio is None:
            ratio = rng.uniform(*TRAIN_CROP)
        length = int(round(ratio * t_raw))
        if length < 2:
            return 0, t_raw
        start = int(rng.integers(0, t_raw - length + 1))
        return start, length
    if mode == "eval":
        length = int(round((EVAL_CROP if ratio is None else ratio) * t_raw))
        if length < 2:
            return 0, t_raw
        return (t_raw - length) // 2, length
    raise ValueError(f"unknown mode {mode!r}")


def resize_time(x: np.ndarray, t_out: int) -> np.ndarray:
    """Linear interpolation of (d, T, N) along T onto ``t_out`` evenly spaced
    frames, endpoints aligned."""
    t_in = x.shape[1]
    if t_in == t_out:
        return x.copy()
    pos = np.linspace(0.0, t_in - 1, t_out)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, t_in - 1)
    w = (pos - lo)[None, :, None]
    return x[:, lo, :] * (1.0 - w) + x[:, hi, :] * w


def preprocess(seq, mode: str = "eval", rng=None, t_frames: int = 16,
               ratio: float | None = None) -> np.ndarray:
    """Crop (random ratio in train mode, central 0.95 in eval mode) then
    resize to ``t_frames``. Scale normalization is left to the model."""
    x = seq.data if isinstance(seq, SkeletonSequence) else np.asarray(seq, dtype=np.float64)
    if x.shape[1] < 4:
        raise ValueError(f"sequences need at least 4 frames, got {x.shape[1]}")
    start, length = crop_window(x.shape[1], mode, rng, ratio)
    return resize_time(x[:, start:start + length, :], t_frames)


def stack(samples, mode: str = "eval", rng=None, t_frames: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Preprocess a list of sequences into a (B, d, T, N) batch and labels."""
    rng = np.random.default_rng(rng) if mode == "train" else None
    xs = [preprocess(s, mode, rng, t_frames) for s in samples]
    return np.stack(xs), np.array([s.label for s in samples], dtype=np.int64)


class DatasetFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def save_dataset(path, samples) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(samples))]
    for s in samples:
        d, t, n = s.data.shape
        chunks.append(struct.pack("<IIII", s.label, d, t, n))
        chunks.append(np.ascontiguousarray(s.data, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_dataset(path) -> list[SkeletonSequence]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise DatasetFormatError("bad magic, not an SKDS file", 0)
    if len(buf) < 12:
        raise DatasetFormatError("truncated header", len(buf))
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}", 4)
    pos = 12
    out = []
    for _ in range(count):
        if pos + 16 > len(buf):
            raise DatasetFormatError("truncated sample header", pos)
        label, d, t, n = struct.unpack_from("<IIII", buf, pos)
        pos += 16
        size = 8 * d * t * n
        if pos + size > len(buf):
            raise DatasetFormatError("truncated sample payload", pos)
        data = np.frombuffer(buf, dtype="<f8", count=d * t * n, offset=pos).reshape(d, t, n)
        out.append(SkeletonSequence(data.astype(np.float64), int(label)))
        pos += size
    if pos != len(buf):
        raise DatasetFormatError(f"{len(buf) - pos} trailing bytes", pos)
    return out
