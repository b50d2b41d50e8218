"""Binary tensor records, checkpoints, and flat ``key.path = value`` configs.

Tensor record (little-endian)::

    b"TNSR"  u32 rank  u32[rank] extents  f64[prod(extents)] row-major payload

Checkpoint::

    b"SLCK"  u32 version  u32 config_bytes  utf-8 config text
    u32 count  count x [u32 name_bytes  utf-8 name  tensor record]
"""

from __future__ import annotations

import io as _io
import struct
from pathlib import Path

import numpy as np

from .data import SyntheticSpec, default_classes
from .losses import LossConfig
from .model import ModelConfig, ModelParams, init_params, named_tensors
from .tensor import Tensor
from .train import TrainConfig

TENSOR_MAGIC = b"TNSR"
CKPT_MAGIC = b"SLCK"
CKPT_VERSION = 1


class FormatError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def write_tensor(stream, value) -> None:
    data = np.asarray(value.data if isinstance(value, Tensor) else value, dtype="<f8", order="C")
    stream.write(TENSOR_MAGIC)
    stream.write(struct.pack(f"<I{data.ndim}I", data.ndim, *data.shape))
    stream.write(data.tobytes())


def _read_exact(stream, n: int, what: str) -> bytes:
    chunk = stream.read(n)
    if len(chunk) != n:
        raise FormatError(f"truncated {what}: wanted {n} bytes, got {len(chunk)}")
    return chunk


def read_tensor(stream) -> np.ndarray:
    if _read_exact(stream, 4, "tensor magic") != TENSOR_MAGIC:
        raise FormatError("bad tensor magic")
    (rank,) = struct.unpack("<I", _read_exact(stream, 4, "tensor rank"))
    shape = struct.unpack(f"<{rank}I", _read_exact(stream, 4 * rank, "tensor extents"))
    count = int(np.prod(shape, dtype=np.int64))
    payload = _read_exact(stream, 8 * count, "tensor payload")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)


def tensor_to_bytes(value) -> bytes:
    buf = _io.BytesIO()
    write_tensor(buf, value)
    return buf.getvalue()


def tensor_from_bytes(raw: bytes) -> np.ndarray:
    return read_tensor(_io.BytesIO(raw))


# --- configs -----------------------------------------------------------------

_MODEL_KEYS = {
    "model.d": int, "model.n_joints": int, "model.n_classes": int, "model.t_frames": int,
    "model.n_aug": int, "model.k_systems": int, "model.m1": int, "model.m2": int,
    "model.pool_every": int, "model.ratio": int, "model.dropout": float, "model.seed": int,
}
_TRAIN_KEYS = {
    "train.lr": float, "train.lr_decay": float, "train.epochs": int, "train.batch_size": int,
    "train.weight_decay": float, "train.beta1": float, "train.beta2": float, "train.eps": float,
    "train.seed": int,
}
_OTHER_KEYS = ("model.channels", "model.kernel", "attention.variant", "loss.kind", "loss.gamma",
               "loss.margin", "loss.epsilon", "train.augment", "seed")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key.path = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def configs_from_dict(values: dict[str, str], seed: int | None = None) -> tuple[ModelConfig, TrainConfig]:
    """Build model/train configs, naming any unknown or malformed key."""
    known = set(_MODEL_KEYS) | set(_TRAIN_KEYS) | set(_OTHER_KEYS)
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")

    def conv(key, fn):
        try:
            return fn(values[key])
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key}: {values[key]!r}") from exc

    model = {k.split(".", 1)[1]: conv(k, f) for k, f in _MODEL_KEYS.items() if k in values}
    trainkw = {k.split(".", 1)[1]: conv(k, f) for k, f in _TRAIN_KEYS.items() if k in values}
    if "model.channels" in values:
        model["channels"] = conv("model.channels", _ints)
    if "model.kernel" in values:
        ks = conv("model.kernel", _ints)
        model["kernel"] = ks[0] if len(ks) == 1 else ks
    if "attention.variant" in values:
        model["attention"] = values["attention.variant"]
    if "train.augment" in values:
        flag = values["train.augment"].lower()
        if flag not in ("true", "false"):
            raise ConfigError(f"invalid value for train.augment: {values['train.augment']!r}")
        trainkw["augment"] = flag == "true"
    base_seed = seed if seed is not None else (conv("seed", int) if "seed" in values else None)
    if base_seed is not None:
        model.setdefault("seed", base_seed)
        trainkw.setdefault("seed", base_seed)

    loss_keys = [k for k in values if k.startswith("loss.")]
    if loss_keys:
        kind = values.get("loss.kind", "SMFL")
        gamma = conv("loss.gamma", float) if "loss.gamma" in values else (2.0 if kind in ("FL", "SMFL") else 0.0)
        margin = conv("loss.margin", float) if "loss.margin" in values else (0.4 if kind in ("SMCE", "SMFL") else 0.0)
        extra = {"epsilon": conv("loss.epsilon", float)} if "loss.epsilon" in values else {}
        try:
            model["loss"] = LossConfig(kind, gamma, margin, **extra)
        except ValueError as exc:
            raise ConfigError(f"invalid loss.* settings: {exc}") from exc
    try:
        return ModelConfig(**model), TrainConfig(**trainkw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, seed: int | None = None) -> tuple[ModelConfig, TrainConfig]:
    return configs_from_dict(parse_config_text(Path(path).read_text(encoding="utf-8")), seed)


def config_to_dict(model: ModelConfig, train: TrainConfig | None = None) -> dict[str, str]:
    out = {k: repr(getattr(model, k.split(".", 1)[1])) for k in _MODEL_KEYS}
    out["model.channels"] = ",".join(str(c) for c in model.channels)
    out["model.kernel"] = str(model.kernel) if isinstance(model.kernel, int) else \
        ",".join(str(k) for k in model.kernels)
    out["attention.variant"] = model.attention
    out["loss.kind"] = model.loss.kind
    out["loss.gamma"] = repr(model.loss.gamma)
    out["loss.margin"] = repr(model.loss.margin)
    out["loss.epsilon"] = repr(model.loss.epsilon)
    if train is not None:
        out.update({k: repr(getattr(train, k.split(".", 1)[1])) for k in _TRAIN_KEYS})
        out["train.augment"] = "true" if train.augment else "false"
    return out


def format_config(values: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())


_DATA_KEYS = {
    "data.t_raw": int, "data.n_joints": int, "data.d": int, "data.samples_per_class": int,
    "data.test_samples_per_class": int, "data.noise": float, "data.amplitude_jitter": float,
    "data.phase_jitter": float, "data.pose_scale": float, "data.pose_seed": int, "data.seed": int,
}


def data_spec_from_dict(values: dict[str, str], seed: int | None = None) -> tuple[SyntheticSpec, int]:
    """Synthetic-set spec plus the per-class test count. Class definitions are
    the defaults for the configured joint count."""
    unknown = sorted(set(values) - set(_DATA_KEYS))
    if unknown:
        raise ConfigError(f"unknown data key(s): {', '.join(unknown)}")
    kw = {}
    for key, fn in _DATA_KEYS.items():
        if key in values:
            try:
                kw[key[5:]] = fn(values[key])
            except ValueError as exc:
                raise ConfigError(f"invalid value for {key}: {values[key]!r}") from exc
    test_n = kw.pop("test_samples_per_class", 50)
    if seed is not None:
        kw["seed"] = seed
    if kw.get("d", 2) < 2:
        raise ConfigError("data.d must be at least 2")
    if "n_joints" in kw:
        if kw["n_joints"] < 2:
            raise ConfigError("data.n_joints must be at least 2")
        kw["classes"] = default_classes(kw["n_joints"])
    try:
        return SyntheticSpec(**kw), test_n
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# --- checkpoints -------------------------------------------------------------


def save_checkpoint(path, params: ModelParams, model_cfg: ModelConfig,
                    train_cfg: TrainConfig | None = None) -> None:
    text = format_config(config_to_dict(model_cfg, train_cfg)).encode("utf-8")
    named = named_tensors(params)
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<II", CKPT_VERSION, len(text)))
        f.write(text)
        f.write(struct.pack("<I", len(named)))
        for name, t in named:
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            write_tensor(f, t)


def load_checkpoint(path) -> tuple[ModelParams, ModelConfig, TrainConfig]:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "checkpoint magic") != CKPT_MAGIC:
            raise FormatError("not a checkpoint file")
        version, n_text = struct.unpack("<II", _read_exact(f, 8, "checkpoint header"))
        if version != CKPT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        model_cfg, train_cfg = configs_from_dict(
            parse_config_text(_read_exact(f, n_text, "config").decode("utf-8")))
        params = init_params(model_cfg)
        slots = dict(named_tensors(params))
        (count,) = struct.unpack("<I", _read_exact(f, 4, "record count"))
        for _ in range(count):
            (n_name,) = struct.unpack("<I", _read_exact(f, 4, "name length"))
            name = _read_exact(f, n_name, "name").decode("utf-8")
            value = read_tensor(f)
            if name not in slots:
                raise FormatError(f"checkpoint tensor {name!r} does not fit the configured model")
            if slots[name].shape != value.shape:
                raise FormatError(f"shape mismatch for {name}: {value.shape} vs {slots[name].shape}")
            slots[name].data = value.copy()
    return params, model_cfg, train_cfg
