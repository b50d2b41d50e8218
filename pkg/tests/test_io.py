import io
import struct

import numpy as np
import pytest

from slnl.io import (ConfigError, FormatError, config_to_dict, configs_from_dict, data_spec_from_dict,
                     format_config, load_checkpoint, load_config, parse_config_text, read_tensor,
                     save_checkpoint, tensor_from_bytes, tensor_to_bytes)
from slnl.losses import LossConfig
from slnl.model import ModelConfig, init_params, model_forward, named_tensors
from slnl.train import TrainConfig


@pytest.mark.parametrize("shape", [(), (0,), (3,), (2, 3, 4)])
def test_tensor_records_round_trip(rng, shape):
    x = rng.normal(size=shape)
    raw = tensor_to_bytes(x)
    assert len(raw) == 8 + 4 * len(shape) + 8 * x.size
    np.testing.assert_array_equal(tensor_from_bytes(raw), x)


def test_tensor_record_errors(rng):
    raw = tensor_to_bytes(rng.normal(size=(2, 2)))
    with pytest.raises(FormatError, match="truncated"):
        tensor_from_bytes(raw[:-3])
    with pytest.raises(FormatError, match="magic"):
        tensor_from_bytes(b"XXXX" + raw[4:])
    stream = io.BytesIO(raw + raw)
    read_tensor(stream)
    assert read_tensor(stream).shape == (2, 2)


def test_config_text_parsing():
    text = "# comment\nmodel.m1 = 1\n\nmodel.m2=3   # trailing\n"
    assert parse_config_text(text) == {"model.m1": "1", "model.m2": "3"}
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("just words")
    with pytest.raises(ConfigError):
        parse_config_text(" = 3")


def test_configs_from_keys():
    model, train = configs_from_dict({
        "model.m1": "1", "model.m2": "3", "model.channels": "8, 8, 16, 16", "model.kernel": "3",
        "attention.variant": "dfa", "loss.kind": "SMCE", "train.epochs": "7", "train.augment": "false",
        "seed": "5",
    })
    assert (model.m1, model.m2, model.attention, model.seed) == (1, 3, "dfa", 5)
    assert model.loss == LossConfig("SMCE", 0.0, 0.4)
    assert (train.epochs, train.augment, train.seed) == (7, False, 5)


def test_seed_flag_overrides_the_file_seed():
    model, train = configs_from_dict({"seed": "5"}, seed=9)
    assert model.seed == train.seed == 9


@pytest.mark.parametrize("values,needle", [
    ({"model.bogus": "1"}, "model.bogus"),
    ({"model.m1": "two"}, "model.m1"),
    ({"train.augment": "maybe"}, "train.augment"),
    ({"loss.kind": "CE", "loss.gamma": "2"}, "loss"),
    ({"model.m1": "1"}, r"m1 \+ m2"),
    ({"attention.variant": "xfa"}, "attention"),
])
def test_config_errors_name_the_key(values, needle):
    with pytest.raises(ConfigError, match=needle):
        configs_from_dict(values)


def test_config_dict_round_trip(tmp_path):
    model = ModelConfig(m1=1, m2=3, attention="sfa", loss=LossConfig.make("FL", 1.5), kernel=(3, 1, 3, 5))
    train = TrainConfig(epochs=3, augment=False, lr=0.01)
    path = tmp_path / "c.cfg"
    path.write_text(format_config(config_to_dict(model, train)))
    assert load_config(path) == (model, train)


def test_data_spec_keys():
    spec, test_n = data_spec_from_dict({"data.n_joints": "8", "data.noise": "0.5",
                                        "data.test_samples_per_class": "5"}, seed=3)
    assert (spec.n_joints, spec.noise, spec.seed, test_n) == (8, 0.5, 3, 5)
    assert spec.classes[2].oscillators[1].joints == (7,)
    for bad in ({"data.x": "1"}, {"data.d": "1"}, {"data.n_joints": "1"}, {"data.noise": "lots"}):
        with pytest.raises(ConfigError):
            data_spec_from_dict(bad)


def test_checkpoint_round_trip(tmp_path, rng):
    cfg = ModelConfig(n_joints=5, n_aug=6, t_frames=8, channels=(4, 4), m1=1, m2=1, attention="sfa")
    params = init_params(cfg, seed=3)
    for name, t in named_tensors(params):
        t.data = rng.normal(size=t.shape)
        if name.endswith("running_var"):
            t.data = np.abs(t.data) + 0.5
    path = tmp_path / "m.slck"
    save_checkpoint(path, params, cfg, TrainConfig(epochs=4))
    back, cfg2, train2 = load_checkpoint(path)
    assert cfg2 == cfg and train2.epochs == 4
    for (n1, a), (n2, b) in zip(named_tensors(params), named_tensors(back)):
        assert n1 == n2
        np.testing.assert_array_equal(a.data, b.data)
    assert back.position.attention.cos is back.position.attention.sin
    x = rng.normal(size=(2, 2, 8, 5))
    np.testing.assert_array_equal(model_forward(x, cfg, params)[2].data, model_forward(x, cfg2, back)[2].data)


def test_checkpoint_errors(tmp_path):
    cfg = ModelConfig(n_joints=5, n_aug=6, t_frames=8, channels=(4, 4), m1=1, m2=1)
    path = tmp_path / "m.slck"
    save_checkpoint(path, init_params(cfg), cfg)
    raw = path.read_bytes()
    path.write_bytes(raw[:-10])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(path)
    path.write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(FormatError):
        load_checkpoint(path)
    path.write_bytes(raw[:4] + struct.pack("<I", 7) + raw[8:])
    with pytest.raises(FormatError, match="version"):
        load_checkpoint(path)
