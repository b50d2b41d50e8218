import struct
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slnl.data import (MAGIC, ClassSpec, DatasetFormatError, Oscillator, SkeletonSequence, SyntheticSpec,
                       crop_window, default_classes, default_splits, generate, load_dataset, preprocess,
                       resize_time, save_dataset, stack)
from slnl.experiments import frequency_pair_splits


def test_constant_class_without_noise_reproduces_the_base_pose():
    spec = SyntheticSpec(classes=(ClassSpec("still", (Oscillator((0, 1), 0, 3.0, amplitude=0.0),)),),
                         noise=0.0, samples_per_class=3, t_raw=10)
    pose = spec.base_pose()
    for s in generate(spec):
        np.testing.assert_array_equal(s.data, np.repeat(pose[:, None, :], 10, axis=1))


def test_generation_is_deterministic_and_streams_differ():
    spec = SyntheticSpec(samples_per_class=2)
    a, b = generate(spec), generate(spec)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u.data, v.data)
        assert u.label == v.label
    assert not np.array_equal(generate(spec, stream=1)[0].data, a[0].data)
    assert not np.array_equal(generate(replace(spec, seed=7))[0].data, a[0].data)


def test_samples_are_ordered_by_class_with_default_shapes():
    train, test = default_splits()
    assert len(train) == 800 and len(test) == 200
    assert [s.label for s in train[::200]] == [0, 1, 2, 3]
    assert train[0].shape == (2, 80, 16)


def test_zero_classes_rejected():
    with pytest.raises(ValueError):
        generate(SyntheticSpec(classes=()))


def test_default_classes_isolate_frequency_and_joint_coupling():
    slow, fast, inp, anti = default_classes()
    strip = lambda c, **kw: [replace(o, **kw) for o in c.oscillators]  # noqa: E731
    assert strip(slow, frequency=0) == strip(fast, frequency=0)
    assert slow.oscillators[0].frequency != fast.oscillators[0].frequency
    assert strip(inp, phase=0) == strip(anti, phase=0)
    assert {o.joints for o in inp.oscillators} == {(0,), (15,)}


def test_mean_amplitude_spectrum_peaks_at_the_generating_frequency():
    spec = SyntheticSpec(classes=default_classes()[:2], samples_per_class=20)
    samples = generate(spec)
    for label, f in ((0, 2), (1, 5)):
        x = np.stack([s.data for s in samples if s.label == label])
        spectrum = np.abs(np.fft.rfft(x[:, 0, :, 1], axis=1)).mean(axis=0)
        assert np.argmax(spectrum[1:]) + 1 == f


def amplitude_features(samples):
    x = np.stack([s.data for s in samples])
    return np.abs(np.fft.rfft(x, axis=2))[:, :, 1:, :].mean(axis=(1, 3))


def test_nearest_centroid_on_amplitude_spectra_separates_the_frequency_pair():
    for seed in (100, 101, 102):
        train, test = frequency_pair_splits(seed)
        f_train, f_test = amplitude_features(train), amplitude_features(test)
        y_train = np.array([s.label for s in train])
        y_test = np.array([s.label for s in test])
        centroids = np.stack([f_train[y_train == c].mean(axis=0) for c in (0, 1)])
        pred = np.argmin(((f_test[:, None] - centroids[None]) ** 2).sum(axis=2), axis=1)
        assert (pred == y_test).mean() >= 0.95


# --- preprocessing ------------------------------------------------------------


def test_eval_crop_is_the_central_ninety_five_percent():
    assert crop_window(100, "eval") == (2, 95)
    x = np.arange(100.0)[None, :, None] * np.ones((2, 1, 3))
    out = preprocess(x, "eval", t_frames=95)
    np.testing.assert_array_equal(out, x[:, 2:97])


def test_full_crop_at_native_length_is_identity(rng):
    x = rng.normal(size=(2, 16, 4))
    np.testing.assert_array_equal(preprocess(x, "eval", t_frames=16, ratio=1.0), x)
    np.testing.assert_array_equal(preprocess(x, "train", rng=0, t_frames=16, ratio=1.0), x)


def test_resize_keeps_a_linear_ramp_linear():
    t = np.arange(64.0)
    x = (3.0 * t - 7.0)[None, :, None] * np.ones((2, 1, 3))
    out = resize_time(x, 16)
    expect = 3.0 * np.linspace(0, 63, 16) - 7.0
    assert np.abs(out - expect[None, :, None]).max() < 1e-9


@given(st.integers(4, 200), st.integers(0, 2 ** 32 - 1))
def test_train_crops_stay_within_bounds(t_raw, seed):
    start, length = crop_window(t_raw, "train", np.random.default_rng(seed))
    assert 0 <= start and start + length <= t_raw
    assert length >= 2


def test_degenerate_crop_falls_back_to_the_whole_sequence():
    assert crop_window(4, "train", 0, ratio=0.1) == (0, 4)
    assert crop_window(4, "eval", ratio=0.2) == (0, 4)


def test_preprocessing_is_a_pure_function_of_the_seed(rng):
    s = SkeletonSequence(rng.normal(size=(2, 40, 5)), 0)
    a = preprocess(s, "train", np.random.default_rng(9))
    b = preprocess(s, "train", np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (2, 16, 5)


def test_preprocess_argument_errors(rng):
    with pytest.raises(ValueError):
        preprocess(rng.normal(size=(2, 3, 4)))
    with pytest.raises(ValueError):
        crop_window(10, "test")


def test_stack_builds_batches():
    train, _ = default_splits(samples_per_class=2)
    x, y = stack(train, "train", rng=0)
    assert x.shape == (8, 2, 16, 16)
    np.testing.assert_array_equal(y, [0, 0, 1, 1, 2, 2, 3, 3])


# --- file format --------------------------------------------------------------


def test_round_trip_is_exact(tmp_path):
    train, _ = default_splits(samples_per_class=3)
    path = tmp_path / "d.skds"
    save_dataset(path, train)
    back = load_dataset(path)
    assert len(back) == len(train)
    for u, v in zip(train, back):
        np.testing.assert_array_equal(u.data, v.data)
        assert u.label == v.label


def test_file_size_is_header_plus_payloads(tmp_path):
    train, _ = default_splits()
    path = tmp_path / "d.skds"
    save_dataset(path, train)
    assert path.stat().st_size == 12 + 800 * (16 + 8 * 2 * 80 * 16)


def test_truncation_raises_instead_of_returning_partial_data(tmp_path):
    train, _ = default_splits(samples_per_class=2)
    path = tmp_path / "d.skds"
    save_dataset(path, train)
    raw = path.read_bytes()
    for cut in (8, 20, len(raw) - 1):
        path.write_bytes(raw[:cut])
        with pytest.raises(DatasetFormatError):
            load_dataset(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "d.skds"
    save_dataset(path, [SkeletonSequence(np.zeros((2, 4, 2)), 0)])
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(DatasetFormatError, match="trailing"):
        load_dataset(path)


def test_bad_magic_and_version_report_their_offsets(tmp_path):
    path = tmp_path / "d.skds"
    path.write_bytes(b"XXXX" + struct.pack("<II", 1, 0))
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(path)
    assert err.value.offset == 0
    path.write_bytes(MAGIC + struct.pack("<II", 9, 0))
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(path)
    assert err.value.offset == 4
    assert "byte 4" in str(err.value)
