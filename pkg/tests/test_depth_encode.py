import json
import logging
from collections import Counter

import numpy as np
import pytest

from models.frames import DepthFrame
from processor.depth_encode import (
    UNCOVERED_VALUE,
    ColormapLUT,
    augment_scale_shift,
    colorize,
    decode,
    encode_depth_video,
    normalize_log,
    sequence_range,
)
from utils.errors import AugmentationError, NoDataError


def _frames(*grids):
    return [DepthFrame.from_array(np.asarray(g, dtype=np.float64)) for g in grids]


def test_log_normalization_endpoints_and_midpoint():
    mid = np.sqrt(0.5 * 100.0)
    (a,) = normalize_log(_frames([[0.5, mid, 100.0]]))
    assert a[0, 0] == 0.0
    assert a[0, 2] == 1.0
    assert a[0, 1] == pytest.approx(0.5, abs=1e-12)


def test_range_spans_the_whole_sequence():
    video = _frames([[2.0, 4.0]], [[8.0, 4.0]])
    first, second = normalize_log(video)
    assert first[0, 0] == 0.0
    assert second[0, 0] == 1.0
    assert first[0, 1] == pytest.approx(0.5, abs=1e-12)
    assert sequence_range(video) == (2.0, 8.0)


def test_depths_are_clipped_to_near_far():
    (out,) = normalize_log(_frames([[0.1, 1.0, 500.0]]), near=0.5, far=100.0)
    assert out[0, 0] == 0.0
    assert out[0, 2] == 1.0
    assert out[0, 1] == pytest.approx(np.log(2.0) / np.log(200.0), abs=1e-12)


def test_constant_depth_maps_to_midpoint():
    for frame in normalize_log(_frames(np.full((3, 3), 7.0), np.full((3, 3), 7.0))):
        assert (frame == 0.5).all()


def test_invalid_pixels_get_the_far_value():
    frame = DepthFrame(np.array([[1.0, 2.0], [4.0, 0.0]]), np.array([[True, True], [True, False]]))
    (out,) = normalize_log([frame])
    assert out[1, 1] == UNCOVERED_VALUE


def test_uniform_scaling_cancels_without_clipping(rng):
    depth = rng.uniform(0.5, 50.0, size=(5, 6))
    base = normalize_log(_frames(depth), near=1e-9, far=1e12)[0]
    scaled = normalize_log(_frames(depth * 3.7), near=1e-9, far=1e12)[0]
    np.testing.assert_allclose(base, scaled, rtol=0, atol=1e-12)


def test_normalization_errors():
    with pytest.raises(NoDataError):
        normalize_log([])
    with pytest.raises(ValueError):
        normalize_log(_frames([[1.0]]), near=0.0)
    with pytest.raises(NoDataError):
        normalize_log([DepthFrame(np.ones((2, 2)), np.zeros((2, 2), dtype=bool))])


def test_builtin_colormap_table():
    lut = ColormapLUT.spectral_r()
    assert lut.entries.shape == (256, 3)
    assert lut.entries[0].tolist() == [94, 79, 162]
    assert lut.entries[-1].tolist() == [158, 1, 66]
    assert lut.name == "spectral_r"


def test_colormap_validation(tmp_path):
    with pytest.raises(ValueError):
        ColormapLUT(np.zeros((255, 3)))
    with pytest.raises(ValueError):
        ColormapLUT(np.zeros((256, 3)))
    ramp = [[i, 255 - i, 0] for i in range(256)]
    path = tmp_path / "ramp.json"
    path.write_text(json.dumps(ramp))
    lut = ColormapLUT.from_file(path)
    assert lut.name == "ramp"
    assert lut.entries[10].tolist() == [10, 245, 0]


def test_colorize_endpoints_hit_table_entries():
    lut = ColormapLUT.spectral_r()
    rgb = colorize(np.array([0.0, 1.0]), lut)
    assert np.array_equal(rgb[0], lut.unit[0])
    assert np.array_equal(rgb[1], lut.unit[255])


def test_colorize_decode_round_trip(rng):
    lut = ColormapLUT.spectral_r()
    values = rng.random(1000)
    recovered = decode(colorize(values, lut), lut)
    assert np.max(np.abs(recovered - values)) <= 1.0 / 510.0


def test_out_of_range_values_are_clamped_and_counted(caplog):
    lut = ColormapLUT.spectral_r()
    counters = Counter()
    with caplog.at_level(logging.WARNING):
        rgb = colorize(np.array([-0.5, 1.5, np.nan, 0.5]), lut, counters)
    assert counters["clamped"] == 3
    assert "clamped 3" in caplog.text
    assert np.array_equal(rgb[0], lut.unit[0])
    assert np.array_equal(rgb[1], lut.unit[255])
    assert ((rgb >= 0) & (rgb <= 1)).all()


def test_identity_augmentation():
    video = _frames([[1.0, 2.0], [3.0, 4.0]])
    out, (a, c) = augment_scale_shift(video, rng_seed=3, scale_range=(1.0, 1.0), shift_range=(0.0, 0.0))
    assert (a, c) == (1.0, 0.0)
    assert np.array_equal(out[0].values, video[0].values)


def test_fixed_scale_augmentation():
    out, _ = augment_scale_shift(_frames([[3.0]]), rng_seed=0, scale_range=(2.0, 2.0), shift_range=(0.0, 0.0))
    assert out[0].values[0, 0] == 6.0


def test_augmentation_is_deterministic_per_seed(rng):
    video = _frames(rng.uniform(1.0, 5.0, size=(4, 4)), rng.uniform(1.0, 5.0, size=(4, 4)))
    a, params_a = augment_scale_shift(video, rng_seed=11)
    b, params_b = augment_scale_shift(video, rng_seed=11)
    _, params_c = augment_scale_shift(video, rng_seed=12)
    assert params_a == params_b
    assert params_a != params_c
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)


def test_augmentation_gives_up_when_depth_cannot_stay_positive():
    with pytest.raises(AugmentationError):
        augment_scale_shift(_frames([[1.0]]), rng_seed=0, shift_range=(-5.0, -4.0), retries=5)
    with pytest.raises(ValueError):
        augment_scale_shift(_frames([[1.0]]), rng_seed=0, scale_range=(2.0, 1.0))


def test_encode_depth_video(rng):
    depth = rng.uniform(1.0, 10.0, size=(6, 8))
    depth[0, 0], depth[5, 7] = 1.0, 10.0
    encoded = encode_depth_video(_frames(depth, depth[::-1]))
    lut = ColormapLUT.spectral_r()
    assert len(encoded.frames) == 2
    assert encoded.frames[0].shape == (6, 8, 3)
    assert encoded.frames[0].dtype == np.uint8
    assert encoded.frames[0][0, 0].tolist() == lut.entries[0].tolist()
    assert encoded.frames[0][5, 7].tolist() == lut.entries[255].tolist()
    assert encoded.sidecar() == {"norm_min": 1.0, "norm_max": 10.0, "augment": None, "clamped_pixels": 0}


def test_encode_records_augmentation():
    encoded = encode_depth_video(_frames([[1.0, 2.0]]), augment_seed=5)
    sidecar = encoded.sidecar()
    assert set(sidecar["augment"]) == {"scale", "shift"}
    a, c = encoded.augment
    assert sidecar["norm_min"] == pytest.approx(a * 1.0 + c)
