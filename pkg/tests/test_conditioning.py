import numpy as np
import pytest
from scipy import stats
from scipy.special import logit

from processor.conditioning import (
    as_latent,
    constant_weight,
    dual_stream_concat,
    logit_normal_weight,
    noise_interp,
    sample_timesteps,
    split_dual_stream,
    velocity_loss,
    velocity_target,
    view_inject,
)
from utils.errors import DimensionMismatchError


def _latent(rng, shape=(2, 3, 4, 5)):
    return rng.normal(size=shape)


def _scalar(value):
    return np.full((1, 1, 1, 1), float(value))


def test_noise_interp_endpoints_are_exact(rng):
    x, z = _latent(rng), _latent(rng)
    assert np.array_equal(noise_interp(x, z, 0.0), x)
    assert np.array_equal(noise_interp(x, z, 1.0), z)


def test_noise_interp_hand_value():
    assert noise_interp(_scalar(2.0), _scalar(4.0), 0.5).item() == 3.0


def test_noise_interp_is_affine_in_t(rng):
    x, z = _latent(rng), _latent(rng)
    mid = noise_interp(x, z, 0.5)
    np.testing.assert_allclose(mid, 0.5 * (noise_interp(x, z, 0.0) + noise_interp(x, z, 1.0)), atol=1e-12)


def test_per_item_timesteps(rng):
    x, z = _latent(rng), _latent(rng)
    out = noise_interp(x, z, np.array([0.0, 1.0]))
    np.testing.assert_allclose(out[0], x[0], atol=0)
    np.testing.assert_allclose(out[1], z[1], atol=0)
    with pytest.raises(DimensionMismatchError):
        noise_interp(x, z, np.array([0.1, 0.2, 0.3]))


def test_timestep_must_lie_in_unit_interval(rng):
    x, z = _latent(rng), _latent(rng)
    for t in (-0.1, 1.5, np.nan):
        with pytest.raises(ValueError):
            noise_interp(x, z, t)


def test_velocity_reconstruction_identities(rng):
    for _ in range(20):
        x, z = _latent(rng), _latent(rng)
        t = rng.random()
        x_t, v = noise_interp(x, z, t), velocity_target(x, z)
        np.testing.assert_allclose(x_t + (1.0 - t) * v, z, rtol=0, atol=1e-12)
        np.testing.assert_allclose(x_t - t * v, x, rtol=0, atol=1e-12)


def test_velocity_target_values(rng):
    x = _latent(rng)
    assert not velocity_target(x, x).any()
    assert velocity_target(_scalar(0.0), _scalar(1.0)).item() == 1.0


def test_dual_stream_doubles_frames_and_slices_back(rng):
    x_s, x_t = _latent(rng, (1, 21, 6, 4)), _latent(rng, (1, 21, 6, 4))
    tokens = dual_stream_concat(x_s, x_t)
    assert tokens.shape == (1, 42, 6, 4)
    src, tgt = split_dual_stream(tokens)
    assert np.array_equal(src, x_s)
    assert np.array_equal(tgt, x_t)
    assert src.tobytes() == x_s.tobytes()


def test_dual_stream_layout_by_hand():
    x_s = np.array([1.0, 2.0]).reshape(1, 1, 2, 1)
    x_t = np.array([3.0, 4.0]).reshape(1, 1, 2, 1)
    tokens = dual_stream_concat(x_s, x_t)
    assert tokens.shape == (1, 2, 2, 1)
    assert tokens.reshape(-1).tolist() == [1.0, 2.0, 3.0, 4.0]
    assert tokens[0, :, :, 0].tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_view_inject(rng):
    x_t = _latent(rng)
    assert np.array_equal(view_inject(x_t, np.zeros_like(x_t)), x_t)
    assert view_inject(_scalar(1.0), _scalar(2.0)).item() == 3.0

    x_s, x_v = _latent(rng), _latent(rng)
    _, target = split_dual_stream(dual_stream_concat(x_s, view_inject(x_t, x_v)))
    _, plain = split_dual_stream(dual_stream_concat(x_s, x_t))
    assert np.array_equal(target, view_inject(plain, x_v))


def test_shape_contracts(rng):
    x = _latent(rng)
    with pytest.raises(DimensionMismatchError):
        as_latent(np.zeros((2, 3, 4)))
    with pytest.raises(DimensionMismatchError):
        as_latent(np.zeros((2, 0, 4, 5)))
    with pytest.raises(DimensionMismatchError):
        noise_interp(x, x[:, :2], 0.3)
    with pytest.raises(DimensionMismatchError):
        dual_stream_concat(x, x[:, :, :3])
    with pytest.raises(DimensionMismatchError):
        view_inject(x, x[:1])
    with pytest.raises(DimensionMismatchError):
        split_dual_stream(x)


def test_weightings():
    t = np.array([0.0, 0.25, 0.5, 1.0])
    assert constant_weight(t).tolist() == [1.0, 1.0, 1.0, 1.0]
    w = logit_normal_weight(t)
    assert w[0] == 0.0 and w[-1] == 0.0
    assert w[2] == pytest.approx(stats.norm.pdf(0.0) / 0.25)
    assert w[1] == pytest.approx(stats.norm.pdf(logit(0.25)) / (0.25 * 0.75))


def test_logit_normal_density_integrates_to_one():
    t = np.linspace(0.0, 1.0, 200_001)
    assert np.trapezoid(logit_normal_weight(t, mean=0.3, std=0.8), t) == pytest.approx(1.0, abs=1e-4)


def test_velocity_loss(rng):
    x, z = _latent(rng), _latent(rng)
    exact = velocity_loss(z - x, x, z, 0.4)
    assert exact["loss"] == 0.0
    assert exact["weighting"] == "constant"
    assert exact["weights"] == [1.0, 1.0]

    off = velocity_loss(z - x + 0.5, x, z, np.array([0.25, 0.5]), weighting="logit_normal")
    expected = np.mean(logit_normal_weight(np.array([0.25, 0.5])) * 0.25)
    assert off["loss"] == pytest.approx(expected)
    with pytest.raises(ValueError):
        velocity_loss(z - x, x, z, 0.4, weighting="cosine")


def test_timestep_sampling():
    uniform = sample_timesteps(5000, seed=2)
    assert ((uniform >= 0) & (uniform < 1)).all()
    assert stats.kstest(uniform, "uniform").pvalue > 0.001

    ln = sample_timesteps(5000, seed=2, mode="logit_normal", mean=0.5, std=1.2)
    assert ((ln > 0) & (ln < 1)).all()
    assert stats.kstest(logit(ln), stats.norm(loc=0.5, scale=1.2).cdf).pvalue > 0.001
    assert np.array_equal(ln, sample_timesteps(5000, seed=2, mode="logit_normal", mean=0.5, std=1.2))
    with pytest.raises(ValueError):
        sample_timesteps(3, seed=0, mode="beta")
