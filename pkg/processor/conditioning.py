"""Rectified-flow noising, velocity targets and the dual-stream token layout.

Latents are 4-D arrays laid out (batch, frames, spatial tokens, channels).
Everything here is a pure shape/value contract; no network is involved.
"""

from typing import Any, Callable, Dict, Tuple

import numpy as np
from scipy.special import expit, logit
from scipy.stats import norm

from utils.errors import DimensionMismatchError

LATENT_AXES = ("batch", "frames", "tokens", "channels")


def as_latent(x: Any, name: str = "latent") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 4:
        raise DimensionMismatchError(f"{name} must be 4-D {LATENT_AXES}, got shape {x.shape}")
    if min(x.shape) < 1:
        raise DimensionMismatchError(f"{name} has an empty axis: {x.shape}")
    return x


def _pair(a: Any, b: Any, names: Tuple[str, str]) -> Tuple[np.ndarray, np.ndarray]:
    a, b = as_latent(a, names[0]), as_latent(b, names[1])
    if a.shape != b.shape:
        raise DimensionMismatchError(f"{names[0]} {a.shape} and {names[1]} {b.shape} differ")
    return a, b


def _timestep(t: Any, batch: int) -> np.ndarray:
    """Scalar t or one t per batch item, shaped to broadcast over a latent."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 1:
        if t.shape[0] != batch:
            raise DimensionMismatchError(f"{t.shape[0]} timesteps for batch of {batch}")
        t = t.reshape(-1, 1, 1, 1)
    elif t.ndim != 0:
        raise DimensionMismatchError(f"timestep must be a scalar or 1-D, got shape {t.shape}")
    if np.any(~((t >= 0.0) & (t <= 1.0))):
        raise ValueError("timestep must lie in [0, 1]")
    return t


def noise_interp(x: Any, z: Any, t: Any) -> np.ndarray:
    """x_t = (1 - t) x + t z; t = 0 is clean data, t = 1 pure noise."""
    x, z = _pair(x, z, ("x", "z"))
    t = _timestep(t, x.shape[0])
    if t.ndim == 0:
        if t == 0.0:
            return x.astype(np.float64)
        if t == 1.0:
            return z.astype(np.float64)
    return (1.0 - t) * x + t * z


def velocity_target(x: Any, z: Any) -> np.ndarray:
    x, z = _pair(x, z, ("x", "z"))
    return z - x


def dual_stream_concat(x_s: Any, x_t: Any) -> np.ndarray:
    """Source-video tokens then target tokens along the frame axis: (b, f, s, d) x 2 -> (b, 2f, s, d)."""
    x_s, x_t = _pair(x_s, x_t, ("x_s", "x_t"))
    return np.concatenate([x_s, x_t], axis=1)


def split_dual_stream(tokens: Any) -> Tuple[np.ndarray, np.ndarray]:
    tokens = as_latent(tokens, "tokens")
    if tokens.shape[1] % 2:
        raise DimensionMismatchError(f"dual-stream frame axis must be even, got {tokens.shape[1]}")
    half = tokens.shape[1] // 2
    return tokens[:, :half], tokens[:, half:]


def view_inject(x_t: Any, x_v: Any) -> np.ndarray:
    """Add projected warped-depth view tokens onto the noisy latent tokens."""
    x_t, x_v = _pair(x_t, x_v, ("x_t", "x_v"))
    return x_t + x_v


def constant_weight(t: Any) -> np.ndarray:
    return np.ones_like(np.asarray(t, dtype=np.float64))


def logit_normal_weight(t: Any, mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    """Logit-normal density at t in (0, 1); zero at the endpoints."""
    t = np.asarray(t, dtype=np.float64)
    inner = (t > 0.0) & (t < 1.0)
    safe = np.where(inner, t, 0.5)
    density = norm.pdf(logit(safe), loc=mean, scale=std) / (safe * (1.0 - safe))
    return np.where(inner, density, 0.0)


WEIGHTINGS: Dict[str, Callable[..., np.ndarray]] = {
    "constant": constant_weight,
    "logit_normal": logit_normal_weight,
}


def velocity_loss(v_pred: Any, x: Any, z: Any, t: Any, weighting: str = "constant", **params: float) -> Dict[str, Any]:
    """Per-item weighted squared velocity error, averaged over the batch.

    Returns the weights alongside the loss so callers can record them.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}; choose from {sorted(WEIGHTINGS)}")
    v_pred, target = _pair(v_pred, velocity_target(x, z), ("v_pred", "target"))
    t = _timestep(t, v_pred.shape[0]).reshape(-1)
    weights = np.broadcast_to(WEIGHTINGS[weighting](t, **params), (v_pred.shape[0],))
    per_item = np.mean((v_pred - target) ** 2, axis=(1, 2, 3))
    return {"loss": float(np.mean(weights * per_item)), "weights": weights.tolist(), "weighting": weighting}


def sample_timesteps(n: int, seed: int, mode: str = "uniform", mean: float = 0.0, std: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if mode == "uniform":
        return rng.uniform(0.0, 1.0, size=n)
    if mode == "logit_normal":
        return expit(rng.normal(mean, std, size=n))
    raise ValueError(f"unknown timestep mode {mode!r}")
