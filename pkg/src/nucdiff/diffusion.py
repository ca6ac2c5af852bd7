"""Diffusion machinery: schedules, forward corruption, Tweedie denoising,
ancestral re-noising, and measurement guidance.

The forward process is x_tau = alpha_tau x_0 + sigma_tau eps. Schedules
are discrete with alpha_0 = 1, sigma_0 = 0 at the clean end. Randomness
is always injected by the caller (explicit noise arguments); nothing in
this module owns an RNG.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

SCHEDULE_KINDS = ("variance-preserving-linear", "variance-preserving-cosine")

GUIDANCE_MODES = ("denoised-estimate", "chain-rule")


def _arr(x):
    """Accept Frame / CasoratiMatrix containers or bare arrays."""
    return np.asarray(getattr(x, "values", x), dtype=float)


@dataclass(frozen=True)
class NoiseSchedule:
    total_steps: int
    alpha: np.ndarray  # length total_steps + 1
    sigma: np.ndarray

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be positive")
        a, s = np.asarray(self.alpha), np.asarray(self.sigma)
        if a.shape != (self.total_steps + 1,) or s.shape != a.shape:
            raise ShapeError("alpha/sigma must have total_steps + 1 entries")
        if abs(a[0] - 1.0) > 1e-12 or abs(s[0]) > 1e-12:
            raise ValueError("schedule must start at alpha=1, sigma=0")
        if np.any(np.diff(a) > 1e-12) or np.any(a <= 0) or np.any(a > 1):
            raise ValueError("alpha must be non-increasing in (0, 1]")
        if np.any(np.diff(s) < -1e-12) or np.any(s < 0):
            raise ValueError("sigma must be non-decreasing and non-negative")


@dataclass(frozen=True)
class GuidanceConfig:
    mu: float
    mode: str = "denoised-estimate"

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.mode not in GUIDANCE_MODES:
            raise ValueError(f"mode must be one of {GUIDANCE_MODES}")


def make_schedule(kind, steps):
    """Build a variance-preserving schedule with T = steps levels.

    linear: beta ramps linearly from 0.1/T to 20/T (the usual DDPM
    convention rescaled so the endpoint corruption is T-independent);
    cosine: squared-cosine cumulative signal with the 0.008 offset.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    if kind == "variance-preserving-linear":
        betas = np.clip(np.linspace(0.1 / steps, 20.0 / steps, steps),
                        1e-8, 0.999)
        abar = np.cumprod(1.0 - betas)
    elif kind == "variance-preserving-cosine":
        s = 0.008
        t = np.arange(1, steps + 1) / steps
        f = np.cos((t + s) / (1 + s) * np.pi / 2.0) ** 2
        f0 = np.cos(s / (1 + s) * np.pi / 2.0) ** 2
        abar = np.clip(f / f0, 1e-12, 1.0 - 1e-12)
        abar = np.minimum.accumulate(abar)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    alpha = np.concatenate([[1.0], np.sqrt(abar)])
    sigma = np.concatenate([[0.0], np.sqrt(1.0 - abar)])
    return NoiseSchedule(total_steps=steps, alpha=alpha, sigma=sigma)


def _check_tau(tau, sched, low):
    if not (low <= tau <= sched.total_steps):
        raise ValueError(
            f"tau={tau} outside [{low}, {sched.total_steps}]")


def diffuse_forward(x0, tau, sched, noise):
    """x_tau = alpha_tau x0 + sigma_tau noise, exactly."""
    _check_tau(tau, sched, 0)
    x0, noise = _arr(x0), _arr(noise)
    if x0.shape != noise.shape:
        raise ShapeError("x0 and noise shapes differ")
    return sched.alpha[tau] * x0 + sched.sigma[tau] * noise


def tweedie_denoise(x_tau, tau, sched, model):
    """Posterior-mean estimate (x_tau - sigma_tau eps_hat) / alpha_tau."""
    _check_tau(tau, sched, 1)
    x_tau = _arr(x_tau)
    eps_hat = _arr(model.predict_noise(x_tau, tau, sched))
    return (x_tau - sched.sigma[tau] * eps_hat) / sched.alpha[tau]


def ancestral_step(x0_hat, tau, sched, noise, literal_paper_indexing=False):
    """Re-noise a clean estimate one level down.

    Default uses the tau-1 coefficients (standard DDPM-style ancestral
    move). The literal mode re-noises with the tau coefficients instead;
    it reproduces an off-by-one indexing that appears in some loop
    write-ups and is kept behind the flag for fidelity experiments.
    """
    _check_tau(tau, sched, 1)
    x0_hat, noise = _arr(x0_hat), _arr(noise)
    if x0_hat.shape != noise.shape:
        raise ShapeError("x0_hat and noise shapes differ")
    k = tau if literal_paper_indexing else tau - 1
    return sched.alpha[k] * x0_hat + sched.sigma[k] * noise


def guidance_gradient(y, l, x0_hat, cfg):
    """Gradient of the measurement error (mu/2)||Y - L - X0||_F^2 in X0.

    Returns -mu (Y - L - X0). In chain-rule mode the caller composes this
    with the score model's Jacobian-transpose; the value here is the same.
    """
    y, l, x0_hat = _arr(y), _arr(l), _arr(x0_hat)
    if not (y.shape == l.shape == x0_hat.shape):
        raise ShapeError("y, l, x0_hat shapes differ")
    return -cfg.mu * (y - l - x0_hat)
