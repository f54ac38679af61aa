"""Denoising diffusion sampling math at desk scale.

Implements the forward noising chain, its closed-form marginal, the reverse
(denoising) chain, and the joint multi-view reverse chain that denoises N view
latents collectively. Latents are abstract vectors, not images: this module
verifies the sampling behavior the external multiview backend is assumed to
implement, and drives the mock backend's toy multiview path.

All stochastic operations take caller-supplied noise or an explicit seed,
never an ambient rng, so every result is reproducible bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BadRange, ShapeMismatch

VARIANTS = ("fixed_small", "fixed_large")
COUPLINGS = ("per_view_independent", "cross_view")


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-step noise levels: alpha[t-1] is the signal keep-rate at step t.

    sigma depends on the variant: fixed_small uses the posterior variance
    (1 - abar_{t-1}) / (1 - abar_t) * beta_t with abar_0 = 1, fixed_large uses
    beta_t itself. Both are standard choices; the reverse chain additionally
    forces sigma to zero on the final step regardless of variant.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray
    variant: str

    def abar(self, t: int) -> float:
        """alpha_bar at step t with the abar_0 = 1 convention."""
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])


def make_schedule(
    T: int,
    beta_start: float,
    beta_end: float,
    variant: str = "fixed_small",
) -> NoiseSchedule:
    if T < 1:
        raise BadRange("T must be >= 1")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise BadRange("need 0 < beta_start <= beta_end < 1")
    if variant not in VARIANTS:
        raise BadRange(f"variant must be one of {VARIANTS}")
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    abar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    if variant == "fixed_small":
        var = (1.0 - abar_prev) / (1.0 - alpha_bar) * beta
    else:
        var = beta
    return NoiseSchedule(
        T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar, sigma=np.sqrt(var), variant=variant
    )


@dataclass(frozen=True, eq=False)
class LatentStack:
    """N view latents of equal dimension as an (n_views, dim) float array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise BadRange(f"latent stack must be (n_views >= 1, dim), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise BadRange("latent stack must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n_views(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, n_views: int, dim: int, value: float = 0.0) -> "LatentStack":
        return cls(np.full((n_views, dim), value))


@dataclass(frozen=True)
class MeanPredictor:
    """The denoiser contract: (z_t, t) -> predicted posterior means.

    coupling declares whether views interact: per_view_independent predictors
    act on each view alone (the joint chain then factorizes exactly),
    cross_view predictors may mix views (the point of joint sampling).
    """

    fn: Callable[[LatentStack, int], LatentStack]
    coupling: str

    def __post_init__(self):
        if self.coupling not in COUPLINGS:
            raise BadRange(f"coupling must be one of {COUPLINGS}")

    def __call__(self, z: LatentStack, t: int) -> LatentStack:
        out = self.fn(z, t)
        if out.values.shape != z.values.shape:
            raise ShapeMismatch(
                f"predictor returned {out.values.shape} for input {z.values.shape}"
            )
        return out


def _check_step(t: int, sched: NoiseSchedule) -> None:
    if not 1 <= t <= sched.T:
        raise BadRange(f"step t={t} outside 1..{sched.T}")


def _check_shapes(z: LatentStack, noise: LatentStack) -> None:
    if noise.values.shape != z.values.shape:
        raise ShapeMismatch(f"noise shape {noise.values.shape} != latent shape {z.values.shape}")


def forward_step(z_prev: LatentStack, t: int, sched: NoiseSchedule, noise: LatentStack) -> LatentStack:
    """One noising step: sqrt(a_t) z_{t-1} + sqrt(1 - a_t) eps, per view."""
    _check_step(t, sched)
    _check_shapes(z_prev, noise)
    a = float(sched.alpha[t - 1])
    return LatentStack(np.sqrt(a) * z_prev.values + np.sqrt(1.0 - a) * noise.values)


def forward_marginal(z0: LatentStack, t: int, sched: NoiseSchedule, noise: LatentStack) -> LatentStack:
    """Closed form of the composed chain: sqrt(abar_t) z_0 + sqrt(1 - abar_t) eps."""
    _check_step(t, sched)
    _check_shapes(z0, noise)
    ab = sched.abar(t)
    return LatentStack(np.sqrt(ab) * z0.values + np.sqrt(1.0 - ab) * noise.values)


def reverse_step(
    z_t: LatentStack,
    t: int,
    mu: MeanPredictor,
    sched: NoiseSchedule,
    noise: LatentStack,
) -> LatentStack:
    """One denoising step: mu(z_t, t) + sigma_t eps; the final step (t=1) is
    deterministic (sigma forced to zero)."""
    _check_step(t, sched)
    _check_shapes(z_t, noise)
    mu_val = mu(z_t, t)
    sigma = 0.0 if t == 1 else float(sched.sigma[t - 1])
    return LatentStack(mu_val.values + sigma * noise.values)


def view_substreams(rng_seed: int, n_views: int) -> list[np.random.Generator]:
    """Independent per-view generators derived from one seed.

    The joint sampler and any single-view rerun of view i must consume the
    exact same stream, so substream derivation is part of the contract.
    """
    children = np.random.SeedSequence(rng_seed).spawn(n_views)
    return [np.random.default_rng(c) for c in children]


def joint_reverse_sample(
    mu: MeanPredictor,
    sched: NoiseSchedule,
    n_views: int,
    dim: int,
    rng_seed: int,
) -> LatentStack:
    """Run z_T ~ N(0, I) through T joint reverse steps.

    Per-view noise comes from per-view substreams of rng_seed; with a
    per_view_independent predictor the result is bitwise identical to
    stacking n_views independent single-view chains on the same substreams.
    """
    if n_views < 1 or dim < 1:
        raise BadRange("n_views and dim must be >= 1")
    streams = view_substreams(rng_seed, n_views)
    z = LatentStack(np.stack([s.standard_normal(dim) for s in streams]))
    for t in range(sched.T, 0, -1):
        noise = LatentStack(np.stack([s.standard_normal(dim) for s in streams]))
        z = reverse_step(z, t, mu, sched, noise)
    return z


def identity_predictor() -> MeanPredictor:
    return MeanPredictor(fn=lambda z, t: z, coupling="per_view_independent")


def gaussian_posterior_predictor(mu0: float, sigma0_sq: float, sched: NoiseSchedule) -> MeanPredictor:
    """The exact optimal denoiser when z_0 ~ N(mu0, sigma0_sq I).

    Every forward marginal is then Gaussian with mean m_t = sqrt(abar_t) mu0
    and variance s_t^2 = abar_t sigma0_sq + 1 - abar_t, and the conditional
    mean E[z_{t-1} | z_t] is affine:

        mu(z, t) = m_{t-1} + k_t (z - sqrt(a_t) m_{t-1}),
        k_t = sqrt(a_t) s_{t-1}^2 / s_t^2.
    """
    if sigma0_sq < 0:
        raise BadRange("sigma0_sq must be >= 0")
    abar = np.array([sched.abar(t) for t in range(sched.T + 1)])
    m = np.sqrt(abar) * mu0
    s2 = abar * sigma0_sq + 1.0 - abar
    k = np.sqrt(sched.alpha) * s2[:-1] / s2[1:]

    def fn(z: LatentStack, t: int) -> LatentStack:
        a = float(sched.alpha[t - 1])
        return LatentStack(m[t - 1] + k[t - 1] * (z.values - np.sqrt(a) * m[t - 1]))

    return MeanPredictor(fn=fn, coupling="per_view_independent")


def cross_view_average(base: MeanPredictor) -> MeanPredictor:
    """Replace each view's predicted mean with the average across views."""

    def fn(z: LatentStack, t: int) -> LatentStack:
        per_view = base(z, t).values
        avg = per_view.mean(axis=0, keepdims=True)
        return LatentStack(np.broadcast_to(avg, per_view.shape).copy())

    return MeanPredictor(fn=fn, coupling="cross_view")


def gaussian_sampler_stats(
    mu0: float,
    sigma0_sq: float,
    sched: NoiseSchedule,
    n_samples: int,
    rng_seed: int,
) -> dict:
    """Empirical mean/variance of the full reverse chain on a 1-D Gaussian
    target. Elementwise math makes one dim-n_samples chain exactly n_samples
    independent scalar chains, so this stays fast. Used by the stats CLI."""
    predictor = gaussian_posterior_predictor(mu0, sigma0_sq, sched)
    out = joint_reverse_sample(predictor, sched, n_views=1, dim=n_samples, rng_seed=rng_seed)
    samples = out.values[0]
    return {
        "mu0": mu0,
        "sigma0_sq": sigma0_sq,
        "T": sched.T,
        "variant": sched.variant,
        "n_samples": n_samples,
        "mean": float(samples.mean()),
        "variance": float(samples.var()),
    }
