"""Denoising loop with per-step constraint enforcement.

The sampler is denoiser-agnostic: anything that maps a batch of noisy
latents plus (t, T, conditioning) to a noise estimate can drive it. Two
analytic denoisers ship here so the whole pipeline runs, and is testable,
without any learned model: a stationary Gaussian texture prior with a
closed-form posterior, and a constant-image prior. A remote bridge lives in
tilecraft.wire.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .constraints import SIMILARITY_BAND, ValidatedSpec
from .lattice import LatentCanvas, RoundRobinState, apply_constraints, make_canvases


class DenoiserFailure(RuntimeError):
    """A denoiser call failed; the message names the failing step."""

# ── schedule ──────────────────────────────────────────────────────────────

BETA_START = 1e-4
BETA_END = 2e-2


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule: beta_t linear, alpha_bar_t the running product."""

    betas: np.ndarray        # (T,)  beta_1 .. beta_T
    alphas: np.ndarray       # (T,)  1 - beta_t
    alpha_bars: np.ndarray   # (T,)  prod_{s<=t} alpha_s

    @property
    def steps(self) -> int:
        return len(self.betas)

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])

    def alpha_bar(self, t: int) -> float:
        """alpha_bar at step t, 1-based; t=0 is the clean-data convention 1."""
        if t == 0:
            return 1.0
        return float(self.alpha_bars[t - 1])


def make_schedule(steps: int) -> NoiseSchedule:
    if steps < 1:
        raise ValueError("schedule needs at least one step")
    betas = np.linspace(BETA_START, BETA_END, steps, dtype=np.float64)
    alphas = 1.0 - betas
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=np.cumprod(alphas))


def _rng_key(seed, *extra: int) -> tuple[int, ...]:
    parts = (seed,) if isinstance(seed, int) else tuple(seed)
    return parts + extra


def noise_to(z0: np.ndarray, t: int, schedule: NoiseSchedule, seed) -> np.ndarray:
    """Diffuse clean data forward to step t: sqrt(ab)*z0 + sqrt(1-ab)*eps."""
    if t == 0:
        return np.array(z0, dtype=np.float64, copy=True)
    ab = schedule.alpha_bar(t)
    eps = np.random.default_rng(_rng_key(seed, t)).standard_normal(z0.shape)
    return np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps


def reconstruct_z0(z_t: np.ndarray, eps: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """Invert noise_to given the exact noise; identity up to float64 error."""
    ab = schedule.alpha_bar(t)
    return (z_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)


# ── denoisers ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class DenoiserRequest:
    """One batched noise-estimation query."""

    grids: np.ndarray             # (count, h, w, d) float64
    t: int
    total_steps: int
    conditioning: tuple[str, ...]
    seed: int = 0


DenoiserFn = Callable[[DenoiserRequest], np.ndarray]


@dataclass(frozen=True)
class GaussianTexturePrior:
    """Stationary Gaussian model of clean latents.

    Covariance is circulant, so it is diagonal in the 2D DFT basis with
    per-frequency weights falling off as 1/(1 + r^2)^smoothness; sigma is
    the resulting per-cell standard deviation and mean the flat level. The
    posterior mean under Gaussian diffusion noise is closed-form, which makes
    this the reference oracle for the whole engine.
    """

    mean: float = 0.5
    sigma: float = 0.15
    smoothness: float = 1.5

    def spectrum(self, h: int, w: int) -> np.ndarray:
        return _spectrum(h, w, self.sigma, self.smoothness)


@lru_cache(maxsize=64)
def _spectrum(h: int, w: int, sigma: float, smoothness: float) -> np.ndarray:
    fy = (np.fft.fftfreq(h) * h)[:, None]
    fx = (np.fft.fftfreq(w) * w)[None, :]
    raw = (1.0 + fy * fy + fx * fx) ** (-smoothness)
    out = raw * (sigma * sigma / raw.mean())
    out.setflags(write=False)
    return out


def posterior_mean(prior: GaussianTexturePrior, z_t: np.ndarray, alpha_bar: float) -> np.ndarray:
    """E[z0 | z_t] for one (h, w, d) grid, computed per frequency.

    With Sigma diagonal in the DFT basis the solve of
    (ab*Sigma + (1-ab)I) x = z_t - sqrt(ab)*mu collapses to an elementwise
    gain sqrt(ab)*S / (ab*S + 1-ab).
    """
    s = prior.spectrum(z_t.shape[0], z_t.shape[1])
    ab = alpha_bar
    gain = np.sqrt(ab) * s / (ab * s + (1.0 - ab))
    out = np.empty_like(z_t)
    for c in range(z_t.shape[2]):
        centered = z_t[:, :, c] - np.sqrt(ab) * prior.mean
        out[:, :, c] = prior.mean + np.fft.ifft2(gain * np.fft.fft2(centered)).real
    return out


def _eps_from_z0(z_t: np.ndarray, z0: np.ndarray, alpha_bar: float) -> np.ndarray:
    return (z_t - np.sqrt(alpha_bar) * z0) / np.sqrt(1.0 - alpha_bar)


def gaussian_denoiser(prior: GaussianTexturePrior | None = None) -> DenoiserFn:
    """Noise estimator that is exact when latents really follow the prior."""
    prior = prior or GaussianTexturePrior()

    def run(req: DenoiserRequest) -> np.ndarray:
        ab = make_schedule(req.total_steps).alpha_bar(req.t)
        out = np.empty_like(req.grids)
        for i in range(req.grids.shape[0]):
            out[i] = _eps_from_z0(req.grids[i], posterior_mean(prior, req.grids[i], ab), ab)
        return out

    return run


def constant_denoiser(level: float = 0.5) -> DenoiserFn:
    """Degenerate prior: every clean latent is a flat field at `level`."""

    def run(req: DenoiserRequest) -> np.ndarray:
        ab = make_schedule(req.total_steps).alpha_bar(req.t)
        return _eps_from_z0(req.grids, np.full_like(req.grids, level), ab)

    return run


def sample_texture(prior: GaussianTexturePrior, h: int, w: int, d: int, seed) -> np.ndarray:
    """Draw one clean field from the prior (spectral coloring of white noise)."""
    s = prior.spectrum(h, w)
    rng = np.random.default_rng(_rng_key(seed))
    out = np.empty((h, w, d), dtype=np.float64)
    for c in range(d):
        white = rng.standard_normal((h, w))
        out[:, :, c] = prior.mean + np.fft.ifft2(np.sqrt(s) * np.fft.fft2(white)).real
    return out


# ── sampling loop ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class SamplerParams:
    """Knobs for sample(). strength only matters with init latents: the
    loop then starts at round(strength * steps) instead of steps."""

    steps: int = 50
    seed: int = 0
    sampler: str = "ddim"            # "ddim" (deterministic) | "ancestral"
    strength: float = 0.8
    constraint_phase: str = "before"  # "before" | "after" each denoise
    tiling: bool = True
    similarity: bool = True
    similarity_width: int = SIMILARITY_BAND  # expert override for ablations


def _ddim_step(z: np.ndarray, eps: np.ndarray, t: int, sched: NoiseSchedule) -> np.ndarray:
    ab = sched.alpha_bar(t)
    ab_prev = sched.alpha_bar(t - 1)
    z0_hat = (z - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)
    return np.sqrt(ab_prev) * z0_hat + np.sqrt(1.0 - ab_prev) * eps


def _ancestral_step(z: np.ndarray, eps: np.ndarray, t: int, sched: NoiseSchedule, seed) -> np.ndarray:
    ab = sched.alpha_bar(t)
    ab_prev = sched.alpha_bar(t - 1)
    beta = sched.beta(t)
    mean = (z - beta / np.sqrt(1.0 - ab) * eps) / np.sqrt(1.0 - beta)
    if t == 1:
        return mean
    sigma = np.sqrt((1.0 - ab_prev) / (1.0 - ab) * beta)
    noise = np.random.default_rng(seed).standard_normal(z.shape)
    return mean + sigma * noise


def _denoise_all(canvases: dict[str, LatentCanvas], order: tuple[str, ...],
                 prompts: dict[str, str], denoiser: DenoiserFn, t: int,
                 params: SamplerParams) -> dict[str, np.ndarray]:
    """One denoiser round. Canvases are batched per shape (pads can differ
    between images) in spec order, so call order is deterministic."""
    groups: dict[tuple[int, ...], list[str]] = {}
    for img in order:
        groups.setdefault(canvases[img].data.shape, []).append(img)
    out: dict[str, np.ndarray] = {}
    for shape, members in groups.items():
        batch = np.stack([canvases[m].data for m in members])
        req = DenoiserRequest(grids=batch, t=t, total_steps=params.steps,
                              conditioning=tuple(prompts[m] for m in members),
                              seed=params.seed)
        try:
            eps = np.asarray(denoiser(req), dtype=np.float64)
        except Exception as exc:
            raise DenoiserFailure(f"denoise step t={t}: {exc}") from exc
        if eps.shape != batch.shape:
            raise DenoiserFailure(f"denoise step t={t}: returned shape "
                                  f"{eps.shape}, expected {batch.shape}")
        for j, m in enumerate(members):
            out[m] = eps[j]
    return out


def sample(vspec: ValidatedSpec, denoiser: DenoiserFn, params: SamplerParams,
           init_latents: dict[str, np.ndarray] | None = None) -> dict[str, LatentCanvas]:
    """Run the constrained reverse process and return padded clean latents.

    Text-to-image starts every canvas from seeded unit noise at step T.
    With init_latents (image id -> interior (h, w, d) array) the start is
    the init diffused forward to round(strength * T); strength 0 returns the
    inits untouched apart from the pad fill.

    Constraints rewrite pads (and shared edge bands) right before every
    denoiser call, and once more after the loop, so the returned pads are an
    exact copy of the far-side interiors.
    """
    sched = make_schedule(params.steps)
    canvases = make_canvases(vspec)
    order = vspec.image_ids()
    prompts = {slot.id: slot.prompt or "" for slot in vspec.images}
    rr = RoundRobinState()

    if init_latents is None:
        t0 = params.steps
        for i, img in enumerate(order):
            rng = np.random.default_rng(_rng_key(params.seed, i))
            canvases[img].data[...] = rng.standard_normal(canvases[img].data.shape)
    else:
        if not 0.0 <= params.strength <= 1.0:
            raise ValueError("strength must lie in [0, 1]")
        t0 = round(params.strength * params.steps)
        for i, img in enumerate(order):
            canvases[img].interior[...] = init_latents[img]  # pads stay zero
            canvases[img].data[...] = noise_to(canvases[img].data, t0, sched,
                                               seed=(params.seed, i))

    before = params.constraint_phase == "before"
    if params.constraint_phase not in ("before", "after"):
        raise ValueError("constraint_phase must be 'before' or 'after'")

    for t in range(t0, 0, -1):
        if before:
            apply_constraints(canvases, vspec, rr, tiling=params.tiling,
                              similarity=params.similarity,
                              similarity_width=params.similarity_width)
        eps = _denoise_all(canvases, order, prompts, denoiser, t, params)
        for i, img in enumerate(order):
            z = canvases[img].data
            if params.sampler == "ancestral":
                z_new = _ancestral_step(z, eps[img], t, sched, _rng_key(params.seed, t, i))
            elif params.sampler == "ddim":
                z_new = _ddim_step(z, eps[img], t, sched)
            else:
                raise ValueError(f"unknown sampler {params.sampler!r}")
            canvases[img].data[...] = z_new
        if not before:
            apply_constraints(canvases, vspec, rr, tiling=params.tiling,
                              similarity=params.similarity,
                              similarity_width=params.similarity_width)

    if before or t0 == 0:
        apply_constraints(canvases, vspec, rr, tiling=params.tiling,
                          similarity=params.similarity,
                          similarity_width=params.similarity_width)
    return canvases
