"""Noise-prediction backbones behind the service endpoints.

A backbone answers three calls, all on float32 (count, h, w, d) arrays:
denoise (predict the noise in a batch of latents), encode (pixels to
latents) and decode (latents to pixels). The echo and seeded backbones are
self-contained and deterministic; the pretrained one wraps a diffusers
pipeline and is only importable when that stack is installed.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


class BackboneUnavailable(RuntimeError):
    """The requested backbone cannot be constructed on this host."""


class EchoBackbone:
    """Reflect every payload unchanged. The conformance reference."""

    def denoise(self, grids: np.ndarray, t: int, total_steps: int,
                conditioning: tuple[str, ...]) -> np.ndarray:
        return grids

    def encode(self, grids: np.ndarray) -> np.ndarray:
        return grids

    def decode(self, grids: np.ndarray) -> np.ndarray:
        return grids


@dataclass(frozen=True)
class SeededBackbone:
    """Deterministic stand-in for a real model.

    Noise predictions are drawn from a generator keyed by (seed, t, T,
    shape, prompt), then combined with the unconditioned draw using the
    usual guidance mix eps_u + g * (eps_c - eps_u). Identical requests give
    bit-identical answers; any change to step, shape or text changes them.
    Its latent codec is the identity.
    """

    seed: int = 0
    guidance: float = 7.5

    def _draw(self, shape: tuple[int, ...], t: int, total_steps: int,
              prompt: str) -> np.ndarray:
        key = (self.seed, t, total_steps, *shape, zlib.crc32(prompt.encode("utf-8")))
        draw = np.random.default_rng(key).standard_normal(shape)
        return draw.astype(np.float32)

    def denoise(self, grids: np.ndarray, t: int, total_steps: int,
                conditioning: tuple[str, ...]) -> np.ndarray:
        out = np.empty_like(grids, dtype=np.float32)
        for i, prompt in enumerate(conditioning):
            shape = grids.shape[1:]
            eps_u = self._draw(shape, t, total_steps, "")
            eps_c = self._draw(shape, t, total_steps, prompt)
            out[i] = eps_u + np.float32(self.guidance) * (eps_c - eps_u)
        return out

    def encode(self, grids: np.ndarray) -> np.ndarray:
        return grids

    def decode(self, grids: np.ndarray) -> np.ndarray:
        return grids


class StableDiffusionBackbone:
    """Wrap a pretrained latent-diffusion pipeline as a td/1 backbone.

    Latents travel (count, h, w, d) on the wire and (count, d, h, w) inside
    torch; guidance is applied to the whole padded canvas. Step t counts
    down from T to 1, mapping onto the scheduler's T inference timesteps.
    """

    def __init__(self, model_id: str, device: str = "cpu",
                 guidance: float = 7.5, seed: int = 0):
        try:
            import torch
            from diffusers import StableDiffusionPipeline
        except ImportError as e:
            raise BackboneUnavailable(
                f"backbone {model_id!r} needs the pretrained stack; "
                f"install the 'sd' extra (torch, diffusers, transformers)") from e
        self._torch = torch
        self._device = device
        self._guidance = float(guidance)
        self._generator = torch.Generator(device).manual_seed(seed)
        pipe = StableDiffusionPipeline.from_pretrained(model_id)
        pipe = pipe.to(device)
        self._unet = pipe.unet
        self._vae = pipe.vae
        self._scheduler = pipe.scheduler
        self._tokenizer = pipe.tokenizer
        self._text_encoder = pipe.text_encoder
        self._embedding_cache: dict[str, object] = {}

    def _embed(self, prompt: str):
        if prompt not in self._embedding_cache:
            tokens = self._tokenizer(
                prompt, padding="max_length", truncation=True,
                max_length=self._tokenizer.model_max_length, return_tensors="pt")
            with self._torch.no_grad():
                emb = self._text_encoder(tokens.input_ids.to(self._device))[0]
            self._embedding_cache[prompt] = emb
        return self._embedding_cache[prompt]

    def denoise(self, grids: np.ndarray, t: int, total_steps: int,
                conditioning: tuple[str, ...]) -> np.ndarray:
        torch = self._torch
        self._scheduler.set_timesteps(total_steps, device=self._device)
        timestep = self._scheduler.timesteps[total_steps - t]
        latents = torch.from_numpy(np.ascontiguousarray(grids)) \
            .permute(0, 3, 1, 2).to(self._device)
        cond = torch.cat([self._embed(p) for p in conditioning])
        uncond = torch.cat([self._embed("") for _ in conditioning])
        with torch.no_grad():
            eps_c = self._unet(latents, timestep, encoder_hidden_states=cond).sample
            eps_u = self._unet(latents, timestep, encoder_hidden_states=uncond).sample
        eps = eps_u + self._guidance * (eps_c - eps_u)
        return eps.permute(0, 2, 3, 1).cpu().numpy().astype(np.float32)

    def encode(self, grids: np.ndarray) -> np.ndarray:
        torch = self._torch
        pixels = torch.from_numpy(np.ascontiguousarray(grids)) \
            .permute(0, 3, 1, 2).to(self._device)
        with torch.no_grad():
            dist = self._vae.encode(pixels * 2.0 - 1.0).latent_dist
        latents = dist.mode() * self._vae.config.scaling_factor
        return latents.permute(0, 2, 3, 1).cpu().numpy().astype(np.float32)

    def decode(self, grids: np.ndarray) -> np.ndarray:
        torch = self._torch
        latents = torch.from_numpy(np.ascontiguousarray(grids)) \
            .permute(0, 3, 1, 2).to(self._device)
        with torch.no_grad():
            pixels = self._vae.decode(latents / self._vae.config.scaling_factor).sample
        pixels = (pixels + 1.0) / 2.0
        return pixels.clamp(0, 1).permute(0, 2, 3, 1).cpu().numpy().astype(np.float32)


def make_backbone(name: str, device: str, guidance: float, seed: int):
    """"echo" and "seeded" are built in; anything else is a pretrained model id."""
    if name == "echo":
        return EchoBackbone()
    if name == "seeded":
        return SeededBackbone(seed=seed, guidance=guidance)
    return StableDiffusionBackbone(name, device=device, guidance=guidance, seed=seed)
