"""Spec builders and independent oracles shared across the suite."""

from __future__ import annotations

import numpy as np

from tilecraft.constraints import (
    Constraint,
    ConstraintSpec,
    ImageSlot,
    Side,
    SideRef,
    ValidatedSpec,
    validate,
)


def ref(image: str, side: str) -> SideRef:
    return SideRef(image, Side(side))


def build_vspec(images: list[str], constraints: list[Constraint],
                h: int = 48, w: int = 48, d: int = 1,
                inits: dict[str, str] | None = None) -> ValidatedSpec:
    slots = tuple(ImageSlot(i, f"prompt {i}", (inits or {}).get(i)) for i in images)
    settings = (("depth", d), ("height", h), ("width", w))
    return validate(ConstraintSpec(images=slots, constraints=tuple(constraints),
                                   settings=settings))


def self_x_spec(h: int = 48, w: int = 48, window: int = 8) -> ValidatedSpec:
    return build_vspec(["I1"], [Constraint("C1", (ref("I1", "right"),),
                                           (ref("I1", "left"),), window)], h, w)


def torus_spec(h: int = 48, w: int = 48, window: int = 8, d: int = 1) -> ValidatedSpec:
    return build_vspec(["I1"], [
        Constraint("C1", (ref("I1", "right"),), (ref("I1", "left"),), window),
        Constraint("C2", (ref("I1", "bottom"),), (ref("I1", "top"),), window),
    ], h, w, d)


def pair_spec(h: int = 48, w: int = 48, window: int = 8) -> ValidatedSpec:
    """Two images joined into a ring: A|B and B|A both licensed."""
    return build_vspec(["A1", "B1"], [
        Constraint("C1", (ref("A1", "right"),), (ref("B1", "left"),), window),
        Constraint("C2", (ref("B1", "right"),), (ref("A1", "left"),), window),
    ], h, w)


def many_spec(h: int = 48, w: int = 48, window: int = 8) -> ValidatedSpec:
    """|A|=|B|=2: either right side may join either left side."""
    return build_vspec(["A1", "A2", "B1", "B2"], [
        Constraint("C1", (ref("A1", "right"), ref("A2", "right")),
                   (ref("B1", "left"), ref("B2", "left")), window),
    ], h, w)


class FixedSpectrumPrior:
    """Stationary Gaussian prior with an arbitrary injected spectrum.

    Duck-types the production prior for posterior tests: only .mean and
    .spectrum(h, w) are consumed.
    """

    def __init__(self, spectrum: np.ndarray, mean: float = 0.0):
        self._spectrum = np.asarray(spectrum, dtype=np.float64)
        self.mean = mean

    def spectrum(self, h: int, w: int) -> np.ndarray:
        assert self._spectrum.shape == (h, w)
        return self._spectrum


def symmetrize_spectrum(raw: np.ndarray) -> np.ndarray:
    """Make a nonnegative spectrum invariant under frequency negation, the
    condition for the circulant covariance it induces to be real."""
    flipped = np.roll(np.flip(raw, (0, 1)), (1, 1), (0, 1))
    return (raw + flipped) / 2.0


def dense_posterior_oracle(spectrum: np.ndarray, mean: float,
                           z_t: np.ndarray, alpha_bar: float) -> np.ndarray:
    """Posterior mean E[z0 | z_t] by explicit dense linear algebra.

    Builds the circulant covariance column by column (apply the spectral
    multiplier to each basis vector), then solves
    mu + sqrt(ab) * Sigma (ab * Sigma + (1 - ab) I)^-1 (z_t - sqrt(ab) mu)
    with numpy.linalg; no FFT shortcut on the solve itself.
    """
    h, w = spectrum.shape
    n = h * w
    cov = np.empty((n, n))
    for j in range(n):
        e = np.zeros((h, w))
        e[j // w, j % w] = 1.0
        cov[:, j] = np.fft.ifft2(spectrum * np.fft.fft2(e)).real.ravel()
    ab = alpha_bar
    out = np.empty_like(z_t)
    system = ab * cov + (1.0 - ab) * np.eye(n)
    for c in range(z_t.shape[2]):
        rhs = z_t[:, :, c].ravel() - np.sqrt(ab) * mean
        x = np.linalg.solve(system, rhs)
        out[:, :, c] = mean + np.sqrt(ab) * (cov @ x).reshape(h, w)
    return out
