"""Mixed-forgery synthesis: alpha compositing and seamless Poisson cloning."""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .detectors import BLEND_BOUNDARY
from .errors import EmptyRegion, RegionTouchesBorder
from .vision import PixelSet, RgbImage, same_frame


@dataclass(frozen=True)
class BlendConfig:
    alpha: float = 0.9
    poisson_probability: float = 0.5
    solver_tolerance: float = 1e-5
    max_iterations: int = 10_000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.poisson_probability <= 1.0:
            raise ValueError("poisson_probability must lie in [0, 1]")
        if self.solver_tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("solver settings must be positive")


@dataclass(frozen=True)
class PoissonBlendResult:
    image: RgbImage
    converged: bool
    iterations: int
    max_residual: float


@dataclass(frozen=True)
class MixedForgery:
    image: RgbImage
    kind: str  # "alpha" or "poisson"
    implied_types: tuple[str, ...]
    converged: bool = True


def _round_half_away(values: np.ndarray) -> np.ndarray:
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def alpha_blend(real: RgbImage, fake: RgbImage, region: PixelSet, alpha: float) -> RgbImage:
    """Inside the region, alpha * fake + (1 - alpha) * real; outside, real exactly."""
    same_frame(real, fake)
    same_frame(real, region)
    mixed = alpha * fake.data.astype(np.float64) + (1.0 - alpha) * real.data.astype(np.float64)
    out = real.data.copy()
    member = region.data
    out[member] = np.clip(_round_half_away(mixed[member]), 0, 255).astype(np.uint8)
    return RgbImage(out)


def solve_poisson_channel(
    fake_ch: np.ndarray,
    real_ch: np.ndarray,
    region: np.ndarray,
    tolerance: float,
    max_iterations: int,
) -> tuple[np.ndarray, float, int]:
    """Solve the interior Poisson equation on one channel with red-black Gauss-Seidel.

    The unknowns take the fake's discrete Laplacian as source and the real
    image as Dirichlet data just outside the region. Returns the composite
    float plane (solution inside, real outside), the final max residual over
    the region, and the iteration count.
    """
    h, w = region.shape
    ys, xs = np.nonzero(region)
    # work on a bounding box padded by one ring of Dirichlet pixels
    y0, y1 = max(ys.min() - 1, 0), min(ys.max() + 2, h)
    x0, x1 = max(xs.min() - 1, 0), min(xs.max() + 2, w)
    omega = region[y0:y1, x0:x1]
    fake = fake_ch[y0:y1, x0:x1].astype(np.float64)
    grid = real_ch[y0:y1, x0:x1].astype(np.float64)

    def neighbor_sum(plane):
        total = np.zeros_like(plane)
        total[1:, :] += plane[:-1, :]
        total[:-1, :] += plane[1:, :]
        total[:, 1:] += plane[:, :-1]
        total[:, :-1] += plane[:, 1:]
        return total

    source = 4.0 * fake - neighbor_sum(fake)
    grid = grid.copy()
    grid[omega] = fake[omega]  # initial iterate: the fake content

    yy, xx = np.indices(omega.shape)
    red = omega & ((yy + xx) % 2 == 0)
    black = omega & ((yy + xx) % 2 == 1)

    max_residual = np.inf
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        for color in (red, black):
            grid[color] = (source[color] + neighbor_sum(grid)[color]) / 4.0
        residual = source - (4.0 * grid - neighbor_sum(grid))
        max_residual = float(np.abs(residual[omega]).max())
        if max_residual < tolerance:
            break

    composite = real_ch.astype(np.float64).copy()
    composite[y0:y1, x0:x1] = np.where(omega, grid, composite[y0:y1, x0:x1])
    return composite, max_residual, iterations


def poisson_blend(
    real: RgbImage, fake: RgbImage, region: PixelSet, cfg: BlendConfig
) -> PoissonBlendResult:
    """Seamless clone of the fake region into the real image, per channel.

    The region must stay clear of the frame border so every unknown has a
    full 4-neighborhood. On non-convergence the best iterate is returned with
    ``converged`` cleared rather than raising.
    """
    same_frame(real, fake)
    same_frame(real, region)
    member = region.data
    if not member.any():
        raise EmptyRegion("poisson blend over an empty region")
    if member[0, :].any() or member[-1, :].any() or member[:, 0].any() or member[:, -1].any():
        raise RegionTouchesBorder("region touches the frame border")

    out = real.data.copy()
    converged = True
    worst_residual = 0.0
    total_iterations = 0
    for c in range(3):
        composite, residual, iterations = solve_poisson_channel(
            fake.data[:, :, c],
            real.data[:, :, c],
            member,
            cfg.solver_tolerance,
            cfg.max_iterations,
        )
        converged = converged and residual < cfg.solver_tolerance
        worst_residual = max(worst_residual, residual)
        total_iterations = max(total_iterations, iterations)
        out[:, :, c][member] = np.clip(_round_half_away(composite[member]), 0, 255).astype(
            np.uint8
        )
    return PoissonBlendResult(RgbImage(out), converged, total_iterations, worst_residual)


def make_mixed_forgery(
    real: RgbImage, fake: RgbImage, region: PixelSet, cfg: BlendConfig, seed: int
) -> MixedForgery:
    """Pick alpha or Poisson blending from a seeded draw and apply it.

    Draws below or equal to the Poisson probability take the alpha branch,
    which additionally implies a blend-boundary forgery type; the Poisson
    branch smooths the seam and implies nothing.
    """
    p = random.Random(seed).random()
    if p <= cfg.poisson_probability:
        image = alpha_blend(real, fake, region, cfg.alpha)
        return MixedForgery(image, "alpha", (BLEND_BOUNDARY,))
    result = poisson_blend(real, fake, region, cfg)
    return MixedForgery(result.image, "poisson", (), converged=result.converged)
