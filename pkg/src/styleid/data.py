"""Procedurally generated sample data: toy "photos", styled "references", and metric test sets.

Photos are toy-generator images with mild pixel noise. References come from
a styled copy of the generator whose high-frequency layers carry hatching
instead of smooth waves and whose color mixing is tinted, so the style
domain differs from the photo domain mostly in the swap layers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .generator import ToyGenerator
from .imageio import save_png

PHOTO_NOISE = 0.02
STYLE_LAYERS = (3, 4, 5, 6, 7)
TINT = np.array([0.6, 0.25, -0.35])


def styled_generator(base: ToyGenerator, seed: int = 1) -> ToyGenerator:
    rng = np.random.default_rng(seed)
    tensors = {k: v.detach().numpy().copy() for k, v in base.effective().items()}
    B, M = tensors["B"], tensors["M"]
    for k in STYLE_LAYERS:
        if k < base.n_layers:
            B[:, :, k] = np.sign(B[:, :, k] + rng.uniform(-0.3, 0.3))
    M[:] = 0.8 * M + 0.15 * TINT[: M.shape[1]]
    tensors = {k: v / base.GAINS[k] for k, v in tensors.items()}
    size = base.image_shape[0]
    return ToyGenerator(size=size, n_layers=base.n_layers, style_dim=base.style_dim,
                        channels=base.image_shape[2], tensors=tensors)


def sample_photos(g: ToyGenerator, n: int, seed: int = 100) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        img = g.synthesize(g.sample_prior(seed + i))
        out.append(np.clip(img + PHOTO_NOISE * rng.standard_normal(img.shape), 0.0, 1.0))
    return out


def sample_references(g: ToyGenerator, n: int, seed: int = 200) -> list[np.ndarray]:
    styled = styled_generator(g)
    return [styled.synthesize(styled.sample_prior(seed + i)) for i in range(n)]


def noise_set(n: int, level, sigma: float, shape=(32, 32, 3), seed: int = 0) -> list[np.ndarray]:
    """``n`` images ``level + sigma * N(0, 1)`` per pixel (unclipped)."""
    rng = np.random.default_rng(seed)
    level = np.broadcast_to(np.asarray(level, dtype=np.float64), shape[-1:])
    return [level + sigma * rng.standard_normal(shape) for _ in range(n)]


def write_sample_set(out, n_refs: int = 3, n_photos: int = 1, seed: int = 0) -> dict[str, Path]:
    """Write ``refs/``, ``photos/`` and metric sets ``set_a/``, ``set_b/`` under ``out``."""
    out = Path(out)
    g = ToyGenerator()
    dirs = {name: out / name for name in ("refs", "photos", "set_a", "set_b")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(sample_references(g, n_refs, seed=200 + seed)):
        save_png(dirs["refs"] / f"ref_{i:02d}.png", img)
    for i, img in enumerate(sample_photos(g, n_photos, seed=100 + seed)):
        save_png(dirs["photos"] / f"photo_{i:02d}.png", img)
    set_a = noise_set(16, 0.35, 0.05, seed=seed + 1)
    set_b = noise_set(16, (0.6, 0.5, 0.4), 0.08, seed=seed + 2)
    for i, (a, b) in enumerate(zip(set_a, set_b)):
        save_png(dirs["set_a"] / f"img_{i:02d}.png", a)
        save_png(dirs["set_b"] / f"img_{i:02d}.png", b)
    return dirs
