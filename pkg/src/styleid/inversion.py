"""Optimization-based GAN inversion in W+."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import InvalidArgumentError, NumericalError
from .generator import Generator
from .perceptual import FeatureStack

MEAN_LATENT_SAMPLES = 4096


@dataclass(frozen=True)
class InversionOptions:
    steps: int = 300
    step_size: float = 0.05
    perceptual_weight: float = 1.0
    pixel_weight: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise InvalidArgumentError("inversion steps must be >= 0")
        if self.step_size <= 0:
            raise InvalidArgumentError("inversion step_size must be positive")
        if self.perceptual_weight < 0 or self.pixel_weight < 0:
            raise InvalidArgumentError("inversion loss weights must be non-negative")
        if self.steps > 0 and self.perceptual_weight == 0 and self.pixel_weight == 0:
            raise InvalidArgumentError("at least one inversion loss weight must be positive")


def invert(target, g: Generator, opts: InversionOptions, perc: FeatureStack,
           trace: list | None = None) -> tuple[np.ndarray, float]:
    """Fit a latent to ``target`` by fixed-step gradient descent from the mean latent.

    Returns the best latent seen (the incumbent, not the last iterate) and
    its loss. The generator is only read. If ``trace`` is given, the
    incumbent loss after each evaluation is appended to it.
    """
    target_t = torch.from_numpy(g.check_image(target))
    w = torch.from_numpy(g.mean_latent(MEAN_LATENT_SAMPLES, opts.seed)).requires_grad_(True)

    def objective(w):
        img = g.forward(w)
        loss = opts.pixel_weight * torch.mean((img - target_t) ** 2)
        if opts.perceptual_weight:
            loss = loss + opts.perceptual_weight * perc.distance(img, target_t)[0]
        return loss

    best_w, best_loss = None, np.inf
    for step in range(opts.steps + 1):
        loss = objective(w)
        value = loss.detach().item()
        if not np.isfinite(value):
            raise NumericalError("inversion loss became non-finite", step=step)
        if value < best_loss or best_w is None:
            best_w, best_loss = w.detach().numpy().copy(), value
        if trace is not None:
            trace.append(best_loss)
        if step == opts.steps:
            break
        (grad,) = torch.autograd.grad(loss, w)
        with torch.no_grad():
            w -= opts.step_size * grad
    return best_w, best_loss
