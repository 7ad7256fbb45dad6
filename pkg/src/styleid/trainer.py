"""Few-shot fine-tuning loop and stylization.

Each epoch mixes the style rows of every reference latent with one shared
random style code, then takes one gradient step on the generator weights
to minimize ``L_ref + lambda_feature * L_feature``: the mean perceptual
distance from the mixed-latent renders to their references, plus the
perceptual distance from the photo's render to the photo itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import torch

from .errors import InvalidArgumentError, NumericalError
from .generator import Generator
from .inversion import InversionOptions, invert
from .latent import MixParams, clip_swap, mix, sample_random_style
from .perceptual import FeatureStack

log = logging.getLogger(__name__)

FULL_SWAP = (7, 9, 11, 15, 16, 17)
TOY_SWAP = (3, 4, 5, 7)
PROFILE_EPOCHS = {"sketch": 150, "cartoon": 500}


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.5
    swap: tuple[int, ...] = FULL_SWAP
    lambda_feature: float = 0.001
    epochs: int = 150
    step_size: float = 0.01
    seed: int = 0
    resample_rand_each_epoch: bool = True

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lambda_feature < 0:
            raise InvalidArgumentError("lambda_feature must be non-negative")
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be >= 0")
        if self.step_size <= 0:
            raise InvalidArgumentError("step_size must be positive")
        object.__setattr__(self, "swap", tuple(int(i) for i in self.swap))

    @classmethod
    def for_profile(cls, profile: str, **kw) -> "TrainConfig":
        return cls(epochs=PROFILE_EPOCHS[profile], **kw)

    def swap_for(self, n_layers: int) -> tuple[int, ...]:
        kept, dropped = clip_swap(self.swap, n_layers)
        if dropped:
            log.warning("dropping swap indices %s: backend has only %d layers", list(dropped), n_layers)
        return kept


@dataclass
class TrainHistory:
    l_ref: list[float] = field(default_factory=list)
    l_feature: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.total)

    def append(self, l_ref, l_feature, total):
        self.l_ref.append(l_ref)
        self.l_feature.append(l_feature)
        self.total.append(total)

    def to_text(self) -> str:
        lines = [f"{e}\t{r!r}\t{f!r}\t{t!r}\n"
                 for e, (r, f, t) in enumerate(zip(self.l_ref, self.l_feature, self.total))]
        return "".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "TrainHistory":
        h = cls()
        for line in text.splitlines():
            if line.strip() and not line.startswith("#"):
                _, r, f, t = line.split("\t")
                h.append(float(r), float(f), float(t))
        return h


def _check_inputs(g: Generator, references, input_photo):
    if len(references) == 0:
        raise InvalidArgumentError("fine-tuning needs at least one reference image")
    refs = np.stack([g.check_image(r) for r in references])
    photo = g.check_image(input_photo)
    return refs, photo


def invert_all(g: Generator, images, inv_opts: InversionOptions, perc: FeatureStack) -> list[np.ndarray]:
    return [invert(img, g, inv_opts, perc)[0] for img in images]


def fine_tune(g: Generator, references: Sequence[np.ndarray], input_photo: np.ndarray,
              cfg: TrainConfig, perc: FeatureStack, inv_opts: InversionOptions, *,
              ref_latents=None, photo_latent=None) -> tuple[Generator, TrainHistory]:
    """Fine-tune a clone of ``g``; ``g`` itself is left untouched.

    ``ref_latents`` / ``photo_latent`` skip the inversion step when the
    caller already holds them (they must come from inverting the same images
    with ``g``).
    """
    refs, photo = _check_inputs(g, references, input_photo)
    swap = cfg.swap_for(g.n_layers)
    if ref_latents is None:
        ref_latents = invert_all(g, refs, inv_opts, perc)
    if photo_latent is None:
        photo_latent, _ = invert(photo, g, inv_opts, perc)
    if len(ref_latents) != len(refs):
        raise InvalidArgumentError("one latent per reference is required")

    trained = g.clone()
    params = trained.trainable()
    for p in params:
        p.requires_grad_(True)
    refs_t = torch.from_numpy(refs)
    photo_t = torch.from_numpy(photo)
    w_photo = torch.from_numpy(np.asarray(photo_latent, dtype=np.float64))
    history = TrainHistory()

    for epoch in range(cfg.epochs):
        seed = cfg.seed + epoch if cfg.resample_rand_each_epoch else cfg.seed
        mp = MixParams(cfg.alpha, swap, seed)
        w_rand = sample_random_style(ref_latents[0], swap, seed, g.sample_prior)
        mixed = torch.from_numpy(np.stack([mix(w, w_rand, mp) for w in ref_latents]))

        l_ref = perc.distance(trained.forward(mixed), refs_t).mean()
        l_feature = perc.distance(trained.forward(w_photo), photo_t)[0]
        loss = l_ref + cfg.lambda_feature * l_feature
        r, f = l_ref.item(), l_feature.item()
        total = r + cfg.lambda_feature * f
        if not np.isfinite(total):
            raise NumericalError("training loss became non-finite", step=epoch, unit="epoch")
        history.append(r, f, total)

        grads = torch.autograd.grad(loss, params)
        with torch.no_grad():
            for p, gr in zip(params, grads):
                p -= cfg.step_size * gr

    for p in params:
        p.requires_grad_(False)
    return trained, history


def stylize(g_trained: Generator, photo, inv_opts: InversionOptions, perc: FeatureStack,
            base: Generator | None = None) -> np.ndarray:
    """Invert ``photo`` with ``base`` (the pretrained generator) and render with ``g_trained``.

    ``base`` defaults to ``g_trained`` itself.
    """
    base = g_trained if base is None else base
    photo = g_trained.check_image(photo)
    w, _ = invert(photo, base, inv_opts, perc)
    return g_trained.synthesize(w)


def toy_config(**kw) -> TrainConfig:
    """Default settings with the swap list adapted to the 8-layer toy backend."""
    kw.setdefault("swap", TOY_SWAP)
    return TrainConfig(**kw)


def with_lambda(cfg: TrainConfig, lam: float) -> TrainConfig:
    return replace(cfg, lambda_feature=lam)
