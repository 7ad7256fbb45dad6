"""Differentiable generators mapping W+ latents to images.

``ToyGenerator`` is a tiny, fully specified style-modulated decoder used for
desk-scale runs. Real StyleGAN-class weights plug in by registering an
adapter for their ``arch`` tag (see :func:`register_adapter`).
"""

from __future__ import annotations

import copy
from functools import lru_cache
from typing import Callable

import numpy as np
import torch

from . import container
from .errors import FormatError, InvalidArgumentError
from .imageio import as_image
from .latent import as_latent


class Generator:
    """Base class: subclasses implement :meth:`forward` and the prior."""

    arch = "abstract"
    n_layers: int
    style_dim: int
    image_shape: tuple[int, int, int]
    params: dict[str, torch.Tensor]

    @property
    def latent_shape(self) -> tuple[int, int]:
        return (self.n_layers, self.style_dim)

    def forward(self, w: torch.Tensor) -> torch.Tensor:
        """Differentiable synthesis; ``w`` is ``(L, D)`` or ``(N, L, D)``."""
        raise NotImplementedError

    def synthesize(self, w) -> np.ndarray:
        w = as_latent(w, self.latent_shape)
        with torch.no_grad():
            return self.forward(torch.from_numpy(w)).numpy()

    def sample_prior(self, seed: int) -> np.ndarray:
        raise NotImplementedError

    def mean_latent(self, n: int, seed: int) -> np.ndarray:
        if n < 1:
            raise InvalidArgumentError(f"mean_latent needs n >= 1, got {n}")
        acc = np.zeros(self.latent_shape)
        for i in range(n):
            acc += self.sample_prior(seed + i)
        return acc / n

    def clone(self) -> "Generator":
        return copy.deepcopy(self)

    def trainable(self) -> list[torch.Tensor]:
        return list(self.params.values())

    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.detach().numpy().ravel() for p in self.params.values()])

    def check_image(self, img) -> np.ndarray:
        return as_image(img, self.image_shape)

    def to_container(self) -> container.Container:
        H, W, C = self.image_shape
        tensors = {k: v.detach().numpy().copy() for k, v in self.params.items()}
        return container.Container(self.arch, (self.n_layers, self.style_dim, H, W, C), tensors)

    def save(self, path) -> None:
        container.save(path, self.to_container())


class ToyGenerator(Generator):
    """Style-modulated sinusoid decoder.

    Layer ``k`` owns a base pattern ``B[:, :, k]`` (a plane wave whose
    horizontal frequency is ``k + 1``). Latent row ``k`` goes through an
    affine map ``D -> 2`` giving ``(scale_k, shift_k)``; the layer contributes
    ``(1 + scale_k) * B[:, :, k] + shift_k``, the contributions are mixed into
    color channels by an ``L x C`` matrix, and a sigmoid squashes the result.
    Trainable tensors: ``B`` (H, W, L), ``A`` (L, D, 2), ``a0`` (L, 2),
    ``M`` (L, C). All are rounded to float32 at construction so checkpoints
    round-trip exactly.

    As in StyleGAN's equalized learning rate, each tensor is stored divided
    by a fixed runtime gain (``GAINS``) and multiplied back in the forward
    pass, which balances plain gradient-descent step sizes across tensors
    of very different sizes.
    """

    arch = "toy"
    GAINS = {"B": 10.0, "A": 3.0, "a0": 3.0, "M": 3.0}

    def __init__(self, seed=0, size=32, n_layers=8, style_dim=16, channels=3, *, tensors=None):
        self.n_layers = n_layers
        self.style_dim = style_dim
        self.image_shape = (size, size, channels)
        self.seed = seed
        if tensors is None:
            tensors = self._init_tensors(seed, size, n_layers, style_dim, channels)
        expected = {
            "B": (size, size, n_layers),
            "A": (n_layers, style_dim, 2),
            "a0": (n_layers, 2),
            "M": (n_layers, channels),
        }
        for name, shape in expected.items():
            if name not in tensors or tuple(tensors[name].shape) != shape:
                raise FormatError(f"toy generator tensor {name!r} missing or not shaped {shape}")
        self.params = {k: torch.tensor(np.asarray(tensors[k], dtype=np.float64)) for k in expected}

    @staticmethod
    def _init_tensors(seed, size, L, D, C):
        rng = np.random.default_rng(seed)
        yy, xx = np.mgrid[0:size, 0:size]
        B = np.empty((size, size, L))
        for k in range(L):
            fx = k + 1
            fy = int(rng.integers(0, k + 2))
            phase = rng.uniform(0.0, 2.0 * np.pi)
            B[:, :, k] = np.cos(2.0 * np.pi * (fy * yy + fx * xx) / size + phase)
        A = rng.normal(0.0, 1.0 / np.sqrt(D), (L, D, 2))
        a0 = rng.normal(0.0, 0.1, (L, 2))
        M = rng.normal(0.0, 1.0 / np.sqrt(L), (L, C))
        g = ToyGenerator.GAINS
        f32 = lambda a: a.astype(np.float32).astype(np.float64)
        return {"B": f32(B / g["B"]), "A": f32(A / g["A"]), "a0": f32(a0 / g["a0"]), "M": f32(M / g["M"])}

    @classmethod
    def from_container(cls, c: container.Container) -> "ToyGenerator":
        L, D, H, W, C = c.dims
        if H != W:
            raise FormatError("toy generator requires square images")
        return cls(size=H, n_layers=L, style_dim=D, channels=C, tensors=c.tensors)

    def effective(self) -> dict[str, torch.Tensor]:
        return {k: self.GAINS[k] * v for k, v in self.params.items()}

    def modulation(self, w: torch.Tensor, p=None) -> tuple[torch.Tensor, torch.Tensor]:
        p = self.effective() if p is None else p
        st = torch.einsum("...ld,ldj->...lj", w, p["A"]) + p["a0"]
        return st[..., 0], st[..., 1]

    def logits(self, w: torch.Tensor) -> torch.Tensor:
        p = self.effective()
        scale, shift = self.modulation(w, p)
        wave = torch.einsum("hwl,...l,lc->...hwc", p["B"], 1.0 + scale, p["M"])
        offset = torch.einsum("...l,lc->...c", shift, p["M"])
        return wave + offset[..., None, None, :]

    def forward(self, w: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits(w))

    def sample_prior(self, seed: int) -> np.ndarray:
        return np.random.default_rng(seed).standard_normal(self.latent_shape)

    def mean_latent(self, n: int, seed: int) -> np.ndarray:
        if n < 1:
            raise InvalidArgumentError(f"mean_latent needs n >= 1, got {n}")
        return _toy_mean_latent(self.latent_shape, n, seed).copy()


@lru_cache(maxsize=32)
def _toy_mean_latent(shape, n, seed):
    # the toy prior ignores the generator params, so the mean is cacheable
    acc = np.zeros(shape)
    for i in range(n):
        acc += np.random.default_rng(seed + i).standard_normal(shape)
    return acc / n


_ADAPTERS: dict[str, Callable[[container.Container], Generator]] = {
    "toy": ToyGenerator.from_container,
}


def register_adapter(arch: str, factory: Callable[[container.Container], Generator]) -> None:
    """Make :func:`load_generator` understand checkpoints tagged ``arch``."""
    _ADAPTERS[arch] = factory


def load_generator(path) -> Generator:
    c = container.load(path)
    try:
        factory = _ADAPTERS[c.arch]
    except KeyError:
        raise FormatError(f"{path}: no generator adapter registered for arch {c.arch!r}") from None
    return factory(c)


def make_backend(name: str) -> Generator:
    """``"toy"`` (the built-in seed-0 toy) or ``"checkpoint:PATH"``."""
    if name == "toy":
        return ToyGenerator()
    if name.startswith("checkpoint:"):
        return load_generator(name.split(":", 1)[1])
    raise InvalidArgumentError(f"unknown backend {name!r}; expected 'toy' or 'checkpoint:PATH'")
