"""LPIPS-structured perceptual distance over a fixed convolutional feature stack.

The default stack uses seeded random convolutions instead of a pretrained
backbone; external backbone weights (and LPIPS per-channel linear weights)
load through the SIDG1 container with ``arch="featurestack"``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch
import torch.nn.functional as F

from . import container
from .errors import FormatError, InvalidArgumentError
from .imageio import as_image

EPS = 1e-10


@dataclass(frozen=True)
class Stage:
    weight: torch.Tensor  # (out, in, k, k)
    bias: torch.Tensor  # (out,)
    stride: int = 2
    relu: bool = True
    lin: torch.Tensor | None = None  # optional per-channel weights on squared differences

    @property
    def channels(self) -> int:
        return self.weight.shape[0]


class FeatureStack:
    """Fixed convolutional stages; ``center_input`` maps ``[0, 1]`` pixels to ``[-1, 1]`` first."""

    def __init__(self, stages, name="custom", center_input=False):
        if not stages:
            raise InvalidArgumentError("a feature stack needs at least one stage")
        for prev, nxt in zip(stages, stages[1:]):
            if nxt.weight.shape[1] != prev.channels:
                raise InvalidArgumentError("stage channel counts do not chain")
        as64 = lambda t: None if t is None else t.detach().to(torch.float64)
        self.stages = tuple(replace(s, weight=as64(s.weight), bias=as64(s.bias), lin=as64(s.lin))
                            for s in stages)
        self.name = name
        self.center_input = center_input

    @property
    def in_channels(self) -> int:
        return self.stages[0].weight.shape[1]

    @property
    def channels(self) -> list[int]:
        return [s.channels for s in self.stages]

    def features(self, x: torch.Tensor) -> list[torch.Tensor]:
        """``x`` is ``(H, W, C)`` or ``(N, H, W, C)``; returns ``(N, C_s, H_s, W_s)`` maps."""
        if x.ndim == 3:
            x = x[None]
        if x.shape[-1] != self.in_channels:
            raise InvalidArgumentError(
                f"image has {x.shape[-1]} channels, feature stack expects {self.in_channels}")
        h = x.permute(0, 3, 1, 2)
        if self.center_input:
            h = 2.0 * h - 1.0
        out = []
        for s in self.stages:
            k = s.weight.shape[-1]
            h = F.conv2d(h, s.weight, s.bias, stride=s.stride, padding=k // 2)
            if s.relu:
                h = F.relu(h)
            out.append(h)
        return out

    def pooled(self, x: torch.Tensor) -> torch.Tensor:
        """Per-channel spatial means of every stage, concatenated: ``(N, sum C_s)``."""
        return torch.cat([f.mean(dim=(2, 3)) for f in self.features(x)], dim=1)

    def distance(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        """Differentiable batched distance; returns shape ``(N,)``."""
        if a.shape != b.shape:
            raise InvalidArgumentError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
        total = 0.0
        for s, fa, fb in zip(self.stages, self.features(a), self.features(b)):
            na = fa / (torch.linalg.vector_norm(fa, dim=1, keepdim=True) + EPS)
            nb = fb / (torch.linalg.vector_norm(fb, dim=1, keepdim=True) + EPS)
            sq = (na - nb) ** 2
            if s.lin is not None:
                sq = sq * s.lin[None, :, None, None]
            total = total + sq.sum(dim=1).mean(dim=(1, 2))
        return total

    def to_container(self) -> container.Container:
        tensors = {}
        for i, s in enumerate(self.stages):
            tensors[f"stage{i}.weight"] = s.weight.numpy()
            tensors[f"stage{i}.bias"] = s.bias.numpy()
            tensors[f"stage{i}.stride"] = np.array([s.stride], dtype=np.float64)
            tensors[f"stage{i}.relu"] = np.array([float(s.relu)])
            if s.lin is not None:
                tensors[f"stage{i}.lin"] = s.lin.numpy()
        tensors["center_input"] = np.array([float(self.center_input)])
        return container.Container("featurestack", (0, 0, 0, 0, self.in_channels), tensors)

    @classmethod
    def from_container(cls, c: container.Container, name="external") -> "FeatureStack":
        if c.arch != "featurestack":
            raise FormatError(f"expected a featurestack container, got arch {c.arch!r}")
        stages, i = [], 0
        while f"stage{i}.weight" in c.tensors:
            t = lambda key: c.tensors.get(f"stage{i}.{key}")
            lin = t("lin")
            stages.append(Stage(
                weight=torch.tensor(t("weight")),
                bias=torch.tensor(t("bias")),
                stride=int(t("stride")[0]) if t("stride") is not None else 2,
                relu=bool(t("relu")[0]) if t("relu") is not None else True,
                lin=None if lin is None else torch.tensor(lin),
            ))
            i += 1
        center = c.tensors.get("center_input")
        return cls(stages, name=name, center_input=bool(center is not None and center[0]))


def default_stack(seed: int = 0, channels=(3, 8, 16, 16), kernel: int = 3) -> FeatureStack:
    """Seeded random-convolution stack (stride 2, ReLU, He-scaled) on centered input."""
    rng = np.random.default_rng(seed)
    stages = []
    for c_in, c_out in zip(channels, channels[1:]):
        std = np.sqrt(2.0 / (c_in * kernel * kernel))
        w = rng.normal(0.0, std, (c_out, c_in, kernel, kernel)).astype(np.float32)
        b = rng.normal(0.0, 0.05, c_out).astype(np.float32)
        stages.append(Stage(torch.tensor(w, dtype=torch.float64), torch.tensor(b, dtype=torch.float64)))
    return FeatureStack(stages, name=f"randconv{'-'.join(map(str, channels))}-s{seed}", center_input=True)


def load_stack(path) -> FeatureStack:
    return FeatureStack.from_container(container.load(path), name=f"external:{path}")


def perc_distance(a, b, fs: FeatureStack) -> float:
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"image shapes differ: {a.shape} vs {b.shape}")
    with torch.no_grad():
        return float(fs.distance(torch.from_numpy(a), torch.from_numpy(b))[0])
