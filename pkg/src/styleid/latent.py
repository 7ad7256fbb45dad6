"""Latent-space algebra: splitting a W+ code into style rows and the rest, and mixing."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import FormatError, InvalidArgumentError

LATENT_MAGIC = b"SIDL1"


def as_latent(values, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Coerce to a finite float64 ``(L, D)`` array, optionally checking the shape."""
    w = np.asarray(values, dtype=np.float64)
    if w.ndim != 2:
        raise InvalidArgumentError(f"latent must be 2-D (L, D), got shape {w.shape}")
    if shape is not None and w.shape != tuple(shape):
        raise InvalidArgumentError(f"latent shape {w.shape} does not match {tuple(shape)}")
    if not np.all(np.isfinite(w)):
        raise InvalidArgumentError("latent contains non-finite entries")
    return w


def validate_swap(swap: Sequence[int], n_layers: int) -> tuple[int, ...]:
    idx = tuple(int(i) for i in swap)
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise InvalidArgumentError(f"swap list must be strictly increasing: {list(idx)}")
    if idx and (idx[0] < 0 or idx[-1] >= n_layers):
        raise InvalidArgumentError(f"swap list {list(idx)} out of range for {n_layers} layers")
    return idx


def clip_swap(swap: Sequence[int], n_layers: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split ``swap`` into indices valid for ``n_layers`` and the dropped ones."""
    kept = tuple(sorted({int(i) for i in swap if 0 <= int(i) < n_layers}))
    dropped = tuple(int(i) for i in swap if not 0 <= int(i) < n_layers)
    return kept, dropped


def swap_mask(swap: Sequence[int], n_layers: int) -> np.ndarray:
    mask = np.zeros(n_layers, dtype=bool)
    mask[list(validate_swap(swap, n_layers))] = True
    return mask


@dataclass(frozen=True)
class MixParams:
    alpha: float = 0.5
    swap: tuple[int, ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.seed < 0:
            raise InvalidArgumentError("seed must be non-negative")
        object.__setattr__(self, "swap", tuple(int(i) for i in self.swap))


def decouple(w, swap: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(independent, related)`` with ``independent + related == w``.

    ``related`` keeps the rows listed in ``swap`` and zeros elsewhere;
    ``independent`` is the complement.
    """
    w = as_latent(w)
    mask = swap_mask(swap, w.shape[0])[:, None]
    related = np.where(mask, w, 0.0)
    independent = np.where(mask, 0.0, w)
    return independent, related


def mix(w_s, w_rand, params: MixParams) -> np.ndarray:
    """Blend the style rows of ``w_s`` with a random style code.

    Rows outside ``params.swap`` are copied from ``w_s`` unchanged; swap rows
    become ``alpha * w_s + (1 - alpha) * w_rand``.
    """
    w_s = as_latent(w_s)
    w_rand = as_latent(w_rand, w_s.shape)
    idx = list(validate_swap(params.swap, w_s.shape[0]))
    out = w_s.copy()
    out[idx] = params.alpha * w_s[idx] + (1.0 - params.alpha) * w_rand[idx]
    return out


def sample_random_style(template, swap: Sequence[int], seed: int,
                        prior: Callable[[int], np.ndarray]) -> np.ndarray:
    """Draw ``prior(seed)`` and keep only the swap rows; zero elsewhere."""
    template = as_latent(template)
    idx = list(validate_swap(swap, template.shape[0]))
    out = np.zeros_like(template)
    if not idx:
        return out
    sample = as_latent(prior(seed), template.shape)
    out[idx] = sample[idx]
    return out


def save_latent(path, w) -> None:
    w = as_latent(w)
    L, D = w.shape
    payload = LATENT_MAGIC + struct.pack("<II", L, D) + w.astype("<f4").tobytes(order="C")
    Path(path).write_bytes(payload)


def load_latent(path) -> np.ndarray:
    data = Path(path).read_bytes()
    n = len(LATENT_MAGIC)
    if data[:n] != LATENT_MAGIC:
        raise FormatError(f"{path}: not a SIDL1 latent file")
    if len(data) < n + 8:
        raise FormatError(f"{path}: truncated header")
    L, D = struct.unpack_from("<II", data, n)
    body = data[n + 8:]
    if len(body) != 4 * L * D:
        raise FormatError(f"{path}: expected {L * D} floats, found {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(L, D)
