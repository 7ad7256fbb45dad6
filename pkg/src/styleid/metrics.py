"""FID and SSIM.

FID fits a Gaussian to pooled per-image features of each set and takes the
Fréchet distance between the fits. The default extractor is the perceptual
module's feature stack; pass any :class:`FeatureStack` (e.g. loaded external
weights) to change it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgumentError, NumericalError
from .imageio import as_image
from .perceptual import FeatureStack

log = logging.getLogger(__name__)

NEG_EIG_WARN = -1e-6


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    count: int

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_gaussian(features) -> GaussianStats:
    """Sample mean and covariance (``n - 1`` denominator).

    Sums use :func:`math.fsum`, so the result does not depend on the order
    of the input vectors.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidArgumentError("features must be a list of equal-length vectors")
    n, k = X.shape
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 feature vectors, got {n}")
    mean = np.array([math.fsum(X[:, j]) for j in range(k)]) / n
    C = X - mean
    cov = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            cov[i, j] = cov[j, i] = math.fsum(C[:, i] * C[:, j]) / (n - 1)
    return GaussianStats(mean, cov, n)


def sqrtm_psd(S: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root by eigendecomposition; negative eigenvalues clip to 0."""
    S = np.asarray(S, dtype=np.float64)
    if not np.all(np.isfinite(S)):
        raise NumericalError("matrix square root of a non-finite matrix")
    S = 0.5 * (S + S.T)
    try:
        vals, vecs = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed to converge: {exc}") from exc
    if vals.size and vals.min() < NEG_EIG_WARN * max(1.0, abs(vals).max()):
        log.warning("clipping negative eigenvalue %.3g in matrix square root", vals.min())
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """``|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))``.

    The cross term uses ``Tr((S_a^(1/2) S_b S_a^(1/2))^(1/2))``, which equals
    ``Tr((S_a S_b)^(1/2))`` but stays in symmetric arithmetic.
    """
    if a.dim != b.dim:
        raise InvalidArgumentError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    root_a = sqrtm_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    if not np.all(np.isfinite(inner)):
        raise NumericalError("non-finite product in Fréchet distance")
    try:
        vals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed to converge: {exc}") from exc
    if vals.size and vals.min() < NEG_EIG_WARN * max(1.0, abs(vals).max()):
        log.warning("clipping negative eigenvalue %.3g in Fréchet cross term", vals.min())
    cross = np.sqrt(np.clip(vals, 0.0, None)).sum()
    d = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * cross)
    return max(d, 0.0)


def pooled_features(images, extractor: FeatureStack, batch: int = 64) -> np.ndarray:
    imgs = [as_image(x) for x in images]
    out = []
    with torch.no_grad():
        for i in range(0, len(imgs), batch):
            chunk = torch.from_numpy(np.stack(imgs[i:i + batch]))
            out.append(extractor.pooled(chunk).numpy())
    return np.concatenate(out, axis=0)


def fid_score(images_a, images_b, extractor: FeatureStack) -> float:
    if len(images_a) < 2 or len(images_b) < 2:
        raise InvalidArgumentError("FID needs at least 2 images per set")
    fa = fit_gaussian(pooled_features(images_a, extractor))
    fb = fit_gaussian(pooled_features(images_b, extractor))
    return frechet_distance(fa, fb)


def ssim(a, b, window: int = 7, K1: float = 0.01, K2: float = 0.03, data_range: float = 1.0) -> float:
    """Mean SSIM over all valid ``window x window`` positions and channels.

    Uniform window weights and population (biased) local statistics; no
    padding, so only windows fully inside the image count.
    """
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"image shapes differ: {a.shape} vs {b.shape}")
    if window < 1 or window % 2 == 0 or window > min(a.shape[:2]):
        raise InvalidArgumentError(f"window must be odd and <= {min(a.shape[:2])}, got {window}")
    C1 = (K1 * data_range) ** 2
    C2 = (K2 * data_range) ** 2
    pa = sliding_window_view(a, (window, window), axis=(0, 1))
    pb = sliding_window_view(b, (window, window), axis=(0, 1))
    mu_a = pa.mean(axis=(-2, -1))
    mu_b = pb.mean(axis=(-2, -1))
    da = pa - mu_a[..., None, None]
    db = pb - mu_b[..., None, None]
    var_a = (da * da).mean(axis=(-2, -1))
    var_b = (db * db).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2)
    den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2)
    return float(np.mean(num / den))
