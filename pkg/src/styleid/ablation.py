"""Grid runs over lambda_feature and reference count.

A reference-count point with ``k`` references drawn from a pool of ``P``
trains one generator per cyclic window ``{i, ..., i+k-1 mod P}`` (a single
run when ``k == P``). Its dispersion is the mean perceptual distance from
each run's stylized photo to the consensus image, the pixel mean of the
one-shot outputs. Few-shot training should land closer to that consensus
than any single reference does.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .errors import InvalidArgumentError
from .generator import Generator
from .inversion import InversionOptions
from .perceptual import FeatureStack, perc_distance
from .trainer import TrainConfig, TrainHistory, fine_tune

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    subset: tuple[int, ...]
    lambda_feature: float
    history: TrainHistory
    output: np.ndarray  # stylized input photo
    eval_outputs: list = field(default_factory=list)


@dataclass
class GridPoint:
    kind: str  # "lambda" or "refs"
    lambda_feature: float
    n_refs: int
    runs: list[RunResult]
    dispersion: float = float("nan")
    fid: float = float("nan")

    @property
    def label(self) -> str:
        if self.kind == "lambda":
            return f"lambda={self.lambda_feature:g}"
        return f"refs={self.n_refs}"

    def final(self, key: str) -> float:
        return float(np.mean([getattr(r.history, key)[-1] for r in self.runs]))


@dataclass
class Problem:
    """Everything a run needs; latents are inverted once and shared."""

    g: Generator
    refs: list
    photo: np.ndarray
    ref_latents: list
    photo_latent: np.ndarray
    perc: FeatureStack
    inv_opts: InversionOptions
    eval_latents: list = field(default_factory=list)


def cyclic_subsets(pool: int, k: int) -> list[tuple[int, ...]]:
    if not 1 <= k <= pool:
        raise InvalidArgumentError(f"reference count {k} not in [1, {pool}]")
    if k == pool:
        return [tuple(range(pool))]
    return [tuple((i + j) % pool for j in range(k)) for i in range(pool)]


def _run(args) -> RunResult:
    prob, subset, cfg = args
    g_t, hist = fine_tune(
        prob.g, [prob.refs[i] for i in subset], prob.photo, cfg, prob.perc, prob.inv_opts,
        ref_latents=[prob.ref_latents[i] for i in subset], photo_latent=prob.photo_latent)
    evals = [g_t.synthesize(w) for w in prob.eval_latents]
    return RunResult(subset, cfg.lambda_feature, hist, g_t.synthesize(prob.photo_latent), evals)


def _map(jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run, jobs))


def run_grid(prob: Problem, cfg: TrainConfig, lambdas=(), counts=(), workers: int = 1) -> list[GridPoint]:
    """Train every grid point with shared seeds; results come back in grid order."""
    lambdas, counts = list(lambdas), list(counts)
    if not lambdas and not counts:
        raise InvalidArgumentError("empty sweep grid: give lambda values and/or reference counts")
    pool = len(prob.refs)
    everything = tuple(range(pool))
    specs = [("lambda", lam, pool, [everything]) for lam in lambdas]
    specs += [("refs", cfg.lambda_feature, k, cyclic_subsets(pool, k)) for k in counts]
    if counts and 1 not in counts:
        # consensus needs the one-shot outputs even when not requested
        specs.append(("consensus", cfg.lambda_feature, 1, cyclic_subsets(pool, 1)))

    jobs, owners = [], []
    for idx, (_, lam, _, subsets) in enumerate(specs):
        for s in subsets:
            jobs.append((prob, s, replace(cfg, lambda_feature=lam)))
            owners.append(idx)
    results = _map(jobs, workers)

    points = [GridPoint(kind, lam, k, []) for kind, lam, k, _ in specs]
    for idx, res in zip(owners, results):
        points[idx].runs.append(res)

    ref_points = [p for p in points if p.kind in ("refs", "consensus")]
    if ref_points:
        one_shot = next(p for p in ref_points if p.n_refs == 1)
        consensus = np.mean([r.output for r in one_shot.runs], axis=0)
        for p in ref_points:
            p.dispersion = float(np.mean([perc_distance(r.output, consensus, prob.perc) for r in p.runs]))
    return [p for p in points if p.kind != "consensus"]


def pairwise_spread(images, perc: FeatureStack) -> float:
    """Mean perceptual distance over all unordered pairs."""
    pairs = list(combinations(range(len(images)), 2))
    if not pairs:
        return 0.0
    return float(np.mean([perc_distance(images[i], images[j], perc) for i, j in pairs]))
