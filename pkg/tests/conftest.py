import time
from contextlib import contextmanager

import numpy as np
import pytest

from styleid import data
from styleid.generator import ToyGenerator
from styleid.inversion import InversionOptions, invert
from styleid.perceptual import default_stack
from styleid.trainer import invert_all


@pytest.fixture(scope="session")
def gen():
    return ToyGenerator()


@pytest.fixture(scope="session")
def stack():
    return default_stack()


@pytest.fixture(scope="session")
def inv_opts():
    return InversionOptions()


@pytest.fixture(scope="session")
def toy_problem(gen, stack, inv_opts):
    """Three references, one photo, and their (frozen) inverted latents."""
    refs = data.sample_references(gen, 3)
    photo = data.sample_photos(gen, 1)[0]
    ref_latents = invert_all(gen, refs, inv_opts, stack)
    photo_latent, _ = invert(photo, gen, inv_opts, stack)
    return refs, photo, ref_latents, photo_latent


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Times a block, records pass/fail against its time limit for the summary."""

    @contextmanager
    def check(number, title, limit):
        start = time.perf_counter()
        ok = False
        try:
            yield
            ok = True
        finally:
            seconds = time.perf_counter() - start
            passed = ok and seconds < limit
            request.config.stash.setdefault(_CRITERIA, []).append((number, title, passed, seconds, limit))
            print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} ({seconds:.1f}s, limit {limit}s)")
        assert seconds < limit, f"criterion {number} took {seconds:.1f}s, limit {limit}s"

    return check


def pytest_terminal_summary(terminalreporter, config):
    rows = config.stash.get(_CRITERIA, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, seconds, limit in sorted(rows):
        terminalreporter.write_line(
            f"{'PASS' if passed else 'FAIL'}  [{number}] {title}  {seconds:.1f}s (limit {limit}s)")
