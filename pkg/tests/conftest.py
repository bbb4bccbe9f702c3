import functools

import numpy as np
import pytest

from maxplp.synth import CorpusRanges, make_corpus

ACCEPTANCE_SEED = 2024
ACCEPTANCE_SIZE = 100

_lines_key = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_lines_key] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_lines_key, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for the terminal summary (and print it)."""
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        request.config.stash[_lines_key].append(line)
        return passed
    return record


@functools.lru_cache(maxsize=None)
def corpus(noiseless=False):
    ranges = CorpusRanges(noise_db=None) if noiseless else CorpusRanges()
    return tuple(make_corpus(ACCEPTANCE_SIZE, ranges, seed=ACCEPTANCE_SEED))


@pytest.fixture(scope="session")
def synth_corpus():
    return corpus(False)


@pytest.fixture(scope="session")
def quiet_corpus():
    return corpus(True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
