import numpy as np
import pytest

from zexe import corpus, detectors


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_corpus():
    return corpus.gen_corpus(seed=7, n_benign=12, n_malicious=12, size_range=(2048, 8192))


@pytest.fixture(scope="session")
def default_corpus():
    return corpus.gen_corpus(seed=42, n_benign=200, n_malicious=200)


@pytest.fixture(scope="session")
def histogram_model(default_corpus):
    return detectors.train(default_corpus, detectors.HISTOGRAM)


@pytest.fixture(scope="session")
def stump_model(default_corpus):
    return detectors.train(default_corpus, detectors.STUMPS)


# one pass/fail line per acceptance criterion, printed after the run
CRITERIA = {}


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        line = f"[criterion {number:>2}] {'PASS' if passed else 'FAIL'}: {detail}"
        CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
