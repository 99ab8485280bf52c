import numpy as np
import pytest

# one summary line per acceptance check, echoed after the test report
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checks")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_vocab(tokens, count1=None, count2=None):
    """Build a Vocabulary directly, bypassing corpus counting."""
    from dialectoscope.corpus import Vocabulary

    n = len(tokens)
    c1 = np.asarray(count1 if count1 is not None else [100] * n, dtype=np.int64)
    c2 = np.asarray(count2 if count2 is not None else [100] * n, dtype=np.int64)
    return Vocabulary(list(tokens), c1, c2)


def dense_cooc(matrix):
    """CoocMatrix from a dense symmetric array (test construction helper)."""
    from dialectoscope.corpus import CoocMatrix

    m = np.asarray(matrix, dtype=np.float64)
    assert np.array_equal(m, m.T), "test matrices must be symmetric"
    rows, cols = np.nonzero(np.triu(m))
    return CoocMatrix(
        n_words=m.shape[0],
        rows=rows.astype(np.int32),
        cols=cols.astype(np.int32),
        vals=m[rows, cols],
    )
