import numpy as np
import pytest

from faircca.cca import standardize


def random_grouped(seed, n_per_group=(40, 50), dx=4, dy=3, coupling=0.8):
    """Small correlated two-view dataset split into len(n_per_group) groups."""
    rng = np.random.default_rng(seed)
    n = sum(n_per_group)
    X = rng.standard_normal((n, dx))
    Y = coupling * X[:, :dy] @ rng.standard_normal((dy, dy)) + rng.standard_normal((n, dy))
    labels = np.repeat(np.arange(len(n_per_group)), n_per_group)
    return standardize(X, Y, labels)


def random_spd(rng, d, cond=10.0):
    q = np.linalg.qr(rng.standard_normal((d, d)))[0]
    return (q * np.linspace(1.0, cond, d)) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """record(number, title, ok, detail) -> ok; lines are echoed in the summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title} [{detail}]"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
