import numpy as np
import pytest

from postsolve import GaussianMixtureScore, build_ddpm_schedule


@pytest.fixture(scope="session")
def sched():
    return build_ddpm_schedule()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def two_label_mixture():
    d = 8
    return GaussianMixtureScore.from_arrays(
        [-2 * np.ones(d), 2 * np.ones(d)], [0.25 * np.ones(d)] * 2, [0.5, 0.5], [0, 1]
    )


def make_mixture(rng, dim, k, n_labels=2):
    w = rng.uniform(0.5, 1.5, k)
    return GaussianMixtureScore.from_arrays(
        rng.normal(0, 1.5, (k, dim)),
        rng.uniform(0.2, 1.5, (k, dim)),
        w / w.sum(),
        [i % n_labels for i in range(k)],
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
