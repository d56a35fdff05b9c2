import numpy as np
import pytest

from lmkaczmarz.linop import LinearMap
from lmkaczmarz.model import OperatorFamily
from lmkaczmarz.problems import build_block_linear, build_elliptic_1d

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[ACCEPTANCE_KEY]


def affine_family(blocks, x_true, lower=None, upper=None):
    """``F_i(x) = M_i x`` with ground truth ``x_true``."""
    mats = [np.asarray(m, dtype=float) for m in blocks]
    maps = [LinearMap.from_matrix(m) for m in mats]
    C = max(np.linalg.norm(m, 2) for m in mats)
    fam = OperatorFamily(
        n_equations=len(mats),
        dim_x=mats[0].shape[1],
        dim_y=tuple(m.shape[0] for m in mats),
        evaluate_i=lambda i, x: mats[i] @ x,
        linearize_i=lambda i, x: maps[i],
        eta=0.0,
        lipschitz_bound=float(C),
        lower=lower,
        upper=upper,
        ground_truth=np.asarray(x_true, dtype=float),
    )
    return fam, [m @ x_true for m in mats]


@pytest.fixture(scope="session")
def block_problem():
    return build_block_linear(64, 8, seed=0)


@pytest.fixture(scope="session")
def elliptic_problem():
    return build_elliptic_1d(64, 9, "smooth-step")


@pytest.fixture(scope="session")
def flux_problem():
    return build_elliptic_1d(64, 9, "smooth-step", measurement="boundary-flux")


@pytest.fixture
def small_affine():
    rng = np.random.default_rng(3)
    blocks = [rng.standard_normal((3, 6)) for _ in range(4)]
    x_true = rng.standard_normal(6)
    return affine_family(blocks, x_true)
