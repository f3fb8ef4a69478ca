import os
import warnings
from pathlib import Path

import numpy as np
import pytest

from renormasym import kdv
from renormasym.cli import CACHE_NAME, cache_dir


def _build(N, L=40.0, delta=0.25):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", kdv.BoundaryContaminationWarning)
        return kdv.solve_faminskii(L=L, N=N, delta=delta, tol=1e-5, sponge_width=10.0)


@pytest.fixture(scope="session")
def phi_ladder():
    """Small caches on one domain, N = 1024, 2048, 4096."""
    return {N: _build(N) for N in (1024, 2048, 4096)}


@pytest.fixture(scope="session")
def phi_small(phi_ladder):
    return phi_ladder[2048]


def _usable(path):
    if not path.is_file():
        return False
    phi = kdv.PhiField.load(path)
    return phi.L == 150.0 and phi.N == 2**14 and phi.tol <= 1e-7 and phi.accuracy <= phi.tol


@pytest.fixture(scope="session")
def phi_default_path():
    """Path of the shipped-parameter cache (tol 1e-7); built there if absent or unusable."""
    path = Path(os.environ.get("RENORMASYM_ACCEPT_CACHE", cache_dir() / CACHE_NAME))
    if not _usable(path):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", kdv.BoundaryContaminationWarning)
            phi = kdv.solve_faminskii()
        path.parent.mkdir(parents=True, exist_ok=True)
        phi.save(path)
    return path


@pytest.fixture(scope="session")
def phi_default(phi_default_path):
    return kdv.PhiField.load(phi_default_path)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
