"""Shared fixtures: small grids and their enumerated complexes."""

import pytest
from hypothesis import HealthCheck, settings

from gridob.cd_complex import CdComplex
from gridob.grid_core import GridDiagram
from gridob.sign_assign import gauge_normalize, solve_sign_cd

settings.register_profile(
    "gridob", deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("gridob")


@pytest.fixture(autouse=True)
def isolated_config_home(tmp_path, monkeypatch):
    """Keep log files and config.yaml out of the real home directory."""
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "xdg"))
    return tmp_path / "xdg"


@pytest.fixture(scope="session")
def grid2():
    return GridDiagram.default(2)


@pytest.fixture(scope="session")
def grid3():
    return GridDiagram.default(3)


@pytest.fixture(scope="session")
def cd2(grid2):
    return CdComplex(grid2, K=4)


@pytest.fixture(scope="session")
def cd3(grid3):
    return CdComplex(grid3, K=4)


@pytest.fixture(scope="session")
def signs2(grid2, cd2):
    return gauge_normalize(solve_sign_cd(grid2, cd2), grid2)


@pytest.fixture(scope="session")
def signs3(grid3, cd3):
    return gauge_normalize(solve_sign_cd(grid3, cd3), grid3)
