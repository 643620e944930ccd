import os
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Окружение задаётся до первого импорта app.config
_ROOT = Path(tempfile.mkdtemp(prefix='shrinkerlab-tests-'))
os.environ['SHRINKERLAB_OUT'] = str(_ROOT / 'runs')
os.environ['SHRINKERLAB_LOG_DIR'] = str(_ROOT / 'logs')
os.environ['DATABASE_URL'] = f"sqlite:///{(_ROOT / 'runs.db').as_posix()}"

from app.database.base import init_db  # noqa: E402
import app.database.models  # noqa: E402,F401  (регистрирует таблицы до init_db)
from geometry import CylinderSpec  # noqa: E402
from grids import CylinderGrid  # noqa: E402

init_db()


@pytest.fixture(scope='session')
def coarse_grid() -> CylinderGrid:
    """Грубая сетка для быстрых геометрических проверок / Coarse grid for quick geometry checks."""
    return CylinderGrid(n_theta=16, n_y=121, L=6.0, M=16)


@pytest.fixture(scope='session')
def flow_grid() -> CylinderGrid:
    return CylinderGrid(n_theta=16, n_y=161, L=8.0, M=16)


@pytest.fixture(scope='session')
def default_grid() -> CylinderGrid:
    return CylinderGrid()


@pytest.fixture
def cylinder() -> CylinderSpec:
    return CylinderSpec.standard()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
