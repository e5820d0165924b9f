import sys
from pathlib import Path

import numpy as np
import pytest

# Добавляем корневую директорию проекта в sys.path для корректного импорта модулей
sys.path.append(str(Path(__file__).parent.parent))

from vbdiar.plda import TwoCovPlda  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def scalar_model() -> TwoCovPlda:
    """D=1, μ=0, Λ=𝓛=1."""
    return TwoCovPlda(mu=np.zeros(1), between_precision=np.eye(1), within_precision=np.eye(1))


@pytest.fixture
def model_3d() -> TwoCovPlda:
    """Модель D=3 с недиагональными точностями."""
    a = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 1.0]])
    b = np.array([[4.0, -0.5, 0.0], [-0.5, 3.0, 0.4], [0.0, 0.4, 2.5]])
    return TwoCovPlda(mu=np.array([0.5, -1.0, 2.0]), between_precision=a, within_precision=b)
