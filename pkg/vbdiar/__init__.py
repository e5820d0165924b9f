"""
vbdiar — диаризация вариационным Байесом над двухковариационной PLDA.

Пакет содержит:
- PLDA: модель, сэмплирование, LLR, EM-обучение, точный перебор разметок
- Предобработку: LDA, отбеливание, нормализацию длины
- VB и DA-VB с эвристиками инициализации
- Базовую систему KM-PCA
- Генератор синтетических корпусов и оценку DER
"""

__version__ = "1.0.0"
__author__ = "Ospray-creator"

from .config import settings
from .der import DerReport, TurnList, compute_der
from .plda import SpeakerPrior, TwoCovPlda, train_em
from .vb import AnnealSchedule, ConvergenceConfig, run_vb

__all__ = [
    "settings",
    "TwoCovPlda",
    "SpeakerPrior",
    "train_em",
    "AnnealSchedule",
    "ConvergenceConfig",
    "run_vb",
    "TurnList",
    "DerReport",
    "compute_der",
    "__version__",
]
