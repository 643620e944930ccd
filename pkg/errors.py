"""
Иерархия исключений лаборатории.
Exception hierarchy of the lab.

Численные функции поднимают исключения, сервисный слой и обработчики CLI
их перехватывают, пишут в лог и превращают в код возврата.
/ Numerical functions raise, the service layer and CLI handlers catch,
log and translate into an exit status.
"""
from typing import Any, Optional, Sequence


class LabError(Exception):
    """
    Базовый класс для ошибок лаборатории.
    Base class for lab errors.
    """
    pass


class DomainError(LabError):
    """
    Аргумент вне области определения (точка не на цилиндре, t >= 0, мало узлов для шаблона).
    Argument outside the domain (point off the cylinder, t >= 0, stencil margin too small).
    """
    pass


class SingularOffsetError(DomainError):
    """
    Нормальный сдвиг достиг радиуса инъективности, det B -> 0.
    Normal offset reached the injectivity radius, det B -> 0.
    """
    pass


class InputError(LabError):
    """
    Некорректные входные данные (не конечные значения, недостаточная выборка).
    Invalid input data (non-finite values, insufficient sampling).
    """
    pass


class PreconditionError(LabError):
    """
    Нарушено предусловие проверки; хранит место нарушения.
    A check precondition is violated; carries the location of the violation.
    """

    def __init__(self, message: str, location: Any = None):
        super().__init__(message)
        self.location = location


class GraphBreakdown(LabError):
    """
    Поверхность перестала быть малым графом над цилиндром.
    The surface stopped being a small graph over the cylinder.

    Attributes:
        last_state: Последнее допустимое состояние / Last valid state
        reason (str): Причина остановки / Halt reason
    """

    def __init__(self, reason: str, last_state: Any = None):
        super().__init__(reason)
        self.reason = reason
        self.last_state = last_state


class FitError(LabError):
    """
    Вырожденная выборка для подгонки показателя.
    Degenerate sample for an exponent fit.
    """
    pass


class UnsupportedError(LabError):
    """
    Запрошенный режим не поддерживается.
    The requested mode is not supported.
    """
    pass


class DataError(LabError):
    """
    Ряд диагностик противоречит ожиданиям (например, F не монотонна в окне).
    A diagnostics series contradicts expectations (e.g. F not monotone in a window).
    """
    pass


class ConfigError(LabError):
    """
    Ошибка конфигурации эксперимента; хранит список полей.
    Experiment configuration error; carries the offending field list.
    """

    def __init__(self, message: str, fields: Optional[Sequence[str]] = None):
        super().__init__(message)
        self.fields = list(fields or [])
