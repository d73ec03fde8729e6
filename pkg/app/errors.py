"""
Иерархия исключений приложения.

Каждый класс несёт код выхода CLI, чтобы обработчик в app.main мог
единообразно превращать ошибку в код возврата.
"""


class SegError(Exception):
    """Базовое исключение приложения"""
    exit_code: int = 1


class InvalidArgumentError(SegError, ValueError):
    """Нарушено предусловие операции"""
    exit_code = 2


class UnsupportedSizeError(InvalidArgumentError):
    """Размер задачи вне поддерживаемого диапазона (например PIT при n > 4)"""


class DegenerateSignalError(SegError, ValueError):
    """Сигнал с нулевой мощностью или нулевой энергией"""
    exit_code = 2


class DataIntegrityError(SegError):
    """Отсутствующие/битые файлы, рассинхрон аудио и жестов, неверный сплит"""
    exit_code = 3

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        if path is not None:
            message = f"{message}: {path}"
        super().__init__(message)


class CheckpointError(SegError):
    """Ошибка загрузки чекпоинта или несовпадение конфигурации"""
    exit_code = 4


class TrainingDivergedError(SegError):
    """Лосс или валидационный лосс стал не конечным"""
    exit_code = 5
