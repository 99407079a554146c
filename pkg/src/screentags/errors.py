"""Exception hierarchy shared by all screentags modules."""


class ScreentagsError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(ScreentagsError, ValueError):
    pass


class NoSignalError(InvalidInputError):
    """Text carries nothing a language model can score."""


class ConfigError(ScreentagsError):
    pass


class EngineError(ScreentagsError):
    def __init__(self, engine_id, message):
        super().__init__(f"[{engine_id}] {message}")
        self.engine_id = engine_id


class FormatError(ScreentagsError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ParseError(ScreentagsError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SamplingError(ScreentagsError):
    pass


class EntityNotFound(ScreentagsError, KeyError):
    def __str__(self):
        return f"unknown entity: {self.args[0]!r}"
