"""Exception types shared across the PullNet modules."""

from config.config import Config


class PullNetError(Exception):
    """Base error; `code` is one of Config.ErrorCodes"""

    code = Config.ErrorCodes.DATA_VALIDATION_ERROR

    def __init__(self, message: str, code: str = None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def __str__(self) -> str:
        return f"[{self.code}] {super().__str__()}"


class DataValidationError(PullNetError, ValueError):
    code = Config.ErrorCodes.DATA_VALIDATION_ERROR


class UnknownKeyError(PullNetError, KeyError):
    code = Config.ErrorCodes.UNKNOWN_KEY

    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return f"[{self.code}] {self.args[0]}"


class ConfigError(PullNetError, ValueError):
    code = Config.ErrorCodes.CONFIG_ERROR


class CheckpointError(PullNetError):
    code = Config.ErrorCodes.CHECKPOINT_ERROR


class GraphError(PullNetError, ValueError):
    code = Config.ErrorCodes.GRAPH_ERROR


class TrainingDivergedError(PullNetError, RuntimeError):
    code = Config.ErrorCodes.TRAINING_DIVERGED

    def __init__(self, message: str, diagnostics: dict = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
