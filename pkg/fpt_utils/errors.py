"""Error hierarchy. Each class carries the CLI exit code it maps to: 1 for usage and
configuration mistakes, 2 for problems with data, files or numerics."""

from typing import Optional


class FptNoiseError(Exception):
    exit_code = 2


class UsageError(FptNoiseError):
    exit_code = 1


class ConfigurationError(FptNoiseError):
    exit_code = 1


class InputError(FptNoiseError):
    exit_code = 2


class DegenerateFeatureError(InputError):
    """The encoder returned a zero feature, so drift ratios are undefined."""


class FormatError(FptNoiseError):
    exit_code = 2

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class PairingError(FormatError):
    pass


class TrainingError(FptNoiseError):
    exit_code = 2

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} at step {step}")


class GenerationError(FptNoiseError):
    exit_code = 2
