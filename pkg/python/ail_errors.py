"""
Shared exception types.

Raised by every package under python/ and caught by the CLI entry points,
which print them as `Error: ...` and exit with status 1.
全パッケージ共通の例外型。CLI 側で捕捉して終了コード 1 で終了する。
"""


class ShapeError(ValueError):
    """Input rejected: wrong dimension, length or layout."""


class NonFiniteError(FloatingPointError):
    """A NaN or Inf appeared where only finite values are allowed."""


class ConfigError(ValueError):
    """Invalid schedule range or run configuration field."""


class EmptyBufferError(ValueError):
    """Sampling was requested from a buffer holding no entries."""


class RejectedBatchError(ValueError):
    """A labeled discriminator batch has no usable groups."""


class UndefinedStatisticError(ValueError):
    """A statistic is undefined for the given data (zero variance, rank 0, ...)."""


class TrainingAbort(RuntimeError):
    """
    Raised by the training loop when a module fails.

    学習ループ内でモジュールが失敗したときに送出される。
    step と phase を保持する。

    Attributes:
        step (int): Environment step at which the failure happened.
        phase (str): Loop phase name (e.g. "discriminator", "policy").
    """

    def __init__(self, step, phase, message):
        super().__init__(f"step {step}, phase '{phase}': {message}")
        self.step = step
        self.phase = phase
