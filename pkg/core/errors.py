"""
Error types for STRADDLE_BENCH
"""


class StraddleBenchError(Exception):
    """Base class for every error raised deliberately by the suite"""


class ShapeError(StraddleBenchError, ValueError):
    """Matrix dimensions do not fit the requested operation"""


class DataFormatError(StraddleBenchError):
    """A dataset file could not be parsed"""


class DatasetNotFoundError(DataFormatError):
    """A dataset path does not exist"""

    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"Dataset file not found: {self.path}")


class ConfigError(StraddleBenchError):
    """An experiment configuration is invalid"""
