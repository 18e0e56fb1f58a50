"""Exception hierarchy.

Each family maps to a CLI exit code: configuration problems exit 2, data
problems exit 3 and missing on-disk artifacts exit 4.
"""


class TelemineError(Exception):
    exit_code = 1


class ConfigError(TelemineError):
    exit_code = 2

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class ConfigInvalid(ConfigError):
    pass


class DataError(TelemineError):
    exit_code = 3


class EmptyLog(DataError):
    pass


class NoChannelsRetained(DataError):
    pass


class ChannelMismatch(DataError):
    pass


class LogTooShort(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class NonFiniteFeature(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class DegenerateData(DataError):
    pass


class WidthMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class TooFewLogs(DataError):
    pass


class NoSplits(DataError):
    pass


class MissingArtifact(TelemineError):
    exit_code = 4


class MissingModel(MissingArtifact):
    pass
