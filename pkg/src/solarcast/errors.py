"""Exception hierarchy.

Each error carries the CLI exit code it maps to: 1 usage, 2 data, 3 model or
serialization.
"""


class SolarcastError(Exception):
    exit_code = 1


class UsageError(SolarcastError):
    exit_code = 1


class DataError(SolarcastError):
    exit_code = 2


class MalformedCsv(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class NegativeTarget(DataError):
    pass


class MissingTarget(DataError):
    pass


class InvalidConfig(UsageError):
    pass


class DatasetTooSmall(DataError):
    pass


class InvalidFoldCount(UsageError):
    pass


class EmptyInput(DataError):
    pass


class AllMissingFeature(DataError):
    pass


class LengthMismatch(DataError):
    pass


class TooShort(DataError):
    pass


class TopMExceedsFeatureCount(UsageError):
    pass


class SingleClass(DataError):
    pass


class ModelError(SolarcastError):
    exit_code = 3


class NonFiniteInput(ModelError):
    pass


class NonFiniteLoss(ModelError):
    pass


class InvalidHyperparameter(UsageError):
    pass


class DimensionMismatch(ModelError):
    pass


class IoError(ModelError):
    pass


class BadMagic(ModelError):
    pass


class UnsupportedVersion(ModelError):
    pass


class CorruptPayload(ModelError):
    pass
