"""Exception types raised across the toolkit.

Every error derives from :class:`TradeflagError` so that the CLI can catch a
single base class and report a structured message.
"""


class TradeflagError(ValueError):
    """Base class for all toolkit errors."""


# ingest
class MalformedRow(TradeflagError):
    def __init__(self, row, reason):
        self.row = row
        self.reason = reason
        super().__init__(f"row {row}: {reason}")


class DuplicateTransactionId(MalformedRow):
    pass


class SelfTrade(MalformedRow):
    pass


class UnknownUser(TradeflagError):
    pass


class NoEventsInRole(TradeflagError):
    pass


# features / regress
class UnknownCategory(TradeflagError):
    pass


class UnknownPlayer(TradeflagError):
    pass


class RankDeficient(TradeflagError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; dependent columns: {self.columns}")


class TooFewRows(TradeflagError):
    pass


class SchemaMismatch(TradeflagError):
    pass


# rfcde
class TooFewPoints(TradeflagError):
    pass


class EmptyWeights(TradeflagError):
    pass


class EmptyHoldout(TradeflagError):
    pass


class DegenerateResponse(UserWarning):
    """Warning: all training responses are equal."""


# tradenet
class TooFewNodes(TradeflagError):
    pass


class NoTriples(TradeflagError):
    pass


class TooFewTailPoints(TradeflagError):
    pass


class NoEdges(TradeflagError):
    pass


class SampleTooLarge(TradeflagError):
    pass


class EmptySamples(TradeflagError):
    pass


class EmptySample(TradeflagError):
    pass


# synth / cli
class ConfigInvalid(TradeflagError):
    pass


class MissingArtifact(TradeflagError):
    pass
