"""Exception types shared across the package."""


class TableError(ValueError):
    """Base class for table parsing and conversion failures."""


class NoTableFound(TableError):
    pass


class UnbalancedMarkup(TableError):
    pass


class SpanOverflow(TableError):
    pass


class EmptyGrid(TableError):
    pass


class TruthUnparseable(TableError):
    pass


class HasSpans(TableError):
    pass


class NoHeader(TableError):
    pass


class MissingField(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid backend or run configuration (detected before any call)."""


class EmptySample(ValueError):
    pass


class BackendError(RuntimeError):
    """Base class for model backend failures."""


class Timeout(BackendError):
    pass


class HttpStatus(BackendError):
    def __init__(self, code: int, body: str = ""):
        super().__init__(f"HTTP status {code}")
        self.code = code
        self.body = body


class ReplayMiss(BackendError):
    pass


class ExhaustedRetries(BackendError):
    pass


class JoinMismatch(UserWarning):
    """Emitted when two record files do not cover the same task ids."""

    def __init__(self, orphans: list[str]):
        shown = ", ".join(orphans[:20])
        more = "" if len(orphans) <= 20 else f" (+{len(orphans) - 20} more)"
        super().__init__(f"{len(orphans)} unmatched task id(s): {shown}{more}")
        self.orphans = orphans
