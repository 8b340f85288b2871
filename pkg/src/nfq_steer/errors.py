"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it as the
first token of its one-line failure message so scripts can branch on it.
"""


class NfqError(Exception):
    category = "error"


class ConfigurationError(NfqError, ValueError):
    category = "config"


class InputError(NfqError, ValueError):
    category = "input"


class ParseError(NfqError, ValueError):
    """Malformed file content. ``line`` is 1-based when known."""

    category = "parse"

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ReplayLookupError(NfqError, LookupError):
    category = "lookup"


class TrainingDivergedError(NfqError, FloatingPointError):
    category = "diverged"

    def __init__(self, message, episode=None):
        self.episode = episode
        super().__init__(message)
