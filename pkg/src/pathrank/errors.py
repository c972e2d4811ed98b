"""Exception hierarchy; ``category`` is the machine-parsable tag the CLI prints."""


class PathRankError(Exception):
    category = "error"


class ParseError(PathRankError, ValueError):
    category = "parse.error"


class ValidationError(PathRankError, ValueError):
    category = "validation.error"


class NoPathError(PathRankError):
    category = "routing.no_path"


class DivergenceError(PathRankError, FloatingPointError):
    category = "train.divergence"


class ConfigError(PathRankError, ValueError):
    category = "config.error"


class InputMissingError(PathRankError, FileNotFoundError):
    category = "io.missing"


class ReplayMismatchError(PathRankError):
    category = "replay.mismatch"
