"""Exception hierarchy.

``DataError`` subclasses are problems with user-supplied input (the CLI maps
them to exit code 2); everything else deriving from ``FgrtError`` signals a
broken internal contract.
"""


class FgrtError(Exception):
    pass


class ConfigError(FgrtError, ValueError):
    pass


class MalformedRuleError(FgrtError, ValueError):
    pass


class EncodingOrderError(FgrtError, ValueError):
    pass


class DegenerateEncodingError(FgrtError, ValueError):
    pass


class DataError(FgrtError):
    pass


class DegenerateFeatureError(DataError, ValueError):
    pass


class EmptyDataError(DataError, ValueError):
    pass


class ParseError(DataError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ArityMismatchError(DataError, ValueError):
    pass


class ModelFormatError(DataError, ValueError):
    pass
