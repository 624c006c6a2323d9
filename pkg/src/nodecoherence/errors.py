"""Exception hierarchy.

``UserError`` subclasses describe bad input or configuration (CLI exit code 2);
``NumericalError`` covers solver failures (exit code 1).
"""


class CoherenceError(Exception):
    """Base class for all package errors."""


class UserError(CoherenceError):
    pass


class ParseError(UserError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NodeReferenceError(UserError):
    """A file references a node id that is unknown, or omits a required one."""


class ValidationError(UserError):
    pass


class CapabilityError(UserError):
    """The graph lacks the data (attributes, labels) a relation needs."""


class ParameterError(UserError, ValueError):
    pass


class ConstraintError(UserError, ValueError):
    pass


class RelationKeyError(UserError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DegenerateRelationError(UserError):
    """Every query node was skipped for a relation."""


class UndefinedCorrelationError(UserError):
    pass


class InsufficientDataError(UserError):
    pass


class NumericalError(CoherenceError):
    pass
