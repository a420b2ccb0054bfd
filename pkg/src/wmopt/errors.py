"""Exception hierarchy. The CLI maps these onto its exit codes."""


class WmoptError(Exception):
    pass


class ValidationError(WmoptError, ValueError):
    """Input violates a type invariant; ``path`` locates the offending field."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DimensionError(ValidationError):
    pass


class DegenerateProblemError(WmoptError):
    """The conditional output vanishes identically at the order considered."""


class PostselectionError(WmoptError):
    """Postselection probability is numerically zero."""
