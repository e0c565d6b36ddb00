"""Exception types shared across the workbench."""


class OsplabError(Exception):
    """Base class for all workbench errors."""


class InvalidInterval(OsplabError, ValueError):
    """lo > hi or an otherwise empty policy interval."""


class InvalidInput(OsplabError, ValueError):
    """Malformed argument (empty house set, bad agent ids, ...)."""


class UnknownOutcome(OsplabError, KeyError):
    """An outcome outside a preference's universe."""


class IncompleteBehavior(OsplabError, KeyError):
    """A behavior missing a choice at a reached node."""


class MissingLabels(OsplabError, ValueError):
    """An operation that needs gradual-revelation labels got an unlabeled tree."""


class LabelInconsistency(OsplabError, ValueError):
    """Truthful play reached a leaf whose label excludes the profile."""


class ParseError(OsplabError, ValueError):
    """Malformed serialized mechanism/domain/SCF."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)


class PartialScf(OsplabError, KeyError):
    """SCF table not total on the queried rectangle."""


class SearchSpaceExceeded(OsplabError, ValueError):
    """An enumeration guard tripped; raise the limit explicitly to proceed."""


class NotOspInput(OsplabError, ValueError):
    """canonicalize() was handed a strategy profile that is not OSP."""


class InvalidSpec(OsplabError, ValueError):
    """A mechanism-family spec violates its structural invariants."""


class InvalidParams(OsplabError, ValueError):
    """Safeguard parameters with an empty center intersection or bad bounds."""


class AmbiguousMedian(OsplabError, ValueError):
    """Even number of voters; the median tie rule is deliberately unimplemented."""


class PolicyViolation(OsplabError, ValueError):
    """A barter policy callback broke a step constraint."""

    def __init__(self, step, message):
        self.step = step
        super().__init__(f"[{step}] {message}")
