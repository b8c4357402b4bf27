"""Exception taxonomy shared by all modules."""


class SolvGrowthError(Exception):
    """Base class for every error raised by this package."""


class ContextError(SolvGrowthError):
    """Operands belong to different field contexts or dimensions."""


class DivisionError(SolvGrowthError):
    """Inversion of the zero field element."""


class SingularError(SolvGrowthError):
    """Matrix inversion applied to a singular matrix."""


class CapacityError(SolvGrowthError):
    """An enumeration exceeded its configured cap.

    ``partial_size`` carries how far the enumeration got before bailing.
    """

    def __init__(self, message: str, partial_size: int):
        super().__init__(f"{message} (partial size {partial_size})")
        self.partial_size = partial_size


class ClosureError(SolvGrowthError):
    """A set expected to be a subgroup is not closed."""


class NormalityError(SolvGrowthError):
    """A subgroup expected to be normal is not."""


class CharacteristicError(SolvGrowthError):
    """Operation requires p > r (or a similar characteristic bound)."""


class DomainError(SolvGrowthError):
    """Input outside the operation's domain (non-unipotent, non-solvable, ...)."""


class MembershipError(SolvGrowthError):
    """Element lies outside the group the operation expects it in."""


class CentralityError(SolvGrowthError):
    """Commutator-subgroup precondition (central and nontrivial) failed."""


class HypothesisError(SolvGrowthError):
    """A descent-stage hypothesis could not be verified on this instance."""


class IndexBoundError(SolvGrowthError):
    """Subgroup index exceeds the configured transfer bound."""


class SearchCapError(SolvGrowthError):
    """A bounded search (pivot frontier, splitting search) hit its cap."""
